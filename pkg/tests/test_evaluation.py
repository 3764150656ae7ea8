import json
import math
import re
from pathlib import Path

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

import eval_oracle
from palletpose.errors import (DegenerateConfiguration, NonMonotonicTimestamps, ParseError,
                               TooFewSamples)
from palletpose.evaluation import (EvalConfig, TrajectorySample, align_rigid, compute_robustness,
                                   evaluate, invert_stream, load_trajectory, lowpass_filter,
                                   plot_horizontal, save_trajectory, synchronize)
from palletpose.evaluation.metrics import position_errors
from palletpose.geometry import Pose6D, compose, invert_pose, yaw_flip

from conftest import random_pose

FIXTURES = Path(__file__).parent / "fixtures"
PLAIN = EvalConfig(alignment="none", symmetry_compensation=False, invert_estimate=False)


def stream(times, positions=None, rotations=None, name=None):
    out = []
    for k, t in enumerate(times):
        p = np.zeros(3) if positions is None else positions[k]
        q = [0, 0, 0, 1] if rotations is None else rotations[k]
        out.append(TrajectorySample(float(t), Pose6D(q, p), name))
    return out


def orbit(times, radius=3.5):
    return stream(times, [[radius * math.cos(0.3 * t), radius * math.sin(0.3 * t), 1.0] for t in times],
                  Rotation.from_euler("z", [0.3 * t for t in times]).as_quat())


# loading

def test_tum_line(tmp_path):
    f = tmp_path / "a.tum"
    f.write_text("0.0 1.0 2.0 3.0 0 0 0 1\n")
    (s,) = load_trajectory(f)
    assert s.timestamp == 0.0
    np.testing.assert_array_equal(s.position, [1, 2, 3])
    np.testing.assert_array_equal(s.pose.rotation, [0, 0, 0, 1])


def test_empty_file(tmp_path):
    f = tmp_path / "e.tum"
    f.write_text("")
    assert load_trajectory(f) == []


def test_shuffled_timestamps(tmp_path):
    f = tmp_path / "s.tum"
    f.write_text("1.0 0 0 0 0 0 0 1\n0.5 0 0 0 0 0 0 1\n")
    with pytest.raises(NonMonotonicTimestamps):
        load_trajectory(f)


def test_malformed_line_reports_number(tmp_path):
    f = tmp_path / "m.tum"
    f.write_text("# header\n0.0 0 0 0 0 0 0 1\n0.1 0 0 zero 0 0 0 1\n")
    with pytest.raises(ParseError) as exc:
        load_trajectory(f)
    assert exc.value.line == 3
    assert ":3:" in str(exc.value)


@pytest.mark.parametrize("suffix", [".tum", ".csv"])
def test_save_load_round_trip(tmp_path, rng, suffix):
    samples = [TrajectorySample(0.19 * i, random_pose(rng)) for i in range(20)]
    f = tmp_path / f"t{suffix}"
    save_trajectory(f, samples)
    back = load_trajectory(f)
    for a, b in zip(samples, back):
        assert a.timestamp == b.timestamp
        np.testing.assert_array_equal(a.pose.translation, b.pose.translation)
        np.testing.assert_allclose(a.pose.rotation, b.pose.rotation, atol=1e-15)
    if suffix == ".csv":
        assert f.read_text().splitlines()[0] == "timestamp,tx,ty,tz,qx,qy,qz,qw"


def test_csv_bad_header(tmp_path):
    f = tmp_path / "x.csv"
    f.write_text("t,x,y,z,a,b,c,d\n")
    with pytest.raises(ParseError):
        load_trajectory(f)


# inversion

def test_invert_translation():
    (s,) = invert_stream(stream([0.0], [[0, 0, 3.5]]))
    np.testing.assert_allclose(s.position, [0, 0, -3.5])


def test_invert_identity_and_twice(rng):
    (s,) = invert_stream(stream([0.0]))
    assert np.allclose(s.pose.matrix, np.eye(3)) and np.allclose(s.position, 0)
    samples = [TrajectorySample(i, random_pose(rng, "camera", "object")) for i in range(50)]
    back = invert_stream(invert_stream(samples))
    for a, b in zip(samples, back):
        np.testing.assert_allclose(a.pose.homogeneous(), b.pose.homogeneous(), atol=1e-9)
        assert (b.pose.parent, b.pose.child) == ("camera", "object")
    assert invert_stream(samples)[0].pose.parent == "object"


# synchronisation

def test_sync_dense_reference_sparse_estimate():
    ref = stream([i / 100 for i in range(3000)])
    est = stream([k / 0.85 + 0.003 for k in range(25)])
    pairs = synchronize(ref, est, 0.01)
    assert len(pairs) == 25
    assert all(abs(r.timestamp - e.timestamp) <= 0.005 + 1e-12 for r, e in pairs)


def test_sync_drops_far_estimate():
    ref = stream([0.0, 1.0])
    est = stream([0.5])
    assert synchronize(ref, est, 0.01) == []


def test_sync_identical_and_order_independent(rng):
    ts = np.cumsum(rng.uniform(0.05, 0.3, 40))
    ref, est = stream(ts), stream(ts)
    pairs = synchronize(ref, est, 0.02)
    assert len(pairs) == 40 and all(r.timestamp == e.timestamp for r, e in pairs)
    est2 = stream(np.cumsum(rng.uniform(0.001, 0.02, 200)))
    a = synchronize(ref, est2, 0.02)
    perm = list(est2)
    rng.shuffle(perm)
    b = synchronize(ref, sorted(perm, key=lambda s: s.timestamp), 0.02)
    assert [(r.timestamp, e.timestamp) for r, e in a] == [(r.timestamp, e.timestamp) for r, e in b]
    assert len({id(r) for r, _ in a}) == len(a)


# filtering

def test_filter_identity_and_constant(rng):
    samples = [TrajectorySample(0.1 * i, random_pose(rng)) for i in range(30)]
    for a, b in zip(samples, lowpass_filter(samples, 1.0)):
        np.testing.assert_array_equal(a.position, b.position)
        np.testing.assert_allclose(a.pose.rotation, b.pose.rotation, rtol=0, atol=1e-15)
    const = stream([0.1 * i for i in range(30)], [[1.5, -2.0, 0.25]] * 30)
    for s in lowpass_filter(const, 0.3):
        np.testing.assert_allclose(s.position, [1.5, -2.0, 0.25], rtol=0, atol=1e-15)


def test_filter_step_response():
    steps = stream([0.1 * i for i in range(40)], [[0, 0, 0]] + [[1, 1, 1]] * 39)
    out = lowpass_filter(steps, 0.3)
    for k, s in enumerate(out):
        np.testing.assert_allclose(s.position, [1 - 0.7 ** k] * 3, rtol=0, atol=1e-12)


def test_filter_gap_reset():
    s = stream([0.0, 0.1, 2.0], [[0, 0, 0], [1, 0, 0], [5, 0, 0]])
    out = lowpass_filter(s, 0.5, gap_reset=1.0)
    assert out[1].position[0] == 0.5
    assert out[2].position[0] == 5.0


# alignment

def _pairs(ref_positions, est_positions):
    ts = range(len(ref_positions))
    return list(zip(stream(ts, ref_positions), stream(ts, est_positions)))


def test_align_identity(rng):
    P = rng.uniform(-3, 3, (30, 3))
    T = align_rigid(_pairs(P, P))
    assert Rotation.from_quat(T.rotation).magnitude() < 1e-9
    assert np.linalg.norm(T.translation) < 1e-9


def test_align_known_transform(rng):
    P = rng.uniform(-3, 3, (30, 3))
    T = random_pose(rng)
    T_hat = align_rigid(_pairs(P, T.transform_points(P)))
    np.testing.assert_allclose(T_hat.homogeneous(), invert_pose(T).homogeneous(), atol=1e-9)
    # scipy's Wahba solver as a second opinion on the rotation
    R_ref, _ = Rotation.align_vectors(P - P.mean(0), T.transform_points(P) - T.transform_points(P).mean(0))
    assert (R_ref.inv() * Rotation.from_quat(T_hat.rotation)).magnitude() < 1e-9


def test_align_degenerate():
    with pytest.raises(DegenerateConfiguration):
        align_rigid(_pairs(np.eye(3)[:2], np.eye(3)[:2]))
    line = np.outer(np.arange(5.0), [1, 2, 3])
    with pytest.raises(DegenerateConfiguration):
        align_rigid(_pairs(line, line))


def test_align_optimality(rng):
    P = rng.uniform(-3, 3, (40, 3))
    Q = random_pose(rng).transform_points(P) + rng.normal(0, 0.1, P.shape)
    pairs = _pairs(Q, P)
    T = align_rigid(pairs)
    best = np.sum(position_errors(pairs, T) ** 2)
    for _ in range(100):
        d = Pose6D(Rotation.from_rotvec(rng.uniform(-1, 1, 3) * math.radians(10) / math.sqrt(3)).as_quat(),
                   rng.uniform(-0.5, 0.5, 3))
        assert best <= np.sum(position_errors(pairs, compose(d, T)) ** 2)


# robustness

def test_robustness_hand_timeline():
    ts = [i / 5 for i in range(26) if not 10 < i < 15]
    assert compute_robustness(ts, 0.3) == 80.0


def test_robustness_extremes():
    assert compute_robustness([i / 5 for i in range(26)], 0.3) == pytest.approx(100.0, abs=1e-12)
    assert compute_robustness([0.4 * i for i in range(20)], 0.3) == 0.0
    with pytest.raises(TooFewSamples):
        compute_robustness([1.0], 0.3)


def test_robustness_bounds_and_monotone(rng):
    for _ in range(50):
        ts = np.cumsum(rng.uniform(0.05, 0.6, 30))
        r = compute_robustness(ts, 0.3)
        assert 0 <= r <= 100
        gaps = np.diff(ts)
        k = int(np.argmax(gaps <= 0.3)) if np.any(gaps <= 0.3) else None
        if k is not None:
            ts2 = np.sort(np.append(ts, (ts[k] + ts[k + 1]) / 2))
            assert compute_robustness(ts2, 0.3) >= r - 1e-12


# full pipeline

def test_constant_offset():
    ts = [0.2 * i for i in range(50)]
    ref = orbit(ts)
    est = [TrajectorySample(s.timestamp, Pose6D(s.pose.rotation, s.position + [0.1, 0, 0])) for s in ref]
    rep = evaluate(ref, est, PLAIN)
    assert rep.mean_position_error_unfiltered == pytest.approx(0.1, abs=1e-12)
    assert rep.matched_pair_count == 50


def test_identical_streams():
    ts = [0.1 * i for i in range(60)]
    ref = orbit(ts)
    rep = evaluate(ref, ref, EvalConfig(invert_estimate=False))
    assert rep.mean_position_error_unfiltered < 1e-9
    assert rep.robustness_percent == pytest.approx(100.0, abs=1e-12)
    assert 0 <= rep.robustness_percent <= 100
    assert rep.matched_pair_count <= len(ref)
    json.loads(rep.to_json())


def test_symmetry_invariance_and_filter_safety():
    ref = load_trajectory(FIXTURES / "eval_reference.tum")
    est = load_trajectory(FIXTURES / "eval_estimate.tum")
    flipped = [TrajectorySample(s.timestamp, yaw_flip(s.pose), s.stream) for s in est]
    a, b = evaluate(ref, est), evaluate(ref, flipped)
    assert a.mean_position_error_unfiltered == pytest.approx(b.mean_position_error_unfiltered, abs=1e-9)
    assert a.mean_position_error_filtered == pytest.approx(b.mean_position_error_filtered, abs=1e-9)
    assert a.robustness_percent == b.robustness_percent
    c = evaluate(ref, est, EvalConfig(filter_alpha=1.0))
    assert c.mean_position_error_unfiltered == c.mean_position_error_filtered


def test_bundled_fixture_matches_oracle():
    expected = json.loads((FIXTURES / "eval_expected.json").read_text())
    ref_path, est_path = FIXTURES / "eval_reference.tum", FIXTURES / "eval_estimate.tum"
    rep = evaluate(load_trajectory(ref_path), load_trajectory(est_path))
    assert rep.matched_pair_count == expected["pairs"]
    assert rep.mean_position_error_unfiltered == pytest.approx(expected["unfiltered"], abs=1e-9)
    assert rep.mean_position_error_filtered == pytest.approx(expected["filtered"], abs=1e-9)
    assert rep.robustness_percent == pytest.approx(expected["robustness"], abs=1e-9)


def test_oracle_reproduces_frozen_values():
    expected = json.loads((FIXTURES / "eval_expected.json").read_text())
    got = eval_oracle.run(eval_oracle.read_tum(FIXTURES / "eval_reference.tum"),
                          eval_oracle.read_tum(FIXTURES / "eval_estimate.tum"))
    for key in expected:
        assert got[key] == pytest.approx(expected[key], abs=1e-9)


def test_config_validation():
    with pytest.raises(ValueError):
        EvalConfig(sync_max_delta=0)
    with pytest.raises(ValueError):
        EvalConfig(filter_alpha=0)
    with pytest.raises(ValueError):
        EvalConfig(alignment="similarity")
    assert EvalConfig.from_dict({"filter_alpha": 0.5, "unknown": 1}).filter_alpha == 0.5


# plotting

CIRCLE = re.compile(r'<circle cx="([^"]+)" cy="([^"]+)"')


def _group(svg, gid):
    m = re.search(rf'<g id="{gid}"[^>]*>(.*?)</g>', svg, re.S)
    return [(float(x), float(y)) for x, y in CIRCLE.findall(m.group(1))]


def test_plot_circle_radius(tmp_path):
    ts = [0.1 * i for i in range(120)]
    ref = orbit(ts, radius=3.5)
    out = plot_horizontal(ref, ref[::5], tmp_path / "p.svg")
    svg = out.read_text()
    pts = _group(svg, "reference")
    assert len(pts) == 120
    np.testing.assert_allclose(np.hypot(*np.array(pts).T), 3.5, atol=1e-9)
    assert len(_group(svg, "estimate")) == 24
    assert "w_x [m]" in svg and "w_y [m]" in svg and "pallet" in svg


def test_plot_empty_estimate_and_deterministic(tmp_path):
    ref = orbit([0.1 * i for i in range(30)])
    a = plot_horizontal(ref, [], tmp_path / "a.svg").read_bytes()
    b = plot_horizontal(ref, [], tmp_path / "b.svg").read_bytes()
    assert a == b
    assert _group(a.decode(), "estimate") == []
    assert len(_group(a.decode(), "reference")) == 30


def test_plot_unwritable(tmp_path):
    with pytest.raises(OSError):
        plot_horizontal(orbit([0.0, 1.0]), [], tmp_path / "missing" / "p.svg")
