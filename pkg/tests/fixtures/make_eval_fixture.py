"""Regenerate reference.tum / estimate.tum for the evaluation fixture.

Reference: camera orbiting the pallet at 100 Hz, camera-in-world.
Estimate: object-in-camera at ~0.19 s, with 4 cm noise, dropouts and
occasional 180-degree yaw confusions.
"""
import math
from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

HERE = Path(__file__).parent


def camera_in_world(t):
    a = 0.25 * t
    eye = np.array([3.5 * math.cos(a), 3.5 * math.sin(a), 1.2])
    f = -eye / np.linalg.norm(eye)
    x = np.cross(f, [0, 0, 1.0])
    x /= np.linalg.norm(x)
    y = np.cross(f, x)
    return Rotation.from_matrix(np.column_stack([x, y, f])), eye


def write(path, rows):
    path.write_text("".join(" ".join(repr(float(v)) for v in r) + "\n" for r in rows))


def main():
    rng = np.random.default_rng(20240601)
    ref = []
    for i in range(2001):
        t = i / 100
        R, p = camera_in_world(t)
        ref.append([t, *p, *R.as_quat()])
    est = []
    t = 0.103
    while t < 19.9:
        if rng.random() > 0.03:
            R, p = camera_in_world(t)
            Ri = R.inv()
            ti = -Ri.apply(p) + rng.normal(0, 0.04, 3)
            Ri = Rotation.from_rotvec(rng.normal(0, 0.03, 3)) * Ri
            if rng.random() < 0.2:
                Ri = Ri * Rotation.from_euler("z", 180, degrees=True)
            est.append([round(t + rng.normal(0, 0.002), 4), *ti, *Ri.as_quat()])
        t += rng.uniform(0.17, 0.21) if rng.random() > 0.05 else rng.uniform(0.4, 1.2)
    write(HERE / "eval_reference.tum", ref)
    write(HERE / "eval_estimate.tum", est)


if __name__ == "__main__":
    main()
