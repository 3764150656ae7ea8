import math

import numpy as np
import pytest

from palletpose.geometry import CameraIntrinsics, CuboidModel, Pose6D


def random_pose(rng, parent=None, child=None, scale=5.0):
    q = rng.normal(size=4)
    t = rng.uniform(-scale, scale, size=3)
    return Pose6D(q, t, parent, child)


def ndds3_object_pose(rng, distance=None, k=None, cuboid=None):
    """Object-in-camera pose with the camera on an NDDS3-style orbit."""
    from palletpose.geometry import compose, invert_pose, look_at, Pose6D

    a = math.radians(rng.uniform(-90, 90))
    e = math.radians(rng.uniform(1, 25))
    d = rng.uniform(2.5, 5.5) if distance is None else distance
    eye = d * np.array([math.sin(a) * math.cos(e), -math.cos(a) * math.cos(e), math.sin(e)])
    cam = Pose6D.from_matrix(look_at(eye, np.zeros(3)), eye, "object", "camera")
    return compose(invert_pose(cam), Pose6D.identity("object", "object"))


@pytest.fixture
def intrinsics():
    return CameraIntrinsics(600.0, 600.0, 320.0, 240.0, 640, 480)


@pytest.fixture
def pallet():
    return CuboidModel.pallet()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, config):
    if config.acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(config.acceptance_lines, key=lambda s: int(s.split()[1].rstrip("."))):
            terminalreporter.write_line(line)
