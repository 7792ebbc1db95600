import numpy as np
import pytest

from viewwarp import CameraIntrinsics


@pytest.fixture
def intrinsics():
    # image center of a 608x176 frame, per the preprocessing resolution
    return CameraIntrinsics(f=100.0, x0=304.0, y0=88.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
