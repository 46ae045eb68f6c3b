import numpy as np
import pytest

from splatgen.camera import look_at_camera
from splatgen.geometry import covariance_from_scale_rotation, random_unit_quaternions


def random_scene(seed: int, n: int = 100, size: int = 64, sh_degree: int = 1):
    """Random Gaussians in a unit box seen from a random orbit position."""
    g = np.random.default_rng(seed)
    cents = g.uniform(-0.6, 0.6, size=(n, 3))
    scales = g.uniform(0.005, 0.15, size=(n, 3))
    rots = random_unit_quaternions(g, n)
    covs = covariance_from_scale_rotation(scales, rots)
    ops = g.uniform(0.05, 1.0, size=n)
    k = (sh_degree + 1) ** 2
    feats = g.normal(0.0, 0.4, size=(n, k, 3))
    az, el = g.uniform(0, 2 * np.pi), g.uniform(-0.4, 0.6)
    r = g.uniform(2.5, 3.5)
    pos = r * np.array([np.cos(el) * np.sin(az), np.sin(el), np.cos(el) * np.cos(az)])
    f = g.uniform(0.8, 1.2) * size
    cam = look_at_camera(pos, (0.0, 0.0, 0.0), f, f, size, size)
    return cents, covs, ops, feats, cam


@pytest.fixture
def scene():
    return random_scene(0)
