import numpy as np
import pytest
from scipy import linalg

from scarot.manifold import EigenDecomp, random_rotation, rotation_2d


def axis_rotation(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return linalg.expm(angle * K)


def spd(U, eigs):
    X = (U * np.asarray(eigs, dtype=float)) @ U.T
    return 0.5 * (X + X.T)


def random_point(p, rng, scale=1.0):
    return EigenDecomp(random_rotation(p, rng), scale * rng.standard_normal(p))


def random_top_spd(p, rng, spread=1.0):
    return spd(random_rotation(p, rng), np.exp(spread * rng.standard_normal(p)))


def planar_spd(theta, l1, l2):
    R = rotation_2d(theta)
    return spd(R, [np.exp(l1), np.exp(l2)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
