import numpy as np
import pytest

from l1equiv import PlantParams, ReferenceModel


def random_hurwitz_coeffs(rng, n, lo=0.5, hi=3.0):
    """Ascending ``a_m`` whose companion matrix has eigenvalues with real part in [-hi, -lo]."""
    roots = []
    while len(roots) < n:
        re = -rng.uniform(lo, hi)
        if n - len(roots) >= 2 and rng.random() < 0.5:
            im = rng.uniform(0.1, 2.0)
            roots += [re + 1j * im, re - 1j * im]
        else:
            roots.append(re)
    return np.real(np.poly(roots))[::-1][:-1].copy()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def scalar_unstable():
    """Plant x' = x + u with reference pole at -1 (theta = -2); PI critical gain 1."""
    return PlantParams([-1.0]), ReferenceModel([1.0], [[2.0]])
