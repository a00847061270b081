"""Shared generators for seeded random test corpora."""

import numpy as np
import pytest

from qoadapt.blocklu import BlockMatrix, BlockStructure


def random_matrix(rng, n):
    return rng.uniform(-1.0, 1.0, size=(n, n))


def stable_block_matrix(rng, n=8, n_blocks=4):
    """Random block matrix with measured gamma/C ratio >= 0.2.

    A diagonal shift of s >= 1.6 |R| forces sigma_min(M[k]) >= s - |R| and
    |M| <= s + |R|, hence a ratio of at least 0.6/2.6.
    """
    r = rng.standard_normal((n, n)) / np.sqrt(n)
    norm = np.linalg.norm(r, 2)
    shift = (1.6 + 1.4 * rng.random()) * norm
    data = r + shift * np.eye(n)
    bounds = tuple(int(b) for b in np.linspace(0, n, n_blocks + 1))
    return BlockMatrix(data, BlockStructure(bounds))


def random_spd(rng, n, shift=None):
    a = rng.standard_normal((n, n))
    g = a @ a.T
    if shift is None:
        shift = 0.1 * n
    return g + shift * np.eye(n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240813)
