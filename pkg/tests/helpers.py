"""Independent reference computations shared by the tests."""

import numpy as np

from qtradeoff.model import random_model
from qtradeoff.numerics import haar_unitary


def sld_operator(psi, l):
    """Pure-state SLD as a matrix: ``|l><psi| + |psi><l|``."""
    return np.outer(l, psi.conj()) + np.outer(psi, l.conj())


def raw_tensor(psi, dpsi):
    """``4(<d_j psi|d_k psi> - <d_j psi|psi><psi|d_k psi>)`` from ungauged derivatives."""
    g = dpsi.conj() @ dpsi.T
    b = dpsi.conj() @ psi
    return 4 * (g - np.outer(b, b.conj()))


def fd_probabilities(model, x, basis, h=1e-6):
    """Outcome probabilities and their central-difference derivatives."""
    def probs(y):
        return np.abs(basis.conj() @ model.state(y)) ** 2

    p = probs(x)
    dp = []
    for j in range(model.n):
        e = np.zeros(model.n)
        e[j] = h
        dp.append((probs(x + e) - probs(x - e)) / (2 * h))
    return p, np.array(dp).T


def fisher_from(p, dp, cutoff=1e-12):
    keep = p > cutoff
    return (dp[keep].T / p[keep]) @ dp[keep]


def random_case(rng, nmax=3, dmax=5, dmin=2):
    n = int(rng.integers(1, nmax + 1))
    d = int(rng.integers(max(dmin, 2), dmax + 1))
    return random_model(d, n, rng), n, d


def random_basis(d, rng):
    return haar_unitary(d, rng).T
