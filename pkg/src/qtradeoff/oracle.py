"""Brute-force search for ``max Tr(F_Q^{-1} F_C)`` over projective measurements.

Independent of the construction in ``measurement``: it only uses the state,
its derivatives and the classical Fisher information, and climbs over the
full unitary group of the model space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .information import P_CUTOFF, bundle_at, cfim, gamma_of
from .numerics import expm_antihermitian, haar_unitary

MAX_DIM = 8


@dataclass(frozen=True)
class SearchConfig:
    restarts: int = 8
    iterations: int = 400
    seed: int = 0
    tol: float = 1e-13


@dataclass(frozen=True)
class BruteForceResult:
    gamma: float
    basis: np.ndarray
    restart_values: tuple
    best_restart: int


def _objective_and_direction(u, psi, dpsi, kinv, cutoff=P_CUTOFF):
    """Value of ``Tr(K F_C)`` for basis bras ``u`` and its ascent direction.

    Rows of ``u`` are the bras ``<m|``; the direction ``X^H - X`` is the
    Riemannian gradient for left multiplication by ``exp(t Omega)``.
    """
    c = u @ psi
    e = u @ dpsi.T  # (d, n)
    p = np.abs(c) ** 2
    a = 2.0 * (e.conj() * c[:, None]).real  # dp, (d, n)
    keep = p > cutoff
    ka = a @ kinv
    t = np.zeros_like(p)
    t[keep] = np.sum(ka[keep] * a[keep], axis=1) / p[keep]
    value = float(t.sum())
    b = np.zeros_like(a)
    b[keep] = 2.0 * ka[keep] / p[keep, None]
    beta = np.zeros_like(p)
    beta[keep] = -t[keep] / p[keep]
    gamma = beta * c.conj() + np.sum(b * e.conj(), axis=1)
    eta = b * c.conj()[:, None]  # (d, n)
    x = np.outer(c, gamma) + e @ eta.T
    return value, x.conj().T - x


def gradient(u, psi, dpsi, kinv):
    return _objective_and_direction(u, psi, dpsi, kinv)[1]


def _climb(u, psi, dpsi, kinv, cfg):
    g, omega = _objective_and_direction(u, psi, dpsi, kinv)
    step = 0.1
    for _ in range(cfg.iterations):
        gn2 = float(np.sum(np.abs(omega) ** 2))
        if gn2 < cfg.tol**2:
            break
        t = step
        while True:
            u_new = expm_antihermitian(t * omega) @ u
            g_new, om_new = _objective_and_direction(u_new, psi, dpsi, kinv)
            if g_new >= g + 1e-4 * t * gn2 or t < 1e-14:
                break
            t *= 0.5
        if g_new < g:
            break
        improved = g_new - g
        u, g, omega = u_new, g_new, om_new
        step = min(4 * t, 10.0)
        if improved < 1e-15:
            break
    return u, g


def brute_force_gamma(model, x, config: SearchConfig = SearchConfig(), max_dim=MAX_DIM, force=False):
    """Best ``Tr(F_Q^{-1} F_C)`` found by ascent from Haar-random bases.

    A lower estimate of the true maximum; by construction it cannot exceed
    the bound from ``information.tradeoff_bound``.
    """
    if model.d > max_dim and not force:
        raise InvalidArgumentError(f"brute-force search limited to d <= {max_dim} (model has d={model.d})")
    psi, dpsi, bundle = bundle_at(model, x)
    kinv = np.linalg.inv(bundle.qfim)
    kinv = 0.5 * (kinv + kinv.T)
    values = []
    best = None
    for r, ss in enumerate(np.random.SeedSequence(config.seed).spawn(config.restarts)):
        rng = np.random.default_rng(ss)
        u, g = _climb(haar_unitary(model.d, rng), psi, dpsi, kinv, config)
        values.append(g)
        if best is None or g > best[1] + 1e-12:
            best = (r, g, u)
    r, _, u = best
    basis = u.conj()
    g = gamma_of(bundle.qfim, cfim(basis, psi, dpsi))
    return BruteForceResult(gamma=g, basis=basis, restart_values=tuple(values), best_restart=r)
