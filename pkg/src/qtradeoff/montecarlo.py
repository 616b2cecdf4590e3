"""Monte Carlo check that maximum likelihood reaches the Cramér-Rao bound."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularInformationError
from .information import P_CUTOFF, cfim, check_orthonormal, outcome_stats
from .model import evaluate_with_derivatives

MIN_SHOTS = 10_000


@dataclass(frozen=True)
class MonteCarloResult:
    estimates: np.ndarray
    covariance: np.ndarray
    expected_covariance: np.ndarray
    standard_errors: np.ndarray
    z_scores: np.ndarray
    cfim: np.ndarray
    empirical_information: np.ndarray
    gamma_estimate: float
    gamma_expected: float
    shots: int
    repetitions: int
    seed: int
    warnings: tuple = field(default_factory=tuple)

    @property
    def max_abs_z(self):
        return float(np.max(np.abs(self.z_scores)))

    @property
    def gamma_relative_deviation(self):
        return abs(self.gamma_estimate - self.gamma_expected) / self.gamma_expected


def _probabilities(basis, psi, dpsi):
    _, p, dp = outcome_stats(basis, psi, dpsi)
    if basis.shape[0] < basis.shape[1]:
        p = np.append(p, max(0.0, 1.0 - p.sum()))
        dp = np.vstack([dp, -dp.sum(axis=0)])
    return p, dp


def _loglik(counts, p):
    seen = counts > 0
    if np.any(p[seen] <= 0):
        return -np.inf
    return float(np.sum(counts[seen] * np.log(p[seen])))


def fit_mle(model, basis, counts, x0, max_iter=50, start=None):
    """Local maximum-likelihood estimate by Fisher scoring from ``x0``.

    ``start`` optionally supplies ``(p, dp)`` at ``x0`` to skip one model
    evaluation. Iteration stops once the step is below ``1e-8`` standard
    deviations.
    """
    shots = counts.sum()
    x = np.array(x0, dtype=float)
    if start is None:
        psi, dpsi = evaluate_with_derivatives(model, x)
        start = _probabilities(basis, psi, dpsi)
    p, dp = start
    ll = _loglik(counts, p)
    for _ in range(max_iter):
        seen = counts > 0
        score = (counts[seen] / p[seen]) @ dp[seen]
        keep = p > P_CUTOFF
        info = shots * (dp[keep].T / p[keep]) @ dp[keep]
        step = np.linalg.solve(info, score)
        t = 1.0
        while t > 1e-6:
            x_new = x + t * step
            try:
                psi_n, dpsi_n = evaluate_with_derivatives(model, x_new)
            except ValueError:
                t *= 0.5
                continue
            p_n, dp_n = _probabilities(basis, psi_n, dpsi_n)
            ll_n = _loglik(counts, p_n)
            if ll_n >= ll - 1e-9 * abs(ll):
                break
            t *= 0.5
        else:
            break
        x, p, dp, ll = x_new, p_n, dp_n, ll_n
        if np.sqrt(step @ info @ step) * t < 1e-8:
            break
    return x


def simulate_estimation(basis, model, x, shots=100_000, seed=0, repetitions=2000, qfim=None):
    """Sample ``repetitions`` experiments of ``shots`` outcomes and fit each by MLE.

    Each repetition draws from its own child of ``SeedSequence(seed)``, so the
    result does not depend on how repetitions are grouped. Returns the
    empirical covariance of the estimates next to ``F_C^{-1} / shots``.
    """
    basis = np.atleast_2d(np.asarray(basis, dtype=complex))
    check_orthonormal(basis)
    x = np.asarray(x, dtype=float)
    notes = []
    if shots < MIN_SHOTS:
        msg = f"{shots} shots is below {MIN_SHOTS}; the asymptotic regime is probably not reached"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)
    psi, dpsi = evaluate_with_derivatives(model, x)
    fc = cfim(basis, psi, dpsi)
    w = np.linalg.eigvalsh(fc)
    if w[-1] <= 0 or w[0] <= 1e-10 * w[-1]:
        raise SingularInformationError(
            f"classical Fisher information is singular (eigenvalues {w[0]:.3e} .. {w[-1]:.3e}); "
            "the parameters cannot all be estimated from this measurement"
        )
    start = _probabilities(basis, psi, dpsi)
    p = np.clip(start[0], 0.0, None)
    p[p < P_CUTOFF] = 0.0
    p = p / p.sum()

    est = np.empty((repetitions, model.n))
    for r, ss in enumerate(np.random.SeedSequence(seed).spawn(repetitions)):
        counts = np.random.default_rng(ss).multinomial(shots, p)
        est[r] = fit_mle(model, basis, counts, x, start=start)

    cov = np.atleast_2d(np.cov(est.T, ddof=1))
    expected = np.linalg.inv(fc) / shots
    diag = np.diag(expected)
    se = np.sqrt((expected**2 + np.outer(diag, diag)) / (repetitions - 1))
    z = (cov - expected) / se
    emp_info = np.linalg.inv(shots * cov)
    if qfim is None:
        from .information import geometric_tensor, sld_vectors

        qfim = geometric_tensor(sld_vectors(psi, dpsi)).qfim
    qinv = np.linalg.inv(qfim)
    return MonteCarloResult(
        estimates=est, covariance=cov, expected_covariance=expected, standard_errors=se,
        z_scores=z, cfim=fc, empirical_information=emp_info,
        gamma_estimate=float(np.trace(qinv @ emp_info)),
        gamma_expected=float(np.trace(qinv @ fc)),
        shots=int(shots), repetitions=int(repetitions), seed=int(seed), warnings=tuple(notes),
    )
