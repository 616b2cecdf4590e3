"""Information matrices for pure-state models and the incompatibility bound."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, InvalidArgumentError
from .numerics import skew_spectrum, spd_inv_sqrt

P_CUTOFF = 1e-12
NULL_DERIV_TOL = 1e-6
PSD_TOL = 1e-8
LAMBDA_TOL = 1e-9


@dataclass(frozen=True)
class InformationBundle:
    """SLD vectors and the geometric tensor built from them.

    ``sld[j]`` is ``L_j|psi>``; ``tensor[j, k] = <l_j|l_k>`` so that
    ``qfim = tensor.real`` and ``berry = tensor.imag``. ``cosines[q]`` is
    ``sqrt(1 - lambdas[q]**2)`` computed without cancellation near 1.
    """

    sld: np.ndarray
    tensor: np.ndarray
    qfim: np.ndarray
    berry: np.ndarray
    lambdas: np.ndarray
    cosines: np.ndarray

    @property
    def n(self):
        return self.sld.shape[0]

    @property
    def d(self):
        return self.sld.shape[1]


@dataclass(frozen=True)
class TradeoffReport:
    gamma_bound: float
    penalties: np.ndarray
    gill_massar_constant: int
    weak_commutativity: bool
    n: int
    d: int

    @property
    def total_penalty(self):
        return float(np.sum(self.penalties))


def sld_vectors(psi, dpsi):
    """``|l_j> = 2(|d_j psi> - <psi|d_j psi>|psi>)``, one per row."""
    psi = np.asarray(psi, dtype=complex)
    dpsi = np.atleast_2d(np.asarray(dpsi, dtype=complex))
    ov = psi.conj() @ dpsi.T
    return 2.0 * (dpsi - ov[:, None] * psi[None, :])


def geometric_tensor(sld):
    """Assemble the bundle from SLD vectors.

    Raises SingularInformationError if the real part is not positive definite.
    """
    sld = np.atleast_2d(np.asarray(sld, dtype=complex))
    f = sld.conj() @ sld.T
    f = 0.5 * (f + f.conj().T)
    qfim = f.real.copy()
    berry = f.imag.copy()
    s = spd_inv_sqrt(qfim)
    lam = skew_spectrum(s @ berry @ s)
    return InformationBundle(
        sld=sld, tensor=f, qfim=qfim, berry=berry, lambdas=lam, cosines=_mode_cosines(s @ sld)
    )


def _mode_cosines(wsld):
    """``sqrt(1 - s_q^2)`` for each incompatibility magnitude, descending in ``s``.

    The whitened tensor ``I + iA`` has eigenvalues ``1 + s`` and ``1 - s`` in
    pairs, i.e. squared singular values of the whitened SLD matrix, so
    ``sqrt((1 - s)(1 + s))`` is the product of the smallest and largest
    singular values, next-smallest with next-largest, and so on. Going through
    singular values keeps full precision as ``s -> 1``. Sorting the result
    aligns it with the descending ``s``.
    """
    n = wsld.shape[0]
    sv = np.linalg.svd(wsld, compute_uv=False)
    sv = np.sort(np.concatenate([sv, np.zeros(n - sv.size)]))
    return np.sort(np.clip(sv * sv[::-1], 0.0, 1.0))


def bundle_at(model, x):
    from .model import evaluate_with_derivatives

    psi, dpsi = evaluate_with_derivatives(model, x)
    return psi, dpsi, geometric_tensor(sld_vectors(psi, dpsi))


def tradeoff_bound(bundle: InformationBundle) -> TradeoffReport:
    """Upper bound on ``max Tr(F_Q^{-1} F_C)`` over all measurements.

    Each incompatibility magnitude ``s`` costs ``(1 - sqrt(1 - s^2)) / 2``.
    """
    lam = np.asarray(bundle.lambdas, dtype=float)
    if np.any(lam > 1 + LAMBDA_TOL):
        raise ConsistencyError(
            f"incompatibility magnitude {lam.max():.12f} exceeds 1; the model is not a valid pure-state family"
        )
    pen = 0.5 * (1.0 - bundle.cosines)
    n = bundle.n
    return TradeoffReport(
        gamma_bound=float(n - pen.sum()),
        penalties=pen,
        gill_massar_constant=bundle.d - 1,
        weak_commutativity=bool(lam.max(initial=0.0) < LAMBDA_TOL),
        n=n,
        d=bundle.d,
    )


def reparametrize(bundle: InformationBundle, jac) -> InformationBundle:
    """Re-express the bundle in coordinates ``x' = J x``.

    SLD vectors transform as ``l'_j = sum_k (J^{-1})_{kj} l_k`` and the tensor
    as ``J^{-T} F J^{-1}``.
    """
    jac = np.asarray(jac, dtype=float)
    n = bundle.n
    if jac.shape != (n, n):
        raise InvalidArgumentError(f"jacobian must be {n}x{n}")
    if np.linalg.cond(jac) > 1e14:
        raise InvalidArgumentError("reparametrization matrix is singular")
    jinv = np.linalg.inv(jac)
    return geometric_tensor(jinv.T @ bundle.sld)


def whiten(bundle: InformationBundle):
    """Return the bundle in coordinates where the QFIM is the identity, plus ``F_Q^{-1/2}``."""
    s = spd_inv_sqrt(bundle.qfim)
    return geometric_tensor(s @ bundle.sld), s


def outcome_stats(basis, psi, dpsi):
    """Amplitudes ``<m|psi>``, probabilities and their derivatives for basis rows ``|m>``."""
    basis = np.atleast_2d(np.asarray(basis, dtype=complex))
    amp = basis.conj() @ psi
    damp = basis.conj() @ np.atleast_2d(dpsi).T  # (k, n)
    p = np.abs(amp) ** 2
    dp = 2.0 * (damp.conj() * amp[:, None]).real
    return amp, p, dp


def check_orthonormal(basis, tol=1e-10):
    basis = np.atleast_2d(np.asarray(basis, dtype=complex))
    gram = basis.conj() @ basis.T
    err = np.max(np.abs(gram - np.eye(basis.shape[0]))) if basis.size else 0.0
    if err > tol:
        raise InvalidArgumentError(f"measurement vectors are not orthonormal (max deviation {err:.2e})")


def cfim(basis, psi, dpsi, cutoff=P_CUTOFF):
    """Classical Fisher information of a projective measurement.

    ``basis`` rows are orthonormal kets ``|m>``. If they do not span the whole
    space, the leftover projector is treated as one extra outcome; for the
    construction used here it has zero probability and zero slope at the
    evaluation point and so carries no information.
    """
    basis = np.atleast_2d(np.asarray(basis, dtype=complex))
    psi = np.asarray(psi, dtype=complex)
    dpsi = np.atleast_2d(np.asarray(dpsi, dtype=complex))
    check_orthonormal(basis)
    _, p, dp = outcome_stats(basis, psi, dpsi)
    n = dpsi.shape[0]
    if basis.shape[0] < basis.shape[1]:
        p = np.append(p, max(0.0, 1.0 - p.sum()))
        dp = np.vstack([dp, -dp.sum(axis=0)])
    keep = p > cutoff
    if np.any(np.abs(dp[~keep]) > NULL_DERIV_TOL):
        raise ConsistencyError("zero-probability outcome has a nonzero probability slope")
    fc = np.zeros((n, n))
    if np.any(keep):
        fc = (dp[keep].T / p[keep]) @ dp[keep]
    return 0.5 * (fc + fc.T)


def fisher_gap_min_eig(qfim, fc):
    """Smallest eigenvalue of ``F_Q - F_C``; should be >= -1e-8 for any measurement."""
    return float(np.linalg.eigvalsh(np.asarray(qfim) - np.asarray(fc))[0])


def assert_cfim_dominated(qfim, fc, tol=PSD_TOL):
    m = fisher_gap_min_eig(qfim, fc)
    if m < -tol * max(1.0, np.abs(qfim).max()):
        raise ConsistencyError(f"classical information exceeds quantum information (min eig {m:.3e})")


def gamma_of(qfim, fc):
    """``Tr(F_Q^{-1} F_C)``."""
    return float(np.trace(np.linalg.solve(qfim, fc)))
