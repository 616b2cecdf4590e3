"""Optimal projective measurements for pure-state multiparameter models.

The construction has two stages. ``optimal_rotation`` searches the unitary
group of the small subspace spanned by the state and its whitened SLD vectors
for a frame in which those vectors are as close to real as possible; the real
parts are the target vectors ``|o_j>``. ``build_basis`` then turns the state
and the targets into a projective basis in which all of them have real
coordinates, with a real orthogonal matrix ``B`` selecting one of the
infinitely many valid bases.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConvergenceError, InvalidArgumentError, ValidationError
from .information import (
    P_CUTOFF,
    InformationBundle,
    assert_cfim_dominated,
    bundle_at,
    cfim,
    gamma_of,
    outcome_stats,
    tradeoff_bound,
    whiten,
)
from .numerics import (
    expm_antihermitian,
    gram_schmidt,
    haar_unitary,
    real_orthogonal_completion,
)

ZERO_ENTRY = 1e-12
DENSE_MIN = 1e-3
PAD_LIMIT = 32


@dataclass(frozen=True)
class OptimizerConfig:
    """Rotation-search settings.

    ``method="takagi"`` solves the rotation problem in closed form;
    ``"ascent"`` runs seeded Riemannian steepest ascent with restarts.
    """

    method: str = "takagi"
    restarts: int = 16
    max_iter: int = 5000
    window: int = 50
    change_tol: float = 1e-12
    grad_tol: float = 1e-13
    cert_tol: float = 1e-6
    seed: int = 0


@dataclass(frozen=True)
class RotationResult:
    """Best rotation of the working subspace.

    ``subspace`` rows are an orthonormal basis of the span of the state and
    the whitened SLD vectors, state first. ``unitary`` acts on coordinates in
    that basis and fixes the state's coordinate vector ``e_0``.
    """

    unitary: np.ndarray
    subspace: np.ndarray
    targets: np.ndarray
    residual: float
    penalty: float
    converged: bool
    best_restart: int
    restart_residuals: tuple
    iterations: int
    whitening: np.ndarray


@dataclass(frozen=True)
class MeasurementPlan:
    """Projective measurement plus the quantities derived from it.

    ``basis`` rows are the kets ``|m>``; when they do not span the full space
    the leftover projector is an implicit extra outcome with zero probability.
    """

    basis: np.ndarray
    amplitudes: np.ndarray
    probabilities: np.ndarray
    B: np.ndarray
    working_dim: int
    constrained: int
    dropped: tuple = ()
    coefficients: Optional[np.ndarray] = None
    cfim: Optional[np.ndarray] = None
    errors: Optional[np.ndarray] = None
    whitened_errors: Optional[np.ndarray] = None
    gamma_achieved: Optional[float] = None
    objective: Optional[float] = None
    meta: dict = field(default_factory=dict)

    @property
    def has_remainder(self):
        return self.basis.shape[0] < self.basis.shape[1]

    @property
    def outcomes(self):
        return self.basis.shape[0]


# -- rotation search ----------------------------------------------------------

def _imag_residual(w_mat, coords):
    return float(np.sum((w_mat @ coords).imag ** 2))


def _descend(coords, w0, cfg):
    """Minimize ``sum_j ||Im(W w_j)||^2`` over unitaries ``W`` from ``w0``.

    Writes the objective as ``const - Re tr(W G W^T) / 2`` with the complex
    symmetric ``G = sum_j w_j w_j^T``; the Riemannian ascent direction of the
    trace term is ``conj(C) - C`` with ``C = W G W^T``.
    """
    g = coords @ coords.T
    w = w0
    f = _imag_residual(w, coords)
    history = [f]
    step = 0.5
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        c = w @ g @ w.T
        omega = c.conj() - c
        gnorm2 = float(np.sum(np.abs(omega) ** 2))
        if gnorm2 < cfg.grad_tol**2:
            converged = True
            break
        t = step
        while True:
            w_new = expm_antihermitian(t * omega) @ w
            f_new = _imag_residual(w_new, coords)
            if f_new <= f - 1e-4 * t * 0.5 * gnorm2 or t < 1e-16:
                break
            t *= 0.5
        w, f = w_new, f_new
        step = min(4.0 * t, 1e3)
        history.append(f)
        if len(history) > cfg.window and history[-cfg.window - 1] - f < cfg.change_tol:
            converged = True
            break
    return w, f, converged, it


def takagi_rotation(coords, tol=1e-12):
    """Unitary ``W`` maximizing ``Re tr(W G W^T)`` for ``G = coords @ coords.T``.

    The Takagi vectors of the complex symmetric ``G`` (``G conj(v) = s v``)
    come from the eigenvectors ``(x; y)`` of the real symmetric matrix
    ``[[Re G, Im G], [Im G, -Re G]]`` with positive eigenvalue ``s`` via
    ``v = x + i y``. With those vectors as rows of ``W^H``,
    ``W G W^T = diag(s)`` and the trace reaches its maximum ``sum(s)``.
    """
    g = coords @ coords.T
    k = g.shape[0]
    a, b = g.real, g.imag
    m = np.block([[a, b], [b, -a]])
    w, vec = np.linalg.eigh(0.5 * (m + m.T))
    order = np.argsort(w)[::-1]
    scale = max(abs(w).max(), 1.0)
    pos = [i for i in order[:k] if w[i] > tol * scale]
    v = (vec[:k, pos] + 1j * vec[k:, pos]).T  # rows are Takagi vectors
    if len(pos) < k:
        q, _ = np.linalg.qr(np.vstack([v, np.eye(k, dtype=complex)]).T)
        v = np.vstack([v, q[:, len(pos):k].T])
        v, _ = gram_schmidt(v)
    return v.conj()


def optimal_rotation(bundle: InformationBundle, psi, config: Optional[OptimizerConfig] = None) -> RotationResult:
    """Rotate the whitened SLD vectors as close to the real subspace as possible.

    The state's image is pinned to the first coordinate axis, so the search
    runs over the unitary group of the state's orthocomplement within the
    working subspace. Raises ConvergenceError if no restart converges or the
    best residual misses the incompatibility penalty by more than
    ``config.cert_tol``.
    """
    cfg = config or OptimizerConfig()
    psi = np.asarray(psi, dtype=complex)
    wb, s = whiten(bundle)
    ltil = wb.sld
    sub, kept = gram_schmidt(np.vstack([psi, ltil]))
    if not kept or kept[0] != 0:
        raise InvalidArgumentError("state vector is zero")
    comp = sub[1:]
    coords = comp.conj() @ ltil.T  # (k, n)
    k = comp.shape[0]
    leak = float(np.sum(np.abs(ltil - (comp.T @ coords).T) ** 2))
    penalty = tradeoff_bound(wb).total_penalty

    best = None
    results = []
    total_it = 0
    if cfg.method == "takagi":
        w = takagi_rotation(coords)
        f = _imag_residual(w, coords)
        results.append(f)
        best = (0, f, w, True)
    elif cfg.method == "ascent":
        seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
        for r, ss in enumerate(seeds):
            rng = np.random.default_rng(ss)
            w0 = haar_unitary(k, rng)
            w, f, conv, its = _descend(coords, w0, cfg)
            total_it += its
            results.append(f)
            # ties within 1e-12 keep the lower restart index
            if best is None or f < best[1] - 1e-12:
                best = (r, f, w, conv)
    else:
        raise InvalidArgumentError(f"unknown rotation method {cfg.method!r}")

    r_best, f_best, w_best, conv = best
    rotated = w_best @ coords
    targets = (comp.T @ (w_best.conj().T @ rotated.real)).T
    unitary = np.eye(k + 1, dtype=complex)
    unitary[1:, 1:] = w_best
    result = RotationResult(
        unitary=unitary, subspace=sub, targets=targets, residual=f_best + leak,
        penalty=penalty, converged=conv, best_restart=r_best,
        restart_residuals=tuple(results), iterations=total_it, whitening=s,
    )
    if not conv and f_best - penalty > cfg.cert_tol:
        raise ConvergenceError(
            f"rotation search did not converge (best residual {f_best:.3e}, target {penalty:.3e})",
            best_residual=f_best, best=result,
        )
    if f_best - penalty > cfg.cert_tol:
        raise ConvergenceError(
            f"best residual {f_best:.9f} misses the bound penalty {penalty:.9f}",
            best_residual=f_best, best=result,
        )
    return result


# -- basis construction -------------------------------------------------------

def b_violations(B, n):
    """Rows breaking the zero-pattern rule on ``B``.

    Row ``m`` violates the rule when ``B[m, 0]`` is zero but some
    ``B[m, j]`` with ``1 <= j <= n`` is not. An empty tuple means ``B`` is
    admissible. Raises InvalidArgumentError if ``B`` is not orthogonal.
    """
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise InvalidArgumentError("B must be square")
    if np.linalg.norm(B.T @ B - np.eye(B.shape[0])) > 1e-10:
        raise InvalidArgumentError("B is not orthogonal")
    n = min(int(n), B.shape[1] - 1)
    zero = np.abs(B[:, 0]) < ZERO_ENTRY
    bad = zero & np.any(np.abs(B[:, 1: n + 1]) >= ZERO_ENTRY, axis=1)
    return tuple(int(i) for i in np.flatnonzero(bad))


def validate_B(B, n):
    rows = b_violations(B, n)
    if rows:
        raise ValidationError(
            f"B violates the zero-pattern constraint at rows {list(rows)}", rows=rows
        )


def random_B(dim, rng, min_entry=DENSE_MIN, max_tries=10000):
    """Random real orthogonal matrix whose first column has no small entries."""
    for _ in range(max_tries):
        g = rng.standard_normal((dim, dim))
        q, r = np.linalg.qr(g)
        q = q * np.sign(np.diag(r))
        if np.min(np.abs(q[:, 0])) > min_entry:
            return q
    # fall back to a uniform first column with random completion
    return real_orthogonal_completion(np.full((dim, 1), 1 / np.sqrt(dim)), dim, rng)


def shape_probabilities(p, n, rng=None):
    """Orthogonal ``B`` whose first column is ``sqrt(p)``.

    Zero-probability outcomes force zeros in the ``n`` constrained columns,
    which is only possible if at least ``n + 1`` outcomes have positive
    probability.
    """
    p = np.asarray(p, dtype=float).reshape(-1)
    if np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
        raise InvalidArgumentError("target probabilities must be nonnegative and sum to 1")
    dim = p.size
    first = np.sqrt(p / p.sum())
    pos = np.flatnonzero(first > ZERO_ENTRY)
    zero = np.flatnonzero(first <= ZERO_ENTRY)
    if pos.size - 1 < n:
        raise ValidationError(
            f"{pos.size} positive probabilities cannot support {n} constrained columns",
            rows=zero,
        )
    if zero.size == 0:
        return real_orthogonal_completion(first[:, None], dim, rng)
    block = real_orthogonal_completion(first[pos][:, None], pos.size, rng)
    B = np.zeros((dim, dim))
    B[pos, : pos.size] = block
    for j, m in enumerate(zero):
        B[m, pos.size + j] = 1.0
    return B


def build_basis(state, targets, B=None, rng=None, pad_limit=PAD_LIMIT) -> MeasurementPlan:
    """Projective basis in which ``state`` and every target are real.

    Gram-Schmidt on ``[state, *targets]`` gives the columns ``a_i`` of ``A``;
    the measurement kets are the columns of ``A B^T``, i.e. the rows of
    ``U = B A^{-1}`` conjugated. ``B`` may be the size of the Gram-Schmidt
    set (the rest of the space becomes one zero-probability remainder) or any
    larger size up to ``d``, in which case ``A`` is padded with an orthonormal
    complement.
    """
    state = np.asarray(state, dtype=complex).reshape(-1)
    targets = np.atleast_2d(np.asarray(targets, dtype=complex))
    d = state.size
    if targets.size and targets.shape[1] != d:
        raise InvalidArgumentError("targets and state have different dimensions")
    vecs = np.vstack([state, targets]) if targets.size else state[None, :]
    a, kept = gram_schmidt(vecs)
    if not kept or kept[0] != 0:
        raise InvalidArgumentError("state vector is zero")
    r = len(kept)
    dropped = tuple(i - 1 for i in range(1, vecs.shape[0]) if i not in kept)

    if B is None:
        rng = rng if rng is not None else np.random.default_rng(0)
        B = random_B(d if d <= pad_limit else r, rng)
    B = np.asarray(B, dtype=float)
    dim = B.shape[0]
    if not r <= dim <= d:
        raise InvalidArgumentError(f"B has size {dim}; need between {r} and {d}")
    validate_B(B, r - 1)
    if dim > r:
        q, _ = np.linalg.qr(a.T, mode="complete")
        extra = q[:, r:dim].T
        extra = extra - (extra @ a.conj().T) @ a
        extra, _ = gram_schmidt(extra)
        a = np.vstack([a, extra])
    basis = B @ a
    amp = basis.conj() @ state
    return MeasurementPlan(
        basis=basis, amplitudes=amp.real.copy(), probabilities=np.abs(amp) ** 2, B=B,
        working_dim=r, constrained=r - 1, dropped=dropped,
        meta={"max_imag_amplitude": float(np.max(np.abs(amp.imag)))},
    )


# -- estimators and errors ----------------------------------------------------

def estimator_coefficients(basis, sld, psi, cutoff=P_CUTOFF):
    """Optimal outcome values ``f_j(m) = Re(<psi|m><m|l_j>) / p_m``.

    Returns an ``(n, outcomes)`` array; outcomes below ``cutoff`` get 0.
    """
    basis = np.atleast_2d(np.asarray(basis, dtype=complex))
    amp = basis.conj() @ np.asarray(psi, dtype=complex)
    proj = basis.conj() @ np.atleast_2d(sld).T  # (k, n)
    p = np.abs(amp) ** 2
    num = (amp.conj()[:, None] * proj).real
    f = np.zeros_like(num)
    ok = p > cutoff
    f[ok] = num[ok] / p[ok, None]
    return f.T


def approximation_errors(basis, sld, psi, coefficients):
    """Mean squared error of approximating each ``L_j`` by ``O_j = sum_m f_j(m)|m><m|``.

    Includes the part of ``|l_j>`` outside the basis span, on which ``O_j``
    acts as zero.
    """
    basis = np.atleast_2d(np.asarray(basis, dtype=complex))
    sld = np.atleast_2d(np.asarray(sld, dtype=complex))
    amp = basis.conj() @ np.asarray(psi, dtype=complex)
    proj = basis.conj() @ sld.T  # (k, n)
    inside = np.sum(np.abs(coefficients.T * amp[:, None] - proj) ** 2, axis=0)
    outside = np.sum(np.abs(sld) ** 2, axis=1) - np.sum(np.abs(proj) ** 2, axis=0)
    return inside + np.clip(outside, 0.0, None)


def evaluate_plan(plan: MeasurementPlan, psi, dpsi, bundle: InformationBundle) -> MeasurementPlan:
    """Fill in the information-theoretic fields of ``plan``."""
    fc = cfim(plan.basis, psi, dpsi)
    assert_cfim_dominated(bundle.qfim, fc)
    coef = estimator_coefficients(plan.basis, bundle.sld, psi)
    errs = approximation_errors(plan.basis, bundle.sld, psi, coef)
    wb, _ = whiten(bundle)
    wcoef = estimator_coefficients(plan.basis, wb.sld, psi)
    werrs = approximation_errors(plan.basis, wb.sld, psi, wcoef)
    return dataclasses.replace(
        plan, coefficients=coef, cfim=fc, errors=errs, whitened_errors=werrs,
        gamma_achieved=gamma_of(bundle.qfim, fc),
    )


@dataclass(frozen=True)
class Construction:
    psi: np.ndarray
    dpsi: np.ndarray
    bundle: InformationBundle
    report: object
    rotation: RotationResult
    plan: MeasurementPlan


def construct(model, x, config: Optional[OptimizerConfig] = None, B=None, shape=None,
              b_seed=None, pad_limit=PAD_LIMIT) -> Construction:
    """Full pipeline: information, rotation search, basis, and plan evaluation.

    ``shape`` is an optional target probability vector routed through
    ``shape_probabilities``; it fixes the number of outcomes.
    """
    cfg = config or OptimizerConfig()
    psi, dpsi, bundle = bundle_at(model, x)
    report = tradeoff_bound(bundle)
    rot = optimal_rotation(bundle, psi, cfg)
    rng = np.random.default_rng(cfg.seed if b_seed is None else b_seed)
    if shape is not None:
        if B is not None:
            raise InvalidArgumentError("give either B or a probability shape, not both")
        _, kept = gram_schmidt(np.vstack([psi, rot.targets]))
        B = shape_probabilities(shape, len(kept) - 1, rng)
    plan = build_basis(psi, rot.targets, B=B, rng=rng, pad_limit=pad_limit)
    plan = evaluate_plan(plan, psi, dpsi, bundle)
    plan = dataclasses.replace(plan, objective=rot.residual)
    return Construction(psi=psi, dpsi=dpsi, bundle=bundle, report=report, rotation=rot, plan=plan)


def target_reality(plan: MeasurementPlan, targets):
    """Largest imaginary part of any target coordinate in the plan's basis."""
    coords = plan.basis.conj() @ np.atleast_2d(targets).T
    return float(np.max(np.abs(coords.imag))) if coords.size else 0.0


__all__ = [
    "OptimizerConfig", "RotationResult", "MeasurementPlan", "Construction",
    "optimal_rotation", "build_basis", "b_violations", "validate_B", "random_B",
    "shape_probabilities", "estimator_coefficients", "approximation_errors",
    "evaluate_plan", "construct", "target_reality", "outcome_stats",
]
