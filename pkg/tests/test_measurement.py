import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from helpers import random_basis, sld_operator
from qtradeoff.errors import InvalidArgumentError, ValidationError
from qtradeoff.information import bundle_at, cfim, gamma_of, tradeoff_bound, whiten
from qtradeoff.measurement import (
    OptimizerConfig, _descend, _imag_residual, approximation_errors, b_violations, build_basis,
    construct, estimator_coefficients, optimal_rotation, random_B, shape_probabilities,
    takagi_rotation, target_reality, validate_B,
)
from qtradeoff.model import evaluate_with_derivatives, explicit, multiphase, qubit_bloch, random_model
from qtradeoff.numerics import expm_antihermitian, haar_unitary

seeds = st.integers(0, 2**32 - 1)
shapes = st.tuples(st.integers(1, 3), st.integers(2, 5)).filter(lambda t: t[0] <= 2 * t[1] - 2)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 4), st.integers(1, 4))
def test_takagi_diagonalizes(seed, k, n):
    rng = np.random.default_rng(seed)
    coords = rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))
    w = takagi_rotation(coords)
    g = coords @ coords.T
    assert np.allclose(w @ w.conj().T, np.eye(k), atol=1e-10)
    c = w @ g @ w.T
    s = np.linalg.svd(g, compute_uv=False)
    assert np.allclose(c, np.diag(np.diag(c)), atol=1e-9)
    assert np.trace(c).real == pytest.approx(s.sum(), abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_takagi_beats_random_unitaries(seed):
    rng = np.random.default_rng(seed)
    coords = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    best = _imag_residual(takagi_rotation(coords), coords)
    for _ in range(20):
        assert _imag_residual(haar_unitary(3, rng), coords) >= best - 1e-12


def test_descent_direction_matches_finite_difference():
    rng = np.random.default_rng(0)
    coords = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    w = haar_unitary(3, rng)
    g = coords @ coords.T
    c = w @ g @ w.T
    om = c.conj() - c
    h = 1e-6
    fp = _imag_residual(expm_antihermitian(h * om) @ w, coords)
    fm = _imag_residual(expm_antihermitian(-h * om) @ w, coords)
    assert (fp - fm) / (2 * h) == pytest.approx(-0.5 * np.sum(np.abs(om) ** 2), rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(seeds, shapes)
def test_rotation_residual_equals_penalty(seed, nd):
    n, d = nd
    rng = np.random.default_rng(seed)
    psi, dpsi, b = bundle_at(random_model(d, n, rng), np.zeros(n))
    rot = optimal_rotation(b, psi)
    assert rot.residual == pytest.approx(tradeoff_bound(b).total_penalty, abs=1e-9)
    assert np.allclose(rot.unitary[0], np.eye(rot.unitary.shape[0])[0])


@pytest.mark.parametrize("seed", range(6))
def test_ascent_agrees_with_closed_form(seed):
    rng = np.random.default_rng(seed)
    psi, _, b = bundle_at(random_model(3 + seed % 2, 2, rng), np.zeros(2))
    closed = optimal_rotation(b, psi)
    climbed = optimal_rotation(b, psi, OptimizerConfig(method="ascent", restarts=4, seed=seed))
    assert climbed.converged
    assert climbed.residual == pytest.approx(closed.residual, abs=1e-9)
    assert len(climbed.restart_residuals) == 4


def test_ascent_is_deterministic():
    rng = np.random.default_rng(11)
    psi, _, b = bundle_at(random_model(4, 2, rng), np.zeros(2))
    cfg = OptimizerConfig(method="ascent", restarts=3, seed=5)
    a, c = optimal_rotation(b, psi, cfg), optimal_rotation(b, psi, cfg)
    assert np.array_equal(a.unitary, c.unitary) and a.best_restart == c.best_restart


def test_unknown_method():
    psi, _, b = bundle_at(qubit_bloch(), np.array([1.0, 0.2]))
    with pytest.raises(InvalidArgumentError):
        optimal_rotation(b, psi, OptimizerConfig(method="newton"))


# -- B matrices ------------------------------------------------------------------

def test_b_zero_pattern():
    ok = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    assert b_violations(ok, 1) == ()
    bad = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert b_violations(bad, 1) == (0,)
    with pytest.raises(ValidationError) as err:
        validate_B(bad, 1)
    assert err.value.rows == (0,)
    # zero in the first column is fine when the constrained columns also vanish
    block = np.zeros((3, 3))
    block[:2, :2] = ok
    block[2, 2] = 1.0
    assert b_violations(block, 1) == ()
    assert b_violations(np.eye(3)[:, [0, 2, 1]], 1) == (2,)
    with pytest.raises(InvalidArgumentError):
        b_violations(np.ones((2, 2)), 1)


def test_random_b_dense_first_column():
    rng = np.random.default_rng(0)
    for dim in (2, 5, 12):
        B = random_B(dim, rng)
        assert np.allclose(B.T @ B, np.eye(dim), atol=1e-12)
        assert np.min(np.abs(B[:, 0])) > 1e-3


@pytest.mark.parametrize("p", [[0.25] * 4, [0.1, 0.2, 0.3, 0.4], [0.5, 0.0, 0.3, 0.2]])
def test_shape_probabilities(p):
    B = shape_probabilities(p, 2, np.random.default_rng(1))
    assert np.allclose(B.T @ B, np.eye(4), atol=1e-12)
    assert np.allclose(B[:, 0] ** 2, p, atol=1e-12)
    assert b_violations(B, 2) == ()


def test_shape_probabilities_rejections():
    with pytest.raises(ValidationError):
        shape_probabilities([1.0, 0.0, 0.0], 1)
    with pytest.raises(InvalidArgumentError):
        shape_probabilities([0.5, 0.6], 1)


# -- basis construction ----------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(seeds, shapes)
def test_constructed_basis_makes_targets_real(seed, nd):
    n, d = nd
    rng = np.random.default_rng(seed)
    built = construct(random_model(d, n, rng), np.zeros(n), OptimizerConfig(seed=seed))
    plan = built.plan
    assert np.allclose(plan.basis.conj() @ plan.basis.T, np.eye(plan.outcomes), atol=1e-10)
    assert target_reality(plan, built.rotation.targets) < 1e-10
    assert np.max(np.abs((plan.basis.conj() @ built.psi).imag)) < 1e-10
    assert plan.probabilities.sum() == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(seeds, shapes)
def test_construction_reaches_bound(seed, nd):
    n, d = nd
    rng = np.random.default_rng(seed)
    built = construct(random_model(d, n, rng), np.zeros(n), OptimizerConfig(seed=seed))
    assert built.plan.gamma_achieved == pytest.approx(built.report.gamma_bound, abs=1e-6)
    assert np.linalg.eigvalsh(built.bundle.qfim - built.plan.cfim)[0] >= -1e-8


def test_compatible_model_saturates_qfim():
    rng = np.random.default_rng(7)
    m = explicit(rng.standard_normal(5), rng.standard_normal((3, 5)))
    built = construct(m, np.zeros(3))
    assert built.report.weak_commutativity
    assert np.allclose(built.plan.cfim, built.bundle.qfim, atol=1e-8)


def test_user_b_and_remainder():
    rng = np.random.default_rng(3)
    m = random_model(6, 2, rng)
    psi, dpsi, b = bundle_at(m, np.zeros(2))
    rot = optimal_rotation(b, psi)
    B = random_B(3, rng)
    plan = build_basis(psi, rot.targets, B=B)
    assert plan.has_remainder and plan.outcomes == 3
    fc = cfim(plan.basis, psi, dpsi)
    assert gamma_of(b.qfim, fc) == pytest.approx(tradeoff_bound(b).gamma_bound, abs=1e-9)
    with pytest.raises(InvalidArgumentError):
        build_basis(psi, rot.targets, B=np.eye(2))


def test_padding_policy():
    rng = np.random.default_rng(4)
    small = construct(random_model(5, 2, rng), np.zeros(2)).plan
    assert small.outcomes == 5 and not small.has_remainder
    big = construct(random_model(40, 2, rng), np.zeros(2)).plan
    assert big.outcomes == big.working_dim == 3 and big.has_remainder


def test_shaped_construction():
    m = qubit_bloch()
    built = construct(m, m.reference_point, shape=[0.5, 0.5])
    assert np.allclose(built.plan.probabilities, 0.5, atol=1e-9)
    assert built.plan.gamma_achieved == pytest.approx(1.0, abs=1e-9)


def test_construction_deterministic():
    rng = np.random.default_rng(9)
    m = random_model(4, 2, rng)
    a = construct(m, np.zeros(2), OptimizerConfig(seed=3)).plan
    b = construct(m, np.zeros(2), OptimizerConfig(seed=3)).plan
    assert np.array_equal(a.basis, b.basis)


# -- estimators and errors --------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(seeds, shapes)
def test_coefficients_minimize_each_outcome(seed, nd):
    n, d = nd
    rng = np.random.default_rng(seed)
    psi, _, b = bundle_at(random_model(d, n, rng), np.zeros(n))
    basis = random_basis(d, rng)
    f = estimator_coefficients(basis, b.sld, psi)
    amp = basis.conj() @ psi
    proj = basis.conj() @ b.sld.T
    for m in range(d):
        for j in range(n):
            res = minimize_scalar(lambda t: abs(t * amp[m] - proj[m, j]) ** 2)
            assert f[j, m] == pytest.approx(res.x, rel=1e-5, abs=1e-5)


@settings(max_examples=30, deadline=None)
@given(seeds, shapes)
def test_errors_match_operator_algebra(seed, nd):
    n, d = nd
    rng = np.random.default_rng(seed)
    psi, _, b = bundle_at(random_model(d, n, rng), np.zeros(n))
    basis = random_basis(d, rng)
    f = estimator_coefficients(basis, b.sld, psi)
    err = approximation_errors(basis, b.sld, psi, f)
    for j in range(n):
        O = (basis.T * f[j]) @ basis.conj()
        L = sld_operator(psi, b.sld[j])
        v = (O - L) @ psi
        assert err[j] == pytest.approx(np.vdot(v, v).real, rel=1e-9, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(seeds, shapes)
def test_error_fisher_gap_identity(seed, nd):
    n, d = nd
    rng = np.random.default_rng(seed)
    psi, dpsi, b = bundle_at(random_model(d, n, rng), np.zeros(n))
    basis = random_basis(d, rng)
    fc = cfim(basis, psi, dpsi)
    f = estimator_coefficients(basis, b.sld, psi)
    err = approximation_errors(basis, b.sld, psi, f)
    assert np.allclose(err, np.diag(b.qfim) - np.diag(fc), atol=1e-9)
    wb, _ = whiten(b)
    wf = estimator_coefficients(basis, wb.sld, psi)
    werr = approximation_errors(basis, wb.sld, psi, wf)
    assert werr.sum() == pytest.approx(n - gamma_of(b.qfim, fc), abs=1e-9)


def test_gill_massar_construction():
    for d in (2, 3):
        m = multiphase(d)
        built = construct(m, m.reference_point)
        assert built.plan.gamma_achieved == pytest.approx(d - 1, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(seeds, st.tuples(st.integers(1, 4), st.integers(2, 6)).filter(lambda t: t[0] <= 2 * t[1] - 2))
def test_tightness_up_to_four_parameters(seed, nd):
    n, d = nd
    rng = np.random.default_rng(seed)
    built = construct(random_model(d, n, rng), np.zeros(n))
    plan = built.plan
    assert plan.gamma_achieved == pytest.approx(built.report.gamma_bound, abs=1e-6)
    # completeness on the space, or an informationless remainder
    gram = plan.basis.T @ plan.basis.conj()
    if not plan.has_remainder:
        assert np.allclose(gram, np.eye(d), atol=1e-10)
    assert plan.whitened_errors.sum() == pytest.approx(n - plan.gamma_achieved, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(seeds, shapes)
def test_errors_exceed_imaginary_parts(seed, nd):
    n, d = nd
    rng = np.random.default_rng(seed)
    built = construct(random_model(d, n, rng), np.zeros(n))
    plan = built.plan
    coords = plan.basis.conj() @ built.bundle.sld.T
    assert np.all(plan.errors >= np.sum(coords.imag**2, axis=0) - 1e-10)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(3, 5))
def test_incompatibility_forces_positive_residual(seed, d):
    rng = np.random.default_rng(seed)
    psi, _, b = bundle_at(random_model(d, 2, rng), np.zeros(2))
    if np.max(np.abs(b.berry)) > 1e-6:
        assert optimal_rotation(b, psi).residual > 0


def test_sld_eigenbasis_coefficients_are_eigenvalues():
    m = random_model(3, 1, np.random.default_rng(12))
    psi, _, b = bundle_at(m, np.zeros(1))
    w, vecs = np.linalg.eigh(sld_operator(psi, b.sld[0]))
    basis = vecs.T
    f = estimator_coefficients(basis, b.sld, psi)
    p = np.abs(basis.conj() @ psi) ** 2
    assert np.allclose(f[0][p > 1e-12], w[p > 1e-12], atol=1e-10)
    assert approximation_errors(basis, b.sld, psi, f)[0] == pytest.approx(0.0, abs=1e-12)


def test_uncorrelated_radar_whitened_errors():
    from qtradeoff.radar import RadarScene, biphoton_model

    m = biphoton_model(RadarScene(kappa=0.0))
    plan = construct(m, m.reference_point).plan
    assert plan.whitened_errors.sum() == pytest.approx(1.0, abs=1e-6)
