import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import fd_probabilities, fisher_from, random_basis, raw_tensor, sld_operator
from qtradeoff.errors import ConsistencyError, InvalidArgumentError, SingularInformationError
from qtradeoff.information import (
    assert_cfim_dominated, bundle_at, cfim, fisher_gap_min_eig, gamma_of, geometric_tensor,
    reparametrize, sld_vectors, tradeoff_bound, whiten,
)
from qtradeoff.model import evaluate_with_derivatives, explicit, multiphase, qubit_bloch, random_model

seeds = st.integers(0, 2**32 - 1)
# identifiable models need n <= 2(d - 1)
shapes = st.tuples(st.integers(1, 3), st.integers(2, 5)).filter(lambda t: t[0] <= 2 * t[1] - 2)


@settings(max_examples=40, deadline=None)
@given(seeds, shapes)
def test_sld_solves_the_defining_equation(seed, nd):
    n, d = nd
    rng = np.random.default_rng(seed)
    m = random_model(d, n, rng)
    psi, dpsi = evaluate_with_derivatives(m, np.zeros(n))
    rho = np.outer(psi, psi.conj())
    for j, l in enumerate(sld_vectors(psi, dpsi)):
        drho = np.outer(dpsi[j], psi.conj()) + np.outer(psi, dpsi[j].conj())
        L = sld_operator(psi, l)
        assert np.allclose(0.5 * (rho @ L + L @ rho), drho, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds, shapes)
def test_tensor_matches_ungauged_formula(seed, nd):
    n, d = nd
    rng = np.random.default_rng(seed)
    m = random_model(d, n, rng)
    x = 0.05 * rng.standard_normal(n)
    raw = raw_tensor(m.state(x), np.asarray(m.jacobian(x)))
    _, _, b = bundle_at(m, x)
    assert np.allclose(b.tensor, raw, atol=1e-11)
    assert np.allclose(b.qfim, b.qfim.T) and np.allclose(b.berry, -b.berry.T)


@pytest.mark.parametrize("theta", [0.4, np.pi / 2, 2.6])
def test_bloch_sphere(theta):
    m = qubit_bloch()
    _, _, b = bundle_at(m, np.array([theta, 0.8]))
    assert np.allclose(b.qfim, np.diag([1.0, np.sin(theta) ** 2]), atol=1e-14)
    assert np.allclose(b.lambdas, [1.0, 1.0], atol=1e-12)
    rep = tradeoff_bound(b)
    assert rep.gamma_bound == pytest.approx(1.0, abs=1e-12)
    assert rep.gill_massar_constant == 1


@settings(max_examples=40, deadline=None)
@given(seeds, shapes.filter(lambda t: t[0] >= 2))
def test_lambdas_against_general_eig(seed, nd):
    n, d = nd
    rng = np.random.default_rng(seed)
    _, _, b = bundle_at(random_model(d, n, rng), np.zeros(n))
    ev = np.linalg.eigvals(np.linalg.solve(b.qfim, b.berry))
    ref = np.sort(np.abs(ev.imag))[::-1]
    assert np.allclose(b.lambdas, ref, atol=1e-9)
    assert np.all(b.lambdas <= 1 + 1e-9)
    # squares avoid the cancellation the cosines themselves are built to avoid
    assert np.allclose(b.cosines**2, 1 - b.lambdas**2, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(seeds, shapes)
def test_bound_sandwich(seed, nd):
    n, d = nd
    rng = np.random.default_rng(seed)
    rep = tradeoff_bound(bundle_at(random_model(d, n, rng), np.zeros(n))[2])
    assert n / 2 - 1e-12 <= rep.gamma_bound <= n + 1e-12
    assert rep.gamma_bound <= d - 1 + 1e-9
    assert np.all((rep.penalties >= -1e-15) & (rep.penalties <= 0.5 + 1e-15))


def test_real_model_is_compatible():
    rng = np.random.default_rng(1)
    psi = rng.standard_normal(4)
    dpsi = rng.standard_normal((3, 4))
    rep = tradeoff_bound(bundle_at(explicit(psi, dpsi), np.zeros(3))[2])
    assert rep.weak_commutativity and rep.gamma_bound == pytest.approx(3.0, abs=1e-12)


def test_single_parameter_trivial():
    rng = np.random.default_rng(2)
    rep = tradeoff_bound(bundle_at(random_model(3, 1, rng), np.zeros(1))[2])
    assert rep.gamma_bound == 1.0 and rep.weak_commutativity


@settings(max_examples=30, deadline=None)
@given(seeds, shapes)
def test_reparametrization_law(seed, nd):
    n, d = nd
    rng = np.random.default_rng(seed)
    _, _, b = bundle_at(random_model(d, n, rng), np.zeros(n))
    J = rng.standard_normal((n, n)) + 2 * np.eye(n)
    b2 = reparametrize(b, J)
    Ji = np.linalg.inv(J)
    assert np.allclose(b2.tensor, Ji.T @ b.tensor @ Ji, atol=1e-9 * np.abs(b2.tensor).max())
    assert tradeoff_bound(b2).gamma_bound == pytest.approx(tradeoff_bound(b).gamma_bound, abs=1e-9)


def test_reparametrize_rejects_singular():
    _, _, b = bundle_at(qubit_bloch(), np.array([1.0, 0.0]))
    with pytest.raises(InvalidArgumentError):
        reparametrize(b, np.array([[1.0, 1.0], [1.0, 1.0]]))


def test_whitening():
    rng = np.random.default_rng(3)
    _, _, b = bundle_at(random_model(5, 3, rng), np.zeros(3))
    wb, s = whiten(b)
    assert np.allclose(wb.qfim, np.eye(3), atol=1e-10)
    assert np.allclose(wb.lambdas, b.lambdas, atol=1e-10)


def test_singular_qfim():
    psi = np.array([1.0, 0.0, 0.0])
    d1 = np.array([0.0, 1.0, 0.0])
    with pytest.raises(SingularInformationError):
        bundle_at(explicit(psi, np.array([d1, 2 * d1])), np.zeros(2))


def test_lambda_above_one_is_inconsistent():
    _, _, b = bundle_at(qubit_bloch(), np.array([1.0, 0.0]))
    with pytest.raises(ConsistencyError):
        tradeoff_bound(dataclasses.replace(b, lambdas=np.array([1.1, 1.1])))


@settings(max_examples=40, deadline=None)
@given(seeds, shapes)
def test_cfim_against_finite_differences(seed, nd):
    n, d = nd
    rng = np.random.default_rng(seed)
    m = random_model(d, n, rng)
    basis = random_basis(d, rng)
    psi, dpsi = evaluate_with_derivatives(m, np.zeros(n))
    p, dp = fd_probabilities(m, np.zeros(n), basis)
    ref = fisher_from(p, dp)
    fc = cfim(basis, psi, dpsi)
    assert np.allclose(fc, ref, rtol=1e-6, atol=1e-6)


@settings(max_examples=60, deadline=None)
@given(seeds, shapes)
def test_cfim_dominated_by_qfim(seed, nd):
    n, d = nd
    rng = np.random.default_rng(seed)
    m = random_model(d, n, rng)
    psi, dpsi, b = bundle_at(m, np.zeros(n))
    fc = cfim(random_basis(d, rng), psi, dpsi)
    assert fisher_gap_min_eig(b.qfim, fc) >= -1e-8
    assert_cfim_dominated(b.qfim, fc)
    assert gamma_of(b.qfim, fc) <= tradeoff_bound(b).gamma_bound + 1e-9


def test_cfim_domination_violation_is_reported():
    with pytest.raises(ConsistencyError):
        assert_cfim_dominated(np.eye(2), 2 * np.eye(2))


def test_remainder_outcome_slope_guard():
    psi = np.array([1.0, 0.0])
    # a derivative with a normalization component gives the empty remainder a slope
    with pytest.raises(ConsistencyError):
        cfim(psi[None, :], psi, psi[None, :])


def test_non_orthonormal_basis_rejected():
    with pytest.raises(InvalidArgumentError):
        cfim(np.array([[1.0, 0.0], [1.0, 0.0]]), np.array([1.0, 0.0]), np.array([[0.0, 1.0]]))


@pytest.mark.parametrize("d", [2, 3, 4])
def test_multiphase_full_parametrization(d):
    m = multiphase(d)
    _, _, b = bundle_at(m, m.reference_point)
    assert np.allclose(b.lambdas, 1.0, atol=1e-8)
    assert tradeoff_bound(b).gamma_bound == pytest.approx(d - 1, abs=1e-10)
