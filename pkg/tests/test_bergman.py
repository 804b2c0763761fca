import math

import numpy as np
import pytest
from scipy.integrate import quad

from betasphere.bergman import (
    bergman_measure_density,
    default_rule,
    gaussian_decay_check,
    gram_residual,
    kernel_basis_sum,
    kernel_norm,
    kernel_value,
    lagrange_sections,
    offdiagonal_integral,
    offdiagonal_integral_exact,
    plan_marginal_check,
    ratio_identity_error,
    transport_plan_cost,
)
from betasphere.errors import ConditionWarning, DegenerateConfigurationError, InputError
from betasphere.geometry import AT_INFINITY, fibonacci_lattice, product_grid, product_grid_with_nodes
from betasphere.ot import distance_to_uniform
from betasphere.samplers import Configuration, spherical_ensemble_sample, weighted_basis_unit

from .conftest import random_unit


def test_kernel_norm_values():
    assert kernel_norm(0.3 + 1j, 0.3 + 1j, 12) == pytest.approx(12.0, rel=1e-14)
    assert kernel_norm(0j, AT_INFINITY, 5) == 0.0
    assert kernel_norm(0j, AT_INFINITY, 1) == 1.0
    # d(0, 1)^2 = 1/2
    assert kernel_norm(0j, 1 + 0j, 3) == pytest.approx(1.5, rel=1e-14)


def test_kernel_closed_form_matches_basis_sum(rng):
    X, Y = random_unit(500, rng), random_unit(500, rng)
    np.testing.assert_allclose(kernel_basis_sum(X, Y, 16), kernel_value(X, Y, 16), atol=1e-12)
    np.testing.assert_allclose(np.abs(kernel_value(X, Y, 16)), kernel_norm(X, Y, 16), rtol=1e-10, atol=1e-14)


def test_bergman_density_is_one(rng):
    z = rng.standard_normal(300) + 1j * rng.standard_normal(300)
    for k in (1, 5, 100):
        np.testing.assert_allclose(bergman_measure_density(z, k), 1.0, atol=1e-12)
    assert bergman_measure_density(AT_INFINITY, 50) == pytest.approx(1.0, abs=1e-12)


def test_gram_residual_small():
    assert gram_residual(10) <= 1e-12


def test_reproducing_property(rng):
    k = 9
    rule = product_grid(2 * k + 2)
    coeffs = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    s_nodes = coeffs @ weighted_basis_unit(rule.nodes, k)
    w = random_unit(5, rng)
    K = kernel_value(rule.nodes[:, None, :], w[None, :, :], k)
    got = (rule.weights * s_nodes) @ np.conj(K)
    np.testing.assert_allclose(got, coeffs @ weighted_basis_unit(w, k), atol=1e-12)


def test_lagrange_k1_is_constant(rng):
    L = lagrange_sections(Configuration([0.2 - 3j], 1))
    np.testing.assert_allclose(L.norms(random_unit(100, rng)), 1.0, atol=1e-14)


def test_lagrange_delta(rng):
    L = lagrange_sections(spherical_ensemble_sample(32, rng))
    assert L.delta_residual() <= 1e-10
    assert L.with_fault(0, 0, 1e-3).delta_residual() > 1e-4
    with pytest.raises(ValueError):
        L.coefficient_matrix[0, 0] = 0.0


def test_lagrange_interpolates_sections(rng):
    k = 12
    cfg = spherical_ensemble_sample(k, rng)
    L = lagrange_sections(cfg)
    coeffs = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    at_pts = coeffs @ weighted_basis_unit(cfg.unit_vectors, k)
    X = random_unit(50, rng)
    np.testing.assert_allclose(at_pts @ L.evaluate(X), coeffs @ weighted_basis_unit(X, k), atol=1e-10)


def test_lagrange_degenerate():
    with pytest.raises(DegenerateConfigurationError):
        lagrange_sections(Configuration([1j, 1j], 2))


def test_ratio_identity(rng):
    L = lagrange_sections(spherical_ensemble_sample(16, rng))
    for j, x in zip(range(16), random_unit(16, rng)):
        assert ratio_identity_error(L, j, x) <= 1e-9


def test_offdiagonal_matches_one_dimensional_oracle():
    # d^2 is uniform on [0, 1] under sigma
    for k in (1, 2, 7, 30):
        ref = quad(lambda t: math.sqrt(t) * k * (1 - t) ** ((k - 1) / 2), 0, 1, epsabs=1e-13)[0]
        assert offdiagonal_integral_exact(k) == pytest.approx(ref, abs=1e-12)
        assert offdiagonal_integral(0j, k) == pytest.approx(ref, abs=1e-12)
    assert offdiagonal_integral(0j, 1) == pytest.approx(2 / 3, abs=1e-10)


def test_offdiagonal_rotation_invariant():
    assert abs(offdiagonal_integral(0j, 20) - offdiagonal_integral(1 + 1j, 20)) <= 1e-12
    assert offdiagonal_integral(AT_INFINITY, 20) == pytest.approx(offdiagonal_integral_exact(20), abs=1e-12)


def test_offdiagonal_quadrature_too_coarse():
    with pytest.raises(InputError):
        offdiagonal_integral(0j, 100, quad=product_grid_with_nodes(1000))
    assert len(default_rule(10)) >= 4096


def test_gaussian_decay(rng):
    for k in (2, 16, 256):
        rep = gaussian_decay_check(k, 2000, rng)
        assert rep.passed and rep.max_log_excess <= 0
    with pytest.raises(InputError):
        gaussian_decay_check(1, 10, rng)


def test_plan_marginals(rng):
    assert plan_marginal_check(Configuration([0.5j], 1), rng=rng).passed
    rep = plan_marginal_check(spherical_ensemble_sample(8, rng), quad=product_grid_with_nodes(16384), rng=rng)
    assert rep.passed
    assert rep.y_marginal_error <= 1e-10 and rep.x_marginal_error <= 1e-10


def test_plan_marginals_warns_near_coincident(rng):
    cfg = Configuration([0.3 + 0j, 0.3 + 1e-5j, 2j, -1.0], 4)
    with pytest.warns(ConditionWarning):
        plan_marginal_check(cfg, rng=rng)


def test_plan_cost_single_point():
    # |l_0| = 1 and |K| = 1, so the cost is the mean distance to a point
    assert transport_plan_cost(Configuration([1 - 1j], 1)) == pytest.approx(2 / 3, abs=1e-6)


def test_plan_cost_bounds_w(rng):
    cfg = spherical_ensemble_sample(16, rng)
    assert transport_plan_cost(cfg) >= distance_to_uniform(cfg) - 0.02
    same = fibonacci_lattice(256)
    assert transport_plan_cost(cfg, same) >= distance_to_uniform(cfg, M=256, method="exact") - 1e-10
