import math

import numpy as np
import pytest
import scipy.stats

from betasphere.bergman import lagrange_sections
from betasphere.errors import DegenerateConfigurationError, InputError
from betasphere.geometry import AT_INFINITY, fibonacci_lattice, product_grid_with_nodes, random_rotation
from betasphere.samplers import (
    Configuration,
    MetropolisSampler,
    Provenance,
    SectionMatrix,
    fekete_ascent,
    generalized_eigenvalues,
    log_rho,
    mcmc_beta_sample,
    orthonormal_basis_eval,
    sample_ginibre_pair,
    spherical_ensemble_sample,
    weighted_basis,
    weighted_basis_unit,
)

from .conftest import random_unit


# -- basis -------------------------------------------------------------------


def test_basis_k1_is_constant():
    np.testing.assert_array_equal(orthonormal_basis_eval(0.3 + 2j, 1), [1.0])
    np.testing.assert_allclose(weighted_basis([AT_INFINITY, 0j, 5j], 1), [[1.0, 1.0, 1.0]])


def test_basis_gram_k8():
    rule = product_grid_with_nodes(1024)
    E = weighted_basis_unit(rule.nodes, 8)
    G = (E * rule.weights) @ np.conj(E).T
    np.testing.assert_allclose(G, np.eye(8), atol=1e-12)


def test_basis_pointwise_norm_sum():
    x = 0.7 + 0.2j
    e = orthonormal_basis_eval(x, 16)
    total = np.sum(np.abs(e) ** 2) * (1 + abs(x) ** 2) ** -15
    assert total == pytest.approx(16.0, rel=1e-13)
    assert np.sum(np.abs(orthonormal_basis_eval(x, 16, weighted=True)) ** 2) == pytest.approx(16.0, rel=1e-13)


def test_basis_no_overflow_large_k():
    x = np.array([1e6 + 0j, 1e-6j, 1.0, AT_INFINITY])
    E = weighted_basis(x, 4096)
    assert np.all(np.isfinite(E))
    np.testing.assert_allclose(np.sum(np.abs(E) ** 2, axis=0), 4096.0, rtol=1e-10)


def test_basis_charts_agree(rng):
    P = random_unit(50, rng)
    cfg = Configuration.from_unit_vectors(P)
    np.testing.assert_allclose(weighted_basis(cfg.points, 50), weighted_basis_unit(P, 50), atol=1e-10)


# -- density -----------------------------------------------------------------


def test_log_rho_k1_is_zero():
    assert log_rho(Configuration([0.4 - 1j], 1)) == pytest.approx(0.0, abs=1e-15)


def test_log_rho_invariances(rng):
    P = random_unit(10, rng)
    base = log_rho(Configuration.from_unit_vectors(P))
    perm = log_rho(Configuration.from_unit_vectors(P[rng.permutation(10)]))
    rot = log_rho(Configuration.from_unit_vectors(P @ random_rotation(rng).T))
    assert perm == pytest.approx(base, abs=1e-10)
    assert rot == pytest.approx(base, abs=1e-10)


def test_log_rho_coincident_points():
    cfg = Configuration([1j, 1j, 2.0], 3)
    assert log_rho(cfg) == -math.inf
    with pytest.raises(DegenerateConfigurationError):
        cfg.validate()
    with pytest.raises(DegenerateConfigurationError):
        SectionMatrix(cfg).inverse()


def test_log_rho_k2_is_log_distance(rng):
    # for two points |det M| = 2 d(x1, x2)
    P = random_unit(2, rng)
    cfg = Configuration.from_unit_vectors(P)
    assert log_rho(cfg) == pytest.approx(math.log(2 * cfg.min_separation()), abs=1e-12)


# -- matrix model ------------------------------------------------------------


def test_ginibre_reproducible_and_normalised():
    A1, B1 = sample_ginibre_pair(4, np.random.default_rng(7))
    A2, B2 = sample_ginibre_pair(4, np.random.default_rng(7))
    np.testing.assert_array_equal(A1, A2)
    np.testing.assert_array_equal(B1, B2)
    A, _ = sample_ginibre_pair(256, np.random.default_rng(8))
    assert np.mean(np.abs(A) ** 2) == pytest.approx(1.0, abs=0.01)


def test_matrix_model_k1_is_uniform(rng):
    z = np.array([spherical_ensemble_sample(1, rng).unit_vectors[0, 2] for _ in range(20000)])
    assert scipy.stats.kstest(z, "uniform", args=(-1, 2)).pvalue > 1e-3


def test_matrix_model_is_balanced(rng):
    for _ in range(10):
        cfg = spherical_ensemble_sample(32, rng)
        assert cfg.provenance is Provenance.MATRIX_MODEL
        assert np.linalg.norm(cfg.unit_vectors.mean(axis=0)) <= 0.15


def test_generalized_eigenvalue_residual(rng):
    A, B = sample_ginibre_pair(6, rng)
    for lam in (generalized_eigenvalues(A, B), generalized_eigenvalues(A, B, qz_threshold=0.0)):
        s = max(np.linalg.svd(B - l * A, compute_uv=False)[-1] for l in lam)
        assert s <= 1e-10 * np.linalg.norm(A, 2) * np.linalg.norm(B, 2)


def test_lagrange_l2_norm_has_unit_mean(rng):
    # E int |l_j|^2 dsigma = 1 at beta = 2; the tail is heavy, so the band is wide
    v = []
    for _ in range(4000):
        C = lagrange_sections(spherical_ensemble_sample(8, rng)).coefficient_matrix
        v.extend(np.sum(np.abs(C) ** 2, axis=0))
    assert abs(np.mean(v) - 1.0) <= 0.15


def test_sampler_input_errors(rng):
    with pytest.raises(InputError):
        spherical_ensemble_sample(0, rng)
    with pytest.raises(InputError):
        MetropolisSampler(4, 0.0, rng)
    with pytest.raises(InputError):
        MetropolisSampler(4, -1.0, rng)
    with pytest.raises(InputError):
        MetropolisSampler(4, 2.0, rng, init=random_unit(3, rng))


# -- serialisation -----------------------------------------------------------


def test_json_round_trip_is_exact(rng):
    cfg = spherical_ensemble_sample(9, rng, seed=123)
    pts = np.array(cfg.points)
    pts[0] = AT_INFINITY
    cfg = Configuration(pts, 9, math.inf, Provenance.FEKETE, 5)
    back = Configuration.from_json(cfg.to_json())
    assert back.k == 9 and back.beta == math.inf and back.seed == 5
    assert back.provenance is Provenance.FEKETE
    assert np.array_equal(back.points.view(float), cfg.points.view(float))


def test_json_schema_mismatch():
    text = Configuration([1j], 1).to_json().replace('"schema_version": 1', '"schema_version": 99')
    with pytest.raises(InputError):
        Configuration.from_json(text)


def test_configuration_is_read_only():
    cfg = Configuration([1j, 2.0], 2)
    with pytest.raises(ValueError):
        cfg.points[0] = 0
    with pytest.raises(InputError):
        Configuration([1j, 2.0], 3)


# -- MCMC --------------------------------------------------------------------


def test_mcmc_small_beta_runs(rng):
    cfg, stats = mcmc_beta_sample(16, 0.5, 2000, rng, return_stats=True)
    assert cfg.provenance is Provenance.MCMC and cfg.beta == 0.5
    assert len(stats.log_rho_trace) == 2000
    assert np.all(np.isfinite(stats.log_rho_trace))


@pytest.mark.parametrize("beta", [1.0, 2.0, 4.0])
def test_mcmc_pair_distance_law(beta):
    # for k = 2 the density is proportional to d^beta, so d^(beta + 2) is uniform
    s = MetropolisSampler(2, beta, np.random.default_rng(11))
    d = []
    for _ in range(3000):
        s.run(10)
        d.append(s.configuration().min_separation())
    assert scipy.stats.kstest(np.array(d) ** (beta + 2), "uniform").pvalue > 1e-3


def test_mcmc_acceptance_rate(rng):
    _, stats = mcmc_beta_sample(16, 2.0, 500, rng, return_stats=True)
    assert 0.2 <= stats.acceptance_rate <= 0.6


def test_mcmc_seed_reproducible():
    a = mcmc_beta_sample(8, 3.0, 100, np.random.default_rng(3))
    b = mcmc_beta_sample(8, 3.0, 100, np.random.default_rng(3))
    assert np.array_equal(a.unit_vectors, b.unit_vectors)


# -- Fekete ascent -----------------------------------------------------------


def test_fekete_two_points_antipodal(rng):
    cfg = fekete_ascent(spherical_ensemble_sample(2, rng))
    assert cfg.min_separation() == pytest.approx(1.0, abs=1e-3)
    assert cfg.beta == math.inf and cfg.provenance is Provenance.FEKETE


def test_fekete_increases_log_rho_and_bounds_sections(rng):
    start = spherical_ensemble_sample(6, rng)
    cfg = fekete_ascent(start)
    assert log_rho(cfg) >= log_rho(start)
    # at a maximiser of |det M| every Lagrange section has sup norm 1
    L = lagrange_sections(cfg)
    assert L.norms(fibonacci_lattice(4096).nodes).max() <= 1.0 + 1e-3
