import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from betasphere.errors import InputError
from betasphere.geometry import (
    AT_INFINITY,
    DiscreteMeasure,
    Generator,
    SpherePoint,
    chordal_distance,
    fibonacci_lattice,
    fs_potential,
    lift,
    product_grid,
    product_grid_with_nodes,
    project,
    random_rotation,
    rotate_affine,
)

from .conftest import random_unit

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def test_distance_examples():
    assert chordal_distance(0.3 - 2j, 0.3 - 2j) == 0.0
    assert chordal_distance(0j, AT_INFINITY) == 1.0
    assert chordal_distance(0j, 1 + 0j) == pytest.approx(0.7071067811865476, abs=1e-15)


def test_distance_matches_affine_formula(rng):
    z = rng.standard_normal(200) + 1j * rng.standard_normal(200)
    w = 3 * (rng.standard_normal(200) + 1j * rng.standard_normal(200))
    ref = np.abs(z - w) / np.sqrt((1 + np.abs(z) ** 2) * (1 + np.abs(w) ** 2))
    np.testing.assert_allclose(chordal_distance(z, w), ref, atol=1e-12)


def test_lift_project_conventions():
    np.testing.assert_array_equal(lift(0j), [0.0, 0.0, -1.0])
    np.testing.assert_array_equal(lift(AT_INFINITY), [0.0, 0.0, 1.0])
    assert project(lift(2 + 3j)) == pytest.approx(2 + 3j, abs=1e-12)
    assert np.linalg.norm(lift(1 + 0j) - lift(-1 + 0j)) / 2 == pytest.approx(1.0, abs=1e-15)
    assert math.isinf(abs(project(np.array([0.0, 0.0, 1.0]))))


@given(finite, finite)
@settings(max_examples=200, deadline=None)
def test_round_trip_property(a, b):
    x = complex(a, b)
    p = lift(x)
    assert abs(np.linalg.norm(p) - 1.0) <= 1e-12
    back = project(p)
    # relative in the chart where |x| is large, absolute near 0
    assert abs(back - x) <= 1e-12 * max(1.0, abs(x) ** 2)
    q = lift(back)
    assert np.abs(p - q).max() <= 1e-12


def test_large_affine_is_stable():
    p = lift(1e200 + 0j)
    assert np.all(np.isfinite(p))
    assert p[2] == pytest.approx(1.0)


def test_project_rejects_non_unit():
    with pytest.raises(InputError):
        project(np.array([1.0, 1.0, 0.0]))


def test_distance_equals_half_chord_and_matches_projection(rng):
    P, Q = random_unit(1000, rng), random_unit(1000, rng)
    half = 0.5 * np.linalg.norm(P - Q, axis=1)
    np.testing.assert_allclose(chordal_distance(P, Q), half, atol=1e-12)
    np.testing.assert_allclose(chordal_distance(project(P), project(Q)), half, atol=1e-12)


def test_metric_axioms(rng):
    P, Q, R = random_unit(500, rng), random_unit(500, rng), random_unit(500, rng)
    dpq, dqp = chordal_distance(P, Q), chordal_distance(Q, P)
    assert np.array_equal(dpq, dqp)
    assert np.all((dpq >= 0) & (dpq <= 1))
    assert np.all(chordal_distance(P, R) <= dpq + chordal_distance(Q, R) + 1e-12)


def test_rotation_invariance(rng):
    P, Q = random_unit(300, rng), random_unit(300, rng)
    Rm = random_rotation(rng)
    np.testing.assert_allclose(chordal_distance(P @ Rm.T, Q @ Rm.T), chordal_distance(P, Q), atol=1e-12)
    z = 0.5 + 0.25j
    w = rotate_affine(z, Rm)
    assert abs(np.linalg.norm(lift(w)) - 1) < 1e-12


def test_fs_potential():
    assert fs_potential(0j) == 0.0
    assert fs_potential(1 + 0j) == pytest.approx(0.6931471805599453, abs=1e-15)
    x = 3 + 0j
    assert fs_potential(x) - fs_potential(1 / np.conj(x)) == pytest.approx(2 * math.log(3), abs=1e-14)
    with pytest.raises(InputError):
        fs_potential(AT_INFINITY)


def test_sphere_point():
    s = SpherePoint.from_affine(1j)
    assert s.affine == 1j
    assert not s.at_infinity
    assert SpherePoint.from_unit([0, 0, 2]).at_infinity
    with pytest.raises(InputError):
        SpherePoint((1.0, 1.0, 0.0), 0j)


def test_fibonacci_lattice():
    one = fibonacci_lattice(1)
    assert len(one) == 1 and one.weights[0] == 1.0
    rule = fibonacci_lattice(2000)
    assert rule.generator is Generator.FIBONACCI
    assert np.all(np.abs(rule.nodes.mean(axis=0)) <= 0.01)
    assert abs(rule.integrate(lambda P: P[:, 0] ** 2) - 1 / 3) <= 2 / 2000
    with pytest.raises(InputError):
        fibonacci_lattice(0)


def test_product_grid_exactness():
    rule = product_grid(12)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(rule.integrate(lambda P: P), 0.0, atol=1e-14)
    # degree-10 monomial: int z^10 dsigma = 1/11
    assert rule.integrate(lambda P: P[:, 2] ** 10) == pytest.approx(1 / 11, abs=1e-14)
    assert len(product_grid_with_nodes(1000)) >= 1000


def test_rule_is_read_only():
    rule = fibonacci_lattice(10)
    with pytest.raises(ValueError):
        rule.nodes[0, 0] = 1.0


def test_discrete_measure_validation(rng):
    P = random_unit(3, rng)
    with pytest.raises(InputError):
        DiscreteMeasure(P, [0.5, 0.5, 0.5])
    with pytest.raises(InputError):
        DiscreteMeasure(P, [1.5, -0.5, 0.0])
    m = DiscreteMeasure.empirical([0j, 1j, AT_INFINITY])
    assert len(m) == 3
    np.testing.assert_allclose(m.atoms[2], [0, 0, 1])
