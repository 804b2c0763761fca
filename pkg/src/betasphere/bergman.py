"""Bergman kernel of O(k-1) on the sphere, Lagrange sections and plan costs.

All section values are taken in the weighted trivialisation used by
:mod:`betasphere.samplers`: a section ``s`` is represented by
``s(x) (1+|x|^2)^-((k-1)/2)`` in the affine chart, with the phase at the
north pole fixed by continuity in the reflected chart.  Absolute values are
then the pointwise metric norms, and Hermitian pairings of two sections are
plain products ``a * conj(b)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConditionWarning, DegenerateConfigurationError, InputError
from .geometry import Generator, QuadratureRule, as_unit, chordal_matrix, product_grid_with_nodes
from .samplers import Configuration, SectionMatrix, weighted_basis_unit

MIN_NODES_PER_K = 64


def _unit(x):
    return np.atleast_2d(as_unit(x))


def _log_kernel_from_d2(d2, k):
    if k == 1:
        return np.zeros_like(d2)
    with np.errstate(divide="ignore"):
        return math.log(k) + 0.5 * (k - 1) * np.log1p(-np.minimum(d2, 1.0))


def kernel_norm(z, w, k):
    """``|K_k(z, w)| = k (1 - d(z, w)^2)^((k-1)/2)``.

    ``z`` and ``w`` may be affine coordinates (``inf`` allowed), unit vectors
    or SpherePoints, and broadcast against each other.
    """
    if k < 1:
        raise InputError("k must be positive")
    u, v = as_unit(z), as_unit(w)
    d2 = 0.25 * np.sum((u - v) ** 2, axis=-1)
    out = np.exp(_log_kernel_from_d2(d2, k))
    return float(out) if np.ndim(out) == 0 else out


def kernel_value(z, w, k):
    """Complex kernel ``sum_j e_j(z) conj(e_j(w))`` in closed form.

    Equal to ``k * (sqrt(b_z b_w) + e^{i(t_z - t_w)} sqrt(a_z a_w))^(k-1)``
    with ``a = |x|^2 / (1+|x|^2)``, ``b = 1 - a`` and ``t = arg x``.
    """
    u, v = np.atleast_2d(as_unit(z)), np.atleast_2d(as_unit(w))
    az, bz = 0.5 * (1 + u[..., 2]), 0.5 * (1 - u[..., 2])
    aw, bw = 0.5 * (1 + v[..., 2]), 0.5 * (1 - v[..., 2])
    tz = np.arctan2(u[..., 1], u[..., 0])
    tw = np.arctan2(v[..., 1], v[..., 0])
    f = np.sqrt(bz * bw) + np.exp(1j * (tz - tw)) * np.sqrt(az * aw)
    return k * f ** (k - 1)


def kernel_basis_sum(z, w, k):
    """The same kernel summed term by term over the orthonormal basis."""
    Ez = weighted_basis_unit(_unit(z), k)
    Ew = weighted_basis_unit(_unit(w), k)
    return np.sum(Ez * np.conj(Ew), axis=0)


def bergman_measure_density(z, k):
    """Density of ``(1/k) K_k(x, x) dsigma`` against sigma; identically 1."""
    E = weighted_basis_unit(_unit(z), k)
    out = np.sum(np.abs(E) ** 2, axis=0) / k
    return float(out[0]) if np.ndim(z) == 0 or isinstance(z, complex) else out


# ---------------------------------------------------------------------------
# Lagrange sections
# ---------------------------------------------------------------------------


class LagrangeSystem:
    """Sections ``l_j`` of O(k-1) with ``|l_j(x_i)| = delta_ij``.

    ``coefficient_matrix[:, j]`` holds the coefficients of ``l_j`` in the
    orthonormal basis; it solves ``A^T C = I`` for the weighted section
    matrix A, which is the cofactor formula without the cofactors.
    """

    def __init__(self, config, coefficient_matrix=None):
        self.config = config
        self.base = SectionMatrix(config)
        if self.base.singular:
            raise DegenerateConfigurationError("configuration has coincident points")
        if coefficient_matrix is None:
            coefficient_matrix = scipy.linalg.lu_solve(
                self.base.factorization, np.eye(config.k), trans=1
            )
        self.coefficient_matrix = np.asarray(coefficient_matrix)
        self.coefficient_matrix.setflags(write=False)

    @property
    def k(self):
        return self.config.k

    def evaluate(self, x):
        """Weighted values of every ``l_j`` at ``x``; shape (k, n)."""
        return self.coefficient_matrix.T @ weighted_basis_unit(_unit(x), self.k)

    def norms(self, x):
        return np.abs(self.evaluate(x))

    def delta_residual(self):
        """``max_ij | |l_j(x_i)| - delta_ij |``."""
        L = np.abs(self.evaluate(self.config.unit_vectors))
        return float(np.abs(L - np.eye(self.k)).max())

    def with_fault(self, i, j, eps):
        """Copy with one coefficient perturbed; used to exercise the checks."""
        C = self.coefficient_matrix.copy()
        C[i, j] += eps
        return LagrangeSystem(self.config, C)


def lagrange_sections(config):
    return LagrangeSystem(config)


def ratio_identity_error(system, j, x_new):
    """``|log|l_j(x')| - (log rho(swap) - log rho)|`` for one replacement."""
    cfg = system.config
    lhs = math.log(float(system.norms(x_new)[j, 0]))
    P = np.array(cfg.unit_vectors)
    P[j] = _unit(x_new)[0]
    swapped = SectionMatrix(P).log_abs_det
    return abs(lhs - (swapped - system.base.log_abs_det))


# ---------------------------------------------------------------------------
# Off-diagonal decay
# ---------------------------------------------------------------------------


def _rotation_to(p):
    """A rotation matrix taking the south pole to the unit vector ``p``."""
    s = np.array([0.0, 0.0, -1.0])
    p = np.asarray(p, dtype=float)
    c = float(np.dot(s, p))
    if c > 1.0 - 1e-15:
        return np.eye(3)
    if c < -1.0 + 1e-15:
        return np.diag([1.0, -1.0, -1.0])
    ax = np.cross(s, p)
    sn = np.linalg.norm(ax)
    ax /= sn
    K = np.array([[0, -ax[2], ax[1]], [ax[2], 0, -ax[0]], [-ax[1], ax[0], 0]])
    return np.eye(3) + sn * K + (1 - c) * (K @ K)


def _angle_grid(n_angle, n_azimuth):
    """Gauss-Legendre in the polar angle from the south pole times a uniform azimuth.

    ``d = sin(phi/2)`` and ``sqrt(1 - d^2) = cos(phi/2)`` are both smooth in
    the angle, so integrands such as ``d |K|`` are integrated spectrally.
    """
    t, wt = np.polynomial.legendre.leggauss(n_angle)
    ang = 0.5 * math.pi * (t + 1.0)
    az = 2.0 * math.pi * (np.arange(n_azimuth) + 0.5) / n_azimuth
    A, AZ = np.meshgrid(ang, az, indexing="ij")
    rho = np.sin(A)
    nodes = np.column_stack(((rho * np.cos(AZ)).ravel(), (rho * np.sin(AZ)).ravel(), -np.cos(A).ravel()))
    w = np.repeat(wt * np.sin(ang), n_azimuth)
    return QuadratureRule(nodes, w / w.sum(), Generator.PRODUCT)


def default_rule(k, y=None):
    """Quadrature with at least ``max(64 k, 4096)`` nodes.

    Without ``y`` this is the plain product grid.  With ``y`` the grid is
    Gauss-Legendre in the angle from ``y``: ``d(., y)`` has a cone point at
    ``y`` that a grid in the polar cosine resolves only algebraically.
    """
    M = max(MIN_NODES_PER_K * k, 4096)
    if y is None:
        return product_grid_with_nodes(M)
    n_angle = max(1, math.ceil(math.sqrt(M / 2.0)))
    rule = _angle_grid(n_angle, max(1, math.ceil(M / n_angle)))
    return rule.rotated(_rotation_to(_unit(y)[0]))


def offdiagonal_integral(y, k, quad=None):
    """``int d(x, y) |K_k(x, y)| dsigma(x)`` by quadrature.

    The exact value is ``k B(3/2, (k+1)/2)`` for every y.

    Raises
    ------
    InputError
        ``quad`` has fewer than 64 k nodes.
    """
    if k < 1:
        raise InputError("k must be positive")
    if quad is None:
        quad = default_rule(k, y)
    if len(quad) < MIN_NODES_PER_K * k:
        raise InputError(f"quadrature has {len(quad)} nodes; need at least {MIN_NODES_PER_K * k}")
    d = chordal_matrix(quad.nodes, _unit(y))[:, 0]
    kn = np.exp(_log_kernel_from_d2(d * d, k))
    return float(quad.weights @ (d * kn))


def offdiagonal_integral_exact(k):
    return float(k * math.exp(math.lgamma(1.5) + math.lgamma((k + 1) / 2) - math.lgamma(k / 2 + 2)))


@dataclass(frozen=True)
class DecayReport:
    k: int
    samples: int
    violations: int
    max_log_excess: float
    tight_at_zero: bool

    @property
    def passed(self):
        return self.violations == 0 and self.tight_at_zero


def gaussian_decay_check(k, samples, rng):
    """Check ``|K_k(z, w)|^2 <= k^2 exp(-(k-1) d^2)`` on random pairs.

    Half the pairs are independent uniform points, half are local pairs at
    separation of order ``1/sqrt(k)`` where the bound is nearly tight.  The
    comparison runs in the log domain, so it never underflows.
    ``max_log_excess`` is ``max(log lhs - log rhs)``, which must be <= 0.
    """
    if k < 2:
        raise InputError("gaussian_decay_check needs k >= 2")
    n1 = samples // 2
    g = rng.standard_normal((samples, 3))
    X = g / np.linalg.norm(g, axis=1, keepdims=True)
    h = rng.standard_normal((samples, 3))
    Y = np.empty_like(X)
    Y[:n1] = h[:n1] / np.linalg.norm(h[:n1], axis=1, keepdims=True)
    local = X[n1:] + (3.0 / math.sqrt(k)) * (h[n1:] - np.sum(h[n1:] * X[n1:], axis=1, keepdims=True) * X[n1:])
    Y[n1:] = local / np.linalg.norm(local, axis=1, keepdims=True)
    d2 = 0.25 * np.sum((X - Y) ** 2, axis=1)
    lhs = 2.0 * _log_kernel_from_d2(d2, k)
    rhs = 2.0 * math.log(k) - (k - 1) * d2
    excess = lhs - rhs
    finite = np.isfinite(excess) | (lhs == -np.inf)
    viol = int(np.sum((excess > 0) | ~finite))
    zero = 2.0 * _log_kernel_from_d2(np.zeros(1), k)[0] == 2.0 * math.log(k)
    return DecayReport(k, samples, viol, float(np.max(excess)), bool(zero))


# ---------------------------------------------------------------------------
# The interpolation transport plan
# ---------------------------------------------------------------------------


def _plan_density(system, nodes):
    """``g_j(x) = l_j(x) conj(K(x, x_j))``, shape (n, k), and the distances."""
    k = system.k
    E = weighted_basis_unit(nodes, k)
    L = system.coefficient_matrix.T @ E
    Kx = E.T @ np.conj(weighted_basis_unit(system.config.unit_vectors, k))
    return L.T * np.conj(Kx)


def transport_plan_cost(config, quad=None, chunk=4096):
    """Total variation cost ``int d d|p|`` of the interpolation plan.

    ``p = (1/k) sum_j delta_{x_j}(y) <K(x, x_j), l_j(x)> dsigma(x)`` has
    marginals sigma and the empirical measure, so its cost bounds W from
    above.  Uses ``|K|`` in closed form and ``|l_j|`` from the Lagrange
    system.
    """
    system = config if isinstance(config, LagrangeSystem) else LagrangeSystem(config)
    k = system.k
    if quad is None:
        quad = default_rule(k)
    X = system.config.unit_vectors
    total = 0.0
    for lo in range(0, len(quad), chunk):
        nodes = quad.nodes[lo:lo + chunk]
        d = chordal_matrix(nodes, X)
        kn = np.exp(_log_kernel_from_d2(d * d, k))
        ln = np.abs(system.coefficient_matrix.T @ weighted_basis_unit(nodes, k)).T
        total += float(quad.weights[lo:lo + chunk] @ np.sum(d * ln * kn, axis=1))
    return total / k


@dataclass(frozen=True)
class MarginalReport:
    y_marginal_error: float
    worst_j: int
    x_marginal_error: float
    worst_x: tuple
    tol: float
    min_separation: float

    @property
    def passed(self):
        return self.y_marginal_error <= self.tol and self.x_marginal_error <= self.tol


def plan_marginal_check(config, quad=None, rng=None, n_test=100, tol=1e-6,
                        warn_separation=1e-3):
    """Verify both marginals of the interpolation plan.

    (a) ``int <K(x, x_j), l_j(x)> dsigma = 1`` for every j (reproducing
    property); (b) ``(1/k) sum_j <K(x, x_j), l_j(x)> = 1`` at ``n_test``
    random points (interpolation of ``K(., x)``).  A configuration with
    points closer than ``warn_separation`` triggers a ConditionWarning.
    """
    system = config if isinstance(config, LagrangeSystem) else LagrangeSystem(config)
    k = system.k
    sep = system.config.min_separation()
    if sep < warn_separation:
        warnings.warn(
            f"near-coincident points (separation {sep:.2e}); Lagrange sections are ill-conditioned",
            ConditionWarning,
            stacklevel=2,
        )
    if quad is None:
        quad = product_grid_with_nodes(max(16384, MIN_NODES_PER_K * k))
    G = _plan_density(system, quad.nodes)
    y_err = np.abs(quad.weights @ G - 1.0)
    rng = np.random.default_rng(0) if rng is None else rng
    g = rng.standard_normal((n_test, 3))
    T = g / np.linalg.norm(g, axis=1, keepdims=True)
    x_err = np.abs(_plan_density(system, T).sum(axis=1) / k - 1.0)
    jx = int(np.argmax(x_err))
    return MarginalReport(
        y_marginal_error=float(y_err.max()),
        worst_j=int(np.argmax(y_err)),
        x_marginal_error=float(x_err[jx]),
        worst_x=tuple(float(c) for c in T[jx]),
        tol=tol,
        min_separation=sep,
    )


def gram_residual(k, quad=None):
    """``max |int e_i conj(e_j) dsigma - delta_ij|`` under a product grid."""
    if quad is None:
        quad = product_grid_with_nodes(max(4 * k * k, 512))
    E = weighted_basis_unit(quad.nodes, k)
    G = (E * quad.weights) @ np.conj(E).T
    return float(np.abs(G - np.eye(k)).max())


__all__ = [
    "Configuration",
    "DecayReport",
    "LagrangeSystem",
    "MarginalReport",
    "bergman_measure_density",
    "default_rule",
    "gaussian_decay_check",
    "gram_residual",
    "kernel_basis_sum",
    "kernel_norm",
    "kernel_value",
    "lagrange_sections",
    "offdiagonal_integral",
    "offdiagonal_integral_exact",
    "plan_marginal_check",
    "ratio_identity_error",
    "transport_plan_cost",
]
