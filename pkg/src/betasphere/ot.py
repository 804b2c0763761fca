"""Kantorovich-Wasserstein distance between discrete measures on the sphere.

Costs are chordal distances (diameter-one normalisation).  Two solvers are
provided: an exact transportation network simplex that returns optimal dual
potentials, and a log-domain Sinkhorn solver with epsilon scaling for
instances above the exact size cap.
"""

from __future__ import annotations

import functools
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import _backend
from .errors import ConditionWarning, ConvergenceError, InputError, LipschitzViolation, SizeCapExceeded
from .geometry import DiscreteMeasure, as_unit, chordal_matrix, fibonacci_lattice

log = logging.getLogger(__name__)

EXACT_SIZE_CAP = 64 * 16384
ASSIGNMENT_CAP = 8192
_SUM_TOL = 1e-9


@dataclass
class TransportResult:
    """Transport value, plan and dual certificate.

    For ``method == "exact"`` the value is optimal and ``dual_value`` equals
    it up to roundoff.  For ``method == "entropic"`` the value is the cost of
    a feasible (rounded) plan, hence an upper bound on W, and ``dual_value``
    is the dual objective at c-transformed potentials, hence a lower bound.
    """

    value: float
    plan: np.ndarray
    dual_potentials: tuple
    method: str
    iterations: int
    feasibility_residual: float
    dual_value: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def duality_gap(self):
        return abs(self.value - self.dual_value)


def cost_matrix(mu, nu):
    """Chordal cost between the atoms of two measures, entries in [0, 1]."""
    return chordal_matrix(mu.atoms, nu.atoms)


def _check_weights(mu, nu):
    for name, m in (("mu", mu), ("nu", nu)):
        if abs(m.weights.sum() - 1.0) > _SUM_TOL:
            raise InputError(f"{name} weights sum to {m.weights.sum()!r}")


def exact_ot(mu, nu, C=None, size_cap=EXACT_SIZE_CAP):
    """Exact W between ``mu`` and ``nu`` by the transportation simplex.

    Parameters
    ----------
    mu, nu : DiscreteMeasure
    C : ndarray, optional
        Precomputed cost matrix.
    size_cap : int
        Largest ``len(mu) * len(nu)`` accepted.

    Raises
    ------
    SizeCapExceeded
        The instance is too large; use :func:`entropic_ot`.
    """
    _check_weights(mu, nu)
    n1, n2 = len(mu), len(nu)
    if n1 == n2 and n1 * n2 > size_cap and n1 <= ASSIGNMENT_CAP and _uniform(mu) and _uniform(nu):
        return _assignment_ot(mu, nu, C)
    if n1 * n2 > size_cap:
        raise SizeCapExceeded(
            f"{n1} x {n2} exceeds the exact-solver cap of {size_cap} entries; "
            "use entropic_ot or raise size_cap"
        )
    if C is None:
        C = cost_matrix(mu, nu)
    a, b = mu.weights, nu.weights
    ia = np.flatnonzero(a > 0)
    ib = np.flatnonzero(b > 0)
    a_s = a[ia]
    b_s = b[ib] * (a_s.sum() / b[ib].sum())
    Cs = np.ascontiguousarray(C[np.ix_(ia, ib)])
    flow, u_s, v_s, pivots, status = _backend.network_simplex(a_s, b_s, Cs)
    if status != 0:  # pragma: no cover - no pivot limit is set
        raise ConvergenceError("network simplex hit its pivot limit", iterations=pivots)

    plan = np.zeros((n1, n2))
    plan[np.ix_(ia, ib)] = flow
    # zero-mass atoms get c-transformed potentials so the dual stays feasible
    v = np.empty(n2)
    v[ib] = v_s
    if len(ib) < n2:
        rest = np.setdiff1d(np.arange(n2), ib)
        v[rest] = (C[np.ix_(ia, rest)] - u_s[:, None]).min(axis=0)
    u = np.empty(n1)
    u[ia] = u_s
    if len(ia) < n1:
        rest = np.setdiff1d(np.arange(n1), ia)
        u[rest] = (C[rest] - v[None, :]).min(axis=1)
    shift = u.mean()
    u -= shift
    v += shift

    value = float(np.sum(plan * C))
    dual = float(a @ u + b @ v)
    resid = max(np.abs(plan.sum(axis=1) - a).sum(), np.abs(plan.sum(axis=0) - b).sum())
    reduced = C - u[:, None] - v[None, :]
    slack = float(np.abs(reduced[plan > 0]).max()) if np.any(plan > 0) else 0.0
    return TransportResult(
        value=value,
        plan=plan,
        dual_potentials=(u, v),
        method="exact",
        iterations=pivots,
        feasibility_residual=float(resid),
        dual_value=dual,
        diagnostics={
            "min_reduced_cost": float(reduced.min()),
            "complementary_slackness": slack,
            "backend": _backend.BACKEND,
        },
    )


def _uniform(m):
    w = m.weights
    return float(w.max() - w.min()) <= 1e-15


def _assignment_ot(mu, nu, C=None):
    """Equal counts and uniform weights: an optimal plan is a permutation.

    The duals are the double c-transform of zero, feasible but not
    necessarily optimal, so ``dual_value`` is a certified lower bound.
    """
    if C is None:
        C = cost_matrix(mu, nu)
    n = len(mu)
    rows, cols = linear_sum_assignment(C)
    plan = np.zeros_like(C)
    plan[rows, cols] = 1.0 / n
    v = C.min(axis=0)
    u = (C - v[None, :]).min(axis=1)
    value = float(C[rows, cols].sum() / n)
    dual = float(mu.weights @ u + nu.weights @ v)
    return TransportResult(
        value=value, plan=plan, dual_potentials=(u, v), method="exact", iterations=0,
        feasibility_residual=0.0, dual_value=dual,
        diagnostics={"fast_path": "assignment", "backend": "scipy"},
    )


def _round_to_marginals(P, a, b):
    """Project a nonnegative matrix onto the transport polytope (Altschuler et al.)."""
    r = P.sum(axis=1)
    P = P * np.minimum(1.0, a / np.where(r > 0, r, 1.0))[:, None]
    c = P.sum(axis=0)
    P = P * np.minimum(1.0, b / np.where(c > 0, c, 1.0))[None, :]
    err_a = a - P.sum(axis=1)
    err_b = b - P.sum(axis=0)
    total = err_a.sum()
    if total > 0:
        P = P + np.outer(err_a, err_b) / total
    return P


def _response(f, loga, C, eps):
    """Soft c-transform ``g`` of ``f`` and the column-stochastic matrix ``pi``.

    With ``g`` exact for ``f`` the plan is ``b_j pi_ij``: its columns are
    exact and its row sums are ``pi @ b``.
    """
    Z = loga[:, None] + (f[:, None] - C) / eps
    m = Z.max(axis=0)
    E = np.exp(Z - m)
    s = E.sum(axis=0)
    return -eps * (np.log(s) + m), E / s


class _SemiDual:
    """Concave ``F(f) = <a, f> + <b, g(f)>`` whose maximiser is the Sinkhorn fixed point."""

    def __init__(self, a, b, C, eps):
        self.a, self.b, self.C, self.eps = a, b, C, eps
        self.loga = np.log(a)

    def evaluate(self, f):
        g, pi = _response(f, self.loga, self.C, self.eps)
        r = pi @ self.b
        return float(self.a @ f + self.b @ g), g, pi, r

    def newton_direction(self, pi, r):
        # S = sum_j b_j (diag(pi_j) - pi_j pi_j^T) is minus eps times the Hessian;
        # its null space is the constant vector, removed by the rank-one shift
        S = np.diag(r) - (pi * self.b) @ pi.T
        n = len(r)
        S += (np.trace(S) / n**2) * np.ones((n, n))
        try:
            return self.eps * np.linalg.solve(S, self.a - r)
        except np.linalg.LinAlgError:
            return None


def entropic_ot(mu, nu, epsilon_final=1e-3, tol=1e-6, max_iter=10000, C=None,
                stage_tol=1e-4, newton_after=100):
    """Sinkhorn estimate of W with geometric epsilon scaling.

    The regularisation is halved from ``max(C)`` down to ``epsilon_final``,
    warm-starting each stage from the previous potentials.  Iterations run in
    the log domain.  A stage that has not met its tolerance after
    ``newton_after`` Sinkhorn sweeps continues with damped Newton steps on
    the semi-dual in the potential of the smaller measure, which converges
    where plain Sinkhorn crawls (near-ties at small epsilon).  The returned
    value is the transport cost of the rounded plan without the entropy term.

    Raises
    ------
    ConvergenceError
        A stage exceeded ``max_iter`` iterations; carries the last L1
        marginal residual.
    """
    _check_weights(mu, nu)
    if epsilon_final <= 0 or tol <= 0:
        raise InputError("epsilon_final and tol must be positive")
    if C is None:
        C = cost_matrix(mu, nu)
    a_full, b_full = mu.weights, nu.weights
    ia = np.flatnonzero(a_full > 0)
    ib = np.flatnonzero(b_full > 0)
    a, b = a_full[ia], b_full[ib]
    b = b * (a.sum() / b.sum())
    Cs = C[np.ix_(ia, ib)]
    flip = len(a) > len(b)
    if flip:
        a, b, Cs = b, a, Cs.T
    Cs = np.ascontiguousarray(Cs)

    ladder = []
    eps = max(float(Cs.max()), epsilon_final)
    while eps > epsilon_final:
        ladder.append(eps)
        eps /= 2.0
    ladder.append(epsilon_final)

    total_iter = 0
    newton_steps = 0
    history = []
    f = np.zeros(len(a))
    for stage, eps in enumerate(ladder):
        last = stage == len(ladder) - 1
        target = tol if last else max(tol, stage_tol)
        sd = _SemiDual(a, b, Cs, eps)
        F, g, pi, r = sd.evaluate(f)
        for it in range(1, max_iter + 1):
            err = float(np.abs(r - a).sum())
            if err <= target:
                break
            step = None
            if it > newton_after:
                step = sd.newton_direction(pi, r)
            if step is not None:
                slope = float((a - r) @ step)
                t = 1.0
                while t > 1e-10:
                    F_new, g_new, pi_new, r_new = sd.evaluate(f + t * step)
                    if F_new >= F + 1e-4 * t * slope:
                        break
                    t *= 0.5
                else:
                    step = None
                if step is not None:
                    newton_steps += 1
                    f = f + t * step
                    F, g, pi, r = F_new, g_new, pi_new, r_new
            if step is None:
                f = f - eps * (np.log(r) - sd.loga)
                F, g, pi, r = sd.evaluate(f)
        else:
            raise ConvergenceError(
                f"Sinkhorn did not converge at eps={eps:g}: residual {err:.3e}",
                last_residual=err,
                iterations=total_iter + max_iter,
            )
        total_iter += it
        P = _round_to_marginals(pi * b[None, :], a, b)
        history.append((eps, float(np.sum(P * Cs))))

    if flip:
        P, f, g, a, b, Cs = P.T, g, f, b, a, Cs.T
    plan = np.zeros(C.shape)
    plan[np.ix_(ia, ib)] = P
    value = float(np.sum(plan * C))
    # double c-transform of f over all atoms gives a feasible dual pair
    g_t = (C[ia] - f[:, None]).min(axis=0)
    f_t = (C - g_t[None, :]).min(axis=1)
    dual = float(a_full @ f_t + b_full @ g_t)
    resid = max(np.abs(plan.sum(axis=1) - a_full).sum(), np.abs(plan.sum(axis=0) - b_full).sum())
    return TransportResult(
        value=value,
        plan=plan,
        dual_potentials=(f_t, g_t),
        method="entropic",
        iterations=total_iter,
        feasibility_residual=float(resid),
        dual_value=dual,
        diagnostics={"sinkhorn_residual": float(err), "ladder": history,
                     "epsilon_final": epsilon_final, "newton_steps": newton_steps},
    )


def dual_lipschitz_bound(f_mu, f_nu, mu, nu, tol=1e-9, chunk=1024):
    """Lower bound ``|int f dmu - int f dnu|`` for a 1-Lipschitz test function.

    ``f_mu`` and ``f_nu`` are the values of ``f`` on the atoms of ``mu`` and
    ``nu``.  The Lipschitz condition is verified on every pair of atoms.

    Raises
    ------
    LipschitzViolation
        Some pair has ``|f(x) - f(y)| > d(x, y) + tol``.
    """
    f_mu = np.asarray(f_mu, dtype=float)
    f_nu = np.asarray(f_nu, dtype=float)
    if f_mu.shape != (len(mu),) or f_nu.shape != (len(nu),):
        raise InputError("test-function values must match the atom counts")
    X = np.vstack((mu.atoms, nu.atoms))
    F = np.concatenate((f_mu, f_nu))
    for lo in range(0, len(F), chunk):
        D = chordal_matrix(X[lo:lo + chunk], X)
        excess = np.abs(F[lo:lo + chunk, None] - F[None, :]) - D
        idx = np.argmax(excess)
        i, j = divmod(idx, excess.shape[1])
        if excess[i, j] > tol:
            raise LipschitzViolation(
                f"test function is not 1-Lipschitz on atoms {lo + i} and {j} "
                f"(excess {excess[i, j]:.3e})",
                pair=(lo + i, int(j)),
                excess=float(excess[i, j]),
            )
    return float(abs(mu.weights @ f_mu - nu.weights @ f_nu))


@functools.lru_cache(maxsize=8)
def uniform_lattice_measure(M):
    """The M-node Fibonacci discretisation of the uniform measure."""
    return fibonacci_lattice(M).as_measure()


def default_lattice_size(n):
    return max(16 * n, 4096)


def _points_as_unit(points):
    P = getattr(points, "unit_vectors", None)
    if P is None:
        P = as_unit(points)
    return np.atleast_2d(P)


def distance_to_uniform(points, M=None, method="auto", return_result=False, **kwargs):
    """W between the empirical measure of ``points`` and the uniform measure.

    The uniform measure is discretised by the M-node Fibonacci lattice;
    ``M`` defaults to ``max(16 n, 4096)``; below ``16 n`` a ConditionWarning
    is issued because the lattice error is then comparable to W itself.
    ``method`` is "exact", "entropic" or "auto" (exact within the size cap).
    """
    P = _points_as_unit(points)
    n = P.shape[0]
    if M is None:
        M = default_lattice_size(n)
    if M < 16 * n:
        warnings.warn(
            f"lattice size {M} is below 16 * {n}; the discretisation error may dominate W",
            ConditionWarning,
            stacklevel=2,
        )
    mu = DiscreteMeasure.empirical(P)
    nu = uniform_lattice_measure(M)
    if method == "auto":
        square = n == M and n <= ASSIGNMENT_CAP
        method = "exact" if n * M <= EXACT_SIZE_CAP or square else "entropic"
    if method == "exact":
        res = exact_ot(mu, nu, **kwargs)
    elif method == "entropic":
        res = entropic_ot(mu, nu, **kwargs)
    else:
        raise InputError(f"unknown OT method {method!r}")
    return res if return_result else res.value
