"""Point processes on the sphere: matrix model, MCMC and Fekete ascent.

The k-point ensemble lives on sections of O(k-1), whose L^2(sigma)-orthonormal
basis in the affine chart is ``e_j(x) = sqrt(k binom(k-1, j)) x^j`` with
pointwise norm ``|s(x)|^2 (1+|x|^2)^-(k-1)``.  With this weight, a
configuration has joint density proportional to ``|det M|^beta`` against the
uniform measure, where ``M[i, j] = e_i(x_j) (1+|x_j|^2)^-((k-1)/2)``.  For
beta = 2 this is exactly the law of the eigenvalues of ``A^-1 B`` for
independent complex Ginibre matrices.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import gammaln

from . import _backend
from .errors import DegenerateConfigurationError, InputError, NumericalError
from .geometry import (
    SpherePoint,
    chordal_matrix,
    fibonacci_lattice,
    lift,
    project,
)

SCHEMA_VERSION = 1


class Provenance(str, enum.Enum):
    MATRIX_MODEL = "matrix-model"
    MCMC = "mcmc"
    FEKETE = "fekete-ascent"
    MANUAL = "manual"


# ---------------------------------------------------------------------------
# Section basis
# ---------------------------------------------------------------------------


def log_norm_constants(k):
    """``0.5 * log(k * binom(k-1, j))`` for j = 0..k-1."""
    if k <= 0:
        raise InputError("k must be positive")
    j = np.arange(k)
    return 0.5 * (math.log(k) + gammaln(k) - gammaln(j + 1) - gammaln(k - j))


def orthonormal_basis_eval(x, k, weighted=False):
    """Evaluate the orthonormal basis of H^0(O(k-1)) at the affine point ``x``.

    With ``weighted=True`` the values are multiplied by the metric factor
    ``(1+|x|^2)^-((k-1)/2)``, which keeps them bounded for every x
    (including the point at infinity).
    """
    if k <= 0:
        raise InputError("k must be positive")
    if weighted:
        return weighted_basis(np.asarray([x]), k)[:, 0]
    x = complex(x)
    if math.isinf(abs(x)):
        raise InputError("unweighted sections are not finite at infinity")
    logc = log_norm_constants(k)
    j = np.arange(k)
    if x == 0:
        out = np.zeros(k, dtype=complex)
        out[0] = math.exp(logc[0])
        return out
    return np.exp(logc + j * math.log(abs(x))) * np.exp(1j * j * np.angle(x))


def _weighted_from_ab(loga, logb, theta, k):
    logc = log_norm_constants(k)
    j = np.arange(k)[:, None]
    with np.errstate(invalid="ignore"):
        la = np.where(j > 0, 0.5 * j * loga[None, :], 0.0)
        lb = np.where(j < k - 1, 0.5 * (k - 1 - j) * logb[None, :], 0.0)
    return np.exp(logc[:, None] + la + lb) * np.exp(1j * j * theta[None, :])


def weighted_basis(x, k):
    """Weighted basis at affine points ``x``; returns shape (k, len(x))."""
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    inf = np.isinf(x)
    r2 = np.where(inf, 0.0, np.abs(np.where(inf, 0.0, x)) ** 2)
    small = r2 <= 1.0
    t = np.where(small, r2, 1.0 / np.where(small, 1.0, r2))
    with np.errstate(divide="ignore"):
        # a = |x|^2/(1+|x|^2), b = 1 - a, each formed without cancellation
        loga = np.where(small, np.log(t) - np.log1p(t), -np.log1p(t))
        logb = np.where(small, -np.log1p(t), np.log(t) - np.log1p(t))
    loga = np.where(inf, 0.0, loga)
    logb = np.where(inf, -np.inf, logb)
    theta = np.where(inf, 0.0, np.angle(np.where(inf, 0.0, x)))
    return _weighted_from_ab(loga, logb, theta, k)


def weighted_basis_unit(P, k):
    """Weighted basis at unit vectors ``P`` (n, 3); returns shape (k, n)."""
    P = np.atleast_2d(P)
    z = np.clip(P[:, 2], -1.0, 1.0)
    with np.errstate(divide="ignore"):
        loga = np.log(0.5 * (1.0 + z))
        logb = np.log(0.5 * (1.0 - z))
    theta = np.arctan2(P[:, 1], P[:, 0])
    return _weighted_from_ab(loga, logb, theta, k)


# ---------------------------------------------------------------------------
# Configurations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Configuration:
    """One realisation of the k-point process.

    ``points`` holds affine coordinates (``inf`` marks the north pole) and is
    the canonical, serialised representation.
    """

    points: np.ndarray
    k: int
    beta: float = 2.0
    provenance: Provenance = Provenance.MANUAL
    seed: int | None = None
    unit_vectors: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=complex).ravel()
        if pts.shape[0] != self.k or self.k < 1:
            raise InputError(f"expected {self.k} points, got {pts.shape[0]}")
        if np.any(np.isnan(pts)):
            raise InputError("configuration contains NaN coordinates")
        pts.setflags(write=False)
        U = lift(pts)
        U.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "unit_vectors", U)
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        object.__setattr__(self, "beta", float(self.beta))

    @classmethod
    def from_unit_vectors(cls, P, k=None, **kw):
        P = np.asarray(P, dtype=float)
        P = P / np.linalg.norm(P, axis=1, keepdims=True)
        return cls(project(P), k if k is not None else P.shape[0], **kw)

    def __len__(self):
        return self.k

    def sphere_points(self):
        return [SpherePoint.from_affine(x) for x in self.points]

    def min_separation(self):
        """Smallest pairwise chordal distance (1.0 for a single point)."""
        if self.k < 2:
            return 1.0
        D = chordal_matrix(self.unit_vectors, self.unit_vectors)
        np.fill_diagonal(D, np.inf)
        return float(D.min())

    def validate(self):
        if self.min_separation() <= 0.0:
            raise DegenerateConfigurationError("two points coincide")
        return self

    def to_json(self):
        pts = [
            "inf" if math.isinf(abs(z)) else [float(z.real), float(z.imag)]
            for z in self.points
        ]
        return json.dumps(
            {
                "schema_version": SCHEMA_VERSION,
                "k": int(self.k),
                "beta": "inf" if math.isinf(self.beta) else float(self.beta),
                "provenance": self.provenance.value,
                "seed": None if self.seed is None else int(self.seed),
                "points": pts,
            }
        )

    @classmethod
    def from_json(cls, text):
        rec = json.loads(text)
        if rec.get("schema_version") != SCHEMA_VERSION:
            raise InputError(f"unsupported schema version {rec.get('schema_version')!r}")
        pts = [complex(math.inf, 0.0) if p == "inf" else complex(p[0], p[1])
               for p in rec["points"]]
        beta = math.inf if rec["beta"] == "inf" else float(rec["beta"])
        return cls(np.array(pts, dtype=complex), int(rec["k"]), beta,
                   Provenance(rec["provenance"]), rec.get("seed"))


# ---------------------------------------------------------------------------
# Section matrix and the density
# ---------------------------------------------------------------------------


class SectionMatrix:
    """Weighted basis evaluated at a configuration, with cached factorisations.

    Rows index basis sections, columns index points.
    """

    def __init__(self, config):
        if isinstance(config, Configuration):
            self.k = config.k
            self.entries = weighted_basis(config.points, config.k)
        else:
            P = np.atleast_2d(config)
            self.k = P.shape[0]
            self.entries = weighted_basis_unit(P, self.k)
        self.factorization = None
        self._inverse = None
        self.staleness = 0
        diag = None
        with np.errstate(divide="ignore"), warnings.catch_warnings():
            # singularity is reported through ``singular``
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            try:
                lu, piv = scipy.linalg.lu_factor(self.entries, check_finite=False)
                diag = np.abs(np.diag(lu))
                self.factorization = (lu, piv)
            except (ValueError, np.linalg.LinAlgError):  # pragma: no cover
                diag = np.zeros(self.k)
            # repeated points leave a roundoff-sized pivot rather than an exact zero
            ok = np.all(diag > 0) and not self._has_repeats(self.entries)
            self.log_abs_det = float(np.sum(np.log(diag))) if ok else -math.inf

    @staticmethod
    def _has_repeats(E):
        return np.unique(E.T, axis=0).shape[0] < E.shape[1]

    @property
    def singular(self):
        return not math.isfinite(self.log_abs_det)

    def inverse(self):
        if self.singular:
            raise DegenerateConfigurationError("section matrix is singular")
        if self._inverse is None or self.staleness:
            self._inverse = scipy.linalg.lu_solve(self.factorization, np.eye(self.k))
            self.staleness = 0
        return self._inverse

    def residual(self):
        return float(np.abs(self.entries @ self.inverse() - np.eye(self.k)).max())


def log_rho(config):
    """``log |det s_i(x_j)|`` in the metric norm; ``-inf`` if points coincide."""
    if config.k > 1 and config.min_separation() == 0.0:
        return -math.inf
    return SectionMatrix(config).log_abs_det


# ---------------------------------------------------------------------------
# Matrix model
# ---------------------------------------------------------------------------


def sample_ginibre_pair(k, rng):
    """Two k x k matrices with i.i.d. standard complex Gaussian entries."""
    if k < 1:
        raise InputError("k must be at least 1")
    s = math.sqrt(0.5)
    A = s * (rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k)))
    B = s * (rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k)))
    return A, B


def generalized_eigenvalues(A, B, qz_threshold=1e10):
    """Eigenvalues of ``A^-1 B``; QZ is used when A is poorly conditioned."""
    if np.linalg.cond(A) > qz_threshold:
        return scipy.linalg.eigvals(B, A)
    return np.linalg.eigvals(np.linalg.solve(A, B))


def spherical_ensemble_sample(k, rng, max_retries=10, seed=None):
    """One draw of the spherical ensemble via generalized eigenvalues.

    A numerically singular A (condition number above 1e12), an eigenvalue at
    infinity, or repeated eigenvalues trigger a redraw; all are
    probability-zero events.
    """
    if k < 1:
        raise InputError("k must be at least 1")
    for _ in range(max_retries):
        A, B = sample_ginibre_pair(k, rng)
        if np.linalg.cond(A) > 1e12:
            continue
        lam = generalized_eigenvalues(A, B)
        if not np.all(np.isfinite(lam)):
            continue
        cfg = Configuration(lam, k, 2.0, Provenance.MATRIX_MODEL, seed)
        if cfg.min_separation() > 0.0:
            return cfg
    raise NumericalError(f"matrix model failed {max_retries} times in a row")


# ---------------------------------------------------------------------------
# Metropolis-within-Gibbs for general beta
# ---------------------------------------------------------------------------


@dataclass
class MCMCStats:
    sweeps: int = 0
    proposals: int = 0
    accepted: int = 0
    max_inverse_residual: float = 0.0
    log_rho_trace: list = field(default_factory=list)

    @property
    def acceptance_rate(self):
        return self.accepted / self.proposals if self.proposals else 0.0


class MetropolisSampler:
    """Single-site Metropolis chain targeting ``|det M|^beta``.

    A sweep visits every point once in random order.  Proposals are a
    80/20 mixture of a tangent-plane Gaussian step (standard deviation
    ``step`` on the unit sphere, default ``2/sqrt(k)``) and an independent
    uniform redraw; both are symmetric, so the acceptance probability is
    ``min(1, |l_j(x')|^beta)`` evaluated from the cached inverse in O(k).
    Accepted moves update the inverse by Sherman-Morrison; it is rebuilt from
    scratch every k accepted moves or as soon as the updated inverse drifts
    by more than 1e-6.

    The instance owns its generator and caches and is not thread safe.
    """

    chunk = 256

    def __init__(self, k, beta, rng, init=None, step=None, backend=None, min_separation=0.0):
        if not beta > 0:
            raise InputError("beta must be positive")
        if k < 1:
            raise InputError("k must be at least 1")
        self.k = int(k)
        self.beta = float(beta)
        self.rng = rng
        self.step = 2.0 / math.sqrt(k) if step is None else float(step)
        self.kernels = _backend.core if backend is None else _backend.get(backend)
        self.min_separation = float(min_separation)
        if init is None:
            init = spherical_ensemble_sample(self.k, rng)
        P = init.unit_vectors if isinstance(init, Configuration) else np.asarray(init, float)
        if P.shape != (self.k, 3):
            raise InputError("initial state must have k points")
        self.P = np.ascontiguousarray(P, dtype=float).copy()
        self.logc = log_norm_constants(self.k)
        sm = SectionMatrix(self.P)
        self.Minv = np.ascontiguousarray(sm.inverse(), dtype=complex)
        self.stats = MCMCStats()

    def run(self, n_sweeps):
        """Advance the chain by ``n_sweeps`` sweeps; returns the stats object."""
        if n_sweeps < 1:
            raise InputError("n_sweeps must be at least 1")
        k = self.k
        done = 0
        while done < n_sweeps:
            c = min(self.chunk, n_sweeps - done)
            order = self.rng.permuted(np.tile(np.arange(k, dtype=np.intp), (c, 1)), axis=1)
            rnd = np.empty((c, k, 5))
            rnd[..., 0] = self.rng.random((c, k))
            rnd[..., 1:4] = self.rng.standard_normal((c, k, 3))
            rnd[..., 4] = 1.0 - self.rng.random((c, k))
            acc, trace, res = self.kernels.mcmc_sweeps(
                self.P, self.Minv, self.logc, self.beta, self.step, order, rnd,
                self.min_separation,
            )
            self.stats.accepted += int(acc)
            self.stats.proposals += c * k
            self.stats.sweeps += c
            self.stats.max_inverse_residual = max(self.stats.max_inverse_residual, float(res))
            self.stats.log_rho_trace.extend(float(t) for t in trace)
            done += c
        if not np.all(np.isfinite(self.stats.log_rho_trace[-done:])):
            raise NumericalError("log-density trace became non-finite")
        return self.stats

    def configuration(self, seed=None):
        return Configuration.from_unit_vectors(
            self.P, self.k, beta=self.beta, provenance=Provenance.MCMC, seed=seed
        )


def mcmc_beta_sample(k, beta, n_sweeps, rng, init=None, return_stats=False, **kw):
    """Final state of a ``n_sweeps``-sweep Metropolis chain for the beta-ensemble."""
    sampler = MetropolisSampler(k, beta, rng, init=init, **kw)
    stats = sampler.run(n_sweeps)
    cfg = sampler.configuration()
    return (cfg, stats) if return_stats else cfg


# ---------------------------------------------------------------------------
# Fekete ascent (beta = infinity)
# ---------------------------------------------------------------------------


def _tangent_frame(p):
    a = np.array([1.0, 0.0, 0.0]) if abs(p[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = a - np.dot(a, p) * p
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(p, e1)


def _local_maximize(fun, p, h, h_min=1e-9, grid=5):
    """Shrinking pattern search of ``fun`` (vectorised over (n, 3)) around p."""
    offs = np.linspace(-1.0, 1.0, grid)
    O1, O2 = np.meshgrid(offs, offs, indexing="ij")
    O1, O2 = O1.ravel(), O2.ravel()
    best = float(fun(p[None, :])[0])
    while h > h_min:
        e1, e2 = _tangent_frame(p)
        Q = p[None, :] + h * (O1[:, None] * e1 + O2[:, None] * e2)
        Q /= np.linalg.norm(Q, axis=1, keepdims=True)
        vals = fun(Q)
        i = int(np.argmax(vals))
        if vals[i] > best:
            best = float(vals[i])
            p = Q[i]
        else:
            h *= 0.5
    return p, best


def fekete_ascent(start, max_rounds=100, n_seeds=32, n_refine=4, tol=1e-9):
    """Cyclic coordinate ascent of ``log |det M|``.

    Each point in turn is moved to an approximate maximiser of its Lagrange
    section norm ``|l_j|``: candidates are the current point and an
    ``n_seeds``-node lattice, the best ``n_refine`` are refined by local
    pattern search, and the move is taken only if it raises ``|l_j|`` above
    1.  Stops when a round gains less than ``tol`` in ``log_rho``.
    """
    P = np.array(start.unit_vectors, dtype=float)
    k = start.k
    sm = SectionMatrix(P)
    if sm.singular:
        raise DegenerateConfigurationError("start configuration is degenerate")
    Minv = sm.inverse().copy()
    seeds = fibonacci_lattice(n_seeds).nodes
    h0 = 1.0 / math.sqrt(k)
    for _ in range(max_rounds):
        gain = 0.0
        for j in range(k):
            row = Minv[j]

            def lnorm(Q, row=row):
                return np.abs(row @ weighted_basis_unit(Q, k))

            cand = np.vstack((P[j][None, :], seeds))
            vals = lnorm(cand)
            best_p, best_v = P[j], 1.0
            for i in np.argsort(vals)[::-1][:n_refine]:
                q, v = _local_maximize(lnorm, cand[i], h0)
                if v > best_v:
                    best_p, best_v = q, v
            if best_v > 1.0 + 1e-14:
                v = weighted_basis_unit(best_p[None, :], k)[:, 0]
                u = Minv @ v
                uj = u[j]
                u[j] -= 1.0
                Minv -= np.outer(u, Minv[j]) / uj
                P[j] = best_p
                gain += math.log(abs(uj))
        sm = SectionMatrix(P)
        Minv = sm.inverse().copy()
        if gain < tol:
            break
    return Configuration.from_unit_vectors(P, k, beta=math.inf, provenance=Provenance.FEKETE)
