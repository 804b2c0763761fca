"""Geometry of the Riemann sphere.

Points are carried either as unit vectors in R^3 or as affine (stereographic)
coordinates.  The projection is taken from the north pole, so the south pole
``(0, 0, -1)`` maps to ``0`` and the north pole maps to :data:`AT_INFINITY`.

Distances use the chordal metric normalised to a sphere of diameter one::

    d(z, w) = |z - w| / sqrt((1 + |z|^2) (1 + |w|^2))

which is half the Euclidean chord between the corresponding unit vectors.
The geodesic distance on the unit sphere is ``2 * arcsin(d)``, so the two
metrics are equivalent with constants 1 and pi/2 (up to the factor 2 of the
radius).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.spatial.distance import cdist
from scipy.spatial.transform import Rotation

from .errors import InputError

AT_INFINITY = complex(math.inf, 0.0)

_GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0
_UNIT_TOL = 1e-12


def is_infinite(x):
    """Elementwise test for the at-infinity marker."""
    return np.isinf(np.asarray(x))


def lift(x):
    """Map affine coordinates to unit vectors.

    Parameters
    ----------
    x : complex or array_like of complex
        Affine coordinates; ``inf`` entries map to the north pole.

    Returns
    -------
    ndarray, shape (..., 3)
    """
    x = np.asarray(x, dtype=complex)
    out = np.empty(x.shape + (3,))
    inf = np.isinf(x)
    r = np.abs(x)
    big = (r > 1.0) & ~inf
    # |x| > 1: evaluate through the reflected chart u = 1/conj(x); avoids |x|^2 overflow
    u = np.where(big, 1.0 / np.conj(np.where(big, x, 1.0)), np.where(inf, 0.0, x))
    s = np.abs(u) ** 2
    denom = 1.0 + s
    out[..., 0] = 2.0 * u.real / denom
    out[..., 1] = 2.0 * u.imag / denom
    z = (s - 1.0) / denom
    out[..., 2] = np.where(big, -z, z)
    out[inf] = (0.0, 0.0, 1.0)
    return out


def project(p):
    """Stereographic projection of unit vectors to affine coordinates.

    Raises
    ------
    InputError
        If an input vector is not normalised within 1e-12.
    """
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 3:
        raise InputError("unit vectors must have a trailing axis of length 3")
    norms = np.linalg.norm(p, axis=-1)
    if np.any(np.abs(norms - 1.0) > _UNIT_TOL):
        raise InputError("project() requires unit vectors (norm 1 within 1e-12)")
    p1, p2, p3 = p[..., 0], p[..., 1], p[..., 2]
    north = (p3 >= 1.0) | ((p1 == 0.0) & (p2 == 0.0) & (p3 > 0))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        lower = (p1 + 1j * p2) / (1.0 - p3)
        # upper hemisphere: (p1 + i p2)/(1 - p3) == (1 + p3)/(p1 - i p2), no cancellation
        upper = (1.0 + p3) / (p1 - 1j * p2)
    x = np.where(p3 > 0, upper, lower)
    x = np.where(north, AT_INFINITY, x)
    if x.ndim == 0:
        return complex(x)
    return x


def as_unit(x):
    """Coerce SpherePoints, affine coordinates or unit vectors to unit vectors."""
    if isinstance(x, SpherePoint):
        return np.asarray(x.unit_vector)
    if isinstance(x, (list, tuple)) and x and isinstance(x[0], SpherePoint):
        return np.array([p.unit_vector for p in x])
    arr = np.asarray(x)
    if np.iscomplexobj(arr) or arr.ndim == 0 or arr.shape[-1] != 3:
        return lift(arr)
    return arr.astype(float)


def chordal_distance(p, q):
    """Chordal distance in the diameter-one normalisation.

    Accepts :class:`SpherePoint` objects, affine coordinates (complex, with
    ``inf`` for the north pole) or unit vectors, broadcasting over leading
    axes.  Returns values in ``[0, 1]``.
    """
    u = as_unit(p)
    v = as_unit(q)
    d = 0.5 * np.linalg.norm(u - v, axis=-1)
    d = np.minimum(d, 1.0)
    if d.ndim == 0:
        return float(d)
    return d


def chordal_matrix(P, Q):
    """All pairwise chordal distances between unit-vector arrays ``P`` and ``Q``."""
    return np.minimum(0.5 * cdist(np.atleast_2d(P), np.atleast_2d(Q)), 1.0)


def fs_potential(x):
    """Fubini-Study potential ``log(1 + |x|^2)`` in the affine chart."""
    x = np.asarray(x, dtype=complex)
    if np.any(np.isinf(x)):
        raise InputError("fs_potential needs finite affine coordinates")
    val = np.log1p(np.abs(x) ** 2)
    if val.ndim == 0:
        return float(val)
    return val


def random_rotation(rng):
    """Haar-random rotation matrix drawn from ``rng``."""
    return Rotation.random(random_state=rng).as_matrix()


def rotate_affine(x, R):
    """Apply the rotation matrix ``R`` to affine coordinates."""
    return project(lift(x) @ np.asarray(R).T)


def random_unit_vectors(n, rng):
    g = rng.standard_normal((n, 3))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass(frozen=True)
class SpherePoint:
    """A point on the Riemann sphere, in both embedding and affine form."""

    unit_vector: tuple
    affine: complex

    def __post_init__(self):
        u = np.asarray(self.unit_vector, dtype=float)
        if u.shape != (3,) or abs(np.linalg.norm(u) - 1.0) > _UNIT_TOL:
            raise InputError("unit_vector must be a normalised 3-vector")

    @classmethod
    def from_affine(cls, x):
        x = complex(x)
        return cls(tuple(float(c) for c in lift(x)), x)

    @classmethod
    def from_unit(cls, p):
        p = np.asarray(p, dtype=float)
        p = p / np.linalg.norm(p)
        return cls(tuple(float(c) for c in p), project(p))

    @property
    def at_infinity(self):
        return math.isinf(self.affine.real) or math.isinf(self.affine.imag)


class Generator(str, enum.Enum):
    FIBONACCI = "fibonacci-lattice"
    PRODUCT = "product-grid"


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights discretising the normalised area measure."""

    nodes: np.ndarray
    weights: np.ndarray
    generator: Generator
    affine: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        weights = np.ascontiguousarray(self.weights, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 3 or nodes.shape[0] != weights.shape[0]:
            raise InputError("nodes must be (M, 3) and match the weights")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "affine", project(nodes))

    def __len__(self):
        return self.weights.shape[0]

    def integrate(self, f):
        """Integrate ``f`` (callable on (M, 3) unit vectors, or a value array)."""
        vals = f(self.nodes) if callable(f) else np.asarray(f)
        return np.tensordot(self.weights, vals, axes=(0, 0))

    def rotated(self, R):
        nodes = self.nodes @ np.asarray(R).T
        nodes /= np.linalg.norm(nodes, axis=1, keepdims=True)
        return QuadratureRule(nodes, self.weights, self.generator)

    def as_measure(self):
        return DiscreteMeasure(self.nodes, self.weights)


def fibonacci_lattice(M):
    """Golden-angle spiral with ``M`` equal-weight nodes."""
    if M < 1:
        raise InputError("fibonacci_lattice needs M >= 1")
    i = np.arange(M, dtype=float)
    z = 1.0 - 2.0 * (i + 0.5) / M
    rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = 2.0 * math.pi * i / _GOLDEN
    nodes = np.column_stack((rho * np.cos(phi), rho * np.sin(phi), z))
    return QuadratureRule(nodes, np.full(M, 1.0 / M), Generator.FIBONACCI)


def product_grid(n_polar, n_azimuth=None):
    """Gauss-Legendre in the polar cosine times a uniform azimuthal grid.

    Integrates spherical polynomials of degree ``<= min(2*n_polar - 1,
    n_azimuth - 1)`` exactly.
    """
    if n_azimuth is None:
        n_azimuth = 2 * n_polar
    if n_polar < 1 or n_azimuth < 1:
        raise InputError("product_grid needs positive resolutions")
    t, wt = leggauss(n_polar)
    phi = 2.0 * math.pi * (np.arange(n_azimuth) + 0.5) / n_azimuth
    T, PHI = np.meshgrid(t, phi, indexing="ij")
    rho = np.sqrt(1.0 - T * T)
    nodes = np.column_stack(
        ((rho * np.cos(PHI)).ravel(), (rho * np.sin(PHI)).ravel(), T.ravel())
    )
    w = np.repeat(wt, n_azimuth)
    w = w / w.sum()
    return QuadratureRule(nodes, w, Generator.PRODUCT)


def product_grid_with_nodes(M):
    """Product grid with at least ``M`` nodes and a 1:2 polar/azimuth aspect."""
    n_polar = max(1, math.ceil(math.sqrt(M / 2.0)))
    n_az = max(1, math.ceil(M / n_polar))
    return product_grid(n_polar, n_az)


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted atomic probability measure on the sphere."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.ascontiguousarray(np.atleast_2d(self.atoms), dtype=float)
        weights = np.ascontiguousarray(self.weights, dtype=float).ravel()
        if atoms.shape[1] != 3 or atoms.shape[0] != weights.shape[0] or atoms.shape[0] < 1:
            raise InputError("atoms must be (n, 3) with n >= 1 matching the weights")
        if np.any(weights < 0):
            raise InputError("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > _UNIT_TOL:
            raise InputError(f"weights sum to {weights.sum()!r}, not 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.weights.shape[0]

    @classmethod
    def empirical(cls, points):
        """Uniform measure on ``points`` (unit vectors, affine coordinates or SpherePoints)."""
        P = np.atleast_2d(as_unit(points))
        return cls(P, np.full(P.shape[0], 1.0 / P.shape[0]))

    def rotated(self, R):
        return DiscreteMeasure(self.atoms @ np.asarray(R).T, self.weights)
