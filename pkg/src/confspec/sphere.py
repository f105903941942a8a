"""
Exact geometry of the round unit sphere S^n in R^{n+1}.

Points are stored as unit vectors ``x = (x^0, x^1, ..., x^n)``. Functions that
take points accept either a :class:`SpherePoint` or a float array whose last
axis has length ``n + 1``; batches of points are handled by broadcasting.

A general base point ``p`` is handled through the Householder reflection ``H``
that swaps ``e_0`` and ``p``. In the reflected frame ``z = H x`` the base point
is ``e_0``, so ``z^0 = x . p`` and ``z' = (z^1, ..., z^n)`` is a coordinate
representation of the hyperplane ``L_p``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, roots_jacobi, roots_legendre

__all__ = [
    "PoleSingularityError",
    "QuadratureError",
    "QuadratureGrid",
    "SpherePoint",
    "as_coords",
    "build_quadrature",
    "conformal_dilation",
    "dilation_conformal_factor",
    "dilation_scale",
    "frame",
    "geodesic_distance",
    "pairwise_distances",
    "pole",
    "radial_integral",
    "sphere_cloud",
    "sphere_volume",
    "spherical_to_cartesian",
    "stereo_project",
    "stereo_unproject",
    "two_center_integral",
]

NORM_TOL = 1e-12


class PoleSingularityError(ValueError):
    """Raised when stereographic projection is evaluated at its base point."""


class QuadratureError(ValueError):
    """Raised for quadrature configurations that cannot meet the requested exactness."""


@dataclass(frozen=True, eq=False)
class SpherePoint:
    """A point of S^n stored as a unit vector of length n + 1."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float).copy()
        if c.ndim != 1 or c.size < 2:
            raise ValueError("SpherePoint needs a 1-d coordinate vector")
        if abs(np.linalg.norm(c) - 1.0) > NORM_TOL:
            raise ValueError(f"not a unit vector: |x| = {np.linalg.norm(c)!r}")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @classmethod
    def normalized(cls, v) -> "SpherePoint":
        v = np.asarray(v, dtype=float)
        return cls(v / np.linalg.norm(v))

    @property
    def n(self) -> int:
        return self.coords.size - 1

    def __neg__(self) -> "SpherePoint":
        return SpherePoint(-self.coords)

    def __eq__(self, other):
        if not isinstance(other, SpherePoint):
            return NotImplemented
        return np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash(self.coords.tobytes())

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)


def as_coords(x) -> np.ndarray:
    if isinstance(x, SpherePoint):
        return x.coords
    return np.asarray(x, dtype=float)


def pole(n: int, sign: int = 1) -> SpherePoint:
    """The point ``sign * e_0`` of S^n."""
    e = np.zeros(n + 1)
    e[0] = float(np.sign(sign) or 1)
    return SpherePoint(e)


def sphere_volume(d: int) -> float:
    """Volume of the unit sphere S^d, ``2 pi^{(d+1)/2} / Gamma((d+1)/2)``."""
    return float(2.0 * np.exp(0.5 * (d + 1) * np.log(np.pi) - gammaln(0.5 * (d + 1))))


def geodesic_distance(x, y) -> np.ndarray | float:
    """Round-metric distance ``arccos(x . y)`` in [0, pi].

    Evaluated as ``2 atan2(|x - y|, |x + y|)``, which stays accurate near 0
    and pi where ``arccos`` loses half the digits.
    """
    x, y = as_coords(x), as_coords(y)
    d = 2.0 * np.arctan2(np.linalg.norm(x - y, axis=-1), np.linalg.norm(x + y, axis=-1))
    return float(d) if np.ndim(d) == 0 else d


def pairwise_distances(A, B=None) -> np.ndarray:
    """Matrix of geodesic distances between the rows of ``A`` and ``B``.

    Same values as :func:`geodesic_distance` up to round-off; entries with
    ``|cos| > 0.9`` are recomputed with the stable formula.
    """
    A = as_coords(A)
    B = A if B is None else as_coords(B)
    c = A @ B.T
    d = np.arccos(np.clip(c, -1.0, 1.0))
    i, j = np.nonzero(np.abs(c) > 0.9)
    if i.size:
        d[i, j] = geodesic_distance(A[i], B[j])
    return d


def frame(p) -> np.ndarray:
    """Orthogonal symmetric matrix ``H`` with ``H e_0 = p`` (and ``H p = e_0``)."""
    p = as_coords(p)
    dim = p.size
    v = -p.copy()
    v[0] += 1.0
    vv = v @ v
    if vv < 1e-30:
        return np.eye(dim)
    return np.eye(dim) - 2.0 * np.outer(v, v) / vv


def stereo_project(p, x) -> np.ndarray:
    """Stereographic projection from ``p`` onto the hyperplane ``L_p``.

    In the frame where ``p = e_0`` this is ``x' / (1 - x^0)``.

    Raises
    ------
    PoleSingularityError
        If any ``x`` coincides with ``p``.
    """
    H = frame(p)
    z = as_coords(x) @ H
    denom = 1.0 - z[..., 0]
    if np.any(denom <= 1e-15):
        raise PoleSingularityError("stereographic projection is singular at the base point")
    return z[..., 1:] / denom[..., None]


def stereo_unproject(p, y) -> np.ndarray:
    """Inverse of :func:`stereo_project`; ``y = 0`` maps to ``-p``."""
    y = np.asarray(y, dtype=float)
    s = np.sum(y * y, axis=-1)[..., None]
    z = np.concatenate([(s - 1.0) / (s + 1.0), 2.0 * y / (s + 1.0)], axis=-1)
    return z @ frame(p)


def conformal_dilation(p, t: float, x) -> np.ndarray:
    """The conformal diffeomorphism ``sigma_p^{-1} o delta_t o sigma_p``.

    Evaluated through its closed form, which is regular at both ``p`` and ``-p``.
    """
    if not t > 0:
        raise ValueError("dilation factor t must be positive")
    H = frame(p)
    z = as_coords(x) @ H
    a = t * t * (1.0 + z[..., 0])
    b = 1.0 - z[..., 0]
    den = a + b
    out = np.empty_like(z)
    out[..., 0] = (a - b) / den
    out[..., 1:] = 2.0 * t * z[..., 1:] / den[..., None]
    # renormalise to kill round-off drift
    out /= np.linalg.norm(out, axis=-1, keepdims=True)
    return out @ H


def dilation_scale(t: float, u):
    """Linear stretch ``s`` of the dilation as a function of ``u = x . p``.

    The pullback metric is ``s^2 g_0`` with ``s = 2t / ((1 - u) + t^2 (1 + u))``.
    """
    u = np.asarray(u, dtype=float)
    return 2.0 * t / ((1.0 - u) + t * t * (1.0 + u))


def dilation_conformal_factor(p, t: float, x):
    """Positive ``omega`` with ``theta_{p,t}^* g_0 = omega^{4/(n-2)} g_0``."""
    xc = as_coords(x)
    n = xc.shape[-1] - 1
    if n < 3:
        raise ValueError("conformal factors need n >= 3")
    u = xc @ as_coords(p)
    return dilation_scale(t, u) ** (0.5 * (n - 2))


def spherical_to_cartesian(angles) -> np.ndarray:
    """Hyperspherical angles ``(phi_1, ..., phi_n)`` to a unit vector in R^{n+1}."""
    ang = np.asarray(angles, dtype=float)
    n = ang.shape[-1]
    out = np.empty(ang.shape[:-1] + (n + 1,))
    sin_prod = np.ones(ang.shape[:-1])
    for i in range(n):
        out[..., i] = sin_prod * np.cos(ang[..., i])
        sin_prod = sin_prod * np.sin(ang[..., i])
    out[..., n] = sin_prod
    return out


@dataclass(frozen=True)
class QuadratureGrid:
    """Gauss-Jacobi rule in ``u = cos(phi_1)`` for zonal integrals over S^n.

    ``integrate(f(u))`` returns ``Vol(S^{n-1}) * sum(w_i f(u_i))``, which equals
    the integral of the zonal function over S^n for polynomials of degree up
    to ``2 * order - 1``.
    """

    n: int
    nodes: np.ndarray
    weights: np.ndarray
    angular: float
    order: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "order", int(self.nodes.size))

    @property
    def phi(self) -> np.ndarray:
        return np.arccos(self.nodes)

    @property
    def exact_degree(self) -> int:
        return 2 * self.order - 1

    def integrate(self, values) -> float:
        return float(self.angular * np.dot(self.weights, values))


@lru_cache(maxsize=64)
def _jacobi_rule(order: int, alpha: float):
    x, w = roots_jacobi(order, alpha, alpha)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def build_quadrature(n: int, order: int, exact_degree: int | None = None) -> QuadratureGrid:
    """Zonal quadrature on S^n against the weight ``(1 - u^2)^{(n-2)/2}``.

    Parameters
    ----------
    n : int
        Sphere dimension, at least 3.
    order : int
        Number of Gauss nodes.
    exact_degree : int, optional
        Polynomial degree the caller needs integrated exactly.
    """
    if n < 3:
        raise QuadratureError("n must be at least 3")
    if order < 2:
        raise QuadratureError("quadrature order must be at least 2")
    if exact_degree is not None and 2 * order - 1 < exact_degree:
        raise QuadratureError(
            f"{order} nodes integrate degree {2 * order - 1} < requested {exact_degree}"
        )
    x, w = _jacobi_rule(int(order), 0.5 * (n - 2))
    return QuadratureGrid(n=n, nodes=x, weights=w, angular=sphere_volume(n - 1))


def radial_integral(func, n: int, breaks=(), nodes: int = 48) -> float:
    """Integral over S^n of a function of the distance to a fixed point.

    ``func`` maps an array of angles in [0, pi] to values. The interval is
    split at ``breaks`` (kinks of a piecewise smooth profile) and each piece
    gets its own Gauss-Legendre rule, so kinks never sit inside a panel.
    """
    edges = np.unique(np.clip(np.concatenate([[0.0, np.pi], np.asarray(breaks, float)]), 0, np.pi))
    xg, wg = roots_legendre(nodes)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b - a <= 0:
            continue
        phi = 0.5 * (b - a) * xg + 0.5 * (a + b)
        total += 0.5 * (b - a) * np.dot(wg, func(phi) * np.sin(phi) ** (n - 1))
    return float(total * sphere_volume(n - 1))


def two_center_integral(F, G, n: int, cos_delta: float, breaks=(), nodes: int = 48, ang_nodes: int = 64) -> float:
    """Integral over S^n of ``F(d(p, x)) * G(x . q)`` for two base points.

    ``F`` is a profile in the angle from ``p`` (piecewise smooth with kinks at
    ``breaks``), ``G`` a function of ``u = x . q`` and ``cos_delta = p . q``.
    Writing ``x = cos(phi) p + sin(phi) w`` with ``w`` orthogonal to ``p``,
    only the angle between ``w`` and the projection of ``q`` matters, which
    reduces the integral to two dimensions.
    """
    cos_delta = float(np.clip(cos_delta, -1.0, 1.0))
    sin_delta = np.sqrt(max(0.0, 1.0 - cos_delta**2))
    v, wv = _jacobi_rule(int(ang_nodes), 0.5 * (n - 3))
    v = np.asarray(v)
    ang = sphere_volume(n - 2)

    def inner(phi):
        u = np.cos(phi)[:, None] * cos_delta + np.sin(phi)[:, None] * sin_delta * v[None, :]
        return F(phi) * (G(u) @ wv)

    return radial_integral(inner, n, breaks=breaks, nodes=nodes) / sphere_volume(n - 1) * ang


def sphere_cloud(n: int, sizes) -> tuple[np.ndarray, np.ndarray]:
    """Product Gauss point cloud on S^n with positive weights summing to Vol(S^n).

    ``sizes`` has ``n`` entries: Gauss-Jacobi node counts for the polar angle
    of S^n, S^{n-1}, ..., S^2, followed by the number of equispaced azimuths on
    S^1. The first coordinate of every point is a node of the outermost rule,
    so zonal functions about ``e_0`` are sampled on the Gauss-Jacobi grid.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) != n:
        raise ValueError(f"need {n} sizes for S^{n}, got {len(sizes)}")
    m = sizes[-1]
    ang = (np.arange(m) + 0.5) * 2.0 * np.pi / m
    pts = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    wts = np.full(m, 2.0 * np.pi / m)
    for d, size in zip(range(2, n + 1), reversed(sizes[:-1])):
        u, wu = _jacobi_rule(size, 0.5 * (d - 2))
        r = np.sqrt(1.0 - u * u)
        pts = np.concatenate(
            [np.repeat(u, len(pts))[:, None], (r[:, None, None] * pts[None]).reshape(-1, d)], axis=1
        )
        wts = (wu[:, None] * wts[None]).ravel()
    return pts, wts
