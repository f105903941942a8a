"""
Certified annulus decompositions of finite metric measure spaces on S^n.

:func:`decompose` searches for ``2k`` annuli ``A_j = A(p_j; r_j, R_j)`` whose
doubles ``2A_j = A(p_j; r_j/2, 2R_j)`` are pairwise disjoint and which each
carry ``m(A_j) >= c m(X) / k``. The share ``c`` is not fixed in advance: the
search lowers a target share until a greedy packing succeeds and reports the
share it achieved. Every returned family has passed :func:`verify_family`,
which recomputes memberships and masses from the raw points.

Doubled annuli are kept disjoint as subsets of the sphere, not only on the
sample points, so that test functions supported on them have disjoint
supports.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm, qmc

from .conformal import ConformalFactor
from .sphere import SpherePoint, geodesic_distance, pairwise_distances, sphere_cloud, sphere_volume
from .testfn import Annulus

__all__ = [
    "AnnulusFamily",
    "CertificationError",
    "DecompositionNotFound",
    "MeasureTooConcentrated",
    "MetricMeasureSpace",
    "covering_number_check",
    "decompose",
    "doubled_disjoint",
    "estimate_doubling",
    "reindex_and_select",
    "verify_family",
]

DEFAULT_CLOUD = {3: (12, 10, 20), 4: (8, 7, 6, 12), 5: (6, 5, 5, 4, 8)}
SHARE_LEVELS = 0.5 * 0.8 ** np.arange(40)
SEPARATION = 1e-12


class MeasureTooConcentrated(ValueError):
    """The measure has an atom too heavy for the requested number of annuli."""


class DecompositionNotFound(RuntimeError):
    pass


class CertificationError(AssertionError):
    pass


@dataclass
class MetricMeasureSpace:
    """Finite subset of S^n with two weightings: ``m`` (covering measure) and ``nu`` (volume)."""

    points: np.ndarray
    m_weights: np.ndarray
    nu_weights: np.ndarray
    _dist: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.points = np.asarray(self.points, float)
        self.m_weights = np.asarray(self.m_weights, float)
        self.nu_weights = np.asarray(self.nu_weights, float)
        N = len(self.points)
        if self.m_weights.shape != (N,) or self.nu_weights.shape != (N,):
            raise ValueError("weights must have one entry per point")
        if np.any(self.m_weights < 0) or np.any(self.nu_weights < 0):
            raise ValueError("weights must be non-negative")
        if not self.m_weights.sum() > 0:
            raise ValueError("m(X) must be positive")
        if np.max(np.abs(np.linalg.norm(self.points, axis=1) - 1.0)) > 1e-12:
            raise ValueError("points must be unit vectors")

    @classmethod
    def from_conformal_factor(cls, mu: ConformalFactor, sizes=None) -> "MetricMeasureSpace":
        """Product Gauss cloud with ``m_i = nu_i * mu^{4/(n-2)}(x_i^0)``."""
        sizes = sizes or DEFAULT_CLOUD[mu.n]
        pts, w = sphere_cloud(mu.n, sizes)
        return cls(pts, w * mu.mass_weight(pts[:, 0]), w)

    @classmethod
    def uniform(cls, n: int, size: int, seed: int = 0) -> "MetricMeasureSpace":
        """Uniform random sample with equal weights."""
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((size, n + 1))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        w = np.full(size, 1.0 / size)
        return cls(x, w, w)

    @classmethod
    def quasi_uniform(cls, n: int, size: int, seed: int = 0) -> "MetricMeasureSpace":
        """Scrambled Sobol points pushed to S^n with equal weights.

        On S^3 the map ``(s, a, b) -> (sqrt(1-s) e^{2 pi i a}, sqrt(s) e^{2 pi i b})``
        is measure preserving; other dimensions normalise Gaussian quantiles.
        """
        u = qmc.Sobol(3 if n == 3 else n + 1, scramble=True, seed=seed).random(size)
        if n == 3:
            s, a, b = u.T
            c, d = np.sqrt(1.0 - s), np.sqrt(s)
            a, b = 2 * np.pi * a, 2 * np.pi * b
            x = np.stack([c * np.cos(a), c * np.sin(a), d * np.cos(b), d * np.sin(b)], axis=1)
        else:
            x = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        w = np.full(size, sphere_volume(n) / size)
        return cls(x, w, w)

    @property
    def n(self) -> int:
        return self.points.shape[1] - 1

    def distances_from(self, i) -> np.ndarray:
        """Geodesic distances from point ``i`` to every point (no full matrix)."""
        if self._dist is not None:
            return self._dist[i]
        return geodesic_distance(self.points[i], self.points)

    @property
    def m_total(self) -> float:
        return float(self.m_weights.sum())

    @property
    def nu_total(self) -> float:
        return float(self.nu_weights.sum())

    def distances(self) -> np.ndarray:
        if self._dist is None:
            self._dist = pairwise_distances(self.points)
        return self._dist

    def check_non_atomic(self, k: int):
        if self.m_weights.max() > self.m_total / (8 * k):
            raise MeasureTooConcentrated(
                f"largest point mass {self.m_weights.max():.4g} exceeds m(X)/(8k) = {self.m_total / (8 * k):.4g}"
            )

    def spot_check_metric(self, trials: int = 200, seed: int = 0) -> float:
        """Largest triangle-inequality violation over random triples."""
        rng = np.random.default_rng(seed)
        D = self.distances()
        i, j, l = rng.integers(0, len(D), (3, trials))
        return float(max(0.0, np.max(D[i, l] - D[i, j] - D[j, l])))


@dataclass
class AnnulusFamily:
    annuli: list
    masses: np.ndarray
    achieved_c: float
    k: int
    nu_doubled: np.ndarray | None = None
    selected: list = field(default_factory=list)
    seed: int = 0

    def to_dict(self):
        return {
            "k": self.k,
            "seed": self.seed,
            "achieved_c": self.achieved_c,
            "selected": [int(i) for i in self.selected],
            "annuli": [
                dict(a.to_dict(), m=float(m), nu_doubled=None if self.nu_doubled is None else float(v))
                for a, m, v in zip(self.annuli, self.masses,
                                   self.nu_doubled if self.nu_doubled is not None else [None] * len(self.annuli))
            ],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        ann = [Annulus.from_dict(a) for a in d["annuli"]]
        nu = [a["nu_doubled"] for a in d["annuli"]]
        return cls(
            annuli=ann,
            masses=np.array([a["m"] for a in d["annuli"]]),
            achieved_c=d["achieved_c"],
            k=d["k"],
            nu_doubled=None if any(v is None for v in nu) else np.array(nu),
            selected=list(d.get("selected", [])),
            seed=d.get("seed", 0),
        )


def doubled_disjoint(center_cos, lo1, hi1, lo2, hi2, margin: float = SEPARATION):
    """Whether closed spherical shells ``lo_i <= d(p_i, x) <= hi_i`` are disjoint.

    For centres at distance ``delta`` the pairs ``(d(p_1, x), d(p_2, x))``
    fill the rectangle with corners ``(delta, 0), (0, delta), (pi, pi-delta),
    (pi-delta, pi)``. Two convex polygons are disjoint iff they are separated
    along one of their edge normals; only the diagonal normals can separate
    here.
    """
    delta = np.arccos(np.clip(center_cos, -1.0, 1.0))
    return ((hi1 + hi2 < delta - margin)
            | (lo1 + lo2 > 2 * np.pi - delta + margin)
            | (lo1 - hi2 > delta + margin)
            | (lo2 - hi1 > delta + margin))


def _shell(a: Annulus):
    return 0.5 * a.r, min(2.0 * a.R, np.pi)


def _memberships(X: MetricMeasureSpace, annuli, doubled: bool):
    out = []
    for a in annuli:
        d = geodesic_distance(a.center, X.points)
        if doubled:
            lo, hi = _shell(a)
            out.append((d >= lo) & ((d < hi) | (hi >= np.pi)))
        else:
            out.append((d >= a.r) & (d < a.R))
    return np.array(out)


def verify_family(X: MetricMeasureSpace, family: AnnulusFamily) -> dict:
    """Independent certificate for a decomposition.

    Recomputes point memberships from scratch, checks that no point lies in
    two doubled annuli, that the doubled shells are disjoint as sets, and that
    every annulus carries at least ``achieved_c * m(X) / k``. Raises
    :class:`CertificationError` on failure.
    """
    k, ann = family.k, family.annuli
    inside2 = _memberships(X, ann, doubled=True)
    overlap = int(np.max(inside2.sum(axis=0), initial=0))
    if overlap > 1:
        raise CertificationError(f"a point lies in {overlap} doubled annuli")
    for i in range(len(ann)):
        for j in range(i + 1, len(ann)):
            lo1, hi1 = _shell(ann[i])
            lo2, hi2 = _shell(ann[j])
            if not doubled_disjoint(ann[i].center.coords @ ann[j].center.coords, lo1, hi1, lo2, hi2):
                raise CertificationError(f"doubled annuli {i} and {j} intersect")
    masses = np.array([X.m_weights[row].sum() for row in _memberships(X, ann, doubled=False)])
    if not np.array_equal(masses, family.masses):
        raise CertificationError("recomputed masses differ from the reported ones")
    need = family.achieved_c * X.m_total / k
    if not family.achieved_c > 0 or np.any(masses < need * (1 - 1e-12)):
        raise CertificationError("an annulus carries less than achieved_c * m(X) / k")
    return {"pairs_checked": len(ann) * (len(ann) - 1) // 2, "min_mass": float(masses.min()), "max_point_overlap": overlap}


def _centers(X: MetricMeasureSpace, k: int, max_centers: int, rng) -> np.ndarray:
    N = len(X.points)
    if N <= max_centers:
        return np.arange(N)
    D = X.distances()
    # local m-mass at the scale of a ball holding ~1/(4k) of the volume
    scale = np.pi * (1.0 / (4 * k)) ** (1.0 / X.n)
    local = (D < scale) @ X.m_weights
    dense = np.argsort(-local, kind="stable")[: max_centers // 2]
    rest = np.setdiff1d(np.arange(N), dense)
    extra = rng.choice(rest, size=max_centers - dense.size, replace=False)
    return np.sort(np.concatenate([dense, extra]))


class _RowSearch:
    """Vectorised per-row ``searchsorted`` for a matrix with sorted rows."""

    def __init__(self, rows_sorted):
        C, N = rows_sorted.shape
        self.N = N
        self.span = 2.0 * (np.max(np.abs(rows_sorted)) + 1.0)
        self.offset = np.arange(C) * self.span
        self.flat = (rows_sorted + self.offset[:, None]).ravel()

    def count_below(self, values):
        """Number of entries ``< values[i]`` in row ``i``."""
        v = np.minimum(np.asarray(values, float), 0.5 * self.span) + self.offset
        return np.searchsorted(self.flat, v, side="left") - np.arange(self.offset.size) * self.N


def _prefix(C, counts):
    rows = np.arange(C.shape[0])
    return np.where(counts > 0, C[rows, np.maximum(counts - 1, 0)], 0.0)


def _candidates(ds, Cm, Cnu, r_grid, target, R_floor, search_d, search_m):
    """Smallest annulus with m >= target for every (centre, inner radius)."""
    C, N = ds.shape
    rows = np.arange(C)
    out = []
    for r in r_grid:
        base = _prefix(Cm, search_d.count_below(np.full(C, r)))
        idx = search_m.count_below(base + target)
        ok = idx < N
        idx = np.minimum(idx, N - 1)
        R = np.maximum(ds[rows, idx] + 1e-9, max(R_floor, r + R_floor))
        ok &= R <= np.pi
        hi = np.minimum(2.0 * R, np.pi)
        j_hi = np.where(hi >= np.pi, N, search_d.count_below(hi))
        foot = _prefix(Cnu, j_hi) - _prefix(Cnu, search_d.count_below(np.full(C, 0.5 * r)))
        out.append(np.stack([rows, np.full(C, r), R, foot], axis=1)[ok])
    return np.concatenate(out) if out else np.zeros((0, 4))


def _greedy(cand, centers_xyz, count, order_key):
    """Accept candidates in order, each time discarding every candidate it overlaps."""
    cand = cand[order_key(cand)]
    pts = centers_xyz[cand[:, 0].astype(int)]
    lo, hi = 0.5 * cand[:, 1], np.minimum(2.0 * cand[:, 2], np.pi)
    alive = np.ones(len(cand), bool)
    chosen = []
    while len(chosen) < count:
        live = np.flatnonzero(alive)
        if live.size == 0:
            return None
        i = live[0]
        chosen.append(cand[i])
        alive[i] = False
        rest = live[1:]
        alive[rest] = doubled_disjoint(pts[rest] @ pts[i], lo[rest], hi[rest], lo[i], hi[i])
    return chosen


def decompose(X: MetricMeasureSpace, k: int, seed: int = 0, max_centers: int = 400,
              r_grid=None) -> AnnulusFamily:
    """Find ``2k`` annuli with pairwise disjoint doubles, each carrying ``>= c m(X)/k``.

    Outer radii are kept above half the median nearest-neighbour spacing so
    that annuli are not resolved below the sampling scale.

    Raises
    ------
    MeasureTooConcentrated
        If a single point carries more than ``m(X)/(8k)``.
    DecompositionNotFound
        If no target share down to ``0.5 * 0.8^39`` admits a packing.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    X.check_non_atomic(k)
    rng = np.random.default_rng(seed)
    centers = _centers(X, k, max_centers, rng)
    D = X.distances()[centers]
    order = np.argsort(D, axis=1, kind="stable")
    ds = np.take_along_axis(D, order, axis=1)
    Cm = np.cumsum(X.m_weights[order], axis=1)
    Cnu = np.cumsum(X.nu_weights[order], axis=1)
    if r_grid is None:
        # offset from pi/2^i so sample points never sit on an inner boundary
        r_grid = np.concatenate([[0.0], 0.9937 * np.pi * 0.5 ** np.arange(1, 11)])
    xyz = X.points[centers]
    search_d, search_m = _RowSearch(ds), _RowSearch(Cm)
    nn = np.sort(X.distances(), axis=1)[:, 1]
    R_floor = 0.5 * float(np.median(nn))
    orderings = [
        lambda c: np.lexsort((c[:, 0], c[:, 2], c[:, 3])),  # smallest doubled volume first
        lambda c: np.lexsort((c[:, 0], c[:, 3], c[:, 2])),  # smallest outer radius first
    ]

    def attempt(level):
        target = SHARE_LEVELS[level] * X.m_total / k
        cand = _candidates(ds, Cm, Cnu, r_grid, target, R_floor, search_d, search_m)
        if len(cand) < 2 * k:
            return None
        for key in orderings:
            picked = _greedy(cand, xyz, 2 * k, key)
            if picked is not None:
                return picked
        return None

    # success is (nearly) monotone in the target share: bisect for the largest
    lo, hi = 0, len(SHARE_LEVELS) - 1
    best = attempt(hi)
    if best is not None:
        while hi - lo > 1:
            mid = (lo + hi) // 2
            got = attempt(mid)
            if got is None:
                lo = mid
            else:
                hi, best = mid, got
        got = attempt(0)
        if got is not None:
            best = got
        annuli = [Annulus(SpherePoint(xyz[int(ci)]), float(r), float(R)) for ci, r, R, _ in best]
        masses = np.array([X.m_weights[row].sum() for row in _memberships(X, annuli, doubled=False)])
        fam = AnnulusFamily(annuli, masses, float(masses.min() * k / X.m_total), k, seed=seed)
        verify_family(X, fam)
        return fam
    raise DecompositionNotFound(
        f"no packing of {2 * k} annuli found on {len(X.points)} points "
        f"({len(centers)} centres, {len(r_grid)} inner radii)"
    )


def reindex_and_select(family: AnnulusFamily, X: MetricMeasureSpace, k: int | None = None) -> AnnulusFamily:
    """Sort annuli by ``nu(2A_j)`` and keep the first ``k``.

    Disjointness of the ``2k`` doubles forces ``nu(2A_j) <= nu(X)/k`` for the
    ``k`` smallest; a violation means an upstream bug and raises.
    """
    k = family.k if k is None else k
    if len(family.annuli) < 2 * k:
        raise ValueError(f"need {2 * k} annuli, have {len(family.annuli)}")
    nu2 = np.array([X.nu_weights[row].sum() for row in _memberships(X, family.annuli, doubled=True)])
    order = np.argsort(nu2, kind="stable")
    bound = X.nu_total / k
    if np.any(nu2[order[:k]] > bound * (1 + 1e-12)):
        raise CertificationError("pigeonhole bound nu(2A_j) <= nu(X)/k violated; doubled annuli overlap")
    return AnnulusFamily(
        annuli=[family.annuli[i] for i in order],
        masses=family.masses[order],
        achieved_c=family.achieved_c,
        k=k,
        nu_doubled=nu2[order],
        selected=list(range(k)),
        seed=family.seed,
    )


def estimate_doubling(X: MetricMeasureSpace, samples: int = 2000, seed: int = 0, min_points: int = 100,
                      r_range=(0.0, 0.5 * np.pi)) -> float:
    """Largest sampled ``nu(B(p, 2r)) / nu(B(p, r))`` over balls holding ``>= min_points`` points.

    Small balls are dominated by counting noise, so the default threshold is
    100 points; use a quasi-uniform sample of several thousand points.
    """
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(samples):
        i = rng.integers(len(X.points))
        r = rng.uniform(*r_range)
        d = X.distances_from(i)
        inner = d < r
        if inner.sum() < min_points:
            continue
        ratio = X.nu_weights[d < 2 * r].sum() / X.nu_weights[inner].sum()
        best = max(best, float(ratio))
    return best


def covering_number_check(X: MetricMeasureSpace, trials: int = 200, seed: int = 0, min_points: int = 20) -> dict:
    """Greedy covers of sampled balls ``B(p, r)`` by balls of radius ``r/2``.

    Returns the largest cover size seen together with the bound ``4^n``.
    """
    rng = np.random.default_rng(seed)
    worst, used = 0, 0
    for _ in range(trials):
        i = rng.integers(len(X.points))
        r = rng.uniform(0.05, np.pi)
        idx = np.flatnonzero(X.distances_from(i) < r)
        if idx.size < min_points:
            continue
        used += 1
        count = 0
        while idx.size:
            idx = idx[geodesic_distance(X.points[idx[0]], X.points[idx]) >= 0.5 * r]
            count += 1
        worst = max(worst, count)
    return {"max_cover": worst, "bound": 4**X.n, "balls": used}
