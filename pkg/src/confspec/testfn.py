"""
Lipschitz test functions on balls, ball complements and annuli of S^n.

All three are zonal about their centre ``p``: they depend on ``x`` only through
``phi = d(p, x)``. The dilation ``theta_{p,t}`` sends the level ``phi`` to the
level whose cosine is

    (t^2 (1 + cos phi) - (1 - cos phi)) / (t^2 (1 + cos phi) + (1 - cos phi)),

which is the profile used below.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .conformal import ZonalFunction
from .sphere import SpherePoint, as_coords, geodesic_distance, radial_integral, sphere_volume

__all__ = [
    "Annulus",
    "TestFunction",
    "ball_energy_bound",
    "boundary_profile_f",
    "energy_n_norm",
    "grad_norm",
    "inner_gradient_integral",
    "phi_annulus",
    "phi_ball",
    "phi_complement",
    "t_of_R",
    "tau_of_r",
    "verify_lemmas",
]

BALL_FLOOR = 3.0 / 5.0
ANNULUS_FLOOR = 9.0 / 25.0


@dataclass(frozen=True)
class Annulus:
    """Geodesic annulus ``A(p; r, R) = {r <= d(p, x) < R}``; ``r = 0`` is a ball."""

    center: SpherePoint
    r: float
    R: float

    def __post_init__(self):
        if not isinstance(self.center, SpherePoint):
            object.__setattr__(self, "center", SpherePoint(self.center))
        if not (0.0 <= self.r < self.R <= np.pi + 1e-12):
            raise ValueError(f"need 0 <= r < R <= pi, got r={self.r}, R={self.R}")

    def doubled(self) -> "Annulus":
        """``2A = A(p; r/2, 2R)``, with the outer radius capped at pi."""
        return Annulus(self.center, 0.5 * self.r, min(2.0 * self.R, np.pi))

    def contains(self, x) -> np.ndarray:
        d = geodesic_distance(self.center, x)
        return (d >= self.r) & (d < self.R)

    def to_dict(self):
        return {"center": [float(c) for c in self.center.coords], "r": float(self.r), "R": float(self.R)}

    @classmethod
    def from_dict(cls, d):
        return cls(SpherePoint(np.asarray(d["center"], float)), d["r"], d["R"])


def t_of_R(R: float) -> float:
    """Dilation factor sending ``B(p, 2R)`` onto the hemisphere: ``tan R``."""
    if not 0.0 < R < 0.5 * np.pi:
        raise ValueError("R must lie in (0, pi/2)")
    return float(np.tan(R))


def tau_of_r(r: float) -> float:
    """Dilation factor sending ``B(p, r/2)`` onto the hemisphere: ``tan(r/4)``."""
    if not 0.0 < r <= np.pi:
        raise ValueError("r must lie in (0, pi]")
    return float(np.tan(0.25 * r))


def boundary_profile_f(R):
    """Value of the ball test function on ``dB(p, R)``.

    ``(2 cos R + 1) / (2 cos^2 R + 2 cos R + 1)``; tends to 3/5 as R -> 0.
    """
    c = np.cos(R)
    return (2.0 * c + 1.0) / (2.0 * c * c + 2.0 * c + 1.0)


def _dilated_height(t, phi):
    c = np.cos(phi)
    a, b = t * t * (1.0 + c), 1.0 - c
    return (a - b) / (a + b)


def _dilated_height_dphi(t, phi):
    c = np.cos(phi)
    den = t * t * (1.0 + c) + (1.0 - c)
    return -4.0 * t * t * np.sin(phi) / den**2


@dataclass(frozen=True)
class TestFunction:
    """One of the three test-function kinds, with its zonal profile.

    ``t`` is ``None`` when the outer cutoff is dropped (``R >= pi/2``) and
    ``tau`` is ``None`` when there is no inner cutoff (``r = 0``).
    """

    __test__ = False  # not a pytest class

    kind: str
    center: SpherePoint
    r: float
    R: float
    t: float | None
    tau: float | None

    @property
    def n(self) -> int:
        return self.center.n

    @property
    def kinks(self) -> tuple:
        k = []
        if self.t is not None:
            k.append(2.0 * self.R)
        if self.tau is not None:
            k.append(0.5 * self.r)
        return tuple(sorted(k))

    def _outer(self, phi):
        if self.t is None:
            return np.ones_like(phi), np.zeros_like(phi)
        inside = phi < 2.0 * self.R
        # clip: round-off at the cutoff radius must not leave [0, 1]
        return (np.where(inside, np.clip(_dilated_height(self.t, phi), 0.0, 1.0), 0.0),
                np.where(inside, _dilated_height_dphi(self.t, phi), 0.0))

    def _inner(self, phi):
        if self.tau is None:
            return np.ones_like(phi), np.zeros_like(phi)
        outside = phi >= 0.5 * self.r
        return (np.where(outside, np.clip(-_dilated_height(self.tau, phi), 0.0, 1.0), 0.0),
                np.where(outside, -_dilated_height_dphi(self.tau, phi), 0.0))

    def value(self, phi):
        phi = np.asarray(phi, float)
        return self._outer(phi)[0] * self._inner(phi)[0]

    def dphi(self, phi):
        phi = np.asarray(phi, float)
        a, da = self._outer(phi)
        b, db = self._inner(phi)
        return da * b + a * db

    def __call__(self, x):
        return self.value(geodesic_distance(self.center, x))

    @property
    def zonal(self) -> ZonalFunction:
        return ZonalFunction(self.value, self.dphi, self.kinks)

    @property
    def support(self) -> Annulus:
        """Closed-support annulus ``A(p; r/2, 2R)`` (outer radius capped at pi)."""
        return Annulus(self.center, 0.5 * self.r, min(2.0 * self.R, np.pi))

    def factors(self) -> tuple["TestFunction", "TestFunction"]:
        """The ball and complement factors of an annulus function."""
        ball = TestFunction("ball", self.center, 0.0, self.R, self.t, None)
        comp = TestFunction("complement", self.center, self.r, np.pi, None, self.tau)
        return ball, comp


def _center(p):
    return p if isinstance(p, SpherePoint) else SpherePoint(as_coords(p))


def phi_ball(p, R: float) -> TestFunction:
    """Ball function: ``x_p o theta_{p, tan R}`` on ``B(p, 2R)``, zero outside.

    For ``R >= pi/2`` the doubled ball is the whole sphere and the outer
    cutoff is replaced by the constant 1.
    """
    if not 0.0 < R <= np.pi:
        raise ValueError("R must lie in (0, pi]")
    t = t_of_R(R) if R < 0.5 * np.pi else None
    return TestFunction("ball", _center(p), 0.0, float(R), t, None)


def phi_complement(p, r: float) -> TestFunction:
    """Complement function: ``-x_p o theta_{p, tan(r/4)}`` outside ``B(p, r/2)``."""
    return TestFunction("complement", _center(p), float(r), np.pi, None, tau_of_r(r))


def phi_annulus(p, r: float, R: float) -> TestFunction:
    """Product of the ball and complement functions; ``r = 0`` gives the ball."""
    if not 0.0 <= r < R:
        raise ValueError("need 0 <= r < R")
    if r == 0.0:
        return phi_ball(p, R)
    ball = phi_ball(p, R)
    return TestFunction("annulus", ball.center, float(r), float(R), ball.t, tau_of_r(r))


def grad_norm(tf: TestFunction, x):
    """``|grad phi|_g = |F'(d(p, x))|`` (one-sided value at kinks)."""
    return np.abs(tf.dphi(geodesic_distance(tf.center, x)))


def energy_n_norm(tf: TestFunction, nodes: int = 96) -> float:
    """``int |grad phi|^n dnu``, the conformally invariant energy."""
    n = tf.n
    return radial_integral(lambda phi: np.abs(tf.dphi(phi)) ** n, n, breaks=tf.kinks, nodes=nodes)


def inner_gradient_integral(t: float) -> float:
    """``int_{-1}^{1} t^2 / (t^2 (1+u) + 1 - u)^2 du`` by adaptive quadrature."""
    val, _ = quad(lambda u: t * t / (t * t * (1.0 + u) + 1.0 - u) ** 2, -1.0, 1.0,
                  epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def ball_energy_bound(n: int) -> float:
    """``4^n * 2^{1-2n} * Vol(S^{n-1}) = 2 Vol(S^{n-1})``."""
    return 4.0**n * 2.0 ** (1 - 2 * n) * sphere_volume(n - 1)


def verify_lemmas(n: int = 3, radii=None, samples: int = 400) -> list[tuple[str, bool, str]]:
    """Check the stated lemma constants on dense radial grids.

    Returns ``(name, passed, detail)`` rows.
    """
    p = SpherePoint(np.eye(n + 1)[0])
    if radii is None:
        radii = np.linspace(0.02, 1.55, 24)
    rows = []

    R_grid = np.linspace(1e-6, 0.5 * np.pi - 1e-6, 1000)
    f = boundary_profile_f(R_grid)
    rows.append(("f increasing on (0, pi/2)", bool(np.all(np.diff(f) > 0)), f"min diff {np.diff(f).min():.3e}"))
    rows.append(("f(0+) = 3/5", bool(abs(boundary_profile_f(1e-8) - 0.6) < 1e-6), f"{boundary_profile_f(1e-8):.12f}"))

    worst_ball, worst_comp, worst_ann, worst_range = np.inf, np.inf, np.inf, 0.0
    for R in radii:
        tf = phi_ball(p, R)
        phi = np.linspace(0, R, samples, endpoint=False)
        worst_ball = min(worst_ball, tf.value(phi).min())
        every = tf.value(np.linspace(0, np.pi, 4 * samples))
        worst_range = max(worst_range, max(-every.min(), every.max() - 1.0, 0.0))
        for r in np.linspace(0.1, 0.95, 6) * R:
            tfa = phi_annulus(p, r, R)
            phi = np.linspace(r, R, samples, endpoint=False)
            worst_ann = min(worst_ann, tfa.value(phi).min())
            every = tfa.value(np.linspace(0, np.pi, 4 * samples))
            worst_range = max(worst_range, max(-every.min(), every.max() - 1.0, 0.0))
            tfc = phi_complement(p, r)
            worst_comp = min(worst_comp, tfc.value(np.linspace(r, np.pi, samples)).min())
    rows.append(("ball >= 3/5 on B(p,R)", bool(worst_ball >= BALL_FLOOR - 1e-12), f"min {worst_ball:.6f}"))
    rows.append(("complement >= 3/5 off B(p,r)", bool(worst_comp >= BALL_FLOOR - 1e-12), f"min {worst_comp:.6f}"))
    rows.append(("annulus >= 9/25 on A(p;r,R)", bool(worst_ann >= ANNULUS_FLOOR - 1e-12), f"min {worst_ann:.6f}"))
    rows.append(("values in [0, 1]", bool(worst_range == 0.0), f"max excursion {worst_range:.2e}"))

    errs = [abs(inner_gradient_integral(t) - 0.5) for t in (0.1, 1.0, 10.0)]
    rows.append(("inner gradient integral = 1/2", bool(max(errs) <= 1e-10), f"max err {max(errs):.2e}"))

    bound = ball_energy_bound(n)
    worst = max(energy_n_norm(phi_ball(p, R)) for R in radii if R < 0.5 * np.pi)
    rows.append((f"n-energy <= 2 Vol(S^{n - 1})", bool(worst <= bound), f"max {worst:.6f} vs {bound:.6f}"))
    return rows
