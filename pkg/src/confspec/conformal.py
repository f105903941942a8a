"""
Zonal conformal factors and quantities of the conformal class [g] on S^n.

A conformal factor ``mu > 0`` defines ``g~ = mu^{4/(n-2)} g``. Every quantity of
``g~`` is evaluated in the round metric ``g``:

* volume        ``dnu~ = mu^{2n/(n-2)} dnu``
* measure       ``m = mu^{-2} dnu~ = mu^{4/(n-2)} dnu``
* energy        ``int |grad~ f|^2 + c_n R~ f^2 dnu~ = int |grad(mu f)|^2 + c_n R (mu f)^2 dnu``

Factors are zonal: ``mu(x) = h(x^0)`` for a profile ``h`` on [-1, 1] that knows
its first two derivatives.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial

from .sphere import build_quadrature, dilation_scale, radial_integral

__all__ = [
    "CurvatureConstants",
    "ConformalFactor",
    "InvalidConformalFactor",
    "InvalidTestFunction",
    "DegenerateTestFunction",
    "ZonalFunction",
    "conformal_constant",
    "conformal_energy",
    "conformal_energy_tilde",
    "l2_tilde",
    "m_weighted_l2",
    "measure_m_total",
    "rayleigh_quotient",
    "round_energy",
    "volume_total",
]

DEFAULT_FLOOR = 1e-8
DEFAULT_ORDER = 160


class InvalidConformalFactor(ValueError):
    pass


class InvalidTestFunction(ValueError):
    pass


class DegenerateTestFunction(ZeroDivisionError):
    pass


def conformal_constant(n: int) -> float:
    """``c_n = (n-2) / (4(n-1))``."""
    return (n - 2) / (4.0 * (n - 1))


@dataclass(frozen=True)
class CurvatureConstants:
    n: int

    @property
    def c_n(self) -> float:
        return conformal_constant(self.n)

    @property
    def scalar_curvature(self) -> float:
        return float(self.n * (self.n - 1))

    @property
    def potential(self) -> float:
        """``c_n R_g``, which is exactly ``n (n-2) / 4``."""
        return self.n * (self.n - 2) / 4.0


# -- profiles -----------------------------------------------------------------
# Each profile maps u in [-1, 1] to (h, h', h'').


class _Constant:
    def __init__(self, c):
        self.c = float(c)

    def __call__(self, u):
        u = np.asarray(u, float)
        return np.full_like(u, self.c), np.zeros_like(u), np.zeros_like(u)

    def to_dict(self):
        return {"kind": "constant", "c": self.c}


class _Poly:
    def __init__(self, coeffs):
        self.p = Polynomial(np.asarray(coeffs, float))
        self.d1 = self.p.deriv(1)
        self.d2 = self.p.deriv(2)

    def __call__(self, u):
        u = np.asarray(u, float)
        return self.p(u), self.d1(u), self.d2(u)

    def to_dict(self):
        return {"kind": "polynomial", "coeffs": [float(c) for c in self.p.coef]}


class _Bubble:
    """``omega = s^{(n-2)/2}`` for the dilation about ``sign * e_0``."""

    def __init__(self, n, t, sign=1):
        self.n, self.t, self.sign = n, float(t), 1 if sign >= 0 else -1

    def __call__(self, u):
        t, sg = self.t, self.sign
        v = sg * np.asarray(u, float)
        D = (1.0 + t * t) + (t * t - 1.0) * v
        s = dilation_scale(t, v)
        s1 = -2.0 * t * (t * t - 1.0) / D**2
        s2 = 4.0 * t * (t * t - 1.0) ** 2 / D**3
        a = 0.5 * (self.n - 2)
        h = s**a
        h1 = a * s ** (a - 1) * s1
        h2 = a * (a - 1) * s ** (a - 2) * s1**2 + a * s ** (a - 1) * s2
        return h, sg * h1, h2

    def to_dict(self):
        return {"kind": "bubble", "t": self.t, "sign": self.sign}


class _Product:
    def __init__(self, factors):
        self.factors = list(factors)

    def __call__(self, u):
        u = np.asarray(u, float)
        h, h1, h2 = np.ones_like(u), np.zeros_like(u), np.zeros_like(u)
        for f in self.factors:
            g, g1, g2 = f(u)
            h, h1, h2 = h * g, h1 * g + h * g1, h2 * g + 2 * h1 * g1 + h * g2
        return h, h1, h2

    def to_dict(self):
        return {"kind": "product", "factors": [f.to_dict() for f in self.factors]}


def _profile_from_dict(n, d):
    kind = d["kind"]
    if kind == "constant":
        return _Constant(d["c"])
    if kind == "polynomial":
        return _Poly(d["coeffs"])
    if kind == "bubble":
        return _Bubble(n, d["t"], d.get("sign", 1))
    if kind == "product":
        return _Product([_profile_from_dict(n, f) for f in d["factors"]])
    raise ValueError(f"unknown profile kind {kind!r}")


_CHECK_U = np.concatenate([np.linspace(-1.0, 1.0, 2001), build_quadrature(3, 256).nodes])


class ConformalFactor:
    """Positive zonal conformal factor on S^n (immutable).

    Use the named constructors :meth:`constant`, :meth:`polynomial`,
    :meth:`bubble`, :meth:`two_bubble` and :meth:`product`.
    """

    def __init__(self, n: int, profile, floor: float = DEFAULT_FLOOR, label: str | None = None):
        if n < 3:
            raise InvalidConformalFactor("conformal factors need n >= 3")
        self._n = int(n)
        self._profile = profile
        self._floor = float(floor)
        self._label = label
        h = self._profile(_CHECK_U)[0]
        if not np.all(np.isfinite(h)) or h.min() < self._floor:
            raise InvalidConformalFactor(
                f"conformal factor violates floor {self._floor:g}: min = {np.nanmin(h):g}"
            )

    # constructors
    @classmethod
    def constant(cls, n, c=1.0, **kw):
        return cls(n, _Constant(c), **kw)

    @classmethod
    def polynomial(cls, n, coeffs, **kw):
        """Profile ``h(u) = sum_i coeffs[i] u^i``."""
        return cls(n, _Poly(coeffs), **kw)

    @classmethod
    def bubble(cls, n, t, sign=1, **kw):
        """Pullback factor of the dilation ``theta_{p,t}`` with ``p = sign * e_0``."""
        return cls(n, _Bubble(n, t, sign), **kw)

    @classmethod
    def two_bubble(cls, n, t, **kw):
        """Product of antipodal bubbles about ``e_0`` and ``-e_0``."""
        return cls(n, _Product([_Bubble(n, t, 1), _Bubble(n, t, -1)]), **kw)

    @classmethod
    def product(cls, *factors, **kw):
        n = factors[0].n
        if any(f.n != n for f in factors):
            raise ValueError("factors live on different spheres")
        return cls(n, _Product([f._profile for f in factors]), **kw)

    def scaled(self, c: float) -> "ConformalFactor":
        return ConformalFactor(self._n, _Product([_Constant(c), self._profile]), floor=min(self._floor, self._floor * c))

    @classmethod
    def from_dict(cls, d):
        return cls(d["n"], _profile_from_dict(d["n"], d["profile"]), floor=d.get("floor", DEFAULT_FLOOR), label=d.get("label"))

    def to_dict(self):
        d = {"n": self._n, "profile": self._profile.to_dict(), "floor": self._floor}
        if self._label:
            d["label"] = self._label
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str):
        return cls.from_dict(json.loads(s))

    # evaluation
    @property
    def n(self) -> int:
        return self._n

    @property
    def floor(self) -> float:
        return self._floor

    @property
    def label(self) -> str:
        return self._label or json.dumps(self._profile.to_dict(), sort_keys=True)

    @property
    def is_polynomial(self) -> bool:
        return isinstance(self._profile, (_Constant, _Poly))

    @property
    def is_constant(self) -> bool:
        return isinstance(self._profile, _Constant)

    def __call__(self, u):
        return self._profile(u)[0]

    def derivatives(self, u):
        """``(h, h', h'')`` at ``u = x^0``."""
        return self._profile(u)

    def of_point(self, x):
        return self(np.asarray(x, float)[..., 0])

    def mass_weight(self, u):
        """Density of ``m`` against ``dnu``: ``mu^{4/(n-2)}``."""
        return self(u) ** (4.0 / (self._n - 2))

    def volume_weight(self, u):
        """Density of ``nu~`` against ``dnu``: ``mu^{2n/(n-2)}``."""
        return self(u) ** (2.0 * self._n / (self._n - 2))

    def laplacian(self, u):
        """Round Laplacian of ``mu``: ``(1-u^2) h'' - n u h'``."""
        u = np.asarray(u, float)
        _, h1, h2 = self._profile(u)
        return (1.0 - u * u) * h2 - self._n * u * h1

    def scalar_curvature_tilde(self, u):
        """``R~`` from the conformal law applied to ``f = 1``."""
        n = self._n
        u = np.asarray(u, float)
        h = self(u)
        pot = n * (n - 2) / 4.0
        return (-self.laplacian(u) + pot * h) * h ** (-(n + 2) / (n - 2)) / conformal_constant(n)

    def oscillation(self, samples: int = 4001) -> float:
        """Relative oscillation ``(max h - min h) / max h`` on [-1, 1]."""
        h = self(np.linspace(-1, 1, samples))
        return float((h.max() - h.min()) / h.max())

    def __repr__(self):
        return f"ConformalFactor(n={self._n}, {self.label})"


def _grid(n, grid):
    return grid if grid is not None else build_quadrature(n, DEFAULT_ORDER)


def measure_m_total(mu: ConformalFactor, grid=None) -> float:
    """``m(S^n) = int mu^{4/(n-2)} dnu``."""
    g = _grid(mu.n, grid)
    return g.integrate(mu.mass_weight(g.nodes))


def volume_total(mu: ConformalFactor, grid=None) -> float:
    """``Vol(S^n, g~) = int mu^{2n/(n-2)} dnu``."""
    g = _grid(mu.n, grid)
    return g.integrate(mu.volume_weight(g.nodes))


# -- zonal trial functions ----------------------------------------------------


@dataclass(frozen=True)
class ZonalFunction:
    """A Lipschitz function of the angle ``phi`` from a centre.

    ``value`` and ``dphi`` map arrays of angles in [0, pi] to values and
    derivatives; ``kinks`` lists angles where the derivative may jump.
    """

    value: Callable
    dphi: Callable
    kinks: tuple = field(default=())

    @classmethod
    def from_polynomial(cls, coeffs):
        """``f = P(cos phi)``."""
        p = Polynomial(np.asarray(coeffs, float))
        d = p.deriv()
        return cls(lambda phi: p(np.cos(phi)), lambda phi: -np.sin(phi) * d(np.cos(phi)))

    @classmethod
    def constant(cls, c=1.0):
        return cls(lambda phi: np.full_like(np.asarray(phi, float), c), lambda phi: np.zeros_like(np.asarray(phi, float)))

    @classmethod
    def reciprocal(cls, mu: ConformalFactor):
        """``1 / mu`` (same pole as ``mu``)."""

        def val(phi):
            return 1.0 / mu(np.cos(phi))

        def der(phi):
            h, h1, _ = mu.derivatives(np.cos(phi))
            return np.sin(phi) * h1 / h**2

        return cls(val, der)

    def scaled(self, c: float) -> "ZonalFunction":
        return ZonalFunction(lambda phi: c * self.value(phi), lambda phi: c * self.dphi(phi), self.kinks)

    def over(self, mu: ConformalFactor) -> "ZonalFunction":
        """``f / mu`` for ``f`` centred at the pole of ``mu``."""

        def val(phi):
            return self.value(phi) / mu(np.cos(phi))

        def der(phi):
            h, h1, _ = mu.derivatives(np.cos(phi))
            return self.dphi(phi) / h + self.value(phi) * np.sin(phi) * h1 / h**2

        return ZonalFunction(val, der, self.kinks)


def _check_lipschitz(d):
    if not np.all(np.isfinite(d)) or np.max(np.abs(d), initial=0.0) > 1e12:
        raise InvalidTestFunction("derivative unbounded at sampled nodes; not a Lipschitz test function")


def _zonal_integral(integrand, n, f, grid):
    """Integrate ``integrand(phi)`` over S^n, piecewise if ``f`` has kinks."""
    if f.kinks:
        return radial_integral(integrand, n, breaks=f.kinks, nodes=64)
    g = _grid(n, grid)
    return g.integrate(integrand(g.phi))


def round_energy(v: ZonalFunction, n: int, grid=None) -> float:
    """``int |grad v|^2 + c_n R_g v^2 dnu`` in the round metric."""
    pot = n * (n - 2) / 4.0

    def integrand(phi):
        d = v.dphi(phi)
        _check_lipschitz(d)
        return d * d + pot * v.value(phi) ** 2

    return _zonal_integral(integrand, n, v, grid)


def conformal_energy(f: ZonalFunction, mu: ConformalFactor, grid=None) -> float:
    """Energy of ``f`` for the conformal Laplacian of ``g~``, routed through ``g``.

    Returns ``int |grad(mu f)|_g^2 + c_n R_g (mu f)^2 dnu``.
    """
    n = mu.n
    pot = n * (n - 2) / 4.0

    def integrand(phi):
        u = np.cos(phi)
        h, h1, _ = mu.derivatives(u)
        fv, fd = f.value(phi), f.dphi(phi)
        _check_lipschitz(fd)
        d = h * fd - np.sin(phi) * h1 * fv
        return d * d + pot * (h * fv) ** 2

    return _zonal_integral(integrand, n, f, grid)


def conformal_energy_tilde(f: ZonalFunction, mu: ConformalFactor, grid=None) -> float:
    """Same energy computed on the ``g~`` side.

    Uses ``|grad~ f|^2 = mu^{-4/(n-2)} |grad f|^2`` and ``R~`` from
    :meth:`ConformalFactor.scalar_curvature_tilde`; independent of
    :func:`conformal_energy` except for the shared quadrature.
    """
    n = mu.n
    cn = conformal_constant(n)

    def integrand(phi):
        u = np.cos(phi)
        h = mu(u)
        fd = f.dphi(phi)
        _check_lipschitz(fd)
        grad2 = h ** (-4.0 / (n - 2)) * fd * fd
        return (grad2 + cn * mu.scalar_curvature_tilde(u) * f.value(phi) ** 2) * h ** (2.0 * n / (n - 2))

    return _zonal_integral(integrand, n, f, grid)


def l2_tilde(f: ZonalFunction, mu: ConformalFactor, grid=None) -> float:
    """``int f^2 dnu~ = int f^2 mu^{2n/(n-2)} dnu``."""
    return _zonal_integral(lambda phi: f.value(phi) ** 2 * mu.volume_weight(np.cos(phi)), mu.n, f, grid)


def m_weighted_l2(phi_fn: ZonalFunction, mu: ConformalFactor, grid=None) -> float:
    """``int phi^2 dm = int phi^2 mu^{4/(n-2)} dnu``."""
    return _zonal_integral(lambda phi: phi_fn.value(phi) ** 2 * mu.mass_weight(np.cos(phi)), mu.n, phi_fn, grid)


def rayleigh_quotient(f: ZonalFunction, mu: ConformalFactor, grid=None) -> float:
    """Rayleigh quotient of ``f`` for the conformal Laplacian of ``g~``."""
    den = l2_tilde(f, mu, grid)
    if not den > 0:
        raise DegenerateTestFunction("test function has zero L2 norm")
    return conformal_energy(f, mu, grid) / den
