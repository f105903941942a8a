"""Random inputs shared by several test modules."""
import numpy as np

from confspec.conformal import ConformalFactor, ZonalFunction
from confspec.functionals import random_polynomial_factor


def random_factor(rng, n=3, degree=4):
    """Random positive zonal factor: polynomial, bubble or two-bubble."""
    kind = rng.integers(3)
    if kind == 0:
        return random_polynomial_factor(n, rng, degree, amplitude=rng.uniform(0.05, 0.7))
    t = float(rng.uniform(1.2, 3.0))
    return ConformalFactor.bubble(n, t) if kind == 1 else ConformalFactor.two_bubble(n, t)


def random_zonal(rng, degree=4):
    return ZonalFunction.from_polynomial(rng.standard_normal(degree + 1))
