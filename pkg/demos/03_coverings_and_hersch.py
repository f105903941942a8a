"""Annulus coverings of a weighted sphere, and the round metric as maximizer of the first value."""
import numpy as np

from confspec import ConformalFactor
from confspec.cover import MetricMeasureSpace, decompose, reindex_and_select, verify_family
from confspec.functionals import hersch_check, random_polynomial_factor, round_lambda_bar_0

# A point cloud weighted by the conformal volume density of a concentrated factor.
mu = ConformalFactor.bubble(3, 3.0)
X = MetricMeasureSpace.from_conformal_factor(mu)
print(f"{len(X.points)} weighted points, total mass {X.nu_total:.4f}")
for k in (1, 4, 16):
    fam = decompose(X, k)
    verify_family(X, fam)  # raises if any two doubled annuli overlap or a share is too small
    sel = reindex_and_select(fam, X, k)
    print(f"k={k:2d}: {len(fam.annuli)} annuli, achieved share {fam.achieved_c:.4f}, "
          f"max doubled mass of the kept ones {np.max(sel.nu_doubled[:k]):.4f} <= {X.nu_total / k:.4f}")

# The first normalized value never exceeds the round one; the gap closes
# only for constant factors.
rng = np.random.default_rng(1)
print(f"round value: {round_lambda_bar_0(3):.6f}")
for _ in range(5):
    h = hersch_check(random_polynomial_factor(3, rng))
    print(f"  oscillation {h['oscillation']:.3f}  lambda_bar_0 {h['lambda_bar_0']:.6f}  gap {h['gap']:.2e}")
print(f"  constant factor gap: {hersch_check(ConformalFactor.constant(3, 2.0))['gap']:.1e}")
