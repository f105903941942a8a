"""Upper bounds from annulus test functions, checked against the solver."""
from confspec import ConformalFactor
from confspec.functionals import certify_upper_bound, korevaar_ratio
from confspec.spectrum import compute_spectrum

# For each k we build 2k annuli, keep k whose doubled versions carry little
# mass, and place one cutoff function on each. The largest Rayleigh quotient
# among them bounds lambda_{k-1} from above by min-max.
for name, mu in [("round", ConformalFactor.constant(3)),
                 ("two bubbles t=3", ConformalFactor.two_bubble(3, 3.0))]:
    spec = compute_spectrum(mu, L=32)
    print(name)
    for k in (1, 2, 4, 8):
        rep = certify_upper_bound(mu, k, spectrum=spec)
        print(f"  k={k:2d}  solver lambda_{k - 1} = {rep.solver_value:9.4f}   "
              f"certified bound = {rep.bound:10.4f}   bound/solver = {rep.solver_ratio:6.2f}")
    # After normalizing by mass and dividing by k^(2/3)
    # the solver values stay bounded as k grows.
    print("  lambda_bar_k / k^(2/3):", [round(korevaar_ratio(mu, k, spectrum=spec), 3) for k in (1, 4, 16)])
