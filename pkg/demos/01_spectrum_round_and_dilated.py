"""Conformal Laplacian spectra on S^3: the round metric, a dilation, a generic factor."""
import numpy as np

from confspec import ConformalFactor
from confspec.spectrum import compute_spectrum, round_box_eigenvalues

# The round metric: values l(l+2) + 3/4 with multiplicity (l+1)^2.
round_res = compute_spectrum(ConformalFactor.constant(3), L=24)
print("round, grouped:", [(round(v, 10), m) for v, m in round_res.grouped()[:5]])
print("closed form:   ", round_box_eigenvalues(3, 4))

# A dilation bubble is the pullback of the round metric by a conformal map,
# so the spectrum must not move even though the factor is strongly peaked.
for t in (1.5, 3.0):
    res = compute_spectrum(ConformalFactor.bubble(3, t), L=40)
    err = np.max(np.abs(res.expanded()[:10] - round_res.expanded()[:10]))
    print(f"bubble t={t}: max deviation from round on first 10 = {err:.2e}")

# A generic factor splits the multiplicities: each block j carries
# dimension (j+1)^2 but the blocks no longer align.
mu = ConformalFactor.polynomial(3, [1.0, 0.3, -0.2])
res = compute_spectrum(mu, L=24)
print("polynomial factor, first 6 modes (value, multiplicity, block):")
for v, m, b in list(zip(res.values, res.multiplicities, res.blocks))[:6]:
    print(f"  {v:12.8f} {m:3d} {b:3d}")
print("trusted eigenvalues (L vs L+8 agreement):", res.trusted_count)
