"""Spectra of the conformal Laplacian on the conformal class of the round sphere."""
from .conformal import ConformalFactor, ZonalFunction, measure_m_total, rayleigh_quotient, volume_total
from .cover import MetricMeasureSpace, decompose, reindex_and_select
from .functionals import (
    certify_upper_bound,
    family_generators,
    hersch_check,
    korevaar_ratio,
    normalized_eigenvalue,
    volume_normalized,
)
from .spectrum import compute_spectrum, lambda_k
from .sphere import SpherePoint, conformal_dilation, geodesic_distance, stereo_project, stereo_unproject
from .testfn import Annulus, phi_annulus, phi_ball, phi_complement

__version__ = "0.1.0"
