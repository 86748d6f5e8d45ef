"""Optimal transport, Wasserstein barycenters and numerical checks of
curvature-dimension inequalities on finite spaces, grids and Gaussians."""

__version__ = "0.1.0"

from .barycenter import (BarycenterResult, MixtureOmega, barycenter_fixed_support, barycenter_multimarginal,
                         barycenter_sinkhorn, gaussian_barycenter)
from .checks import (Box, CheckReport, QuadraticFunction, check_blaschke_santalo, check_cd, check_evi_integral,
                     check_evi_jensen_bound, check_jensen_bcd, check_logbm, i_k)
from .flows import FlowSpec, closed_form_curve, heat_flow_gaussian, jko_step, jko_trajectory, ou_flow_gaussian
from .functionals import EnergySpec, entropy, evaluate, gaussian_entropy, internal_energy, potential_energy
from .interpolation import WassersteinCurve, displacement_interpolate, gaussian_interpolate, geodesic_curve
from .measures import DiscreteMeasure, GaussianMeasure, discretize_gaussian
from .ot import TransportPlan, solve_ot_entropic, solve_ot_exact, w2, w2_sq
from .spaces import EuclideanGrid, FiniteSpace, GaussianAnalytic, point_barycenter, validate_space

__all__ = [
    "BarycenterResult", "Box", "CheckReport", "DiscreteMeasure", "EnergySpec", "EuclideanGrid", "FiniteSpace",
    "FlowSpec", "GaussianAnalytic", "GaussianMeasure", "MixtureOmega", "QuadraticFunction", "TransportPlan",
    "WassersteinCurve", "barycenter_fixed_support", "barycenter_multimarginal", "barycenter_sinkhorn",
    "check_blaschke_santalo", "check_cd", "check_evi_integral", "check_evi_jensen_bound", "check_jensen_bcd",
    "check_logbm", "closed_form_curve", "discretize_gaussian", "displacement_interpolate", "entropy", "evaluate",
    "gaussian_barycenter", "gaussian_entropy", "gaussian_interpolate", "geodesic_curve", "heat_flow_gaussian",
    "i_k", "internal_energy", "jko_step", "jko_trajectory", "ou_flow_gaussian", "point_barycenter",
    "potential_energy", "solve_ot_entropic", "solve_ot_exact", "validate_space", "w2", "w2_sq",
]
