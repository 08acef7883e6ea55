"""Quasimeasures of noncompactness on sampled function ensembles, with a
Hammerstein fixed-point engine built on them."""
from ._accel import BACKEND, NUMBA_AVAILABLE
from .darbo import (ComparisonFunction, DarboTrace, certify, ensemble_iterate,
                    picard_solve)
from .ensemble import (FunctionEnsemble, Grid, SampledFunction, SaturatingSequence,
                       make_saturating, restricted_distance, sup_distance)
from .geometry import (PointCloud, hausdorff_distance, hull_distance, kcenter_radius,
                       nonconvexity)
from .hammerstein import (Cone, HammersteinProblem, Kernel, Nonlinearity, apply,
                          car4_norm, cone_check, estimate_q, k1_check, solve_radius)
from .noncompactness import (QuasimeasureParams, QuasimeasureReport, axiom_suite, chi,
                             chi0, eta, omega, omega0, quasimeasure)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "NUMBA_AVAILABLE",
    "ComparisonFunction", "DarboTrace", "certify", "ensemble_iterate", "picard_solve",
    "FunctionEnsemble", "Grid", "SampledFunction", "SaturatingSequence", "make_saturating",
    "restricted_distance", "sup_distance",
    "PointCloud", "hausdorff_distance", "hull_distance", "kcenter_radius", "nonconvexity",
    "Cone", "HammersteinProblem", "Kernel", "Nonlinearity", "apply", "car4_norm", "cone_check",
    "estimate_q", "k1_check", "solve_radius",
    "QuasimeasureParams", "QuasimeasureReport", "axiom_suite", "chi", "chi0", "eta", "omega",
    "omega0", "quasimeasure",
]
