"""Numerical laboratory for quantitative moving planes on domains ``G + B_R``."""

from .constants import ConstantsBundle, assemble, c_N, harnack_chain_constant, semilinear_harnack_constant, sup_bound_constant
from .errors import InputError, NumericalError, ParsymError
from .geometry import (
    CapDecomposition,
    Disk,
    Ellipse,
    FourierDisk,
    HyperplaneFrame,
    MinkowskiDomain,
    Polygon,
    Union,
    critical_position,
    domain_from_dict,
    load_domain,
    minkowski_sum_ball,
    signed_distance,
)
from .grid import ScalarField, interpolate, rasterize
from .moving_planes import StabilityReport, approximate_center, certify, stability_radii
from .solver import SemilinearProblem, make_problem, solve_semilinear, solve_torsion
from .traces import lipschitz_seminorm, sample_boundary

__version__ = "0.1.0"
