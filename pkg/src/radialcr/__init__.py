"""Confidence-region boundaries from the radial profile likelihood ratio.

Rays are cast from the maximum likelihood estimate; along each ray the radius
where the likelihood-ratio statistic reaches the chi-squared critical value
is found by root finding, and mapped back to parameter coordinates.
"""

from .boundary import (
    BoundaryPoint,
    ConfidenceRegion,
    SolverOptions,
    region_2d,
    region_3d,
    solve_ray,
)
from .exceptions import (
    ConvergenceFailure,
    DegenerateData,
    NonFiniteStatistic,
    OutOfBox,
    RegionError,
    SolverError,
    UnboundedRay,
)
from .grid import GridSpec, evaluate_grid, marching_squares
from .likelihood import (
    Dataset,
    FittedModel,
    LikelihoodModel,
    ProfileMode,
    fit,
    lr_statistic,
    profile_loglik,
)
from .models import bivariate_normal_model, linear_regression_model, trivariate_normal_model
from .radial import Polar, RadialFrame, Spherical, max_radius_in_box, radial_lr_statistic, to_cartesian
from .special import ChiSquaredThreshold, chi_squared_quantile, regularized_lower_gamma

__version__ = "0.1.0"
