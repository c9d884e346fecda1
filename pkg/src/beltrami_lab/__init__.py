"""Numerical laboratory for the planar Beltrami equation.

Spectral Neumann solver for principal quasiconformal maps, closed-form
test coefficients, fractal point-set generators, and box-counting
distortion experiments, with a scikit-learn style estimator facade.
"""

from .coefficients import (BeltramiCoefficient, ExponentReport, MollifierSpec,
                           coefficient_from_field, critical_exponents,
                           inverse_coefficient, inverse_coefficient_at,
                           make_log_example_coefficient,
                           make_radial_stretch_coefficient, mollify,
                           parse_coefficient_spec, sobolev_norm)
from .errors import (BeltramiLabError, ConvergenceError,
                     DegenerateJacobianError, InversionError)
from .estimators import BeltramiMapTransformer, BoxCountingDimension
from .formats import (read_cloud_csv, read_field_qcbf, write_cloud_csv,
                      write_field_qcbf, write_report_csv)
from .geometry import (CantorSpec, PointCloud, cantor_cloud,
                       default_garnett_displacements, garnett_map, map_cloud,
                       segment_cloud, similarity_dimension, square_cloud)
from .grid import ComplexField, GridSpec
from .measure import (CoverEstimate, DimensionFit, DistortionReport,
                      astala_bound, box_count, box_dimension,
                      distortion_experiment, dyadic_content, gauge_linear,
                      gauge_log_damped, gauge_power, holder_dim_bound,
                      measure_function_content)
from .operators import (band_limit, beurling_transform, cauchy_transform,
                        lp_norm, radial_profile, random_band_limited,
                        set_fft_workers, spectral_derivative)
from .solver import (LogDerivativeResult, PrincipalSolution, bump_field,
                     equation_residual, evaluate_map, image_radius,
                     interpolate_field, invert_map, invert_points,
                     load_solution_fields, log_derivative_solve,
                     neumann_solve, save_solution, second_derivative,
                     smooth_window, weak_residual)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
