"""Grayscale inpainting by orientation-lift hypoelliptic diffusion,
plus sub-Riemannian curve completion between oriented endpoints."""

from .curves import (BoundaryData, ControlCurve, CurveSolution, LiftedTrajectory,
                     SolverOptions, complete_curve, energy, integrate,
                     rep_invariant_cost)
from .errors import ConvergenceError, FormatError
from .grid import (AngleGrid, FrequencyGrid, Image, LiftedField, Mask, load_image,
                   load_lifted, load_mask, save_image, save_lifted, save_mask)
from .lift import (LiftParams, OrientationMap, gaussian_smooth, lift, lift_cross,
                   lift_fixed_angle, orientation_map, project_max, project_sum)
from .restore import (AheParams, DrState, ahe, average_fill, dr_initial_state,
                      dr_sigma, dr_step, dynamic_restoration)
from .spectral import (DiffusionParams, SpectralColumn, SpectralColumns,
                       SpectralDiffuser, angular_laplacian, decay_rates, diffuse,
                       evolve_column, from_spectral, to_spectral)
from .varying import (CoefficientField, VaryingCoeffParams, coefficient_field,
                      diffuse_varying, epsilon_map)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
