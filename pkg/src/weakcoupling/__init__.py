"""Principal eigenvalue of ``-Delta_p + V - alpha W`` on R^N for radial data, and its
weak-coupling asymptotics as ``alpha -> 0+``."""

from .radial import RadialField, RadialGrid, geometric_grid, integrate, make_grid, radial_gradient, radial_p_laplacian
from .potentials import (ZERO, GroundStateProfile, Potential, bump_perturbation, check_condition,
                         glued_power_profile, potential_from_profile, smooth_tail_profile, step_well)
from .energy import ProblemSpec, energy, rayleigh, simplified_energy, two_sided_check
from .eigensolver import (SolverConfig, SolverFailure, SpectralResult, auto_radius, lambda_curve,
                          solve_ground_state, solve_with_domain_extrapolation)

__version__ = "0.1.0"
