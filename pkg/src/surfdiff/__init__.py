"""Effective diffusion of lateral Brownian motion on quasi-planar random surfaces."""

from .analysis import det_relation, eigen_sandwich, ensemble_run, isotropy_deviation
from .cell import (EffectiveTensor, PeriodicMesh, assemble, build_mesh, effective_tensor,
                   refine_until, solve_cell, solve_correctors, voigt_reuss_bounds)
from .fields import (BumpSpec, GaussianFieldParams, PoissonFieldParams, bump_eval, flat_field,
                     ridge_field, sample_gaussian_field, sample_poisson_field)
from .geometry import average_area, diffusion_sqrt_at, drift_at, metric_at
from .sde import SimulationPlan, em_step, simulate

__version__ = "0.1.0"
