"""Moving-mesh finite elements for the porous medium equation in 1D and 2D."""
from .errors import AssumptionError, ConvergenceError, DomainError, FormatError, PivotError
from .model import (BarenblattParams, PmeModel, barenblatt, barenblatt_mass,
                    barenblatt_support_radius)
from .mesh1d import Mesh1D, State1D, best_fit_mesh, interpolate, uniform_mesh
from .mesh2d import TriMesh, disk_mesh, horseshoe_mesh, read_mesh, square_mesh, write_mesh
from .stepping import SchemeConfig, StepReport
from .scheme1d import step
from .solver2d import State2D, explicit_step_2d, interpolate_2d
from .runner import RunRecord, run
from .diagnostics import (convergence_order, discrete_energy, dissipation, l2_error,
                          total_mass, waiting_time_estimate)
from .config import load_config, parse_config

__version__ = "0.1.0"

__all__ = [
    "AssumptionError", "ConvergenceError", "DomainError", "FormatError", "PivotError",
    "BarenblattParams", "PmeModel", "barenblatt", "barenblatt_mass", "barenblatt_support_radius",
    "Mesh1D", "State1D", "best_fit_mesh", "interpolate", "uniform_mesh",
    "TriMesh", "disk_mesh", "horseshoe_mesh", "read_mesh", "square_mesh", "write_mesh",
    "SchemeConfig", "StepReport", "step",
    "State2D", "explicit_step_2d", "interpolate_2d",
    "RunRecord", "run",
    "convergence_order", "discrete_energy", "dissipation", "l2_error", "total_mass",
    "waiting_time_estimate",
    "load_config", "parse_config",
]
