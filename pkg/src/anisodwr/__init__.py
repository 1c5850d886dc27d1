"""Anisotropic multi-goal space-time adaptive FEM for convection-dominated
transport: SUPG-stabilized cG(p)-dG(0) solves with DWR error control split
into temporal and per-direction spatial indicators."""

from .adaptivity import AdaptConfig, LoopRecord, mark, records_to_csv, run_dwr_loop
from .benchmarks import (boundary_layer_width, hemker_problem,
                         manufactured_problem, moving_hump_problem)
from .errors import AnisoDwrError
from .estimator import (ErrorIndicatorField, compute_indicators,
                        effectivity_index, interpolate_patch,
                        reconstruct_in_time, restrict_degree,
                        restrict_directional)
from .fe_space import FeSpace, build_dof_map, evaluate_field
from .forms import Assembler, assemble_inner_form, assemble_rhs_F, assemble_slab
from .geometry import max_aspect_ratio
from .goals import (CombinedGoal, GoalFunctional, MollifiedDelta, combine,
                    evaluate_goal, exact_goal_value, goal_load, mollifier_value)
from .mesh import AnisoQuadMesh, build_patches, create_hemker_mesh, create_rectangle_mesh
from .problem import CdrProblem
from .time_slab import (SlabSolution, TimePartition, solve_adjoint,
                        solve_primal, sparse_solve)

__version__ = "0.1.0"

__all__ = [
    "AdaptConfig", "AnisoDwrError", "AnisoQuadMesh", "Assembler", "CdrProblem",
    "CombinedGoal", "ErrorIndicatorField", "FeSpace", "GoalFunctional",
    "LoopRecord", "MollifiedDelta", "SlabSolution", "TimePartition",
    "assemble_inner_form", "assemble_rhs_F", "assemble_slab",
    "boundary_layer_width", "build_dof_map", "build_patches", "combine",
    "compute_indicators", "create_hemker_mesh", "create_rectangle_mesh",
    "effectivity_index", "evaluate_field", "evaluate_goal", "exact_goal_value",
    "goal_load", "hemker_problem", "interpolate_patch", "manufactured_problem",
    "mark", "max_aspect_ratio", "mollifier_value", "moving_hump_problem",
    "reconstruct_in_time", "records_to_csv", "restrict_degree",
    "restrict_directional", "run_dwr_loop", "solve_adjoint", "solve_primal",
    "sparse_solve",
]
