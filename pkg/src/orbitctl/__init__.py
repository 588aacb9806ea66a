"""Numerical controllability analyses on R^n, flat tori and the 2-sphere."""

__version__ = "0.1.0"

from .manifold import Manifold, distance, euclidean, sphere2, tangent_project, torus, wrap
from .expr import diff, evaluate, parse
from .fields import ControlSystem, VectorField, builtin, eval_field, jacobian, system_from_config
from .lie import Bracket, Leaf, bracket, enumerate_words, eval_word, larc_check, parse_word
from .flow import IntegratorOptions, Schedule, chrono_jacobian, chrono_map, chrono_rank, general_schedule, integrate
from .reach import (
    ReachOptions,
    ample_check,
    coverage,
    find_closed_orbit,
    orbit_tube_check,
    reach_sample,
    steer_example1,
)
from .bilinear import BilinearSystem3, a_of_u, eigen3, project_sphere, theorem_b_check

__all__ = [
    "Manifold", "euclidean", "torus", "sphere2", "wrap", "distance", "tangent_project",
    "parse", "evaluate", "diff",
    "VectorField", "ControlSystem", "builtin", "eval_field", "jacobian", "system_from_config",
    "Leaf", "Bracket", "parse_word", "bracket", "enumerate_words", "eval_word", "larc_check",
    "IntegratorOptions", "Schedule", "integrate", "chrono_map", "chrono_jacobian", "chrono_rank", "general_schedule",
    "ReachOptions", "reach_sample", "coverage", "steer_example1", "find_closed_orbit", "ample_check", "orbit_tube_check",
    "BilinearSystem3", "a_of_u", "eigen3", "theorem_b_check", "project_sphere",
]
