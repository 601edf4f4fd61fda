"""Information-theoretic 2D robot exploration with kernel surrogates for MI."""

from .grid import (CellRay, GroundTruthGrid, InverseSensorModel, MapFormatError,
                   OccupancyGrid, binary_entropy, load_pgm, raycast, read_pgm, write_pgm)
from .pose import Pose, wrap_angle
from .sensor import BeamScan, InvalidPoseError, SensorSpec, integrate_scan, simulate_scan
from .mi import MiResult, action_mi, beam_mi, beam_outcome_probs, mi_from_cell_probs, normalize_mi
from .surrogates import (BKIRegressor, GPRegressor, TrainingSet, action_distances,
                         kernel, matern32)
from .explore import (ENGINES, ExplorationConfig, ExplorationLog, ExplorationStuckError,
                      PlanningError, astar, bki_optimize, explore, information_objective,
                      mi_cell_budget, sample_actions, surrogate_optimize)
from .mapgen import generate_structured_map, generate_unstructured_map, load_map
from .bench import ExperimentSpec, parse_spec_file, run_experiment, run_single, summarize_dir

__version__ = "0.1.0"

__all__ = [
    "BKIRegressor", "BeamScan", "CellRay", "ENGINES", "ExperimentSpec",
    "ExplorationConfig", "ExplorationLog", "ExplorationStuckError", "GPRegressor",
    "GroundTruthGrid", "InvalidPoseError", "InverseSensorModel", "MapFormatError",
    "MiResult", "OccupancyGrid", "PlanningError", "Pose", "SensorSpec", "TrainingSet",
    "action_distances", "action_mi", "astar", "beam_mi", "beam_outcome_probs",
    "binary_entropy", "bki_optimize", "explore", "generate_structured_map",
    "generate_unstructured_map", "information_objective", "integrate_scan", "kernel",
    "load_map", "load_pgm", "matern32", "mi_cell_budget", "mi_from_cell_probs",
    "normalize_mi",
    "parse_spec_file", "raycast", "read_pgm", "run_experiment", "run_single",
    "sample_actions", "simulate_scan", "summarize_dir", "surrogate_optimize",
    "wrap_angle", "write_pgm",
]
