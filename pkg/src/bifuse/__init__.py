"""Joint multi-task regression and convex bi-clustering of the coefficient matrix."""

from .datagen import GeneratorSpec, checkerboard_theta, generate, simulate_dataset
from .errors import DegenerateWeightsError, InputError, NumericalDivergenceError
from .formulation1 import fit_formulation1
from .formulation2 import fit_formulation2
from .lasso import lasso_cd, lasso_tasks
from .metrics import (adjusted_rand, bicluster_labels, f1_score, jaccard_index,
                      pair_confusion, recovery_accuracy, rmse)
from .model import (AxisEdges, EdgeWeights, FitResult, Hyperparameters, TaskDataset,
                    objective_f1, objective_f2)
from .prox import ProxConfig, cobra, prox_fusion, prox_l1, prox_ridge
from .selection import (ClusterAssignment, cluster_thresholds, estimate_sigma,
                        extract_clusters)
from .tuning import (SolutionPath, Split, assign_clusters, baseline_two_step,
                     cross_validate, default_grids, fit_model, pilot_edges, solution_path)
from .weights import (bridge_components, build_weights, knn_gaussian_weights,
                      normalize_weights)

__all__ = [
    "AxisEdges", "ClusterAssignment", "DegenerateWeightsError", "EdgeWeights", "FitResult",
    "GeneratorSpec", "Hyperparameters", "InputError", "NumericalDivergenceError",
    "ProxConfig", "SolutionPath", "Split", "TaskDataset", "adjusted_rand", "assign_clusters",
    "baseline_two_step", "bicluster_labels", "bridge_components", "build_weights", "checkerboard_theta",
    "cluster_thresholds", "cobra", "cross_validate", "default_grids", "estimate_sigma", "extract_clusters",
    "f1_score", "fit_formulation1", "fit_formulation2", "fit_model", "generate",
    "jaccard_index", "knn_gaussian_weights", "lasso_cd", "lasso_tasks", "normalize_weights",
    "objective_f1", "objective_f2", "pair_confusion", "pilot_edges", "prox_fusion", "prox_l1", "prox_ridge",
    "recovery_accuracy", "rmse", "simulate_dataset", "solution_path",
]
