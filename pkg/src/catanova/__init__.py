"""
Functional ANOVA decompositions and Shapley attributions for functions of
categorical inputs observed on an arbitrary empirical support.
"""
from .anova import (AttributionVector, Decomposition, DiagnosticsReport, component_norms, decompose,
                    global_importance, global_importances, metrics, orthogonality_metric, shapley,
                    shapley_matrix)
from .basis import (EMPTY_KEY, BasisColumn, IndexKey, corrected_phi_values, design_matrix,
                    enumerate_indices, evaluate_phi, evaluate_psi, index_space_size)
from .distribution import (EmpiricalDistribution, HyperGrid, MarginalTable, from_dataset,
                           inner_product, marginal)
from .exceptions import (CatAnovaError, ConsistencyError, DataError, NumericalError,
                         OutOfSupportError)
from .gram import CoefficientVector, GramSystem, build_system, gram_entry, mean_coefficient, solve_coefficients
from .selection import (Canonical, Neighborhood, RankTracker, SelectedBasis, SelectionConfig,
                        VarianceRanked, greedy_select, prune_inactive, rank_tracker_add)

__version__ = "0.1.0"

__all__ = [
    "AttributionVector", "BasisColumn", "Canonical", "CatAnovaError", "CoefficientVector",
    "ConsistencyError", "DataError", "Decomposition", "DiagnosticsReport", "EMPTY_KEY",
    "EmpiricalDistribution", "GramSystem", "HyperGrid", "IndexKey", "MarginalTable", "Neighborhood",
    "NumericalError", "OutOfSupportError", "RankTracker", "SelectedBasis", "SelectionConfig",
    "VarianceRanked", "build_system", "component_norms", "corrected_phi_values", "decompose",
    "design_matrix", "enumerate_indices", "evaluate_phi", "evaluate_psi", "from_dataset",
    "global_importance", "global_importances", "gram_entry", "greedy_select", "index_space_size",
    "inner_product", "marginal", "mean_coefficient", "metrics", "orthogonality_metric",
    "prune_inactive", "rank_tracker_add", "shapley", "shapley_matrix", "solve_coefficients",
]
