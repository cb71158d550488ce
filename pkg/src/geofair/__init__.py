"""geofair: village-level development mapping from nighttime lights, with
counterfactual fairness audits against matched comparison villages.

Pipeline: ingest (or synthesize) village data -> spatial train/test split by
whole states -> fit lin-log OLS and random-forest predictors -> audit the
held-out residuals for systematic community bias via nearest-neighbor
counterfactual matching and two-sample tests.
"""

__version__ = "0.1.0"

from .audit import AuditMatrix, AuditReport, audit_matrix, residuals, run_audit
from .data import (Dataset, SummaryTable, VillageRecord, ingest_csv,
                   summarize, write_csv)
from .forest import ForestParams
from .matching import (MatchedPairSet, MatchSpace, assign_groups,
                       build_match_space, match)
from .models import (FeatureRecipe, TrainedModel, fit_ols, fit_rf,
                     grid_search, load_model, predict, r_squared, save_model)
from .splitting import (FoldAssignment, SplitAssignment, spatial_folds,
                        spatial_split)
from .stats import TestResult, mann_whitney_u, mean_diff, welch_t
from .synth import SynthConfig, generate, ground_truth_bias

__all__ = [
    "AuditMatrix", "AuditReport", "Dataset", "FeatureRecipe",
    "FoldAssignment", "ForestParams", "MatchSpace", "MatchedPairSet",
    "SplitAssignment", "SummaryTable", "SynthConfig", "TestResult",
    "TrainedModel", "VillageRecord", "assign_groups", "audit_matrix",
    "build_match_space", "fit_ols", "fit_rf", "generate",
    "grid_search", "ground_truth_bias", "ingest_csv", "load_model",
    "mann_whitney_u", "match", "mean_diff", "predict", "r_squared",
    "residuals", "run_audit", "save_model", "spatial_folds",
    "spatial_split", "summarize", "welch_t", "write_csv",
]
