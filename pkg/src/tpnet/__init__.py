"""Time-lagged technology-to-product specialization networks.

Pipeline: load yearly country-activity panels, sum them over windows,
binarize specialization by comparative advantage, contract the two layers
over common countries into a directed technology-product matrix, validate
each link against a degree-constrained maximum-entropy null ensemble, keep
links significant in every configured period pair, and rank activities by
the fitness-complexity iteration.
"""

from .assist import AssistMatrix, compute_assist
from .config import LagSpec, RunConfig, parse_config, serialize_config
from .efc import (
    ActivityRanking,
    FitnessComplexity,
    LinkDifferenceCurve,
    cumulative_link_difference,
    rank_activities,
    run_efc,
)
from .errors import (
    AllZeroError,
    AxisMismatchError,
    ConfigError,
    FitError,
    PanelError,
    StageError,
    TpnetError,
    WindowError,
)
from .nullmodel import (
    BiCMModel,
    NullEnsemble,
    fit_bicm,
    load_model,
    null_assist_ensemble,
    sample_ensemble,
    save_model,
)
from .panels import (
    ActivityPanel,
    WindowedMatrix,
    aggregate_activities,
    aggregate_window,
    align_countries,
    load_panel,
    read_panel_csv,
)
from .pipeline import (
    PipelineResult,
    RobustnessReport,
    run_pipeline,
    run_robustness,
)
from .rca import BinaryMatrix, RcaMatrix, binarize, compute_rca
from .validate import (
    LinkValidation,
    PairValidation,
    ValidatedNetwork,
    compute_pvalues,
    degree_report,
    intersect_pairs,
    load_hs_sections,
    significance_profile,
    tier_threshold,
)

__version__ = "0.1.0"

__all__ = [
    "ActivityPanel",
    "ActivityRanking",
    "AllZeroError",
    "AssistMatrix",
    "AxisMismatchError",
    "BiCMModel",
    "BinaryMatrix",
    "ConfigError",
    "FitError",
    "FitnessComplexity",
    "LagSpec",
    "LinkDifferenceCurve",
    "LinkValidation",
    "NullEnsemble",
    "PairValidation",
    "PanelError",
    "PipelineResult",
    "RcaMatrix",
    "RobustnessReport",
    "RunConfig",
    "StageError",
    "TpnetError",
    "ValidatedNetwork",
    "WindowError",
    "WindowedMatrix",
    "aggregate_activities",
    "aggregate_window",
    "align_countries",
    "binarize",
    "compute_assist",
    "compute_pvalues",
    "compute_rca",
    "cumulative_link_difference",
    "degree_report",
    "fit_bicm",
    "intersect_pairs",
    "load_hs_sections",
    "load_model",
    "load_panel",
    "null_assist_ensemble",
    "parse_config",
    "rank_activities",
    "read_panel_csv",
    "run_efc",
    "run_pipeline",
    "run_robustness",
    "sample_ensemble",
    "save_model",
    "serialize_config",
    "significance_profile",
    "tier_threshold",
]
