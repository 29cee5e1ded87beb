"""Black-box discrimination testing for binary classifiers.

The package maps one protected group's sample onto the other's with an
optimal transport map (exact assignment or a trained generator), collects
the individuals whose classification flips under the map, and summarizes
which features drive the flips. A validation battery checks trained maps
against the exact solution.
"""

from .data import (
    CostFunction,
    FeatureMatrix,
    GroupedDataset,
    Normalizer,
    cost,
    cost_matrix,
    fit_normalizer,
    normalize_dataset,
    read_grouped_csv,
    read_grouped_csv_indexed,
    write_grouped_csv,
)
from .exact import ExactMap, brute_force_exact, solve_exact, subsample
from .flips import (
    AuditBundle,
    audit_exact_from_labels,
    Flipset,
    ParityCheck,
    ReverseCheck,
    TransparencyReport,
    compute_flipset,
    demographic_parity_audit,
    equalized_odds_audit,
    label_stratum,
    marginal_histograms,
    reverse_consistency,
    transparency_report,
)
from .gan import (
    Critic,
    Generator,
    Mlp,
    TrainConfig,
    critic_loss,
    generator_loss,
    load_generator,
    map_points,
    save_generator,
    train,
)
from .synth import (
    ArrestsModel,
    HiringParams,
    LinearThresholdModel,
    LogisticTrainer,
    PredictionsFileModel,
    RandomLabelNeighborModel,
    fair_hiring_model,
    gen_control_normal,
    gen_gaussian,
    gen_geometric_arrests,
    gen_two_feature_hiring,
    ssl_style_models,
    train_logistic,
)
from .validation import (
    ControlConfig,
    ControlResult,
    StabilityResult,
    ValidationReport,
    control_experiment,
    distance_comparison,
    ks_two_sample,
    mse_diff,
    stability_harness,
    validate_gan,
)

__version__ = "0.1.0"

__all__ = [
    "ArrestsModel",
    "AuditBundle",
    "ControlConfig",
    "ControlResult",
    "CostFunction",
    "Critic",
    "ExactMap",
    "FeatureMatrix",
    "Flipset",
    "Generator",
    "GroupedDataset",
    "HiringParams",
    "LinearThresholdModel",
    "LogisticTrainer",
    "Mlp",
    "Normalizer",
    "ParityCheck",
    "PredictionsFileModel",
    "RandomLabelNeighborModel",
    "ReverseCheck",
    "StabilityResult",
    "TrainConfig",
    "TransparencyReport",
    "ValidationReport",
    "audit_exact_from_labels",
    "brute_force_exact",
    "compute_flipset",
    "control_experiment",
    "cost",
    "cost_matrix",
    "critic_loss",
    "demographic_parity_audit",
    "distance_comparison",
    "equalized_odds_audit",
    "fair_hiring_model",
    "fit_normalizer",
    "gen_control_normal",
    "gen_gaussian",
    "gen_geometric_arrests",
    "gen_two_feature_hiring",
    "generator_loss",
    "ks_two_sample",
    "label_stratum",
    "load_generator",
    "map_points",
    "marginal_histograms",
    "mse_diff",
    "normalize_dataset",
    "read_grouped_csv",
    "read_grouped_csv_indexed",
    "reverse_consistency",
    "save_generator",
    "solve_exact",
    "ssl_style_models",
    "stability_harness",
    "subsample",
    "train",
    "train_logistic",
    "transparency_report",
    "validate_gan",
    "write_grouped_csv",
]
