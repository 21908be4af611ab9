"""Per-person risky-choice rate prediction.

Blends a factorization machine over sparse subject/game identity vectors
with ridge regression over behavioral gamble features.
"""

from .backend import backend_name
from .data import (
    ChoiceProblem,
    LotShape,
    OutcomeDistribution,
    RatePoint,
    SplitAssignment,
    TrialRecord,
    aggregate_b_rates,
    expand_gamble_a,
    expand_gamble_b,
    joint_distribution,
    parse_raw_csv,
    split_dataset,
    synth_generate,
)
from .ensemble import (
    BlendModel,
    MemberSpec,
    PipelineConfig,
    blend_fit,
    blend_predict,
    run_pipeline,
)
from .features import (
    FEATURE_NAMES,
    PsychFeatureVector,
    SparseVector,
    Standardizer,
    encode_onehot,
    fit_standardizer,
    naive_features,
    psych_features,
)
from .fm import (
    FMModel,
    FMTrainConfig,
    Solver,
    fm_load,
    fm_predict,
    fm_save,
    fm_train,
    fm_train_als,
    fm_train_sgd,
)
from .linear import (
    LassoConfig,
    LinearModel,
    RidgeConfig,
    lasso_fit,
    linear_load,
    linear_predict,
    linear_save,
    ridge_fit,
)
from .metrics import EvalReport, ReportRow, emit_report, mse, mse_x100, stability_report

__version__ = "0.1.0"
