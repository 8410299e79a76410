"""Prediction-powered confidence intervals for average treatment effects.

Combines a small dataset that can be trusted for unbiased effect
estimation with a large dataset that may be confounded: the large one
trains a conditional-effect predictor whose average is then debiased by a
rectifier computed from the small one's influence scores. The resulting
intervals are valid yet markedly narrower than small-dataset-only
intervals. Includes a synthetic-data generator with controllable hidden
confounding and a Monte Carlo bench for coverage/width experiments.
"""

from .baselines import aipw_ci
from .cate import CateModel, evaluate, fit_dr_learner
from .dataset import (
    CsvSchema,
    Dataset,
    DatasetRole,
    Sample,
    SplitAssignment,
    load_csv,
    save_csv,
    split,
)
from .errors import (
    BoundViolationError,
    ConfigurationError,
    CrossFitDegenerateError,
    CsvParseError,
    DegenerateLabelsError,
    NumericalError,
    OverlapViolationError,
    PpciError,
    SchemaError,
)
from .nuisance import (
    CrossFitNuisance,
    LinearModel,
    LogisticModel,
    cross_fit,
    fit_linear,
    fit_logistic,
)
from .pipeline import AnalysisResult, analyze
from .ppi import (
    MeasureOfFit,
    Method,
    PPInterval,
    Rectifier,
    measure_of_fit,
    measure_of_fit_from_values,
    normal_quantile,
    pp_estimate,
    pp_interval,
    pp_interval_apo,
    pp_interval_finite_pop,
    pp_interval_rct,
    pp_interval_shifted,
    rectifier,
)
from .scores import ScoreKind, ScoreVector, aipw_score, ipw_score, score_dataset
from .synthgen import (
    DgpConfig,
    GpSampler,
    KernelConfig,
    SyntheticOutput,
    generate,
    kernel,
    kernel_matrix,
    sample_gp,
    scenario_config,
)

__version__ = "0.1.0"
