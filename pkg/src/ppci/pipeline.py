"""End-to-end analysis: two datasets in, a set of intervals out.

Shared by the command-line `estimate` path and the Monte Carlo bench so
both run exactly the same sequence: split the large dataset in half, fit
the two-stage effect learner on one half, aggregate it on the other,
score the small dataset, rectify, and build intervals alongside the two
single-dataset baselines.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .baselines import aipw_ci
from .cate import CateModel, evaluate, fit_dr_learner
from .dataset import Dataset, split
from .errors import ConfigurationError
from .nuisance import DEFAULT_CLIP_EPSILON, DEFAULT_RIDGE_LAMBDA, cross_fit
from .ppi import (
    MeasureOfFit,
    Method,
    PPInterval,
    Rectifier,
    measure_of_fit,
    pp_interval,
    rectifier,
)
from .scores import ScoreKind, ScoreVector, score_dataset

# sub-seed tags so the large-dataset half split, the small-dataset
# cross-fit, and the large-dataset baseline never share an RNG stream
_TAG_D2_SPLIT = 1
_TAG_D1_CROSSFIT = 2
_TAG_D2_BASELINE = 3
_MULT = 1_000_003


def _derive_seed(seed: int, tag: int) -> int:
    return (seed * _MULT + tag) % (2 ** 63)


@dataclass
class AnalysisResult:
    """Intervals per method plus the intermediate pieces that built them."""

    intervals: dict[Method, PPInterval] = field(default_factory=dict)
    scores: ScoreVector | None = None
    tau2_on_d1: np.ndarray | None = None
    rect: Rectifier | None = None
    fit: MeasureOfFit | None = None
    model: CateModel | None = None


def analyze(d1: Dataset, d2: Dataset, *, alpha: float = 0.05,
            n_folds: int = 2, seed: int = 0,
            ridge_lambda: float = DEFAULT_RIDGE_LAMBDA,
            clip_epsilon: float = DEFAULT_CLIP_EPSILON,
            methods: tuple[Method, ...] = (
                Method.PP_AIPW, Method.BASELINE_D1, Method.BASELINE_D2,
            )) -> AnalysisResult:
    """Run the full pipeline once; returns intervals plus components."""
    if Method.PP_IPW in methods and d1.known_propensity is None:
        raise ConfigurationError(
            "the known-propensity method needs known_propensity on the "
            "small dataset"
        )
    out = AnalysisResult()
    needs_model = Method.PP_AIPW in methods or Method.PP_IPW in methods
    if needs_model:
        half = split(d2, 2, _derive_seed(seed, _TAG_D2_SPLIT))
        out.model = fit_dr_learner(d2, half, ridge_lambda, clip_epsilon)
        out.fit = measure_of_fit(out.model)
        out.tau2_on_d1 = evaluate(out.model, d1.covariate_matrix())

    if Method.PP_AIPW in methods:
        nuis = cross_fit(d1, n_folds=n_folds,
                         seed=_derive_seed(seed, _TAG_D1_CROSSFIT),
                         ridge_lambda=ridge_lambda, clip_epsilon=clip_epsilon)
        out.scores = score_dataset(d1, nuis, kind=ScoreKind.AIPW)
        out.rect = rectifier(out.scores, out.tau2_on_d1)
        out.intervals[Method.PP_AIPW] = pp_interval(
            out.rect, out.fit, alpha, Method.PP_AIPW)

    if Method.PP_IPW in methods:
        out.scores = score_dataset(d1, kind=ScoreKind.IPW)
        out.rect = rectifier(out.scores, out.tau2_on_d1)
        out.intervals[Method.PP_IPW] = pp_interval(
            out.rect, out.fit, alpha, Method.PP_IPW)

    if Method.BASELINE_D1 in methods:
        out.intervals[Method.BASELINE_D1] = aipw_ci(
            d1, n_folds=n_folds, seed=_derive_seed(seed, _TAG_D1_CROSSFIT),
            ridge_lambda=ridge_lambda, clip_epsilon=clip_epsilon, alpha=alpha,
        )

    if Method.BASELINE_D2 in methods:
        out.intervals[Method.BASELINE_D2] = aipw_ci(
            d2, n_folds=n_folds, seed=_derive_seed(seed, _TAG_D2_BASELINE),
            ridge_lambda=ridge_lambda, clip_epsilon=clip_epsilon, alpha=alpha,
        )

    return out
