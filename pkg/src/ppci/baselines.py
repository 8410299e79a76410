"""Single-dataset comparison estimators.

The classical interval on the small dataset alone is the honest but wide
baseline; the same construction on the large dataset alone is narrow but
biased whenever hidden confounding is present, so its result is flagged
rather than trusted.
"""

from __future__ import annotations

import math

from .dataset import Dataset, DatasetRole
from .errors import ConfigurationError
from .nuisance import DEFAULT_CLIP_EPSILON, DEFAULT_RIDGE_LAMBDA, cross_fit
from .ppi import Method, PPInterval, _z_two_sided
from .scores import ScoreKind, score_dataset


def aipw_ci(ds: Dataset, n_folds: int = 2, seed: int = 0,
            ridge_lambda: float = DEFAULT_RIDGE_LAMBDA,
            clip_epsilon: float = DEFAULT_CLIP_EPSILON,
            alpha: float = 0.05) -> PPInterval:
    """Classical doubly robust interval from one dataset.

    Estimate is the mean non-centered influence score with cross-fitted
    nuisances; half-width is z_{1-alpha/2} * sqrt(var(scores)/n). The method
    tag follows the dataset role, and large-dataset results carry a
    biased-by-assumption flag since that dataset may be confounded.
    """
    a = ds.treatments()
    if a.min() == a.max():
        raise ConfigurationError("dataset must contain both treatment arms")
    nuis = cross_fit(ds, n_folds=n_folds, seed=seed,
                     ridge_lambda=ridge_lambda, clip_epsilon=clip_epsilon)
    scores = score_dataset(ds, nuis, kind=ScoreKind.AIPW)
    estimate = scores.mean()
    variance = scores.variance()
    z = _z_two_sided(alpha)
    half = z * math.sqrt(variance / len(scores))
    large = ds.role is DatasetRole.LARGE_AUXILIARY
    return PPInterval(
        method=Method.BASELINE_D2 if large else Method.BASELINE_D1,
        estimate=estimate, lower=estimate - half, upper=estimate + half,
        alpha=alpha, n=len(scores), n_large=None,
        sigma2_delta=variance, sigma2_tau2=None,
        biased_by_assumption=large,
    )
