"""Per-sample non-centered influence scores.

The average of these scores over a dataset is the corresponding point
estimate of the average treatment effect (doubly robust AIPW form when
nuisances are estimated, Horvitz-Thompson IPW form when the treatment
probabilities are known), and their empirical variance drives every
confidence interval downstream.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, Sample
from .errors import ConfigurationError, OverlapViolationError
from .nuisance import CrossFitNuisance


class ScoreKind(enum.Enum):
    AIPW = "aipw"
    IPW = "ipw"


@dataclass(frozen=True)
class ScoreVector:
    """One influence score per sample of the small dataset."""

    values: np.ndarray
    kind: ScoreKind

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("scores must all be finite")

    def __len__(self):
        return len(self.values)

    def mean(self) -> float:
        return float(self.values.mean())

    def variance(self) -> float:
        """Population variance (divide by n) of the scores."""
        return float(self.values.var())


def _check_pi(pi: float):
    if not (0.0 < pi < 1.0):
        raise OverlapViolationError(
            f"propensity {pi} outside (0, 1); clip propensities upstream"
        )


def aipw_score(sample: Sample, mu0: float, mu1: float, pi: float) -> float:
    """Doubly robust score: (a/pi - (1-a)/(1-pi))*y minus the augmentation
    term ((a-pi)/(pi(1-pi))) * ((1-pi)*mu1 + pi*mu0)."""
    _check_pi(pi)
    if not (math.isfinite(mu0) and math.isfinite(mu1)):
        raise ConfigurationError("mu0 and mu1 must be finite")
    a = float(sample.treatment)
    y = sample.outcome
    ipw_term = (a / pi - (1.0 - a) / (1.0 - pi)) * y
    augment = (a - pi) / (pi * (1.0 - pi)) * ((1.0 - pi) * mu1 + pi * mu0)
    return ipw_term - augment


def ipw_score(sample: Sample, pi: float) -> float:
    """Horvitz-Thompson score a*y/pi - (1-a)*y/(1-pi)."""
    _check_pi(pi)
    a = float(sample.treatment)
    y = sample.outcome
    return a * y / pi - (1.0 - a) * y / (1.0 - pi)


def _aipw_scores_vector(a, y, mu0, mu1, pi) -> np.ndarray:
    return (a / pi - (1.0 - a) / (1.0 - pi)) * y \
        - (a - pi) / (pi * (1.0 - pi)) * ((1.0 - pi) * mu1 + pi * mu0)


def _ipw_scores_vector(a, y, pi) -> np.ndarray:
    return a * y / pi - (1.0 - a) * y / (1.0 - pi)


def score_dataset(d1: Dataset,
                  nuisance: CrossFitNuisance | None = None,
                  kind: ScoreKind = ScoreKind.AIPW) -> ScoreVector:
    """Score every sample of d1.

    AIPW requires cross-fitted nuisances (each sample is scored with models
    fit on the other folds); IPW requires known per-sample propensities on
    the dataset.
    """
    a = d1.treatments()
    y = d1.outcomes()
    if kind is ScoreKind.AIPW:
        if nuisance is None:
            raise ConfigurationError("AIPW scores need cross-fitted nuisances")
        mu0, mu1, pi = nuisance.out_of_fold_predictions(d1.covariate_matrix())
        values = _aipw_scores_vector(a, y, mu0, mu1, pi)
    elif kind is ScoreKind.IPW:
        if d1.known_propensity is None:
            raise ConfigurationError("IPW scores need known propensities")
        values = _ipw_scores_vector(a, y, d1.propensities())
    else:
        raise ConfigurationError(f"unknown score kind {kind!r}")
    return ScoreVector(values=values, kind=kind)
