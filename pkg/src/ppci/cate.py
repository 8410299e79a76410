"""Two-stage conditional-effect learner fit on one half of the large dataset.

Stage 1 cross-fits outcome and propensity models within the training half;
stage 2 regresses the resulting doubly robust pseudo-outcomes on the
covariates. The held-out half is reserved for the measure of fit, and the
model may also be evaluated on the small dataset where it feeds the
rectifier. The large dataset's own propensity is always estimated here,
never read from known propensities, because that dataset is treated as
observational.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, SplitAssignment
from .errors import ConfigurationError
from .nuisance import (
    DEFAULT_CLIP_EPSILON,
    DEFAULT_RIDGE_LAMBDA,
    CrossFitNuisance,
    LinearModel,
    cross_fit,
    fit_linear,
)
from .scores import _aipw_scores_vector

# offset mixed into the split seed for the stage-1 cross-fit inside the
# training half, so the sub-split never mirrors the half-split
_STAGE1_SEED_OFFSET = 7919

TRAINING_FOLD = 0
EVALUATION_FOLD = 1


@dataclass(frozen=True)
class CateModel:
    """Fitted conditional-effect predictor plus its sample-splitting record."""

    second_stage: LinearModel
    half_split: SplitAssignment
    d2_nuisance: CrossFitNuisance
    training_indices: np.ndarray
    evaluation_indices: np.ndarray
    evaluation_covariates: np.ndarray
    training_mean: np.ndarray

    @property
    def n_covariates(self) -> int:
        return len(self.second_stage.weights)


def fit_dr_learner(d2: Dataset, half_split: SplitAssignment,
                   ridge_lambda: float = DEFAULT_RIDGE_LAMBDA,
                   clip_epsilon: float = DEFAULT_CLIP_EPSILON) -> CateModel:
    """Fit the two-stage learner on fold 0 of a K=2 split of the large dataset.

    Stage 1 estimates (mu0, mu1, pi) on the training half with an internal
    2-fold cross-fit; stage 2 ridge-regresses each training sample's
    non-centered doubly robust pseudo-outcome on its covariates. Samples in
    fold 1 are never touched during fitting.
    """
    if half_split.n_folds != 2:
        raise ConfigurationError("the large dataset must be split in half (K=2)")
    if len(half_split.fold_index) != len(d2):
        raise ConfigurationError("split does not cover the dataset")

    train_idx = half_split.indices_in_fold(TRAINING_FOLD)
    eval_idx = half_split.indices_in_fold(EVALUATION_FOLD)
    X = d2.covariate_matrix()
    a = d2.treatments()
    y = d2.outcomes()
    X_tr, a_tr, y_tr = X[train_idx], a[train_idx], y[train_idx]

    train_ds = Dataset(
        samples=tuple(d2.samples[i] for i in train_idx),
        role=d2.role,
    )
    nuis = cross_fit(train_ds, n_folds=2,
                     seed=half_split.seed + _STAGE1_SEED_OFFSET,
                     ridge_lambda=ridge_lambda, clip_epsilon=clip_epsilon)
    mu0, mu1, pi = nuis.out_of_fold_predictions(X_tr)
    pseudo = _aipw_scores_vector(a_tr, y_tr, mu0, mu1, pi)
    second_stage = fit_linear(X_tr, pseudo, ridge_lambda)
    return CateModel(
        second_stage=second_stage,
        half_split=half_split,
        d2_nuisance=nuis,
        training_indices=train_idx,
        evaluation_indices=eval_idx,
        evaluation_covariates=X[eval_idx],
        training_mean=X_tr.mean(axis=0),
    )


def evaluate(model: CateModel, xs: np.ndarray) -> np.ndarray:
    """Predict the conditional effect for each row of xs."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if xs.shape[1] != model.n_covariates:
        raise ConfigurationError(
            f"xs has {xs.shape[1]} columns, model was trained on "
            f"{model.n_covariates}"
        )
    return model.second_stage.predict(xs)
