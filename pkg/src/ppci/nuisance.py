"""Outcome regressions, propensity model, and K-fold cross-fitting.

Fits are deliberately simple: ridge-regularized linear regression for the
outcome means and Newton-Raphson logistic regression for the propensity.
Both are exposed behind plain fit/predict callables so richer learners
(boosted trees, neural nets) can be swapped in without touching the
cross-fitting machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .dataset import Dataset, SplitAssignment, split
from .errors import (
    ConfigurationError,
    CrossFitDegenerateError,
    DegenerateLabelsError,
    NumericalError,
)

DEFAULT_RIDGE_LAMBDA = 1e-6
DEFAULT_CLIP_EPSILON = 0.01

_MAX_NEWTON_ITER = 100
_GRAD_TOL = 1e-8
_SEPARATION_RIDGE = 1e-4
_MAX_ABS_LOGIT = 30.0


class Regressor(Protocol):
    def predict(self, X: np.ndarray) -> np.ndarray: ...


class Classifier(Protocol):
    def predict_proba(self, X: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class LinearModel:
    """Affine predictor fitted by ridge regression (intercept unpenalized)."""

    weights: np.ndarray
    intercept: float
    ridge_lambda: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return X @ self.weights + self.intercept


@dataclass(frozen=True)
class LogisticModel:
    """Logistic predictor whose probabilities are clamped away from 0 and 1."""

    weights: np.ndarray
    intercept: float
    clip_epsilon: float
    separation_fallback: bool = False

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        p = _sigmoid(X @ self.weights + self.intercept)
        return np.clip(p, self.clip_epsilon, 1.0 - self.clip_epsilon)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _standardize(X: np.ndarray):
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    sd = np.where(sd == 0.0, 1.0, sd)
    return (X - mean) / sd, mean, sd


def fit_linear(X: np.ndarray, y: np.ndarray, ridge_lambda: float = DEFAULT_RIDGE_LAMBDA) -> LinearModel:
    """Minimize sum((y - b - Xw)^2) + lambda * ||w||^2 with b unpenalized.

    Solved through internally standardized covariates for conditioning; the
    per-column penalty is rescaled so the returned model is the exact
    minimizer of the stated objective in the original coordinates.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n, q = X.shape
    if n < 1 or len(y) != n:
        raise ConfigurationError(f"bad shapes: X {X.shape}, y {y.shape}")
    if ridge_lambda < 0:
        raise ConfigurationError("ridge_lambda must be >= 0")

    Xs, mean, sd = _standardize(X)
    y_bar = y.mean()
    A = Xs.T @ Xs + np.diag(np.full(q, ridge_lambda) / sd**2)
    b = Xs.T @ (y - y_bar)
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise NumericalError(
            "singular normal equations; refit with ridge_lambda > 0"
        ) from None
    w_std = np.linalg.solve(L.T, np.linalg.solve(L, b))
    weights = w_std / sd
    intercept = y_bar - float(weights @ mean)
    return LinearModel(weights=weights, intercept=float(intercept),
                       ridge_lambda=float(ridge_lambda))


@dataclass
class NewtonInfo:
    """Diagnostics from a logistic Newton run, mainly for tests."""

    converged: bool
    iterations: int
    grad_norm: float
    loglik_path: list = field(default_factory=list)
    separation_fallback: bool = False


def _penalized_loglik(Z, a, beta, lam, q):
    z = Z @ beta
    # log(sigmoid) computed stably: -log(1 + exp(-|z|)) - max(−z·sign,0) form
    ll = float(np.sum(a * z - np.logaddexp(0.0, z)))
    return ll - 0.5 * lam * float(beta[:q] @ beta[:q])


def _newton_logistic(Xs, a, lam):
    n, q = Xs.shape
    Z = np.column_stack([Xs, np.ones(n)])
    beta = np.zeros(q + 1)
    p_bar = a.mean()
    beta[q] = np.log(p_bar / (1.0 - p_bar))
    info = NewtonInfo(converged=False, iterations=0, grad_norm=np.inf)
    info.loglik_path.append(_penalized_loglik(Z, a, beta, lam, q))
    penalty_vec = np.r_[np.full(q, lam), 0.0]
    for it in range(1, _MAX_NEWTON_ITER + 1):
        p = _sigmoid(Z @ beta)
        grad = Z.T @ (a - p) - penalty_vec * beta
        info.iterations = it
        info.grad_norm = float(np.abs(grad).max())
        if info.grad_norm < _GRAD_TOL:
            info.converged = True
            break
        W = p * (1.0 - p)
        H = (Z * W[:, None]).T @ Z + np.diag(penalty_vec)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            break
        # step-halving keeps the penalized log-likelihood non-decreasing
        cur = info.loglik_path[-1]
        scale = 1.0
        for _ in range(50):
            cand = beta + scale * step
            ll = _penalized_loglik(Z, a, cand, lam, q)
            if ll >= cur:
                break
            scale *= 0.5
        else:
            break
        beta = beta + scale * step
        info.loglik_path.append(ll)
        if np.abs(Z @ beta).max() > _MAX_ABS_LOGIT:
            break  # saturated logits: treat as separation
    return beta, info


def fit_logistic_with_info(X: np.ndarray, a: np.ndarray,
                           clip_epsilon: float = DEFAULT_CLIP_EPSILON):
    """Like fit_logistic but also returns Newton diagnostics."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    a = np.asarray(a, dtype=float)
    n, q = X.shape
    if len(a) != n:
        raise ConfigurationError(f"bad shapes: X {X.shape}, a {a.shape}")
    if not 0.0 < clip_epsilon < 0.5:
        raise ConfigurationError("clip_epsilon must lie in (0, 0.5)")
    if not np.all((a == 0.0) | (a == 1.0)):
        raise ConfigurationError("labels must be 0/1")
    if a.min() == a.max():
        raise DegenerateLabelsError("labels are all 0 or all 1")

    Xs, mean, sd = _standardize(X)
    beta, info = _newton_logistic(Xs, a, lam=0.0)
    if not info.converged:
        # perfect or quasi-separation: refit with a small ridge penalty
        beta, info = _newton_logistic(Xs, a, lam=_SEPARATION_RIDGE)
        info.separation_fallback = True
    w_std = beta[:q]
    weights = w_std / sd
    intercept = float(beta[q] - w_std @ (mean / sd))
    model = LogisticModel(weights=weights, intercept=intercept,
                          clip_epsilon=float(clip_epsilon),
                          separation_fallback=info.separation_fallback)
    return model, info


def fit_logistic(X: np.ndarray, a: np.ndarray,
                 clip_epsilon: float = DEFAULT_CLIP_EPSILON) -> LogisticModel:
    """Maximum-likelihood logistic regression via Newton-Raphson.

    Uses step-halving, at most 100 iterations, and an inf-norm gradient
    tolerance of 1e-8. On (quasi-)separation the fit falls back to a
    ridge-penalized likelihood (lambda 1e-4) and flags the model.
    """
    model, _ = fit_logistic_with_info(X, a, clip_epsilon)
    return model


RegressorFactory = Callable[[np.ndarray, np.ndarray], Regressor]
ClassifierFactory = Callable[[np.ndarray, np.ndarray], Classifier]


def _default_regressor(ridge_lambda: float) -> RegressorFactory:
    return lambda X, y: fit_linear(X, y, ridge_lambda)


def _default_classifier(clip_epsilon: float) -> ClassifierFactory:
    return lambda X, a: fit_logistic(X, a, clip_epsilon)


@dataclass(frozen=True)
class FoldModels:
    """Nuisance triple fit on the complement of one fold."""

    mu0: Regressor
    mu1: Regressor
    propensity: Classifier


@dataclass(frozen=True)
class CrossFitNuisance:
    """Fold-indexed nuisance models plus the assignment that produced them.

    The triple stored for fold k was fit without any sample of fold k, so
    scoring each sample with its own fold's triple is out-of-fold by
    construction.
    """

    fold_models: tuple[FoldModels, ...]
    assignment: SplitAssignment

    def out_of_fold_predictions(self, X: np.ndarray):
        """Per-sample (mu0, mu1, pi), each from models that never saw the sample.

        Rows of X must be in the same order as the dataset used for fitting.
        """
        X = np.asarray(X, dtype=float)
        n = X.shape[0]
        if n != len(self.assignment.fold_index):
            raise ConfigurationError(
                f"X has {n} rows but the split covers "
                f"{len(self.assignment.fold_index)} samples"
            )
        mu0 = np.empty(n)
        mu1 = np.empty(n)
        pi = np.empty(n)
        for k, models in enumerate(self.fold_models):
            idx = self.assignment.indices_in_fold(k)
            mu0[idx] = models.mu0.predict(X[idx])
            mu1[idx] = models.mu1.predict(X[idx])
            pi[idx] = models.propensity.predict_proba(X[idx])
        return mu0, mu1, pi


def cross_fit(d1: Dataset, n_folds: int = 2, seed: int = 0,
              ridge_lambda: float = DEFAULT_RIDGE_LAMBDA,
              clip_epsilon: float = DEFAULT_CLIP_EPSILON,
              regressor_factory: RegressorFactory | None = None,
              classifier_factory: ClassifierFactory | None = None) -> CrossFitNuisance:
    """Fit (mu0, mu1, pi) per fold, each on the complement of that fold.

    For fold k: mu0 is fit on out-of-fold controls, mu1 on out-of-fold
    treated, and the propensity on all out-of-fold samples. Raises
    CrossFitDegenerateError when a complement lacks a treatment arm.
    """
    make_reg = regressor_factory or _default_regressor(ridge_lambda)
    make_clf = classifier_factory or _default_classifier(clip_epsilon)
    assignment = split(d1, n_folds, seed)
    X = d1.covariate_matrix()
    a = d1.treatments()
    y = d1.outcomes()
    fold_models = []
    for k in range(n_folds):
        out = assignment.indices_out_of_fold(k)
        controls = out[a[out] == 0.0]
        treated = out[a[out] == 1.0]
        if len(controls) == 0 or len(treated) == 0:
            raise CrossFitDegenerateError(
                f"complement of fold {k} lacks a treatment arm; "
                f"try a smaller number of folds"
            )
        fold_models.append(FoldModels(
            mu0=make_reg(X[controls], y[controls]),
            mu1=make_reg(X[treated], y[treated]),
            propensity=make_clf(X[out], a[out]),
        ))
    return CrossFitNuisance(fold_models=tuple(fold_models), assignment=assignment)
