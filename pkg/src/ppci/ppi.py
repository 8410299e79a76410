"""Prediction-powered point estimates and confidence intervals.

The construction combines two ingredients: a measure of fit (the mean
predicted conditional effect over the held-out half of the large dataset)
and a rectifier (the mean gap between the small dataset's influence scores
and the predictor's values there). Their sum is the debiased point
estimate; the interval half-width combines both empirical variances scaled
by their respective sample sizes. Variants cover known-propensity data,
caller-supplied covariate-shift weights, bounded finite-population terms,
and average potential outcomes.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .cate import CateModel, evaluate
from .dataset import Dataset
from .errors import BoundViolationError, ConfigurationError
from .scores import ScoreKind, ScoreVector, score_dataset


class Method(enum.Enum):
    PP_AIPW = "PP_AIPW"
    PP_IPW = "PP_IPW"
    PP_SHIFTED = "PP_Shifted"
    PP_FINITE_POP = "PP_FinitePop"
    PP_APO = "PP_APO"
    BASELINE_D1 = "Baseline_D1"
    BASELINE_D2 = "Baseline_D2"


# --------------------------------------------------------------------------
# standard normal quantile
# --------------------------------------------------------------------------

_ACKLAM_A = (-3.969683028665376e+01, 2.209460984245205e+02,
             -2.759285104469687e+02, 1.383577518672690e+02,
             -3.066479806614716e+01, 2.506628277459239e+00)
_ACKLAM_B = (-5.447609879822406e+01, 1.615858368580409e+02,
             -1.556989798598866e+02, 6.680131188771972e+01,
             -1.328068155288572e+01)
_ACKLAM_C = (-7.784894002430293e-03, -3.223964580411365e-01,
             -2.400758277161838e+00, -2.549732539343734e+00,
             4.374664141464968e+00, 2.938163982698783e+00)
_ACKLAM_D = (7.784695709041462e-03, 3.224671290700398e-01,
             2.445134137142996e+00, 3.754408661907416e+00)


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF via a rational approximation plus one
    Halley refinement; absolute error well below 1e-9 on (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ConfigurationError(f"quantile level must lie in (0, 1), got {p}")
    a, b, c, d = _ACKLAM_A, _ACKLAM_B, _ACKLAM_C, _ACKLAM_D
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    elif p <= 1.0 - p_low:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    # Halley refinement against the exact CDF. Work on whichever tail is
    # small: for p >= 0.5 the complement 1-p is exact (Sterbenz), and the
    # erfc of a positive argument avoids cancellation.
    if p < 0.5:
        err = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    else:
        err = (1.0 - p) - 0.5 * math.erfc(x / math.sqrt(2.0))
    u = err * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def _z_two_sided(alpha: float) -> float:
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha}")
    return normal_quantile(1.0 - alpha / 2.0)


def _population_variance(values: np.ndarray, what: str) -> float:
    if len(values) == 1:
        warnings.warn(f"only one value available for {what}; variance set to 0",
                      stacklevel=3)
        return 0.0
    return float(values.var())


# --------------------------------------------------------------------------
# core types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Rectifier:
    """Mean and variance of the per-sample score-minus-prediction gaps."""

    delta_hat: float
    sigma2_delta: float
    n: int
    per_sample_deltas: np.ndarray


@dataclass(frozen=True)
class MeasureOfFit:
    """Mean and variance of predicted effects on the held-out half."""

    tau2_hat: float
    sigma2_tau2: float
    n_eval: int


@dataclass(frozen=True)
class PPInterval:
    """A two-sided confidence interval with its diagnostic components."""

    method: Method
    estimate: float
    lower: float
    upper: float
    alpha: float
    n: int | None = None
    n_large: int | None = None
    sigma2_delta: float | None = None
    sigma2_tau2: float | None = None
    biased_by_assumption: bool = False

    def __post_init__(self):
        if not self.lower <= self.estimate <= self.upper:
            raise ConfigurationError(
                f"estimate {self.estimate} outside [{self.lower}, {self.upper}]"
            )

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_json_dict(self) -> dict:
        out = {
            "method": self.method.value,
            "estimate": self.estimate,
            "lower": self.lower,
            "upper": self.upper,
            "alpha": self.alpha,
            "n": self.n,
            "N": self.n_large,
            "sigma2_delta": self.sigma2_delta,
            "sigma2_tau2": self.sigma2_tau2,
        }
        if self.biased_by_assumption:
            out["biased_by_assumption"] = True
        return out


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------

def rectifier(scores: ScoreVector | np.ndarray, tau2_on_d1: np.ndarray) -> Rectifier:
    """Per-sample gaps between influence scores and predicted effects."""
    values = scores.values if isinstance(scores, ScoreVector) else np.asarray(scores, float)
    tau2_on_d1 = np.asarray(tau2_on_d1, dtype=float)
    if values.shape != tau2_on_d1.shape:
        raise ConfigurationError(
            f"length mismatch: {values.shape} scores vs {tau2_on_d1.shape} predictions"
        )
    deltas = values - tau2_on_d1
    return Rectifier(
        delta_hat=float(deltas.mean()),
        sigma2_delta=_population_variance(deltas, "the rectifier"),
        n=len(deltas),
        per_sample_deltas=deltas,
    )


def measure_of_fit(model: CateModel) -> MeasureOfFit:
    """Aggregate the fitted predictor over the held-out evaluation half."""
    values = evaluate(model, model.evaluation_covariates)
    return MeasureOfFit(
        tau2_hat=float(values.mean()),
        sigma2_tau2=_population_variance(values, "the measure of fit"),
        n_eval=len(values),
    )


def measure_of_fit_from_values(values: np.ndarray) -> MeasureOfFit:
    """Measure of fit from precomputed predictions on the evaluation half."""
    values = np.asarray(values, dtype=float)
    return MeasureOfFit(
        tau2_hat=float(values.mean()),
        sigma2_tau2=_population_variance(values, "the measure of fit"),
        n_eval=len(values),
    )


def pp_estimate(r: Rectifier, m: MeasureOfFit) -> float:
    """Debiased point estimate: rectifier mean plus measure of fit."""
    return r.delta_hat + m.tau2_hat


def pp_interval(r: Rectifier, m: MeasureOfFit, alpha: float = 0.05,
                method: Method = Method.PP_AIPW) -> PPInterval:
    """Normal-approximation interval around the prediction-powered estimate.

    Half-width: z_{1-alpha/2} * sqrt(sigma2_delta/n + sigma2_tau2/N).
    """
    z = _z_two_sided(alpha)
    estimate = pp_estimate(r, m)
    half = z * math.sqrt(r.sigma2_delta / r.n + m.sigma2_tau2 / m.n_eval)
    return PPInterval(
        method=method, estimate=estimate,
        lower=estimate - half, upper=estimate + half, alpha=alpha,
        n=r.n, n_large=m.n_eval,
        sigma2_delta=r.sigma2_delta, sigma2_tau2=m.sigma2_tau2,
    )


def pp_interval_rct(d1: Dataset, model: CateModel, alpha: float = 0.05) -> PPInterval:
    """Known-propensity variant: IPW scores replace the doubly robust ones.

    Requires known per-sample treatment probabilities on the small dataset;
    the rest of the pipeline (rectifier, measure of fit, interval) is
    unchanged.
    """
    if d1.known_propensity is None:
        raise ConfigurationError("the known-propensity variant needs "
                                 "known_propensity on the small dataset")
    scores = score_dataset(d1, kind=ScoreKind.IPW)
    tau2_on_d1 = evaluate(model, d1.covariate_matrix())
    r = rectifier(scores, tau2_on_d1)
    m = measure_of_fit(model)
    return pp_interval(r, m, alpha, method=Method.PP_IPW)


def pp_interval_shifted(scores: ScoreVector | np.ndarray,
                        tau2_on_d1: np.ndarray,
                        tau2_on_d2_eval: np.ndarray,
                        weights_d1: np.ndarray,
                        weights_d2: np.ndarray,
                        alpha: float = 0.05) -> PPInterval:
    """Covariate-shift variant with caller-supplied density-ratio weights.

    Every per-sample term is multiplied by its weight before averaging, on
    both datasets. Weights are assumed known and must be nonnegative and
    finite; with unit weights this reproduces the unweighted interval
    bit for bit.
    """
    values = scores.values if isinstance(scores, ScoreVector) else np.asarray(scores, float)
    tau2_on_d1 = np.asarray(tau2_on_d1, dtype=float)
    tau2_on_d2_eval = np.asarray(tau2_on_d2_eval, dtype=float)
    w1 = np.asarray(weights_d1, dtype=float)
    w2 = np.asarray(weights_d2, dtype=float)
    if values.shape != tau2_on_d1.shape or values.shape != w1.shape:
        raise ConfigurationError("small-dataset arrays must share one length")
    if tau2_on_d2_eval.shape != w2.shape:
        raise ConfigurationError("large-dataset arrays must share one length")
    for name, w in (("weights_d1", w1), ("weights_d2", w2)):
        if not np.all(np.isfinite(w)) or np.any(w < 0.0):
            raise ConfigurationError(f"{name} must be nonnegative and finite")

    deltas = values * w1 - tau2_on_d1 * w1
    weighted_tau2 = tau2_on_d2_eval * w2
    n, n_eval = len(deltas), len(weighted_tau2)
    delta_hat = float(deltas.mean())
    tau2_hat = float(weighted_tau2.mean())
    sigma2_delta = _population_variance(deltas, "the weighted rectifier")
    sigma2_tau2 = _population_variance(weighted_tau2, "the weighted measure of fit")
    z = _z_two_sided(alpha)
    estimate = delta_hat + tau2_hat
    half = z * math.sqrt(sigma2_delta / n + sigma2_tau2 / n_eval)
    return PPInterval(
        method=Method.PP_SHIFTED, estimate=estimate,
        lower=estimate - half, upper=estimate + half, alpha=alpha,
        n=n, n_large=n_eval,
        sigma2_delta=sigma2_delta, sigma2_tau2=sigma2_tau2,
    )


def pp_interval_finite_pop(r: Rectifier, m: MeasureOfFit,
                           bounds: np.ndarray, alpha: float = 0.05) -> PPInterval:
    """Finite-population variant with a Hoeffding term for the rectifier.

    bounds is an (n, 2) array of per-sample [a_i, b_i] ranges that must
    contain the observed rectifier terms. Half-width:
    sqrt(sum((b_i-a_i)^2) / (2 n^2) * log(2/alpha))
    plus the usual normal term for the measure of fit.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha}")
    bounds = np.asarray(bounds, dtype=float)
    if bounds.shape != (r.n, 2):
        raise ConfigurationError(
            f"bounds must have shape ({r.n}, 2), got {bounds.shape}"
        )
    lo, hi = bounds[:, 0], bounds[:, 1]
    if np.any(lo > hi):
        raise ConfigurationError("each bound must satisfy a_i <= b_i")
    deltas = r.per_sample_deltas
    bad = np.flatnonzero((deltas < lo) | (deltas > hi))
    if len(bad):
        i = int(bad[0])
        raise BoundViolationError(
            f"delta[{i}] = {deltas[i]} outside its bound "
            f"[{lo[i]}, {hi[i]}]", index=i,
        )
    hoeffding = math.sqrt(
        float(((hi - lo) ** 2).sum()) / (2.0 * r.n ** 2) * math.log(2.0 / alpha)
    )
    z = _z_two_sided(alpha)
    half = hoeffding + z * math.sqrt(m.sigma2_tau2 / m.n_eval)
    estimate = pp_estimate(r, m)
    return PPInterval(
        method=Method.PP_FINITE_POP, estimate=estimate,
        lower=estimate - half, upper=estimate + half, alpha=alpha,
        n=r.n, n_large=m.n_eval,
        sigma2_delta=r.sigma2_delta, sigma2_tau2=m.sigma2_tau2,
    )


def pp_interval_apo(f1_on_d1: np.ndarray, f2_on_d1: np.ndarray,
                    f2_on_d2: np.ndarray, alpha: float = 0.05) -> PPInterval:
    """Average-potential-outcome variant for one treatment arm.

    f1_on_d1 and f2_on_d1 are the two models' predictions on the small
    dataset; f2_on_d2 are the second model's predictions on the large one.
    Estimate: mean(f1 - f2 on the small dataset) + mean(f2 on the large).
    """
    f1_on_d1 = np.asarray(f1_on_d1, dtype=float)
    f2_on_d1 = np.asarray(f2_on_d1, dtype=float)
    f2_on_d2 = np.asarray(f2_on_d2, dtype=float)
    if f1_on_d1.shape != f2_on_d1.shape:
        raise ConfigurationError("small-dataset prediction lengths differ")
    deltas = f1_on_d1 - f2_on_d1
    n, n_eval = len(deltas), len(f2_on_d2)
    sigma2_delta = _population_variance(deltas, "the outcome rectifier")
    sigma2_f2 = _population_variance(f2_on_d2, "the large-dataset predictions")
    estimate = float(deltas.mean()) + float(f2_on_d2.mean())
    z = _z_two_sided(alpha)
    half = z * math.sqrt(sigma2_delta / n + sigma2_f2 / n_eval)
    return PPInterval(
        method=Method.PP_APO, estimate=estimate,
        lower=estimate - half, upper=estimate + half, alpha=alpha,
        n=n, n_large=n_eval,
        sigma2_delta=sigma2_delta, sigma2_tau2=sigma2_f2,
    )
