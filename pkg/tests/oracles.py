"""Independent scalar-loop oracles used to cross-check the vectorized code.

Everything here is deliberately written with plain Python floats, explicit
loops, and scipy's quantile function, so it shares no code path with the
package implementation it checks.
"""

import math

from scipy.special import ndtri


def mean_loop(values):
    total = 0.0
    for v in values:
        total += v
    return total / len(values)


def popvar_loop(values):
    m = mean_loop(values)
    total = 0.0
    for v in values:
        total += (v - m) ** 2
    return total / len(values)


def aipw_score_scalar(a, y, mu0, mu1, pi):
    first = (a / pi - (1 - a) / (1 - pi)) * y
    second = (a - pi) / (pi * (1 - pi)) * ((1 - pi) * mu1 + pi * mu0)
    return first - second


def ipw_score_scalar(a, y, pi):
    return a * y / pi - (1 - a) * y / (1 - pi)


def predict_scalar(weights, intercept, x):
    total = intercept
    for w, v in zip(weights, x):
        total += w * v
    return total


def pp_pipeline_scalar(scores, tau2_on_d1, tau2_on_eval, alpha):
    """Scores -> rectifier -> estimate -> normal interval, all by loop."""
    n = len(scores)
    deltas = [s - t for s, t in zip(scores, tau2_on_d1)]
    delta_hat = mean_loop(deltas)
    sigma2_delta = popvar_loop(deltas)
    tau2_hat = mean_loop(tau2_on_eval)
    sigma2_tau2 = popvar_loop(tau2_on_eval)
    n_eval = len(tau2_on_eval)
    estimate = delta_hat + tau2_hat
    z = float(ndtri(1.0 - alpha / 2.0))
    half = z * math.sqrt(sigma2_delta / n + sigma2_tau2 / n_eval)
    return {
        "estimate": estimate,
        "sigma2_delta": sigma2_delta,
        "sigma2_tau2": sigma2_tau2,
        "lower": estimate - half,
        "upper": estimate + half,
    }


def ridge_normal_equations(X, y, lam):
    """Raw augmented-system ridge solve (intercept unpenalized).

    Solves [[X'X + lam*I, X'1], [1'X, n]] [w; b] = [X'y; 1'y] directly,
    with no centering or scaling, via numpy's generic solver.
    """
    import numpy as np

    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, q = X.shape
    A = np.zeros((q + 1, q + 1))
    A[:q, :q] = X.T @ X + lam * np.eye(q)
    A[:q, q] = X.sum(axis=0)
    A[q, :q] = X.sum(axis=0)
    A[q, q] = n
    rhs = np.concatenate([X.T @ y, [y.sum()]])
    sol = np.linalg.solve(A, rhs)
    return sol[:q], float(sol[q])


def logistic_loglik_scalar(X, a, weights, intercept):
    total = 0.0
    for xi, ai in zip(X, a):
        z = predict_scalar(weights, intercept, xi)
        # stable log(1 + exp(z))
        if z > 0:
            log1pexp = z + math.log1p(math.exp(-z))
        else:
            log1pexp = math.log1p(math.exp(z))
        total += ai * z - log1pexp
    return total
