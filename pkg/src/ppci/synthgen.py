"""Gaussian-process synthetic data with controllable hidden confounding.

Each unit gets an observed covariate vector x in [-1,1]^q and a hidden
scalar u in [-1,1]. Potential outcomes for both arms are single coherent
functions of (x, u) drawn from a zero-mean GP over the union of all units,
so the small and large datasets share the same outcome process. Treatment
assignment is Bernoulli through a sigmoid of a logit function drawn from
its own GP: the small dataset's logit never depends on u (which is what
keeps it unconfounded), while the large dataset's logit kernel is the
scenario knob — the more its assignment depends on u, the stronger the
hidden confounding.

Kernel: alpha_x * <x, x'> + alpha_u * u * u'
        + exp(-|x - x'|^2 / (2 l_x^2) - (u - u')^2 / (2 l_u^2)).

Estimators only ever see x; u stays inside the generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, DatasetRole, Sample
from .errors import ConfigurationError, NumericalError

JITTER_SCALE = 1e-8
_JITTER_ESCALATIONS = 3
_MAX_POINTS = 20_000
_DENSE_MAX = 2_000
_LOWRANK_CAP = 3_000
# low-rank factorization stops once the residual covariance falls two
# orders of magnitude below the jitter that is added regardless
_LOWRANK_TOL_FACTOR = 1e-2

# sub-stream labels hashed into per-purpose seeds, so outcome draws never
# share a stream with treatment draws (or with other replications)
_STREAM_POINTS = 0
_STREAM_OUTCOME_0 = 1
_STREAM_OUTCOME_1 = 2
_STREAM_LOGIT_D1 = 3
_STREAM_LOGIT_D2 = 4
_STREAM_TREAT_D1 = 5
_STREAM_TREAT_D2 = 6


@dataclass(frozen=True)
class KernelConfig:
    """Composite-kernel parameters: linear amplitudes and SE length scales."""

    alpha_x: float = 0.0
    alpha_u: float = 0.0
    l_x: float = 1.0
    l_u: float = 1.0

    def __post_init__(self):
        if self.alpha_x < 0 or self.alpha_u < 0:
            raise ConfigurationError("linear amplitudes must be nonnegative")
        if self.l_x <= 0 or self.l_u <= 0:
            raise ConfigurationError("length scales must be positive")


# unconfounded setting: no linear u term, u length scale so large the SE
# term is flat in u
UNCONFOUNDED_U = {"alpha_u": 0.0, "l_u": 1e6}

# outcome process shared by both datasets and all scenarios: a strong
# linear trend in x (the part a linear second stage can learn) plus local
# SE variation in x and in the hidden u
DEFAULT_OUTCOME_KERNEL = KernelConfig(alpha_x=16.0, alpha_u=0.0, l_x=2.0, l_u=0.5)

# small-dataset assignment logit: varies with x only
D1_LOGIT_KERNEL = KernelConfig(alpha_x=0.0, l_x=0.5, **UNCONFOUNDED_U)

# large-dataset assignment logit per confounding scenario
SCENARIO_LOGIT_KERNELS = {
    1: KernelConfig(alpha_x=0.0, l_x=1e3, alpha_u=0.0, l_u=1e6),
    2: KernelConfig(alpha_x=0.0, l_x=1e3, alpha_u=0.0, l_u=0.5),
    3: KernelConfig(alpha_x=0.0, l_x=1e3, alpha_u=10.0, l_u=0.5),
}

DEFAULT_N_SMALL = 200
DEFAULT_N_LARGE = 10_000


@dataclass(frozen=True)
class DgpConfig:
    """Full generator configuration.

    theta0/theta1 parameterize the two potential-outcome GPs, theta_pi the
    large dataset's assignment logit. n is the small dataset's size and
    n_prime the large dataset's raw size (both halves). When
    rct_propensity is set, the small dataset's treatments are Bernoulli
    with that constant probability and the value is exported as the known
    propensity.
    """

    theta0: KernelConfig
    theta1: KernelConfig
    theta_pi: KernelConfig
    n: int = DEFAULT_N_SMALL
    n_prime: int = DEFAULT_N_LARGE
    scenario: int | None = None
    seed: int = 0
    n_covariates: int = 1
    collinear_last: bool = False
    rct_propensity: float | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ConfigurationError("n must be at least 2")
        if self.n_prime < 4:
            raise ConfigurationError("n_prime must be at least 4")
        if self.n_covariates < 1:
            raise ConfigurationError("need at least one covariate")
        if self.collinear_last and self.n_covariates < 2:
            raise ConfigurationError("collinear coordinate needs q >= 2")
        if self.rct_propensity is not None and not 0.0 < self.rct_propensity < 1.0:
            raise ConfigurationError("rct_propensity must lie in (0, 1)")


def scenario_config(scenario: int, n: int = DEFAULT_N_SMALL,
                    n_prime: int = DEFAULT_N_LARGE, seed: int = 0,
                    n_covariates: int = 1, collinear_last: bool = False,
                    rct_propensity: float | None = None) -> DgpConfig:
    """Preset configuration for one of the three confounding scenarios."""
    if scenario not in SCENARIO_LOGIT_KERNELS:
        raise ConfigurationError(f"scenario must be 1, 2, or 3, got {scenario}")
    return DgpConfig(
        theta0=DEFAULT_OUTCOME_KERNEL,
        theta1=DEFAULT_OUTCOME_KERNEL,
        theta_pi=SCENARIO_LOGIT_KERNELS[scenario],
        n=n, n_prime=n_prime, scenario=scenario, seed=seed,
        n_covariates=n_covariates, collinear_last=collinear_last,
        rct_propensity=rct_propensity,
    )


@dataclass(frozen=True)
class SyntheticOutput:
    """Generated datasets plus the ground truth the generator knows.

    oracle_ate is the mean realized effect over every generated unit
    (small and large datasets together), a population-level target whose
    own sampling noise is negligible next to any interval built from the
    small dataset. oracle_cate_d1 keeps the per-sample realized effects on
    the small dataset; their mean (the small-sample average effect) is
    exposed separately as sample_ate_d1.
    """

    d1: Dataset
    d2: Dataset
    oracle_ate: float
    oracle_cate_d1: np.ndarray

    @property
    def sample_ate_d1(self) -> float:
        return float(self.oracle_cate_d1.mean())


# --------------------------------------------------------------------------
# kernel evaluation
# --------------------------------------------------------------------------

def kernel(p, q, cfg: KernelConfig) -> float:
    """Kernel value between two points given as sequences [x_1..x_q, u]."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1 or len(p) < 2:
        raise ConfigurationError("points must be equal-length vectors [x..., u]")
    x1, u1 = p[:-1], p[-1]
    x2, u2 = q[:-1], q[-1]
    lin = cfg.alpha_x * float(x1 @ x2) + cfg.alpha_u * u1 * u2
    se = np.exp(
        -float(((x1 - x2) ** 2).sum()) / (2.0 * cfg.l_x ** 2)
        - (u1 - u2) ** 2 / (2.0 * cfg.l_u ** 2)
    )
    return float(lin + se)


def kernel_matrix(points: np.ndarray, cfg: KernelConfig,
                  points2: np.ndarray | None = None) -> np.ndarray:
    """Kernel matrix between two point sets (rows are [x..., u])."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    Q = P if points2 is None else np.atleast_2d(np.asarray(points2, dtype=float))
    x1, u1 = P[:, :-1], P[:, -1]
    x2, u2 = Q[:, :-1], Q[:, -1]
    lin = cfg.alpha_x * (x1 @ x2.T) + cfg.alpha_u * np.outer(u1, u2)
    dx2 = ((x1[:, None, :] - x2[None, :, :]) ** 2).sum(axis=-1)
    du2 = (u1[:, None] - u2[None, :]) ** 2
    return lin + np.exp(-dx2 / (2.0 * cfg.l_x ** 2) - du2 / (2.0 * cfg.l_u ** 2))


def _kernel_diag(points: np.ndarray, cfg: KernelConfig) -> np.ndarray:
    x, u = points[:, :-1], points[:, -1]
    return cfg.alpha_x * (x * x).sum(axis=1) + cfg.alpha_u * u * u + 1.0


def _pivoted_cholesky(points: np.ndarray, cfg: KernelConfig, tol: float,
                      max_rank: int):
    """Greedy partial Cholesky factor V with K ~= V V^T, built column by
    column without materializing K. Returns None if the tolerance is not
    reached within max_rank columns."""
    m = points.shape[0]
    resid = _kernel_diag(points, cfg)
    V = np.empty((m, min(max_rank, m)))
    for k in range(V.shape[1]):
        i = int(np.argmax(resid))
        if resid[i] <= tol:
            return V[:, :k]
        col = kernel_matrix(points, cfg, points[i:i + 1])[:, 0]
        if k:
            col -= V[:, :k] @ V[i, :k]
        V[:, k] = col / np.sqrt(resid[i])
        resid -= V[:, k] ** 2
        np.maximum(resid, 0.0, out=resid)
    if resid.max() <= tol:
        return V
    return None


class GpSampler:
    """Reusable sampler for one joint GP over a fixed point set.

    Factorizes once; every draw() is an independent function sample. Small
    point sets use a dense Cholesky of K + jitter*I; larger ones use a
    low-rank factor accurate far below the jitter floor, with jitter noise
    added either way.
    """

    def __init__(self, points: np.ndarray, cfg: KernelConfig):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        m = points.shape[0]
        if m > _MAX_POINTS:
            raise ConfigurationError(
                f"{m} points exceed the dense factorization budget of {_MAX_POINTS}"
            )
        self.n_points = m
        self.jitter = JITTER_SCALE * float(_kernel_diag(points, cfg).sum()) / m
        self._dense_factor = None
        self._lowrank_factor = None
        if m > _DENSE_MAX:
            V = _pivoted_cholesky(points, cfg,
                                  tol=_LOWRANK_TOL_FACTOR * self.jitter,
                                  max_rank=min(_LOWRANK_CAP, m))
            if V is not None:
                self._lowrank_factor = V
        if self._lowrank_factor is None:
            K = kernel_matrix(points, cfg)
            jitter = self.jitter
            for attempt in range(_JITTER_ESCALATIONS + 1):
                try:
                    self._dense_factor = np.linalg.cholesky(
                        K + jitter * np.eye(m)
                    )
                    self.jitter = jitter
                    break
                except np.linalg.LinAlgError:
                    jitter *= 10.0
            if self._dense_factor is None:
                raise NumericalError(
                    "covariance factorization failed after "
                    f"{_JITTER_ESCALATIONS} jitter escalations"
                )

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        if self._dense_factor is not None:
            return self._dense_factor @ rng.standard_normal(self.n_points)
        V = self._lowrank_factor
        smooth = V @ rng.standard_normal(V.shape[1])
        noise = np.sqrt(self.jitter) * rng.standard_normal(self.n_points)
        return smooth + noise


def sample_gp(points: np.ndarray, cfg: KernelConfig, seed: int) -> np.ndarray:
    """One joint draw from N(0, K + jitter*I) over the given points,
    jitter = 1e-8 * trace(K) / m, deterministic in the seed."""
    sampler = GpSampler(points, cfg)
    return sampler.draw(np.random.default_rng(np.random.SeedSequence(seed)))


# --------------------------------------------------------------------------
# dataset generation
# --------------------------------------------------------------------------

def _stream(seed: int, label: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, label)))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _build_dataset(X, a, y, role, propensity=None) -> Dataset:
    samples = tuple(
        Sample(tuple(float(v) for v in X[i]), int(a[i]), float(y[i]))
        for i in range(len(a))
    )
    known = None if propensity is None else tuple(float(p) for p in propensity)
    return Dataset(samples=samples, role=role, known_propensity=known)


def generate(cfg: DgpConfig) -> SyntheticOutput:
    """Generate the paired small and large datasets plus the oracle truth.

    All n + n_prime units draw x and u i.i.d. uniform on [-1, 1]; the two
    potential-outcome functions are each one coherent GP draw over the
    union of all units. The small dataset's assignment logit is drawn with
    the u-free kernel (or replaced by a known constant in RCT mode); the
    large dataset's uses theta_pi. Outcome streams are independent of
    assignment streams, so regenerating with a different theta_pi leaves
    the oracle effect untouched.
    """
    n, m = cfg.n, cfg.n + cfg.n_prime
    q = cfg.n_covariates
    rng_pts = _stream(cfg.seed, _STREAM_POINTS)
    X = rng_pts.uniform(-1.0, 1.0, size=(m, q))
    u = rng_pts.uniform(-1.0, 1.0, size=m)
    if cfg.collinear_last:
        X[:, -1] = X[:, :-1].mean(axis=1)
    points = np.column_stack([X, u])

    if cfg.theta0 == cfg.theta1:
        shared = GpSampler(points, cfg.theta0)
        g0 = shared.draw(_stream(cfg.seed, _STREAM_OUTCOME_0))
        g1 = shared.draw(_stream(cfg.seed, _STREAM_OUTCOME_1))
    else:
        g0 = GpSampler(points, cfg.theta0).draw(_stream(cfg.seed, _STREAM_OUTCOME_0))
        g1 = GpSampler(points, cfg.theta1).draw(_stream(cfg.seed, _STREAM_OUTCOME_1))

    idx1 = np.arange(n)
    idx2 = np.arange(n, m)

    if cfg.rct_propensity is not None:
        pi1 = np.full(n, cfg.rct_propensity)
    else:
        logit1 = GpSampler(points[idx1], D1_LOGIT_KERNEL)
        pi1 = _sigmoid(logit1.draw(_stream(cfg.seed, _STREAM_LOGIT_D1)))
    a1 = (_stream(cfg.seed, _STREAM_TREAT_D1).uniform(size=n) < pi1).astype(int)

    logit2 = GpSampler(points[idx2], cfg.theta_pi)
    pi2 = _sigmoid(logit2.draw(_stream(cfg.seed, _STREAM_LOGIT_D2)))
    a2 = (_stream(cfg.seed, _STREAM_TREAT_D2).uniform(size=cfg.n_prime) < pi2).astype(int)

    a_all = np.concatenate([a1, a2])
    y_all = np.where(a_all == 1, g1, g0)

    d1 = _build_dataset(
        X[idx1], a1, y_all[idx1], DatasetRole.SMALL_UNCONFOUNDED,
        propensity=pi1 if cfg.rct_propensity is not None else None,
    )
    d2 = _build_dataset(X[idx2], a2, y_all[idx2], DatasetRole.LARGE_AUXILIARY)
    cate_all = g1 - g0
    return SyntheticOutput(
        d1=d1, d2=d2,
        oracle_ate=float(cate_all.mean()),
        oracle_cate_d1=cate_all[idx1].copy(),
    )
