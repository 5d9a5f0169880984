"""Multiple imputation by chained equations with proper parameter draws.

Each variable with missing cells is regressed on every other predictor plus
the outcome, the model parameters are drawn from their approximate
posterior, and the missing cells are drawn from the drawn model. The
outcome itself is visited last whenever some outcomes are masked, so that
validation rows can be imputed without ever seeing their own outcome; the
outcome draws are thrown away at the end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.special import expit

from .dataset import Dataset, ImputedDataset
from .glm import FitError, draw_coefficients, fit_logistic

BAYESIAN_LINEAR = "bayesian-linear"
PMM = "predictive-mean-matching"
METHODS = (BAYESIAN_LINEAR, PMM)

# relative ridge on X'X for the linear imputation model, as in common MICE software
_LINEAR_RIDGE = 1e-5


@dataclass(frozen=True)
class ImputationConfig:
    sweeps: int = 10
    continuous_method: str = BAYESIAN_LINEAR
    donor_count: int = 5
    rng_seed: int = 0

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.donor_count < 1:
            raise ValueError("donor_count must be >= 1")
        if self.continuous_method not in METHODS:
            raise ValueError(f"continuous_method must be one of {METHODS}")


class ImputationError(RuntimeError):
    pass


def initialize(dataset: Dataset, rng) -> ImputedDataset:
    """Fill every missing cell with a random observed value from its column.

    Masked outcomes are filled the same way from the observed outcomes.
    """
    rng = np.random.default_rng(rng)
    X = np.array(dataset.predictors, copy=True)
    mask = dataset.predictor_mask
    for j in range(dataset.p):
        miss = ~mask[:, j]
        if miss.any():
            pool = dataset.predictors[mask[:, j], j]
            if pool.size == 0:
                raise ImputationError(f"column {dataset.names[j]!r} has no observed cells")
            X[miss, j] = pool[rng.integers(0, pool.size, size=int(miss.sum()))]

    y = dataset.outcome.astype(float)
    ymiss = ~dataset.outcome_mask
    if ymiss.any():
        pool = y[dataset.outcome_mask]
        y = np.where(ymiss, 0.0, y)
        y[ymiss] = pool[rng.integers(0, pool.size, size=int(ymiss.sum()))]
    return ImputedDataset(X, dataset, y)


def _draw_linear(Z, target, rng):
    """Posterior draw for Bayesian linear regression.

    Residual variance from a scaled inverse chi-square, then coefficients
    from their conditional normal. Returns ``(beta_hat, beta_draw, sigma)``.
    """
    xtx = Z.T @ Z
    xtx[np.diag_indices_from(xtx)] *= 1.0 + _LINEAR_RIDGE
    try:
        c, low = cho_factor(xtx, lower=True)
    except np.linalg.LinAlgError as err:
        raise FitError("linear imputation model is singular") from err
    beta_hat = cho_solve((c, low), Z.T @ target)
    resid = target - Z @ beta_hat
    df = max(Z.shape[0] - Z.shape[1], 1)
    sigma = np.sqrt(float(resid @ resid) / rng.chisquare(df))
    # L^T u = z gives u ~ N(0, (X'X)^-1)
    u = solve_triangular(c, rng.standard_normal(Z.shape[1]), lower=True, trans="T")
    return beta_hat, beta_hat + sigma * u, sigma


def _impute_continuous(Z, target, obs, config, rng):
    Zo, Zm = Z[obs], Z[~obs]
    beta_hat, beta_star, sigma = _draw_linear(Zo, target[obs], rng)
    if config.continuous_method == BAYESIAN_LINEAR:
        return Zm @ beta_star + sigma * rng.standard_normal(Zm.shape[0])
    # predictive mean matching: observed rows at the fitted coefficients,
    # missing rows at the drawn ones
    yhat_obs = Zo @ beta_hat
    yhat_mis = Zm @ beta_star
    donors = target[obs]
    d = min(config.donor_count, donors.size)
    dist = np.abs(yhat_mis[:, None] - yhat_obs[None, :])
    if d < donors.size:
        nearest = np.argpartition(dist, d - 1, axis=1)[:, :d]
        # argpartition leaves the d nearest unordered; sort so draws are reproducible
        nearest.sort(axis=1)
    else:
        nearest = np.broadcast_to(np.arange(donors.size), dist.shape)
    pick = nearest[np.arange(Zm.shape[0]), rng.integers(0, d, size=Zm.shape[0])]
    return donors[pick]


def _impute_binary(Z, target, obs, rng, warm):
    coef, diag = fit_logistic(Z[obs], target[obs], start=warm)
    drawn = draw_coefficients(coef, diag, rng)
    p = expit(Z[~obs] @ drawn.as_array())
    return (rng.random(p.size) < p).astype(float), coef.as_array()


def sweep(current: ImputedDataset, dataset: Dataset, config: ImputationConfig, rng, warm=None) -> ImputedDataset:
    """One pass over every incomplete variable, outcome last.

    ``warm`` is an optional dict carrying logistic coefficients between
    sweeps as IRLS starting values; it changes nothing but speed.
    """
    rng = np.random.default_rng(rng)
    if warm is None:
        warm = {}
    mask = dataset.predictor_mask
    binary = dataset.binary_columns
    n, p = dataset.predictors.shape
    y = (
        current.working_outcome.copy()
        if current.working_outcome is not None
        else dataset.outcome.astype(float)
    )
    # design layout: [1, x_1 .. x_p, y]
    D = np.empty((n, p + 2))
    D[:, 0] = 1.0
    D[:, 1 : p + 1] = current.predictors
    D[:, p + 1] = y

    for j in range(p):
        obs = mask[:, j]
        if obs.all():
            continue
        cols = [0] + [c for c in range(1, p + 2) if c != j + 1]
        Z = D[:, cols]
        target = D[:, j + 1]
        try:
            if binary[j]:
                values, warm[j] = _impute_binary(Z, target, obs, rng, warm.get(j))
            else:
                values = _impute_continuous(Z, target, obs, config, rng)
        except (FitError, np.linalg.LinAlgError) as err:
            raise ImputationError(f"imputation model for column {dataset.names[j]!r} failed: {err}") from err
        D[~obs, j + 1] = values

    yobs = dataset.outcome_mask
    if not yobs.all():
        Z = D[:, : p + 1]
        try:
            values, warm["outcome"] = _impute_binary(Z, D[:, p + 1], yobs, rng, warm.get("outcome"))
        except (FitError, np.linalg.LinAlgError) as err:
            raise ImputationError(f"imputation model for the outcome failed: {err}") from err
        D[~yobs, p + 1] = values

    return ImputedDataset(D[:, 1 : p + 1].copy(), dataset, D[:, p + 1].copy())


def impute_once(dataset: Dataset, config: ImputationConfig = ImputationConfig(), rng=None) -> ImputedDataset:
    """A single completed dataset: random start, then ``config.sweeps`` sweeps.

    ``rng`` may be a Generator, SeedSequence or int; ``None`` uses
    ``config.rng_seed``. Imputed outcome values are discarded.
    """
    rng = np.random.default_rng(config.rng_seed if rng is None else rng)
    current = initialize(dataset, rng)
    if dataset.predictor_mask.all() and dataset.outcome_mask.all():
        return ImputedDataset(current.predictors, dataset)
    warm: dict = {}
    for _ in range(config.sweeps):
        current = sweep(current, dataset, config, rng, warm)
    return ImputedDataset(current.predictors, dataset)


def impute_many(dataset: Dataset, K: int, config: ImputationConfig = ImputationConfig(), seed=None) -> list[ImputedDataset]:
    """``K`` independent imputations from substreams of one seed."""
    root = np.random.SeedSequence(config.rng_seed if seed is None else seed)
    return [impute_once(dataset, config, np.random.default_rng(s)) for s in root.spawn(K)]

