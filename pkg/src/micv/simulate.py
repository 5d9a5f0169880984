"""Synthetic incomplete datasets with MCAR or MAR missingness.

Rows are latent multivariate normal draws; binary columns are the latent
values thresholded at zero. The outcome is Bernoulli from a logistic model
on the completed rows and is always fully observed.

The two presets mimic the summary characteristics of a cardiac
(CRT-like) and a leukaemia transplant (CLL-like) cohort: sample size,
number of predictors, where the missingness sits, and event prevalence.
Their covariances and coefficients are our own choices, not estimates from
the real data, which are not public.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from .dataset import BINARY, CONTINUOUS, Dataset
from .glm import CoefficientVector


@dataclass(frozen=True)
class MCAR:
    """Each cell of missing column ``c`` is dropped with probability ``rates[c]``."""

    rates: tuple[float, ...]


@dataclass(frozen=True)
class MAR:
    """Missingness probability ``expit(offset + weights . drivers)`` per cell.

    ``drivers`` are fully observed continuous columns. The offset for each
    missing column is solved from the latent normal law so that the
    marginal missing rate equals ``rates[c]``; it is a property of the
    scenario, not of the sample drawn.
    """

    rates: tuple[float, ...]
    drivers: tuple[int, ...]
    weights: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class SimulationScenario:
    n: int
    p_continuous: int
    p_binary: int
    covariance: np.ndarray
    true_coefficients: CoefficientVector
    missing_columns: tuple[int, ...]
    mechanism: MCAR | MAR
    rng_seed: int = 0
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        p = self.p
        cov = np.array(self.covariance, dtype=float)
        if cov.shape != (p, p) or not np.allclose(cov, cov.T):
            raise ValueError(f"covariance must be a symmetric {p}x{p} matrix")
        if np.linalg.eigvalsh(cov).min() <= 0:
            raise ValueError("covariance must be positive definite")
        if self.true_coefficients.slopes.size != p:
            raise ValueError("true_coefficients must have one slope per predictor")
        cols = tuple(int(c) for c in self.missing_columns)
        if any(c < 0 or c >= p for c in cols) or len(set(cols)) != len(cols):
            raise ValueError("missing_columns must be distinct column indices")
        mech = self.mechanism
        if len(mech.rates) != len(cols):
            raise ValueError("mechanism needs one rate per missing column")
        if not all(0.0 < r < 1.0 for r in mech.rates):
            raise ValueError("missing rates must lie in (0, 1)")
        if isinstance(mech, MAR):
            if set(mech.drivers) & set(cols):
                raise ValueError("MAR driver columns cannot themselves be missing")
            if any(d >= self.p_continuous for d in mech.drivers):
                raise ValueError("MAR drivers must be continuous columns")
            if len(mech.weights) != len(mech.drivers):
                raise ValueError("MAR needs one weight per driver")
        names = self.names or tuple(f"x{j + 1:02d}" for j in range(p))
        if len(names) != p:
            raise ValueError("one name per predictor required")
        cov.setflags(write=False)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "missing_columns", cols)
        object.__setattr__(self, "names", tuple(names))

    @property
    def p(self) -> int:
        return self.p_continuous + self.p_binary

    @property
    def kinds(self) -> tuple[str, ...]:
        return (CONTINUOUS,) * self.p_continuous + (BINARY,) * self.p_binary


def _latent_to_observed(Z, p_continuous):
    X = Z.copy()
    X[:, p_continuous:] = (Z[:, p_continuous:] > 0).astype(float)
    return X


_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite_e.hermegauss(80)
_GH_WEIGHTS = _GH_WEIGHTS / _GH_WEIGHTS.sum()


def mar_offset(rate: float, scale: float) -> float:
    """Offset ``a`` with E[expit(a + scale * Z)] = rate for Z ~ N(0, 1)."""
    f = lambda a: float(_GH_WEIGHTS @ expit(a + scale * _GH_NODES)) - rate
    return brentq(f, -50.0, 50.0, xtol=1e-14)


def missing_probabilities(scenario: SimulationScenario, X) -> np.ndarray:
    """Per-cell missingness probabilities, shape ``(n, len(missing_columns))``."""
    mech = scenario.mechanism
    n = X.shape[0]
    if isinstance(mech, MCAR):
        return np.tile(np.asarray(mech.rates, dtype=float), (n, 1))
    drivers = list(mech.drivers)
    w = np.asarray(mech.weights, dtype=float)
    sub = scenario.covariance[np.ix_(drivers, drivers)]
    scale = float(np.sqrt(w @ sub @ w))
    s = X[:, drivers] @ w
    return np.column_stack([expit(mar_offset(r, scale) + s) for r in mech.rates])


def generate(scenario: SimulationScenario, rng=None) -> Dataset:
    """Draw one incomplete dataset; ``rng`` defaults to ``scenario.rng_seed``."""
    rng = np.random.default_rng(scenario.rng_seed if rng is None else rng)
    try:
        L = np.linalg.cholesky(scenario.covariance)
    except np.linalg.LinAlgError as err:
        raise ValueError("covariance factorisation failed") from err
    Z = rng.standard_normal((scenario.n, scenario.p)) @ L.T
    X = _latent_to_observed(Z, scenario.p_continuous)
    beta = scenario.true_coefficients
    y = (rng.random(scenario.n) < expit(beta.intercept + X @ beta.slopes)).astype(np.int8)

    probs = missing_probabilities(scenario, X)
    drop = rng.random(probs.shape) < probs
    mask = np.ones_like(X, dtype=bool)
    mask[:, list(scenario.missing_columns)] = ~drop
    X[~mask] = np.nan
    return Dataset(
        tuple(zip(scenario.names, scenario.kinds)),
        X,
        mask,
        y,
        np.ones(scenario.n, dtype=bool),
    )


def exchangeable(p: int, rho: float) -> np.ndarray:
    return np.full((p, p), rho) + (1.0 - rho) * np.eye(p)


@lru_cache(maxsize=None)
def _calibrated_intercept(p_continuous, p_binary, rho, slopes, prevalence, draws=400_000):
    """Intercept giving the target event rate, by fixed-seed Monte Carlo over the design law."""
    rng = np.random.default_rng(20180731)
    p = p_continuous + p_binary
    L = np.linalg.cholesky(exchangeable(p, rho))
    X = _latent_to_observed(rng.standard_normal((draws, p)) @ L.T, p_continuous)
    s = X @ np.asarray(slopes)
    return brentq(lambda a: float(expit(a + s).mean()) - prevalence, -30.0, 30.0, xtol=1e-12)


# fractions reported for the two cohorts
CRT_N, CRT_ROWS_MISSING, CRT_EVENTS = 1053, 524, 153
CLL_N, CLL_EVENTS = 694, 184
CLL_COLUMN_RATES = (0.09, 0.06, 0.25)

_CRT_SLOPES = (0.9, 0.6, -0.5, 0.4, 0.3, -0.25, 0.15, 0.0, 0.5, -0.4, 0.35, 0.25, 0.0, 0.0)
_CLL_SLOPES = (0.5, 0.3, -0.2, 0.6, 0.5, 0.7, 0.3, 0.0)


def crt_like_scenario(n: int = CRT_N, rng_seed: int = 0) -> SimulationScenario:
    """14 predictors (8 continuous, 6 binary), exchangeable correlation 0.3.

    Missingness is MCAR and confined to the first, most predictive
    continuous column, at the rate that leaves about half of all rows
    incomplete. The intercept is solved for a 153/1053 event rate.
    """
    rho = 0.3
    intercept = _calibrated_intercept(8, 6, rho, _CRT_SLOPES, CRT_EVENTS / CRT_N)
    return SimulationScenario(
        n=n,
        p_continuous=8,
        p_binary=6,
        covariance=exchangeable(14, rho),
        true_coefficients=CoefficientVector(intercept, _CRT_SLOPES),
        missing_columns=(0,),
        mechanism=MCAR((CRT_ROWS_MISSING / CRT_N,)),
        rng_seed=rng_seed,
    )


def cll_like_scenario(n: int = CLL_N, rng_seed: int = 0) -> SimulationScenario:
    """8 predictors (3 continuous, 5 binary), exchangeable correlation 0.2.

    Three binary columns go missing at 9%, 6% and 25% under MAR driven by
    the first two continuous columns. The intercept is solved for a 184/694
    event rate.
    """
    rho = 0.2
    intercept = _calibrated_intercept(3, 5, rho, _CLL_SLOPES, CLL_EVENTS / CLL_N)
    return SimulationScenario(
        n=n,
        p_continuous=3,
        p_binary=5,
        covariance=exchangeable(8, rho),
        true_coefficients=CoefficientVector(intercept, _CLL_SLOPES),
        missing_columns=(3, 4, 5),
        mechanism=MAR(CLL_COLUMN_RATES, drivers=(0, 1), weights=(0.8, 0.5)),
        rng_seed=rng_seed,
    )


SCENARIOS = {
    "crt-like": crt_like_scenario,
    "cll-like": cll_like_scenario,
}


def scenario_by_name(name: str, **overrides) -> SimulationScenario:
    try:
        factory = SCENARIOS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
    return factory(**overrides)


def with_size(scenario: SimulationScenario, n: int) -> SimulationScenario:
    return replace(scenario, n=n)
