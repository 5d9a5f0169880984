"""Logistic regression by iteratively reweighted least squares.

Used for the substantive prediction model and for imputing binary
variables. Separation and collinearity are handled by refitting with a
small ridge penalty on the slopes rather than by raising, because small
validation folds with rare events separate routinely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

MAX_ITER = 50
TOL = 1e-8
FALLBACK_RIDGE = 1e-4
# |eta| beyond this means a fitted probability within 1e-13 of 0 or 1
SATURATION = 30.0

_P_LO = np.finfo(float).tiny
_P_HI = np.nextafter(1.0, 0.0)


class FitError(RuntimeError):
    """Raised when a model cannot be fitted even after the ridge fallback."""


@dataclass(frozen=True, eq=False)
class CoefficientVector:
    intercept: float
    slopes: np.ndarray

    def __post_init__(self):
        slopes = np.array(self.slopes, dtype=float, copy=True).reshape(-1)
        intercept = float(self.intercept)
        if not (np.isfinite(intercept) and np.all(np.isfinite(slopes))):
            raise ValueError("coefficients must be finite")
        slopes.setflags(write=False)
        object.__setattr__(self, "intercept", intercept)
        object.__setattr__(self, "slopes", slopes)

    @classmethod
    def from_array(cls, beta) -> CoefficientVector:
        beta = np.asarray(beta, dtype=float)
        return cls(beta[0], beta[1:])

    def as_array(self) -> np.ndarray:
        return np.concatenate(([self.intercept], self.slopes))

    def __len__(self):
        return 1 + self.slopes.size

    def __repr__(self):
        return f"CoefficientVector(intercept={self.intercept!r}, slopes={self.slopes.tolist()!r})"


@dataclass(frozen=True, eq=False)
class FitDiagnostics:
    converged: bool
    iterations: int
    final_deviance: float
    ridge_applied: bool
    covariance: np.ndarray


def _loglik(y, eta):
    return float(y @ eta - np.logaddexp(0.0, eta).sum())


def _irls(X, y, penalty, beta, max_iter, tol):
    """Newton iterations with step halving on the penalised log-likelihood.

    Returns ``(beta, iterations, converged)``; ``converged`` is False on
    non-finite weights, a singular system, exhausting ``max_iter``, or an
    unpenalised limit with fitted probabilities numerically 0 or 1
    (separation: the score vanishes only because the weights underflow).
    """
    q = X.shape[1]
    eta = X @ beta
    obj = _loglik(y, eta) - 0.5 * float(penalty @ (beta * beta))
    for it in range(1, max_iter + 1):
        mu = expit(eta)
        w = mu * (1.0 - mu)
        grad = X.T @ (y - mu) - penalty * beta
        H = (X.T * w) @ X
        H.flat[:: q + 1] += penalty
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            return beta, it, False
        if not np.isfinite(step.sum()):
            return beta, it, False

        t = 1.0
        while True:
            cand = beta + t * step
            cand_eta = X @ cand
            cand_obj = _loglik(y, cand_eta) - 0.5 * float(penalty @ (cand * cand))
            if cand_obj >= obj - 1e-12 * abs(obj) or t < 1e-10:
                break
            t *= 0.5
        if not np.isfinite(cand_obj):
            return beta, it, False
        delta = np.abs(cand - beta).max()
        beta, eta, obj = cand, cand_eta, cand_obj
        if delta < tol:
            return beta, it, bool(penalty.any() or np.abs(eta).max() < SATURATION)
    return beta, max_iter, False


def fit_logistic(
    design,
    outcome,
    *,
    ridge: float = 0.0,
    ridge_fallback: bool = True,
    start=None,
    max_iter: int = MAX_ITER,
    tol: float = TOL,
) -> tuple[CoefficientVector, FitDiagnostics]:
    """Maximum-likelihood logistic fit.

    Parameters
    ----------
    design : (n, q) array
        Leading column must be the intercept (all ones).
    outcome : (n,) array of {0, 1}
    ridge : float
        Penalty on the slopes (never the intercept) for the first attempt.
    ridge_fallback : bool
        Refit with ``ridge=FALLBACK_RIDGE`` when the first attempt fails to
        converge. When the outcome is all one class the fallback also
        penalises the intercept, otherwise no finite optimum exists.
    start : array, optional
        Warm start for the coefficient vector.

    Returns
    -------
    coefficients, diagnostics
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(outcome, dtype=float)
    if X.ndim != 2 or y.ndim != 1:
        raise ValueError("design must be 2-D and outcome 1-D")
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"design has {X.shape[0]} rows, outcome has {y.shape[0]}")
    if X.shape[0] == 0:
        raise ValueError("cannot fit on zero rows")
    if not np.isfinite(X).all():
        raise ValueError("design must be finite")
    if not (X[:, 0] == 1.0).all():
        raise ValueError("first design column must be the intercept (all ones)")
    if not ((y == 0.0) | (y == 1.0)).all():
        raise ValueError("outcome entries must be 0 or 1")
    one_class = bool((y == y[0]).all())
    if one_class and not ridge_fallback:
        raise ValueError("outcome is all one class and ridge fallback is disabled")

    q = X.shape[1]
    beta0 = np.zeros(q) if start is None else np.array(start, dtype=float)
    if beta0.shape != (q,) or not np.all(np.isfinite(beta0)):
        beta0 = np.zeros(q)

    penalty = np.full(q, float(ridge))
    penalty[0] = 0.0
    converged = False
    ridge_applied = ridge > 0
    if not one_class:
        beta, iterations, converged = _irls(X, y, penalty, beta0, max_iter, tol)
    if not converged:
        if not ridge_fallback:
            raise FitError(f"IRLS did not converge in {max_iter} iterations")
        penalty = np.full(q, max(float(ridge), FALLBACK_RIDGE))
        if not one_class:
            penalty[0] = 0.0
        ridge_applied = True
        beta, iterations, converged = _irls(X, y, penalty, np.zeros(q), max_iter, tol)
        if not converged:
            raise FitError(f"IRLS did not converge in {max_iter} iterations even with ridge {penalty.max():g}")

    eta = X @ beta
    mu = expit(eta)
    H = (X.T * (mu * (1.0 - mu))) @ X
    H.flat[:: q + 1] += penalty
    try:
        cov = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(H, hermitian=True)
    cov = 0.5 * (cov + cov.T)
    deviance = max(-2.0 * _loglik(y, eta), 0.0)
    return CoefficientVector.from_array(beta), FitDiagnostics(
        converged=converged,
        iterations=iterations,
        final_deviance=deviance,
        ridge_applied=ridge_applied,
        covariance=cov,
    )


def predict_proba(coefficients: CoefficientVector, rows):
    """Logistic transform of ``intercept + rows @ slopes``.

    Accepts a single row (returns a float) or a matrix of rows (returns an
    array). Results are clipped just inside (0, 1).
    """
    X = np.asarray(rows, dtype=float)
    single = X.ndim == 1
    X = np.ascontiguousarray(np.atleast_2d(X))
    if X.shape[1] != coefficients.slopes.size:
        raise ValueError(f"row length {X.shape[1]} != {coefficients.slopes.size} slopes")
    if not np.all(np.isfinite(X)):
        raise ValueError("rows must be finite")
    p = np.clip(expit(coefficients.intercept + X @ coefficients.slopes), _P_LO, _P_HI)
    return float(p[0]) if single else p


def draw_coefficients(coefficients: CoefficientVector, diagnostics: FitDiagnostics, rng) -> CoefficientVector:
    """One draw from N(fitted coefficients, inverse information).

    This is what makes logistic imputation "proper": parameter uncertainty
    propagates into the imputed values.
    """
    cov = np.asarray(diagnostics.covariance, dtype=float)
    if cov.shape != (len(coefficients),) * 2:
        raise ValueError("covariance shape does not match coefficient length")
    z = rng.standard_normal(cov.shape[0])
    try:
        factor = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(cov)
        if not np.all(np.isfinite(vals)) or vals.min() < -1e-8 * max(1.0, abs(vals.max())):
            raise FitError("coefficient covariance is not positive semi-definite")
        factor = vecs * np.sqrt(np.clip(vals, 0.0, None))
    return CoefficientVector.from_array(coefficients.as_array() + factor @ z)


def pool_coefficients(vectors) -> CoefficientVector:
    """Element-wise mean of fitted coefficient vectors (Rubin's rule point estimate)."""
    stack = np.array([v.as_array() for v in vectors])
    if stack.ndim != 2 or stack.shape[0] == 0:
        raise ValueError("need at least one coefficient vector")
    return CoefficientVector.from_array(stack.mean(axis=0))
