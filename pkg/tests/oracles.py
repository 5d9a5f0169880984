"""Independent reference computations used only by the test-suite.

Nothing here imports from ``micv``; each routine is written the slow,
obvious way so it can police the production code paths.
"""

import math


def newton_logistic(rows, ys, ridge=0.0, tol=1e-12, max_iter=200):
    """Plain Newton-Raphson on the logistic log-likelihood.

    ``rows`` are lists of floats *including* the leading 1.0. ``ridge``
    penalises every coefficient except the first. Pure Python loops,
    Gaussian elimination for the Newton step, which is halved until the
    penalised log-likelihood does not drop.
    """
    p = len(rows[0])
    beta = [0.0] * p

    def objective(b):
        return loglik(rows, ys, b) - 0.5 * ridge * sum(v * v for v in b[1:])

    for _ in range(max_iter):
        grad = [0.0] * p
        hess = [[0.0] * p for _ in range(p)]
        for x, y in zip(rows, ys):
            eta = sum(b * v for b, v in zip(beta, x))
            mu = _sigmoid(eta)
            w = mu * (1.0 - mu)
            for a in range(p):
                grad[a] += (y - mu) * x[a]
                for b in range(p):
                    hess[a][b] += w * x[a] * x[b]
        for a in range(1, p):
            grad[a] -= ridge * beta[a]
            hess[a][a] += ridge
        step = _solve(hess, grad)
        current = objective(beta)
        for _ in range(60):
            trial = [b + s for b, s in zip(beta, step)]
            if objective(trial) >= current - 1e-12 * abs(current):
                break
            step = [s / 2 for s in step]
        beta = trial
        if max(abs(s) for s in step) < tol:
            return beta
    raise RuntimeError("oracle Newton did not converge")


def _sigmoid(eta):
    if eta >= 0:
        return 1.0 / (1.0 + math.exp(-eta))
    e = math.exp(eta)
    return e / (1.0 + e)


def _solve(a, b):
    n = len(b)
    m = [row[:] + [rhs] for row, rhs in zip(a, b)]
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(m[r][col]))
        m[col], m[pivot] = m[pivot], m[col]
        for r in range(n):
            if r != col:
                f = m[r][col] / m[col][col]
                for c in range(col, n + 1):
                    m[r][c] -= f * m[col][c]
    return [m[i][n] / m[i][i] for i in range(n)]


def loglik(rows, ys, beta):
    total = 0.0
    for x, y in zip(rows, ys):
        eta = sum(b * v for b, v in zip(beta, x))
        # log(1 + e^eta) computed stably
        soft = max(eta, 0.0) + math.log1p(math.exp(-abs(eta)))
        total += y * eta - soft
    return total


def fd_score(rows, ys, beta, h=1e-6):
    """Central finite-difference gradient of the log-likelihood."""
    out = []
    for j in range(len(beta)):
        up = list(beta)
        dn = list(beta)
        up[j] += h
        dn[j] -= h
        out.append((loglik(rows, ys, up) - loglik(rows, ys, dn)) / (2 * h))
    return out


def percentile_type7(values, q):
    """Linear interpolation between order statistics (Hyndman-Fan type 7)."""
    xs = sorted(values)
    h = (len(xs) - 1) * q
    lo = math.floor(h)
    hi = min(lo + 1, len(xs) - 1)
    return xs[lo] + (h - lo) * (xs[hi] - xs[lo])


def spread_oracle(matrix, rows):
    """R spread measure by hand: list-of-lists matrix, explicit loops."""
    pooled = []
    for i in rows:
        reps = matrix[i]
        mean = sum(reps) / len(reps)
        if mean < 0.2 or mean > 0.8:
            continue
        pooled.extend(v - mean for v in reps)
    if not pooled:
        return None
    return (percentile_type7(pooled, 0.9) - percentile_type7(pooled, 0.1)) * 100
