"""Portfolio weight construction: minimum variance (with and without a
long-only constraint), hierarchical risk parity, and the uniform baseline.

All strategies return weights summing to one. Strategy vocabulary for
configs and the CLI: ``mvp``, ``mvp+``, ``hrp``, ``uniform``.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.linalg.lapack import dpocon

from .errors import AllocationError, IllConditionedError
from .estimators.hierarchy import agglomerate, correlation_from_covariance, leaf_order
from .linalg import check_square_symmetric

__all__ = [
    "STRATEGIES",
    "mvp_weights",
    "mvp_long_only",
    "hrp_weights",
    "uniform_weights",
    "allocate",
]

COND_LIMIT = 1e14


def mvp_weights(xi: np.ndarray) -> np.ndarray:
    """Unconstrained minimum-variance weights ``xi^{-1} 1 / (1' xi^{-1} 1)``.

    Solves the linear system through a Cholesky factorization (the inverse is
    never formed) and rejects inputs whose estimated condition number exceeds
    1e14, since weights from a near-singular estimate are meaningless.
    """
    xi = check_square_symmetric(xi, "covariance")
    p = xi.shape[0]
    try:
        factor = cho_factor(xi, lower=True)
    except np.linalg.LinAlgError as exc:
        raise IllConditionedError(f"covariance is not positive definite: {exc}") from exc
    rcond, info = dpocon(factor[0], np.linalg.norm(xi, 1), uplo="L")
    if info != 0 or rcond < 1.0 / COND_LIMIT:
        raise IllConditionedError(
            f"covariance condition number ~{1.0 / max(rcond, 1e-300):.2e} exceeds {COND_LIMIT:.0e}"
        )
    u = cho_solve(factor, np.ones(p))
    total = u.sum()
    if total == 0.0:
        raise IllConditionedError("degenerate solution: weights sum to zero")
    return u / total


def mvp_long_only(xi: np.ndarray, pivot_cap: int | None = None) -> np.ndarray:
    """Long-only minimum-variance weights by a primal active-set method.

    Minimizes ``w' xi w`` subject to ``sum(w) = 1`` and ``w >= 0``. The method
    walks between restricted unconstrained solutions, pinning variables at
    zero when they block and releasing the most negative dual. Deterministic:
    ties pick the lowest index. Fails after ``10 p`` pivots.
    """
    xi = check_square_symmetric(xi, "covariance")
    p = xi.shape[0]
    if p == 1:
        return np.ones(1)
    cap = pivot_cap if pivot_cap is not None else 10 * p
    scale = float(np.trace(xi)) / p
    if scale <= 0.0:
        raise AllocationError("covariance has non-positive trace")
    wtol = 1e-13
    dtol = 1e-9 * scale

    w = np.full(p, 1.0 / p)
    free = np.ones(p, dtype=bool)
    pivots = 0
    while True:
        idx = np.nonzero(free)[0]
        try:
            u = np.linalg.solve(xi[np.ix_(idx, idx)], np.ones(idx.size))
        except np.linalg.LinAlgError as exc:
            raise AllocationError(f"singular restricted covariance block: {exc}") from exc
        total = u.sum()
        if total <= 0.0:
            raise AllocationError("restricted problem is degenerate (nonpositive 1'u)")
        z = np.zeros(p)
        z[idx] = u / total
        mu = 1.0 / total

        if z[idx].min() >= -wtol:
            w = np.clip(z, 0.0, None)
            grad = xi @ w
            slack = grad - mu
            blocked = np.nonzero(~free)[0]
            if blocked.size == 0 or slack[blocked].min() >= -dtol:
                w = w / w.sum()
                _check_kkt(xi, w, scale)
                return w
            release = blocked[np.argmin(slack[blocked])]
            free[release] = True
        else:
            step = z - w
            shrinking = idx[(z[idx] < w[idx]) & (z[idx] < 0.0)]
            ratios = w[shrinking] / (w[shrinking] - z[shrinking])
            alpha = float(ratios.min())
            block = int(shrinking[np.argmin(ratios)])
            w = w + min(alpha, 1.0) * step
            w[block] = 0.0
            w[~free] = 0.0
            free[block] = False
        pivots += 1
        if pivots > cap:
            raise AllocationError(f"active-set method exceeded {cap} pivots")


def _check_kkt(xi: np.ndarray, w: np.ndarray, scale: float) -> None:
    grad = xi @ w
    held = w > 0.0
    mu = grad[held].mean()
    resid = max(
        abs(w.sum() - 1.0),
        float(max(0.0, -w.min())),
        float(np.abs(grad[held] - mu).max()) / scale,
        float(max(0.0, (mu - grad[~held]).max() / scale)) if (~held).any() else 0.0,
    )
    if resid > 1e-8:
        raise AllocationError(f"KKT residual {resid:.3e} above tolerance")


def _cluster_variance(xi: np.ndarray, items: list[int]) -> float:
    sub = xi[np.ix_(items, items)]
    iv = 1.0 / np.diag(sub)
    iv = iv / iv.sum()
    var = float(iv @ sub @ iv)
    return max(var, 1e-12 * float(np.diag(sub).mean()))


def hrp_weights(xi: np.ndarray) -> np.ndarray:
    """Hierarchical risk parity weights.

    Assets are clustered by single linkage on the distance between the
    columns of ``sqrt((1 - C)/2)``, reordered by the dendrogram's leaf
    traversal, and capital is split by recursive bisection of the ordered
    list, each half weighted inversely to its inverse-variance cluster
    variance. The longer half of an odd split is the left one.
    """
    xi = check_square_symmetric(xi, "covariance")
    p = xi.shape[0]
    if p == 1:
        return np.ones(1)
    c = correlation_from_covariance(xi)
    if np.abs(c).max() > 1.0 + 1e-8:
        raise AllocationError("correlations exceed 1 beyond tolerance; distances undefined")
    c = np.clip(c, -1.0, 1.0)
    dmat = np.sqrt(0.5 * (1.0 - c))
    np.fill_diagonal(dmat, 0.0)

    sq = np.sum(dmat**2, axis=0)
    gram = dmat.T @ dmat
    dd = np.sqrt(np.clip(sq[:, None] + sq[None, :] - 2.0 * gram, 0.0, None))
    dd = (dd + dd.T) / 2.0
    np.fill_diagonal(dd, 0.0)

    order = leaf_order(agglomerate(dd, method="single"))

    w = np.ones(p)
    stack = [order]
    while stack:
        items = stack.pop()
        if len(items) < 2:
            continue
        half = (len(items) + 1) // 2
        left, right = items[:half], items[half:]
        var_l = _cluster_variance(xi, left)
        var_r = _cluster_variance(xi, right)
        split = 1.0 - var_l / (var_l + var_r)
        w[left] *= split
        w[right] *= 1.0 - split
        stack.append(left)
        stack.append(right)
    return w / w.sum()


def uniform_weights(p: int) -> np.ndarray:
    """Equal weights 1/p."""
    if p < 1:
        raise ValueError("p must be >= 1")
    return np.full(p, 1.0 / p)


STRATEGIES = ("mvp", "mvp+", "hrp", "uniform")


def allocate(strategy: str, xi: np.ndarray) -> np.ndarray:
    """Dispatch a strategy name from :data:`STRATEGIES` on a covariance input."""
    if strategy == "mvp":
        return mvp_weights(xi)
    if strategy == "mvp+":
        return mvp_long_only(xi)
    if strategy == "hrp":
        return hrp_weights(xi)
    if strategy == "uniform":
        return uniform_weights(np.asarray(xi).shape[0])
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
