"""Agglomerative clustering and the hierarchical correlation-filtering estimator.

The dendrogram code is self-contained (no scipy.cluster) so that merge
tie-breaking is deterministic across platforms: among equally distant pairs,
the pair containing the lowest leaf index is merged first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..linalg import check_square_symmetric, psd_repair, symmetrize

__all__ = [
    "Dendrogram",
    "agglomerate",
    "alca_dendrogram",
    "cophenetic_matrix",
    "leaf_order",
    "correlation_from_covariance",
    "estimate_alca",
]


@dataclass(frozen=True)
class Dendrogram:
    """Merge history of an agglomerative clustering.

    ``merges[k] = (a, b, height)`` joins nodes ``a`` and ``b`` into node
    ``leaf_count + k``. Node ids below ``leaf_count`` are leaves. Heights are
    non-decreasing over merges.
    """

    merges: tuple[tuple[int, int, float], ...]
    leaf_count: int

    def __post_init__(self) -> None:
        if len(self.merges) != self.leaf_count - 1:
            raise ValueError("a dendrogram over p leaves must have exactly p-1 merges")
        heights = [h for _, _, h in self.merges]
        if any(b < a for a, b in zip(heights, heights[1:])):
            raise ValueError("merge heights must be non-decreasing")


def _validate_dissimilarity(d: np.ndarray) -> np.ndarray:
    d = check_square_symmetric(d, "dissimilarity matrix")
    if np.any(np.diag(d) != 0.0):
        raise ValueError("dissimilarity matrix must have a zero diagonal")
    if d.min() < 0.0:
        raise ValueError("dissimilarity matrix must be non-negative")
    return d


def agglomerate(d: np.ndarray, method: str = "average") -> Dendrogram:
    """Agglomerative clustering of a dissimilarity matrix.

    ``method`` is ``"average"`` or ``"single"``. Ties on the inter-cluster
    distance are broken towards the pair whose clusters contain the lowest
    (then second lowest) original leaf index.
    """
    if method not in ("average", "single"):
        raise ValueError(f"unknown linkage method {method!r}")
    d = _validate_dissimilarity(d)
    p = d.shape[0]
    if p == 1:
        return Dendrogram(merges=(), leaf_count=1)

    # Distance matrix over node ids (leaves then merged nodes), padded as we go.
    dist = np.full((2 * p - 1, 2 * p - 1), np.inf)
    dist[:p, :p] = d
    np.fill_diagonal(dist, np.inf)
    size = np.ones(2 * p - 1, dtype=int)
    min_leaf = np.arange(2 * p - 1)
    active = list(range(p))

    merges: list[tuple[int, int, float]] = []
    last_height = 0.0
    for step in range(p - 1):
        idx = np.array(active)
        sub = dist[np.ix_(idx, idx)]
        iu, ju = np.triu_indices(len(idx), k=1)
        vals = sub[iu, ju]
        dmin = vals.min()
        ties = np.nonzero(vals == dmin)[0]
        best = min(
            ties,
            key=lambda t: tuple(
                sorted((min_leaf[idx[iu[t]]], min_leaf[idx[ju[t]]]))
            ),
        )
        a, b = int(idx[iu[best]]), int(idx[ju[best]])

        q = p + step
        others = [c for c in active if c != a and c != b]
        if others:
            oc = np.array(others)
            if method == "average":
                new = (size[a] * dist[a, oc] + size[b] * dist[b, oc]) / (size[a] + size[b])
            else:
                new = np.minimum(dist[a, oc], dist[b, oc])
            dist[q, oc] = new
            dist[oc, q] = new
        size[q] = size[a] + size[b]
        min_leaf[q] = min(min_leaf[a], min_leaf[b])

        height = max(float(dmin), last_height)  # guard round-off monotonicity
        last_height = height
        merges.append((a, b, height))
        active = others + [q]

    return Dendrogram(merges=tuple(merges), leaf_count=p)


def alca_dendrogram(d: np.ndarray) -> Dendrogram:
    """Average-linkage dendrogram of a dissimilarity matrix."""
    return agglomerate(d, method="average")


def cophenetic_matrix(tree: Dendrogram) -> np.ndarray:
    """p x p matrix of merge heights at which each leaf pair first joins."""
    p = tree.leaf_count
    members: dict[int, list[int]] = {i: [i] for i in range(p)}
    coph = np.zeros((p, p))
    for k, (a, b, h) in enumerate(tree.merges):
        ma, mb = members.pop(a), members.pop(b)
        coph[np.ix_(ma, mb)] = h
        coph[np.ix_(mb, ma)] = h
        members[p + k] = ma + mb
    return coph


def leaf_order(tree: Dendrogram) -> list[int]:
    """Left-to-right leaf traversal with children ordered by (size, lowest leaf)."""
    p = tree.leaf_count
    children = {p + k: (a, b) for k, (a, b, _) in enumerate(tree.merges)}
    size: dict[int, int] = {i: 1 for i in range(p)}
    min_leaf: dict[int, int] = {i: i for i in range(p)}
    for k, (a, b, _) in enumerate(tree.merges):
        size[p + k] = size[a] + size[b]
        min_leaf[p + k] = min(min_leaf[a], min_leaf[b])

    order: list[int] = []
    root = p + len(tree.merges) - 1 if tree.merges else 0
    stack = [root]
    while stack:
        node = stack.pop()
        if node < p:
            order.append(node)
            continue
        a, b = children[node]
        first, second = sorted((a, b), key=lambda c: (size[c], min_leaf[c]))
        stack.append(second)  # LIFO: first expanded child comes out first
        stack.append(first)
    return order


def correlation_from_covariance(s: np.ndarray) -> np.ndarray:
    """Correlation matrix of a covariance matrix with strictly positive diagonal."""
    s = check_square_symmetric(s, "covariance")
    diag = np.diag(s)
    if np.any(diag <= 0.0):
        raise ValueError("covariance diagonal must be strictly positive")
    scale = np.sqrt(diag)
    c = s / np.outer(scale, scale)
    np.fill_diagonal(c, 1.0)
    return symmetrize(c)


def estimate_alca(s: np.ndarray) -> np.ndarray:
    """Hierarchically filtered covariance estimate.

    The correlation matrix is mapped to the dissimilarity ``1 - C``, an
    average-linkage dendrogram is built, and every correlation is replaced by
    one minus the cophenetic (first-join) height of its pair. Variances are
    kept; the result is symmetrized and PSD-repaired if needed.
    """
    s = check_square_symmetric(s, "covariance")
    c = correlation_from_covariance(s)
    d = 1.0 - c
    np.fill_diagonal(d, 0.0)
    if d.min() < -1e-8:
        raise ValueError("correlations above 1 beyond tolerance; invalid covariance input")
    d = np.clip(d, 0.0, None)

    tree = alca_dendrogram(d)
    filtered_corr = 1.0 - cophenetic_matrix(tree)
    np.fill_diagonal(filtered_corr, 1.0)
    scale = np.sqrt(np.diag(s))
    xi = symmetrize(filtered_corr * np.outer(scale, scale))
    return psd_repair(xi)
