"""Population covariance models and panel sampling.

Three population models are supported: a fully nested hierarchical matrix, a
one-factor matrix with uniform loadings, and a diagonal matrix with a fixed
eigenvalue mix. Data panels are p x n matrices (columns are observations)
drawn under the multiplicative noise model ``Y = sqrt(Sigma) @ X`` with i.i.d.
standardized entries in ``X``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .linalg import matrix_sqrt, symmetrize

__all__ = [
    "ModelConfig",
    "MODEL_KINDS",
    "nested_sigma",
    "factor_sigma",
    "diagonal_sigma",
    "sample_panel",
    "sample_covariance",
    "nested_sigma_eigenvalues",
    "draw_sigma",
    "panel_distribution",
]

MODEL_KINDS = ("nested", "one-factor", "diagonal")

DEFAULT_DIAG_FRACTIONS = ((1.0, 0.2), (3.0, 0.4), (10.0, 0.4))


@dataclass(frozen=True)
class ModelConfig:
    """Which population model to build, and its parameters.

    ``gamma`` applies to the nested model, ``sigma``/``sigma_r``/``dof`` to the
    one-factor model (whose panels are Student-t distributed), and
    ``diag_fractions`` (pairs of eigenvalue and population fraction) to the
    diagonal model.
    """

    kind: str
    p: int
    gamma: float = 0.1
    sigma: float = 0.16
    sigma_r: float = 0.2
    dof: int = 3
    diag_fractions: tuple[tuple[float, float], ...] = DEFAULT_DIAG_FRACTIONS

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if self.p < 1:
            raise ValueError("p must be a positive integer")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "p": self.p,
            "gamma": self.gamma,
            "sigma": self.sigma,
            "sigma_r": self.sigma_r,
            "dof": self.dof,
            "diag_fractions": [list(pair) for pair in self.diag_fractions],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        kwargs = dict(d)
        if "diag_fractions" in kwargs:
            kwargs["diag_fractions"] = tuple(
                (float(v), float(f)) for v, f in kwargs["diag_fractions"]
            )
        return cls(**kwargs)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "ModelConfig":
        return cls.from_dict(json.loads(s))


def nested_sigma(p: int, gamma: float) -> np.ndarray:
    """Fully nested hierarchical covariance: entry (i, j) = (p - max(i, j)) * gamma^2
    with 0-based indices, i.e. the Gram matrix of an anti-triangular loading matrix."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    idx = np.arange(p)
    return (p - np.maximum.outer(idx, idx)).astype(float) * gamma**2


def factor_sigma(
    p: int, sigma: float, sigma_r: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """One-factor covariance ``sigma^2 b b' + sigma_r^2 I`` with loadings
    ``b ~ U(0.5, 1.5)``. Returns the matrix and the drawn loadings."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if sigma <= 0 or sigma_r <= 0:
        raise ValueError("sigma and sigma_r must be positive")
    b = rng.uniform(0.5, 1.5, size=p)
    cov = sigma**2 * np.outer(b, b)
    cov[np.diag_indices(p)] += sigma_r**2
    return symmetrize(cov), b


def diagonal_sigma(
    p: int, diag_fractions: tuple[tuple[float, float], ...] = DEFAULT_DIAG_FRACTIONS
) -> np.ndarray:
    """Diagonal covariance whose eigenvalues follow the given (value, fraction)
    mix. Counts are ``round(fraction * p)`` with any remainder assigned to the
    largest-fraction group (larger eigenvalue breaks ties); the diagonal is
    sorted descending."""
    if p < 1:
        raise ValueError("p must be >= 1")
    fracs = [(float(v), float(f)) for v, f in diag_fractions]
    total = sum(f for _, f in fracs)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {total}")
    counts = [int(round(f * p)) for _, f in fracs]
    if any(c < 0 for c in counts):
        raise ValueError("negative group count")
    remainder = p - sum(counts)
    if remainder != 0:
        k = max(range(len(fracs)), key=lambda i: (fracs[i][1], fracs[i][0]))
        counts[k] += remainder
        if counts[k] < 0:
            raise ValueError("fractions incompatible with p")
    diag = np.concatenate([np.full(c, v) for (v, _), c in zip(fracs, counts)])
    return np.diag(np.sort(diag)[::-1])


def sample_panel(
    sigma: np.ndarray,
    n: int,
    rng: np.random.Generator,
    dist: str = "gaussian",
    dof: int = 3,
) -> np.ndarray:
    """Draw a p x n panel ``Y = sqrt(sigma) @ X`` with i.i.d. unit-variance entries.

    ``dist`` is ``"gaussian"`` or ``"student-t"``; Student-t entries are scaled
    by ``sqrt((dof - 2) / dof)`` so their variance is exactly one, keeping the
    population covariance of Y equal to ``sigma``.
    """
    p = sigma.shape[0]
    if p < 2:
        raise ValueError("panels need p >= 2 variables")
    if n < 2:
        raise ValueError("panels need n >= 2 observations")
    if dist == "gaussian":
        x = rng.standard_normal((p, n))
    elif dist == "student-t":
        if dof < 3:
            raise ValueError("student-t panels require dof >= 3")
        x = rng.standard_t(dof, size=(p, n)) * np.sqrt((dof - 2.0) / dof)
    else:
        raise ValueError(f"unknown distribution {dist!r}")
    return matrix_sqrt(sigma) @ x


def sample_covariance(panel: np.ndarray, centered: bool = False) -> np.ndarray:
    """Sample covariance ``Y Y' / n`` of a p x n panel.

    With ``centered=True`` each variable is demeaned across observations first;
    the divisor stays n in both cases.
    """
    panel = np.asarray(panel, dtype=float)
    if panel.ndim != 2:
        raise ValueError("panel must be a p x n matrix")
    n = panel.shape[1]
    if n < 2:
        raise ValueError("need n >= 2 observations")
    if not np.all(np.isfinite(panel)):
        raise ValueError("panel contains non-finite values")
    y = panel - panel.mean(axis=1, keepdims=True) if centered else panel
    return symmetrize(y @ y.T / n)


def _nested_charpoly(lam: np.ndarray, p: int, gamma: float) -> np.ndarray:
    """Characteristic function of the nested model, evaluated via the
    three-term minor recurrence of its tridiagonal reduction.

    The recurrence is D_k = (gamma^2 - 2 lam) D_{k-1} - lam^2 D_{k-2} with the
    final pivot gamma^2 - lam. Minors are renormalized at every step, which
    keeps the value in range and preserves sign and continuity in lam.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    g2 = gamma**2
    if p == 1:
        return g2 - lam
    a = g2 - 2.0 * lam
    lam2 = lam * lam
    d_prev = np.ones_like(lam)
    d_cur = a.copy()
    for _ in range(p - 2):
        d_next = a * d_cur - lam2 * d_prev
        scale = np.maximum(np.maximum(np.abs(d_next), np.abs(d_cur)), 1e-300)
        d_prev = d_cur / scale
        d_cur = d_next / scale
    return (g2 - lam) * d_cur - lam2 * d_prev


def nested_sigma_eigenvalues(p: int, gamma: float, max_refine: int = 24) -> np.ndarray:
    """All p eigenvalues of the nested model, descending, from the tridiagonal
    characteristic polynomial alone (no dense eigensolver).

    Roots are isolated by sign changes on an adaptively refined log-spaced
    grid over (0, trace], then polished with Brent's method. Raises if the
    grid refinement cap is hit before all p roots are bracketed.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    g2 = gamma**2
    if p == 1:
        return np.array([g2])

    hi = g2 * p * (p + 1) / 2.0  # trace bounds every eigenvalue from above
    lo = hi * 1e-14

    def f(lam: float) -> float:
        return float(_nested_charpoly(lam, p, gamma)[0])

    m = max(8 * p, 64)
    for _ in range(max_refine):
        grid = np.geomspace(lo, hi * (1 + 1e-12), m)
        vals = _nested_charpoly(grid, p, gamma)
        sign = np.sign(vals)
        # treat exact zeros as a sign boundary
        sign[sign == 0] = 1.0
        flips = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
        if len(flips) >= p:
            roots = [brentq(f, grid[i], grid[i + 1], xtol=1e-300, rtol=1e-15) for i in flips[:p]]
            return np.sort(np.array(roots))[::-1]
        m *= 2
    raise RuntimeError(
        f"failed to bracket all {p} eigenvalues after {max_refine} grid refinements"
    )


def draw_sigma(
    config: ModelConfig, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray | None]:
    """Build the population covariance for ``config``. The one-factor model
    consumes randomness (its loadings) and returns them; the other models are
    deterministic and return ``None`` loadings."""
    if config.kind == "nested":
        return nested_sigma(config.p, config.gamma), None
    if config.kind == "one-factor":
        return factor_sigma(config.p, config.sigma, config.sigma_r, rng)
    return diagonal_sigma(config.p, config.diag_fractions), None


def panel_distribution(config: ModelConfig) -> tuple[str, int]:
    """Data distribution paired with each model: Student-t for the one-factor
    model, Gaussian otherwise."""
    if config.kind == "one-factor":
        return "student-t", config.dof
    return "gaussian", config.dof
