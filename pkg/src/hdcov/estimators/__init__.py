"""Covariance estimators and the name-keyed dispatch used by pipelines.

Estimator vocabulary: ``naive``, ``linear``, ``alca``, ``lp``, ``stein``,
``symstein``, ``ycm``, and the two-step variants ``2s-lp``, ``2s-stein``,
``2s-symstein``, ``2s-ycm``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..models import sample_covariance
from .hierarchy import (
    Dendrogram,
    agglomerate,
    alca_dendrogram,
    cophenetic_matrix,
    correlation_from_covariance,
    estimate_alca,
    leaf_order,
)
from .shrinkage import (
    Spectrum,
    cleaned_eigenvalues,
    estimate_linear,
    estimate_lp,
    estimate_naive,
    estimate_stein,
    estimate_symstein,
    stieltjes,
)
from .tyler import FixedPointWarning, estimate_ycm, rho_grid, tyler_fixed_point
from .twostep import estimate_two_step

__all__ = [
    "ESTIMATOR_KINDS",
    "EstimatorConfig",
    "estimate",
    "Dendrogram",
    "agglomerate",
    "alca_dendrogram",
    "cophenetic_matrix",
    "leaf_order",
    "correlation_from_covariance",
    "estimate_alca",
    "Spectrum",
    "stieltjes",
    "cleaned_eigenvalues",
    "estimate_naive",
    "estimate_linear",
    "estimate_lp",
    "estimate_stein",
    "estimate_symstein",
    "estimate_ycm",
    "estimate_two_step",
    "tyler_fixed_point",
    "rho_grid",
    "FixedPointWarning",
]

ESTIMATOR_KINDS = (
    "naive",
    "linear",
    "alca",
    "lp",
    "stein",
    "symstein",
    "ycm",
    "2s-lp",
    "2s-stein",
    "2s-symstein",
    "2s-ycm",
)


@dataclass(frozen=True)
class EstimatorConfig:
    """An estimator name plus the hyperparameters shared across the family."""

    kind: str
    rho_grid_size: int = 20
    fixed_point_tol: float = 1e-8
    fixed_point_max_iter: int = 500
    stieltjes_eta_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ESTIMATOR_KINDS:
            raise ValueError(
                f"unknown estimator {self.kind!r}; expected one of {ESTIMATOR_KINDS}"
            )
        if self.rho_grid_size < 2:
            raise ValueError("rho_grid_size must be at least 2")
        if self.fixed_point_tol <= 0 or self.stieltjes_eta_scale <= 0:
            raise ValueError("tolerances must be positive")
        if self.fixed_point_max_iter < 1:
            raise ValueError("fixed_point_max_iter must be positive")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "rho_grid_size": self.rho_grid_size,
            "fixed_point_tol": self.fixed_point_tol,
            "fixed_point_max_iter": self.fixed_point_max_iter,
            "stieltjes_eta_scale": self.stieltjes_eta_scale,
        }

    @classmethod
    def from_dict(cls, d: dict | str) -> "EstimatorConfig":
        if isinstance(d, str):
            return cls(kind=d)
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "EstimatorConfig":
        return cls.from_dict(json.loads(s))


def estimate(
    panel: np.ndarray, config: EstimatorConfig | str, centered: bool = False
) -> np.ndarray:
    """Run the named estimator on a p x n observation panel.

    ``centered`` controls whether the sample covariance demeans each variable
    (empirical pipelines do; simulation pipelines do not). The fixed-point
    estimator always demeans internally regardless.
    """
    cfg = EstimatorConfig.from_dict(config) if isinstance(config, str) else config
    panel = np.asarray(panel, dtype=float)
    p, n = panel.shape

    if cfg.kind == "naive":
        return estimate_naive(sample_covariance(panel, centered=centered))
    if cfg.kind == "linear":
        return estimate_linear(panel, centered=centered)
    if cfg.kind == "alca":
        return estimate_alca(sample_covariance(panel, centered=centered))
    if cfg.kind in ("lp", "stein", "symstein"):
        s = sample_covariance(panel, centered=centered)
        fn = {"lp": estimate_lp, "stein": estimate_stein, "symstein": estimate_symstein}
        return fn[cfg.kind](s, q=p / n, eta_scale=cfg.stieltjes_eta_scale)
    if cfg.kind == "ycm":
        cov, _ = estimate_ycm(
            panel,
            rho_grid_size=cfg.rho_grid_size,
            tol=cfg.fixed_point_tol,
            max_iter=cfg.fixed_point_max_iter,
        )
        return cov
    if cfg.kind.startswith("2s-"):
        return estimate_two_step(
            panel,
            inner=cfg.kind[3:],
            centered=centered,
            rho_grid_size=cfg.rho_grid_size,
            fixed_point_tol=cfg.fixed_point_tol,
            fixed_point_max_iter=cfg.fixed_point_max_iter,
            eta_scale=cfg.stieltjes_eta_scale,
        )
    raise ValueError(f"unknown estimator {cfg.kind!r}")
