"""Two-step estimators: hierarchical filtering followed by a second cleaning step.

The first step always produces the hierarchically filtered matrix from the
sample covariance. Eigenvalue-cleaning second steps apply directly to that
matrix with the panel's aspect ratio. The fixed-point second step instead runs
on a recolored panel ``Z = A^{1/2} S^{-1/2} Y`` whose sample covariance equals
the filtered matrix A exactly, so the data-driven estimator sees observations
consistent with the first step.
"""

from __future__ import annotations

import numpy as np

from ..linalg import matrix_sqrt, pinv_sqrt
from ..models import sample_covariance
from .hierarchy import estimate_alca
from .shrinkage import estimate_lp, estimate_stein, estimate_symstein
from .tyler import estimate_ycm

__all__ = ["estimate_two_step"]

_RIE_STEPS = {"lp": estimate_lp, "stein": estimate_stein, "symstein": estimate_symstein}

# The composition selects its blend weight with fewer, larger held-out blocks
# than the plain estimator: the recoloring map is refit per fold, so small
# test blocks leave too little independent data to steady the selection.
TWO_STEP_CV_FOLDS = 3


def estimate_two_step(
    panel: np.ndarray,
    inner: str,
    centered: bool = False,
    rho_grid_size: int = 20,
    fixed_point_tol: float = 1e-8,
    fixed_point_max_iter: int = 500,
    eta_scale: float = 1.0,
) -> np.ndarray:
    """Hierarchical filtering composed with ``inner`` in {lp, stein, symstein, ycm}."""
    panel = np.asarray(panel, dtype=float)
    p, n = panel.shape

    if inner in _RIE_STEPS:
        filtered = estimate_alca(sample_covariance(panel, centered=centered))
        # no isotonic repair here: the filtered spectrum is largely denoised,
        # so the recipes' inversions are structural and pooling them flattens
        # whole stretches of the spectrum
        return _RIE_STEPS[inner](filtered, q=p / n, eta_scale=eta_scale, isotonic=False)
    if inner == "ycm":
        cov, _ = estimate_ycm(
            panel,
            rho_grid_size=rho_grid_size,
            tol=fixed_point_tol,
            max_iter=fixed_point_max_iter,
            fit_transform=lambda block: _recolor(block, centered),
            cv_folds=TWO_STEP_CV_FOLDS,
        )
        return cov
    raise ValueError(f"unknown two-step inner estimator {inner!r}")


def _recolor(panel: np.ndarray, centered: bool) -> tuple[np.ndarray, np.ndarray]:
    """Map a panel into its hierarchically filtered geometry.

    The returned panel's sample covariance is exactly the panel's own filtered
    matrix; the linear map that got it there is returned alongside so held-out
    data can be scored in the same geometry.
    """
    s = sample_covariance(panel, centered=centered)
    filtered = estimate_alca(s)
    recolor_map = matrix_sqrt(filtered) @ pinv_sqrt(s)
    y = panel - panel.mean(axis=1, keepdims=True) if centered else panel
    return recolor_map @ y, recolor_map
