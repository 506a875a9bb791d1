"""Shared symmetric-matrix utilities used across estimators and allocation."""

from __future__ import annotations

import warnings

import numpy as np

__all__ = [
    "PsdRepairWarning",
    "symmetrize",
    "check_square_symmetric",
    "psd_repair",
    "matrix_sqrt",
    "pinv_sqrt",
]

# PSD tolerance relative to the largest eigenvalue: smaller negative
# eigenvalues are treated as round-off, larger ones as genuine bugs.
PSD_REL_TOL = 1e-10

# Repairs larger than this (relative to the top eigenvalue) deserve a warning.
REPAIR_WARN_REL = 1e-6


class PsdRepairWarning(UserWarning):
    """A matrix needed more than round-off-level PSD repair."""


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Return (a + a.T)/2, which is exactly symmetric entrywise."""
    return (a + a.T) / 2.0


def check_square_symmetric(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if not np.array_equal(a, a.T):
        if not np.allclose(a, a.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(a).max())):
            raise ValueError(f"{name} is not symmetric")
        a = symmetrize(a)
    return a


def psd_repair(a: np.ndarray, warn: bool = True) -> np.ndarray:
    """Clamp negative eigenvalues of a symmetric matrix at zero.

    Returns an exactly symmetric matrix. Emits :class:`PsdRepairWarning` when
    the clamped mass exceeds ``1e-6`` times the largest eigenvalue, which
    signals a problem upstream rather than round-off.
    """
    a = check_square_symmetric(a)
    vals, vecs = np.linalg.eigh(a)
    lam_max = float(vals[-1]) if vals.size else 0.0
    if vals[0] >= 0.0:
        return a
    repair = -float(vals[vals < 0.0].min())
    if warn and lam_max > 0.0 and repair > REPAIR_WARN_REL * lam_max:
        warnings.warn(
            f"clamped eigenvalue {-repair:.3e} (top eigenvalue {lam_max:.3e})",
            PsdRepairWarning,
            stacklevel=2,
        )
    fixed = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
    return symmetrize(fixed)


def matrix_sqrt(sigma: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues in ``[-1e-10 * lam_max, 0)`` are clamped to zero; anything
    more negative raises, since it means the input was not PSD to begin with.
    """
    sigma = check_square_symmetric(sigma, "sigma")
    vals, vecs = np.linalg.eigh(sigma)
    lam_max = float(vals[-1]) if vals.size else 0.0
    floor = -PSD_REL_TOL * max(lam_max, 0.0)
    if vals[0] < floor:
        raise ValueError(
            f"matrix is not PSD: eigenvalue {vals[0]:.3e} below tolerance {floor:.3e}"
        )
    root = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T
    return symmetrize(root)


def pinv_sqrt(sigma: np.ndarray, rel_cutoff: float = 1e-12) -> np.ndarray:
    """Pseudo-inverse square root ``sigma^{-1/2}`` with a relative rank cutoff.

    Eigenvalues at or below ``rel_cutoff * lam_max`` contribute zero.
    """
    sigma = check_square_symmetric(sigma, "sigma")
    vals, vecs = np.linalg.eigh(sigma)
    lam_max = float(vals[-1]) if vals.size else 0.0
    cutoff = rel_cutoff * max(lam_max, 0.0)
    inv_root = np.where(vals > cutoff, 1.0 / np.sqrt(np.clip(vals, 1e-300, None)), 0.0)
    out = (vecs * inv_root) @ vecs.T
    return symmetrize(out)
