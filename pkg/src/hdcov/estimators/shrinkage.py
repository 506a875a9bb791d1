"""Linear and nonlinear (eigenvalue-cleaning) shrinkage estimators.

The nonlinear family keeps sample eigenvectors and rescales eigenvalues using
the spectrum's resolvent evaluated just below the real axis. Three recipes are
provided: ``lp`` (quadratic-loss optimal), ``stein`` (Stein-loss optimal) and
``symstein`` (their geometric mean).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..linalg import check_square_symmetric, symmetrize

__all__ = [
    "Spectrum",
    "stieltjes",
    "estimate_naive",
    "estimate_linear",
    "estimate_lp",
    "estimate_stein",
    "estimate_symstein",
    "cleaned_eigenvalues",
]

# Relative floor for cleaned eigenvalues and for inverting near-null sample
# eigenvalues.
EIG_FLOOR_REL = 1e-12
NULL_EIG_REL = 1e-15


@dataclass(frozen=True)
class Spectrum:
    """Eigendecomposition of a symmetric matrix plus the aspect ratio q = p/n.

    Eigenvalues are descending; ``eigenvectors[:, k]`` pairs with
    ``eigenvalues[k]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    q: float

    @classmethod
    def from_matrix(cls, a: np.ndarray, q: float) -> "Spectrum":
        a = check_square_symmetric(a)
        vals, vecs = np.linalg.eigh(a)
        return cls(eigenvalues=vals[::-1].copy(), eigenvectors=vecs[:, ::-1].copy(), q=q)

    def reassemble(self, new_eigenvalues: np.ndarray) -> np.ndarray:
        v = self.eigenvectors
        return symmetrize((v * new_eigenvalues) @ v.T)


def stieltjes(spec: Spectrum, z: complex) -> complex:
    """Resolvent trace ``(1/p) sum_k 1/(lambda_k - z)`` of the spectrum."""
    if z.imag == 0.0:
        raise ValueError("z must have a nonzero imaginary part")
    return complex(np.mean(1.0 / (spec.eigenvalues - z)))


def estimate_naive(s: np.ndarray) -> np.ndarray:
    """The sample covariance itself."""
    return np.array(s, dtype=float, copy=True)


def estimate_linear(panel: np.ndarray, centered: bool = False) -> np.ndarray:
    """Convex shrinkage of the sample covariance towards ``zeta I``.

    ``zeta = tr(S)/p``. The weight is ``min(b2, d2)/d2`` where ``d2`` is the
    squared Frobenius distance of S from ``zeta I`` and ``b2`` estimates the
    sampling noise in S from per-observation fluctuations, so the weight
    vanishes as n grows with p fixed.
    """
    x = np.asarray(panel, dtype=float)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError("panel must be p x n with n >= 2")
    if centered:
        x = x - x.mean(axis=1, keepdims=True)
    p, n = x.shape
    s = symmetrize(x @ x.T / n)
    zeta = np.trace(s) / p
    target = zeta * np.eye(p)
    d2 = float(np.sum((s - target) ** 2))
    if d2 == 0.0:
        return s
    # sum_i ||x_i x_i' - S||_F^2 = sum_i ||x_i||^4 - n ||S||_F^2
    col_sq = np.sum(x * x, axis=0)
    b2 = float(np.sum(col_sq**2) / n**2 - np.sum(s * s) / n)
    alpha = min(max(min(b2, d2) / d2, 0.0), 1.0)
    return symmetrize(alpha * target + (1.0 - alpha) * s)


def _isotonic_non_increasing(values: np.ndarray) -> np.ndarray:
    """Pool adjacent violators: closest non-increasing sequence (L2, equal
    weights). Kernel-smoothed shrinkers can produce small local inversions at
    the spectrum edges; pooling restores the ordering the sample spectrum had
    without moving mass elsewhere."""
    levels = []
    counts = []
    for v in values:
        levels.append(float(v))
        counts.append(1)
        while len(levels) > 1 and levels[-2] < levels[-1]:
            total = levels[-1] * counts[-1] + levels[-2] * counts[-2]
            counts[-2] += counts[-1]
            levels[-2] = total / counts[-2]
            levels.pop()
            counts.pop()
    return np.repeat(levels, counts)


def _smoothed_shrinkers(
    ell: np.ndarray, h: float
) -> tuple[np.ndarray, np.ndarray]:
    """Kernel-smoothed Hilbert transform of the inverse-eigenvalue cloud and
    its conjugate (smoothed density), with per-point bandwidth ``ell_j * h``.

    ``theta_k`` converges to ``lam_k * Re g(lam_k)`` as the bandwidth shrinks,
    where g is the resolvent trace ``mean_j 1/(z - lam_j)``; ``htheta_k``
    plays the role of its imaginary part. Smoothing on the inverse axis keeps
    the bandwidth proportional, which behaves far better on power-law spectra
    than a global width.
    """
    src = ell[:, None]
    diff = src - ell[None, :]
    den = diff * diff + (src * h) ** 2
    theta = (src * diff / den).mean(axis=0)
    htheta = (src * src * h / den).mean(axis=0)
    return theta, htheta


def cleaned_eigenvalues(
    vals: np.ndarray, q: float, kind: str, eta_scale: float = 1.0, isotonic: bool = True
) -> np.ndarray:
    """Shrunk eigenvalues for one of the nonlinear recipes.

    ``vals`` must be descending sample eigenvalues. The smoothing bandwidth is
    ``eta_scale * min(q^2, 1/q^2)^0.35 / p^0.35``. Negative Stein
    denominators are clamped so no cleaned eigenvalue exceeds the top sample
    eigenvalue; everything is floored at ``1e-12`` of it.

    ``isotonic`` restores non-increasing order afterwards; it is meant for
    genuine sample spectra, whose inversions are edge wiggles. Callers feeding
    already-filtered spectra (where the noise model behind the recipes does
    not hold and inversions can be structural) switch it off, since pooling
    those would flatten whole stretches of the spectrum.
    """
    vals = np.asarray(vals, dtype=float)
    p = vals.size
    lam_max = float(vals[0])
    if lam_max <= 0.0:
        raise ValueError("cleaning needs a spectrum with a positive top eigenvalue")
    if kind == "symstein":
        return np.sqrt(
            cleaned_eigenvalues(vals, q, "lp", eta_scale, isotonic)
            * cleaned_eigenvalues(vals, q, "stein", eta_scale, isotonic)
        )
    if kind not in ("lp", "stein"):
        raise ValueError(f"unknown cleaning recipe {kind!r}")

    n_obs = max(int(round(p / q)), 1)
    rank = min(p, n_obs)
    nz = np.maximum(vals[:rank], NULL_EIG_REL * lam_max)
    ell = 1.0 / nz  # ascending
    h = eta_scale * min(q**2, 1.0 / q**2) ** 0.35 / p**0.35
    theta, htheta = _smoothed_shrinkers(ell, h)

    if kind == "lp":
        inv_xi = ell * ((1.0 - q + q * theta) ** 2 + (q * htheta) ** 2)
    else:
        inv_xi = ell * (1.0 - q + 2.0 * q * theta)
    if rank < p:
        # null directions of a singular sample matrix
        inv_xi = np.concatenate([inv_xi, np.full(p - rank, (q - 1.0) * ell.mean())])
    if kind == "stein":
        # a negative denominator means Stein positivity was lost for that
        # direction; capping the inverse at 1/lam_max caps xi at lam_max
        inv_xi = np.maximum(inv_xi, ell.min())

    xi = np.maximum(1.0 / inv_xi, EIG_FLOOR_REL * lam_max)
    return _isotonic_non_increasing(xi) if isotonic else xi


def _estimate_rie(
    a: np.ndarray, q: float, kind: str, eta_scale: float, isotonic: bool
) -> np.ndarray:
    if q <= 0.0:
        raise ValueError("aspect ratio q = p/n must be positive")
    spec = Spectrum.from_matrix(a, q)
    xi = cleaned_eigenvalues(spec.eigenvalues, q, kind, eta_scale, isotonic)
    return spec.reassemble(xi)


def estimate_lp(
    a: np.ndarray, q: float, eta_scale: float = 1.0, isotonic: bool = True
) -> np.ndarray:
    """Quadratic-loss-optimal eigenvalue cleaning of a PSD matrix."""
    return _estimate_rie(a, q, "lp", eta_scale, isotonic)


def estimate_stein(
    a: np.ndarray, q: float, eta_scale: float = 1.0, isotonic: bool = True
) -> np.ndarray:
    """Stein-loss-optimal eigenvalue cleaning of a PSD matrix."""
    return _estimate_rie(a, q, "stein", eta_scale, isotonic)


def estimate_symstein(
    a: np.ndarray, q: float, eta_scale: float = 1.0, isotonic: bool = True
) -> np.ndarray:
    """Geometric mean of the lp and stein cleaned eigenvalues, same eigenvectors."""
    return _estimate_rie(a, q, "symstein", eta_scale, isotonic)
