"""Diversification and risk metrics, plus walk-forward performance statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import check_square_symmetric

__all__ = [
    "MetricRecord",
    "PerformanceReport",
    "hhi",
    "leverage",
    "rdi",
    "realized_risk",
    "true_risk",
    "performance_report",
    "TRADING_DAYS_PER_YEAR",
]

TRADING_DAYS_PER_YEAR = 252


@dataclass(frozen=True)
class MetricRecord:
    """One metric value in long form, with its evaluation context."""

    dataset: str
    estimator: str
    strategy: str
    metric: str
    value: float
    n: int | None = None
    window: str | None = None
    stderr: float | None = None
    count: int | None = None


@dataclass(frozen=True)
class PerformanceReport:
    """Walk-forward summary statistics. ``sharpe``/``sortino`` are ``None``
    when undefined (zero volatility, or no negative returns)."""

    annual_return: float
    annual_volatility: float
    sharpe: float | None
    max_drawdown: float
    sortino: float | None
    turnover: float


def hhi(w: np.ndarray) -> float:
    """Concentration index ``sum(w_i^2)``: 1/p at the uniform portfolio, 1 at
    a single-asset portfolio."""
    w = np.asarray(w, dtype=float)
    return float(np.sum(w * w))


def leverage(w: np.ndarray) -> float:
    """Gross exposure ``sum(|w_i|)``; equals 1 iff there are no short positions."""
    w = np.asarray(w, dtype=float)
    return float(np.sum(np.abs(w)))


def rdi(w: np.ndarray, sigma_eval: np.ndarray) -> float:
    """Portfolio volatility over the weighted sum of individual volatilities.

    Values below one indicate genuine risk diversification under the
    evaluation covariance.
    """
    sigma_eval = check_square_symmetric(sigma_eval, "sigma_eval")
    diag = np.diag(sigma_eval)
    if np.any(diag <= 0.0):
        raise ValueError("evaluation covariance needs a strictly positive diagonal")
    w = np.asarray(w, dtype=float)
    denom = float(w @ np.sqrt(diag))
    if abs(denom) < 1e-300:
        raise ZeroDivisionError("weighted individual volatility is zero")
    return float(np.sqrt(max(w @ sigma_eval @ w, 0.0)) / denom)


def realized_risk(w: np.ndarray, s_out: np.ndarray) -> float:
    """Out-of-sample portfolio variance ``w' S_out w`` of in-sample weights."""
    s_out = check_square_symmetric(s_out, "s_out")
    w = np.asarray(w, dtype=float)
    return float(w @ s_out @ w)


def true_risk(sigma: np.ndarray) -> float:
    """Minimum attainable portfolio variance ``1 / (1' sigma^{-1} 1)``."""
    sigma = check_square_symmetric(sigma, "sigma")
    try:
        u = np.linalg.solve(sigma, np.ones(sigma.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"singular covariance: {exc}") from exc
    return float(1.0 / u.sum())


def max_drawdown(daily_returns: np.ndarray) -> float:
    """Largest peak-to-trough decline of the compounded value curve; in [-1, 0]."""
    values = np.cumprod(1.0 + np.asarray(daily_returns, dtype=float))
    peaks = np.maximum.accumulate(values)
    return float(np.min(values / peaks - 1.0))


def performance_report(
    daily_returns: Sequence[float] | np.ndarray,
    weight_history: Sequence[tuple[object, np.ndarray | None, np.ndarray]] = (),
) -> PerformanceReport:
    """Summarize a daily portfolio return stream and its rebalancing events.

    ``weight_history`` holds one ``(date, drifted_pre_weights, new_weights)``
    triple per allocation event; the initial allocation carries ``None`` pre
    weights and does not count towards turnover. Annualization multiplies the
    mean daily return by 252 and the daily standard deviation by sqrt(252).
    """
    r = np.asarray(daily_returns, dtype=float)
    if r.size == 0:
        raise ValueError("daily return series is empty")
    ann_ret = float(r.mean()) * TRADING_DAYS_PER_YEAR
    ann_vol = float(r.std(ddof=1)) * math.sqrt(TRADING_DAYS_PER_YEAR) if r.size > 1 else 0.0
    sharpe = ann_ret / ann_vol if ann_vol > 0.0 else None

    negative = r[r < 0.0]
    if negative.size > 1:
        downside = float(negative.std(ddof=1)) * math.sqrt(TRADING_DAYS_PER_YEAR)
        sortino = ann_ret / downside if downside > 0.0 else None
    else:
        sortino = None

    changes = [
        float(np.sum(np.abs(np.asarray(post) - np.asarray(pre))))
        for _, pre, post in weight_history
        if pre is not None
    ]
    turnover = float(np.mean(changes)) if changes else 0.0

    return PerformanceReport(
        annual_return=ann_ret,
        annual_volatility=ann_vol,
        sharpe=sharpe,
        max_drawdown=max_drawdown(r),
        sortino=sortino,
        turnover=turnover,
    )
