"""Empirical pipeline: price cleaning, returns, moving-window metric tracks,
and a yearly-rebalanced walk-forward backtest.

Price panels are pandas DataFrames indexed by trading date with one column
per ticker. Estimators consume p x n panels (columns are days), so frames are
transposed at the boundary; empirical sample covariances are always demeaned.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd
from threadpoolctl import threadpool_limits

from .allocation import allocate, uniform_weights
from .errors import AllocationError, EstimationError
from .estimators import EstimatorConfig, estimate
from .metrics import MetricRecord, PerformanceReport, hhi, leverage, performance_report, rdi, realized_risk
from .models import sample_covariance

__all__ = [
    "WindowPlan",
    "WalkForwardPlan",
    "clean_prices",
    "compute_returns",
    "moving_window_track",
    "walk_forward",
    "window_count",
]


@dataclass(frozen=True)
class WindowPlan:
    """Moving-window layout: in-sample length and step between window starts."""

    window_length: int
    step: int

    def __post_init__(self) -> None:
        if self.window_length < 2 or self.step < 1:
            raise ValueError("window_length must be >= 2 and step >= 1")


@dataclass(frozen=True)
class WalkForwardPlan:
    """Walk-forward layout: trailing estimation span, holding span, and
    rebalancing cadence, all in trading days."""

    t_in: int = 756
    t_out: int = 252
    rebalance_every: int = 252

    def __post_init__(self) -> None:
        if min(self.t_in, self.t_out, self.rebalance_every) < 1:
            raise ValueError("plan spans must be positive")


def window_count(n_returns: int, window_length: int, step: int) -> int:
    """Number of moving windows with a full same-length out-of-sample window.

    Windows start at multiples of ``step``; the layout keeps the out-of-sample
    reach strictly inside the series, which reproduces the count
    ``(n_returns - 2 * window_length) // step``.
    """
    return max((n_returns - 2 * window_length) // step, 0)


def clean_prices(
    prices: pd.DataFrame, max_missing_frac: float = 0.05
) -> tuple[pd.DataFrame, list[str]]:
    """Filter and impute a raw price panel.

    Drops tickers whose missing fraction is at or above ``max_missing_frac``
    or whose first observation is missing (nothing to forward-fill from),
    then forward-fills interior gaps. Returns the clean panel and the dropped
    tickers.
    """
    if not prices.index.is_monotonic_increasing:
        raise ValueError("price dates must be strictly increasing")
    dropped = []
    keep = []
    for col in prices.columns:
        series = prices[col]
        frac = float(series.isna().mean())
        if frac >= max_missing_frac or (len(series) and pd.isna(series.iloc[0])):
            dropped.append(str(col))
        else:
            keep.append(col)
    clean = prices[keep].ffill()
    if clean.shape[1] == 0:
        raise ValueError("no tickers survive cleaning")
    if (clean <= 0).any().any():
        raise ValueError("non-positive prices after cleaning")
    return clean, dropped


def compute_returns(prices: pd.DataFrame) -> pd.DataFrame:
    """Simple returns ``(s_t - s_{t-1}) / s_{t-1}``; one fewer row than prices."""
    if prices.isna().any().any():
        raise ValueError("prices contain missing values; clean them first")
    if (prices <= 0).any().any():
        raise ValueError("prices must be strictly positive")
    values = prices.to_numpy(dtype=float)
    rets = values[1:] / values[:-1] - 1.0
    return pd.DataFrame(rets, index=prices.index[1:], columns=prices.columns)


def _estimate_weights(panel: np.ndarray, est: EstimatorConfig, strategies) -> dict:
    """Weights per strategy for one estimator on a demeaned-covariance panel."""
    out = {}
    xi = estimate(panel, est, centered=True)
    for strategy in strategies:
        out[strategy] = allocate(strategy, xi)
    return out


def _run_window(args) -> tuple[int, list, list]:
    values, index_labels, plan, estimators, strategies, k = args
    start = k * plan.step
    mid = start + plan.window_length
    end = mid + plan.window_length
    label = index_labels[end - 1]
    panel_in = values[:, start:mid]
    records: list[MetricRecord] = []
    failures: list[tuple] = []
    with threadpool_limits(limits=1, user_api="blas"):
        s_out = sample_covariance(values[:, mid:end], centered=True)
        for est in estimators:
            try:
                per_strategy = _estimate_weights(panel_in, est, strategies)
            except (AllocationError, EstimationError, np.linalg.LinAlgError) as exc:
                failures.append((label, est.kind, str(exc)))
                continue
            for strategy, w in per_strategy.items():
                records.extend(_window_records(label, est.kind, strategy, w, s_out))
        w_u = uniform_weights(values.shape[0])
        for strategy in strategies:
            records.extend(_window_records(label, UNIFORM, strategy, w_u, s_out))
    return k, records, failures


def moving_window_track(
    returns: pd.DataFrame,
    plan: WindowPlan,
    estimators: tuple[EstimatorConfig, ...],
    strategies: tuple[str, ...],
    workers: int = 1,
) -> tuple[list[MetricRecord], list[tuple]]:
    """Metric tracks over overlapping in-sample windows.

    Concentration and leverage are scored in-sample; the risk metrics are
    scored against the demeaned sample covariance of the next same-length
    window. Records carry the out-of-sample window's end date. Windows are
    independent work units; results are assembled in window order regardless
    of ``workers``. Estimator failures are collected per window rather than
    aborting the run.
    """
    n_obs = len(returns)
    count = window_count(n_obs, plan.window_length, plan.step)
    if count == 0:
        raise ValueError("series too short for even one window pair")
    values = returns.to_numpy(dtype=float).T  # p x T
    labels = [str(ts.date()) for ts in returns.index]
    jobs = [(values, labels, plan, estimators, strategies, k) for k in range(count)]

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_window, jobs, chunksize=1))
    else:
        outcomes = [_run_window(job) for job in jobs]
    outcomes.sort(key=lambda t: t[0])

    records: list[MetricRecord] = []
    failures: list[tuple] = []
    for _, recs, fails in outcomes:
        records.extend(recs)
        failures.extend(fails)
    return records, failures


UNIFORM = "uniform"


def _window_records(label, est_kind, strategy, w, s_out):
    base = dict(dataset="empirical", estimator=est_kind, strategy=strategy, window=label)
    return [
        MetricRecord(metric="hhi", value=hhi(w), **base),
        MetricRecord(metric="leverage", value=leverage(w), **base),
        MetricRecord(metric="rdi", value=rdi(w, s_out), **base),
        MetricRecord(metric="r2_out", value=realized_risk(w, s_out), **base),
    ]


def _drift(weights: np.ndarray, rets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Evolve holdings through a return block without trading.

    Returns the daily portfolio returns over the block and the drifted
    weights at the end. Holdings compound with their own asset returns.
    """
    holdings = weights.copy()
    daily = np.empty(rets.shape[0])
    value = 1.0
    for t in range(rets.shape[0]):
        holdings = holdings * (1.0 + rets[t])
        new_value = holdings.sum()
        if new_value <= 0.0:
            raise AllocationError("portfolio value hit zero during drift")
        daily[t] = new_value / value - 1.0
        value = new_value
    return daily, holdings / value


def walk_forward(
    returns: pd.DataFrame,
    plan: WalkForwardPlan,
    estimators: tuple[EstimatorConfig, ...],
    strategies: tuple[str, ...],
) -> tuple[pd.DataFrame, list[tuple[str, str, PerformanceReport]]]:
    """Yearly-rebalanced out-of-sample backtest.

    At each rebalance date, weights are fit on the trailing ``t_in`` days and
    held (drifting with returns, no intra-period trading) until the next
    rebalance. The uniform baseline is bought once at the first rebalance and
    never traded again, so its turnover is exactly zero. Returns the
    cumulative value curves (starting at 1.0) and one performance report per
    estimator/strategy combination.
    """
    n_obs = len(returns)
    rebalance_times = []
    t = plan.t_in
    while t + plan.t_out <= n_obs:
        rebalance_times.append(t)
        t += plan.rebalance_every
    if not rebalance_times:
        raise ValueError("series too short for the walk-forward plan")

    values = returns.to_numpy(dtype=float).T  # p x T
    p = values.shape[0]
    # curve index includes the allocation day itself, where the value is 1.0
    first, last = rebalance_times[0], rebalance_times[-1] + plan.t_out
    out_index = returns.index[first - 1 : last]

    combos = [(est, strategy) for est in estimators for strategy in strategies]
    curves: dict[str, np.ndarray] = {}
    reports: list[tuple[str, str, PerformanceReport]] = []

    with threadpool_limits(limits=1, user_api="blas"):
        for est, strategy in combos:
            daily, history = _walk_one(values, plan, rebalance_times, n_obs, est, strategy)
            curves[f"{est.kind}|{strategy}"] = np.concatenate([[1.0], np.cumprod(1.0 + daily)])
            reports.append((est.kind, strategy, performance_report(daily, history)))

        daily, history = _walk_uniform(values, plan, rebalance_times, n_obs, p)
        curves[f"{UNIFORM}|{UNIFORM}"] = np.concatenate([[1.0], np.cumprod(1.0 + daily)])
        reports.append((UNIFORM, UNIFORM, performance_report(daily, history)))

    frame = pd.DataFrame(curves, index=out_index)
    return frame, reports


def _hold_spans(plan: WalkForwardPlan, rebalance_times: list[int], n_obs: int):
    spans = []
    for i, t in enumerate(rebalance_times):
        if i + 1 < len(rebalance_times):
            spans.append((t, rebalance_times[i + 1]))
        else:
            spans.append((t, min(t + plan.t_out, n_obs)))
    return spans


def _walk_one(values, plan, rebalance_times, n_obs, est, strategy):
    daily_parts = []
    history = []
    drifted = None
    for start, end in _hold_spans(plan, rebalance_times, n_obs):
        panel = values[:, start - plan.t_in : start]
        xi = estimate(panel, est, centered=True)
        target = allocate(strategy, xi)
        history.append((start, drifted, target))
        block, drifted = _drift(target, values[:, start:end].T)
        daily_parts.append(block)
    return np.concatenate(daily_parts), history


def _walk_uniform(values, plan, rebalance_times, n_obs, p):
    daily_parts = []
    weights = uniform_weights(p)
    history = [(rebalance_times[0], None, weights)]
    for start, end in _hold_spans(plan, rebalance_times, n_obs):
        block, weights = _drift(weights, values[:, start:end].T)
        daily_parts.append(block)
    return np.concatenate(daily_parts), history
