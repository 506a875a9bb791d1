"""Monte Carlo harness: metric curves versus sample size and fixed-size tables.

Each realization draws a population matrix (the one-factor model redraws its
loadings; the other models are deterministic), samples a panel at every
requested n, runs every configured estimator and strategy, and scores
concentration and leverage in-sample plus risk metrics against the population
matrix. Realizations are independent work units seeded as ``base_seed XOR r``,
so results are reproducible for any worker count.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd
from threadpoolctl import threadpool_limits

from .allocation import STRATEGIES, allocate, uniform_weights
from .errors import AllocationError, EstimationError
from .estimators import EstimatorConfig, estimate
from .metrics import MetricRecord, hhi, leverage, rdi, realized_risk
from .models import ModelConfig, draw_sigma, panel_distribution, sample_panel

__all__ = [
    "SweepConfig",
    "SweepResult",
    "run_sweep",
    "run_table",
    "config_hash",
    "long_frame",
    "plot_frame",
    "table_frame",
]

SIM_METRICS = ("hhi", "leverage", "rdi", "r2_out")

POPULATION_LABEL = "population"
UNIFORM_LABEL = "uniform"


@dataclass(frozen=True)
class SweepConfig:
    """Full description of a simulation run."""

    model: ModelConfig
    n_values: tuple[int, ...]
    realizations: int
    estimators: tuple[EstimatorConfig, ...]
    strategies: tuple[str, ...]
    base_seed: int = 0
    workers: int = 1
    include_population: bool = False

    def __post_init__(self) -> None:
        if self.realizations < 1:
            raise ValueError("need at least one realization")
        if any(n < 2 for n in self.n_values) or not self.n_values:
            raise ValueError("every n must be >= 2")
        unknown = [s for s in self.strategies if s not in STRATEGIES]
        if unknown:
            raise ValueError(f"unknown strategies {unknown}; valid names: {STRATEGIES}")

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "n_values": list(self.n_values),
            "realizations": self.realizations,
            "estimators": [e.to_dict() for e in self.estimators],
            "strategies": list(self.strategies),
            "seed": self.base_seed,
            "include_population": self.include_population,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        n_values = d.get("n_values", d.get("n"))
        if isinstance(n_values, dict):
            n_values = list(
                range(n_values["start"], n_values["stop"] + 1, n_values.get("step", 1))
            )
        elif isinstance(n_values, int):
            n_values = [n_values]
        return cls(
            model=ModelConfig.from_dict(d["model"]),
            n_values=tuple(int(n) for n in n_values),
            realizations=int(d.get("realizations", 100)),
            estimators=tuple(EstimatorConfig.from_dict(e) for e in d["estimators"]),
            strategies=tuple(d.get("strategies", ["mvp"])),
            base_seed=int(d.get("seed", 0)),
            workers=int(d.get("workers", 1)),
            include_population=bool(d.get("include_population", False)),
        )


@dataclass(frozen=True)
class SweepResult:
    """Aggregated records plus per-cell failure counts."""

    records: tuple[MetricRecord, ...]
    failures: dict

    def values(self, **filters) -> list[MetricRecord]:
        out = []
        for rec in self.records:
            if all(getattr(rec, k) == v for k, v in filters.items()):
                out.append(rec)
        return out


def config_hash(payload: dict) -> str:
    """Short stable digest of a JSON-serializable configuration."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _score(rows, dataset, est_label, strategy, n, w, sigma):
    rows.append((est_label, strategy, n, "hhi", hhi(w)))
    rows.append((est_label, strategy, n, "leverage", leverage(w)))
    rows.append((est_label, strategy, n, "rdi", rdi(w, sigma)))
    rows.append((est_label, strategy, n, "r2_out", realized_risk(w, sigma)))


def _run_realization(cfg: SweepConfig, r: int):
    """One seeded realization; returns (r, value rows, failure rows)."""
    with threadpool_limits(limits=1, user_api="blas"):
        return _run_realization_inner(cfg, r)


def _run_realization_inner(cfg: SweepConfig, r: int):
    rng = np.random.default_rng(cfg.base_seed ^ r)
    sigma, _ = draw_sigma(cfg.model, rng)
    dist, dof = panel_distribution(cfg.model)
    dataset = cfg.model.kind
    rows: list[tuple] = []
    failures: list[tuple] = []

    if cfg.include_population:
        for strategy in cfg.strategies:
            try:
                w = allocate(strategy, sigma)
            except (AllocationError, EstimationError) as exc:
                failures.append((POPULATION_LABEL, strategy, cfg.n_values[0], str(exc)))
                continue
            _score(rows, dataset, POPULATION_LABEL, strategy, cfg.n_values[0], w, sigma)

    for n in cfg.n_values:
        panel = sample_panel(sigma, n, rng, dist, dof)
        for est in cfg.estimators:
            try:
                xi = estimate(panel, est, centered=False)
            except (AllocationError, EstimationError, np.linalg.LinAlgError) as exc:
                for strategy in cfg.strategies:
                    failures.append((est.kind, strategy, n, str(exc)))
                continue
            for strategy in cfg.strategies:
                try:
                    w = allocate(strategy, xi)
                except (AllocationError, EstimationError) as exc:
                    failures.append((est.kind, strategy, n, str(exc)))
                    continue
                _score(rows, dataset, est.kind, strategy, n, w, sigma)
        w_u = uniform_weights(sigma.shape[0])
        for strategy in cfg.strategies:
            _score(rows, dataset, UNIFORM_LABEL, strategy, n, w_u, sigma)
    return r, rows, failures


def _worker(args):
    return _run_realization(*args)


def run_sweep(cfg: SweepConfig) -> SweepResult:
    """Run all realizations and aggregate means and standard errors per cell.

    Estimator failures on individual realizations are excluded from that
    cell's average; the surviving sample size is reported in ``count``.
    """
    jobs = [(cfg, r) for r in range(cfg.realizations)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(_worker, jobs, chunksize=1))
    else:
        outcomes = [_run_realization(cfg, r) for r in range(cfg.realizations)]
    outcomes.sort(key=lambda t: t[0])

    cells: dict[tuple, list[float]] = {}
    fail_counts: dict[tuple, int] = {}
    for _, rows, failures in outcomes:
        for est, strategy, n, metric, value in rows:
            cells.setdefault((est, strategy, n, metric), []).append(value)
        for est, strategy, n, _msg in failures:
            fail_counts[(est, strategy, n)] = fail_counts.get((est, strategy, n), 0) + 1

    dataset = cfg.model.kind
    records = []
    est_order = [POPULATION_LABEL] if cfg.include_population else []
    est_order += [e.kind for e in cfg.estimators] + [UNIFORM_LABEL]
    for est in est_order:
        for strategy in cfg.strategies:
            for n in cfg.n_values:
                if est == POPULATION_LABEL and n != cfg.n_values[0]:
                    continue
                for metric in SIM_METRICS:
                    vals = cells.get((est, strategy, n, metric))
                    if not vals:
                        continue
                    arr = np.array(vals)
                    stderr = (
                        float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else None
                    )
                    records.append(
                        MetricRecord(
                            dataset=dataset,
                            estimator=est,
                            strategy=strategy,
                            metric=metric,
                            value=float(arr.mean()),
                            n=n,
                            stderr=stderr,
                            count=arr.size,
                        )
                    )
    return SweepResult(records=tuple(records), failures=fail_counts)


def run_table(cfg: SweepConfig) -> SweepResult:
    """Fixed-size table run: single n, with the population baseline row."""
    if len(cfg.n_values) != 1:
        raise ValueError("table runs use exactly one n")
    return run_sweep(replace(cfg, include_population=True))


def long_frame(result: SweepResult) -> pd.DataFrame:
    """Long-form records as a DataFrame."""
    return pd.DataFrame(
        [
            {
                "dataset": rec.dataset,
                "estimator": rec.estimator,
                "strategy": rec.strategy,
                "n": rec.n,
                "metric": rec.metric,
                "value": rec.value,
                "stderr": rec.stderr,
                "count": rec.count,
            }
            for rec in result.records
        ]
    )


def plot_frame(result: SweepResult, metric: str, strategy: str) -> pd.DataFrame:
    """Plot-ready wide table: index n, one column per estimator."""
    df = long_frame(result)
    sel = df[(df.metric == metric) & (df.strategy == strategy)]
    return sel.pivot(index="n", columns="estimator", values="value")


def table_frame(result: SweepResult, metric: str) -> pd.DataFrame:
    """Table-shaped view at a single n: estimator rows, strategy columns."""
    df = long_frame(result)
    sel = df[df.metric == metric]
    wide = sel.pivot(index="estimator", columns="strategy", values="value")
    order = [e for e in dict.fromkeys(df.estimator) if e in wide.index]
    return wide.loc[order]
