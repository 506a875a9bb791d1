import io
import json
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

import numpy as np
import pandas as pd

from hdcov.cli import main

DATA = Path(__file__).parent / "data" / "synthetic_prices.csv"


def run_cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = None
    with redirect_stdout(out), redirect_stderr(err):
        try:
            code = main(list(argv))
        except SystemExit as exc:
            code = exc.code if isinstance(exc.code, int) else 2
    return code, out.getvalue(), err.getvalue()


def write_config(path: Path, **overrides) -> Path:
    payload = {
        "model": {"kind": "diagonal", "p": 6},
        "n_values": [40],
        "realizations": 2,
        "estimators": ["naive", "linear"],
        "strategies": ["mvp"],
        "seed": 11,
    }
    payload.update(overrides)
    target = path / "config.json"
    target.write_text(json.dumps(payload))
    return target


class TestEigs:
    def test_p2_agreement(self):
        code, out, _ = run_cli("eigs", "--model", "nested", "-p", "2", "--gamma", "0.1")
        assert code == 0
        lines = [l for l in out.splitlines() if l and not l.startswith("#")]
        frame = pd.read_csv(io.StringIO("\n".join(lines)))
        assert len(frame) == 2
        np.testing.assert_allclose(frame.root_finder, frame.dense_oracle, rtol=1e-8)

    def test_writes_file_with_header(self, tmp_path):
        target = tmp_path / "eigs.csv"
        code, _, _ = run_cli("eigs", "-p", "5", "--gamma", "0.2", "--out", str(target))
        assert code == 0
        first = target.read_text().splitlines()[0]
        assert first.startswith("# config=") and "seed=" in first

    def test_non_nested_model_rejected(self):
        code, _, _ = run_cli("eigs", "--model", "diagonal", "-p", "3")
        assert code != 0


class TestTableAndSimulate:
    def test_table_determinism(self, tmp_path):
        cfg = write_config(tmp_path)
        out1, out2 = tmp_path / "run1", tmp_path / "run2"
        assert run_cli("table", "--config", str(cfg), "--out", str(out1), "--workers", "1")[0] == 0
        assert run_cli("table", "--config", str(cfg), "--out", str(out2), "--workers", "1")[0] == 0
        for name in ("table_long.csv", "table_hhi.csv", "table_r2_out.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_table_contains_population_row(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "run"
        run_cli("table", "--config", str(cfg), "--out", str(out), "--workers", "1")
        frame = pd.read_csv(out / "table_hhi.csv", comment="#", index_col=0)
        assert "population" in frame.index and "uniform" in frame.index

    def test_simulate_plot_csv_has_estimator_columns(self, tmp_path):
        cfg = write_config(tmp_path, n_values=[30, 40])
        out = tmp_path / "run"
        code, _, _ = run_cli("simulate", "--config", str(cfg), "--out", str(out), "--workers", "1")
        assert code == 0
        frame = pd.read_csv(out / "sweep_hhi_mvp.csv", comment="#", index_col=0)
        assert set(frame.columns) == {"naive", "linear", "uniform"}
        assert list(frame.index) == [30, 40]

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg = write_config(tmp_path)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        run_cli("table", "--config", str(cfg), "--out", str(out1), "--seed", "1", "--workers", "1")
        run_cli("table", "--config", str(cfg), "--out", str(out2), "--seed", "2", "--workers", "1")
        assert (out1 / "table_long.csv").read_bytes() != (out2 / "table_long.csv").read_bytes()

    def test_missing_config_exits_nonzero(self, tmp_path):
        code, _, err = run_cli("table", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path))
        assert code == 1
        assert "error" in err


class TestBacktestCommands:
    def test_track_outputs_records(self, tmp_path):
        out = tmp_path / "track"
        code, _, err = run_cli(
            "backtest-track",
            "--prices", str(DATA),
            "--out", str(out),
            "--window", "60",
            "--step", "120",
            "--estimators", "naive,linear",
            "--strategies", "mvp,hrp",
        )
        assert code == 0, err
        frame = pd.read_csv(out / "track.csv", comment="#")
        assert list(frame.columns) == ["window_end_date", "estimator", "strategy", "metric", "value"]
        assert set(frame.estimator) == {"naive", "linear", "uniform"}

    def test_walk_forward_outputs(self, tmp_path):
        out = tmp_path / "wf"
        code, _, err = run_cli(
            "walk-forward",
            "--prices", str(DATA),
            "--out", str(out),
            "--t-in", "120",
            "--t-out", "126",
            "--rebalance-every", "126",
            "--estimators", "naive",
            "--strategies", "mvp",
        )
        assert code == 0, err
        perf = pd.read_csv(out / "performance.csv", comment="#")
        uniform = perf[perf.estimator == "uniform"]
        assert float(uniform.turnover.iloc[0]) == 0.0
        curves = pd.read_csv(out / "cumulative.csv", comment="#", index_col=0)
        assert curves.iloc[0].eq(1.0).all()

    def test_unknown_estimator_lists_vocabulary(self, tmp_path):
        code, _, err = run_cli(
            "backtest-track",
            "--prices", str(DATA),
            "--out", str(tmp_path),
            "--estimators", "wizard",
        )
        assert code == 2
        assert "naive" in err and "2s-ycm" in err

    def test_unknown_strategy_rejected(self, tmp_path):
        code, _, err = run_cli(
            "walk-forward",
            "--prices", str(DATA),
            "--out", str(tmp_path),
            "--strategies", "yolo",
        )
        assert code == 2
        assert "mvp" in err
