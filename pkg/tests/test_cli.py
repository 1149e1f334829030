import json

import numpy as np
import pytest

from ionlab.cli import main
from ionlab.io import read_sweep, read_trace, write_sweep, write_voltage
from ionlab.fitting import sweep_model


def _config(tmp_path, **sections):
    base = {"timeline": {"detect_duration_us": 20.0}, "run": {"n_sequences": 300}}
    for k, v in sections.items():
        base.setdefault(k, {}).update(v)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(base))
    return str(p)


def test_simulate_trace_is_deterministic(tmp_path):
    cfg = _config(tmp_path)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate-trace", "--config", cfg, "--seed", "3", "--out", str(a)]) == 0
    assert main(["simulate-trace", "--config", cfg, "--seed", "3", "--out", str(b),
                 "--threads", "4"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert read_trace(a).counts.sum() > 0
    meta = json.loads(a.with_suffix(".json").read_text())
    assert meta["manifest"]["master_seed"] == 3


def test_dark_single_sequence_gives_zero_histogram(tmp_path):
    cfg = _config(tmp_path, laser={"saturation": 0.0}, run={"n_sequences": 1})
    out = tmp_path / "t.csv"
    assert main(["simulate-trace", "--config", cfg, "--out", str(out)]) == 0
    assert read_trace(out).counts.sum() == 0


def test_eval_model(tmp_path):
    out = tmp_path / "m.csv"
    assert main(["eval-model", "--out", str(out), "--n-points", "11"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t_us,rate" and len(lines) == 12


def test_fit_trace_round_trip(tmp_path):
    cfg = _config(tmp_path, run={"n_sequences": 3000})
    trace = tmp_path / "t.csv"
    main(["simulate-trace", "--config", cfg, "--out", str(trace)])
    assert main(["fit-trace", str(trace), "--config", cfg]) == 0
    fit = json.loads((tmp_path / "t.fit.json").read_text())
    assert fit["converged"] and 6e-6 < fit["extras"]["x_a"] < 10e-6


def test_fit_sweep_and_voltage(tmp_path):
    r = np.round(np.arange(0, 3.01, 0.25), 10)
    write_sweep([(q, float(sweep_model(q, 4.7e-6)), 0.1e-6, "ok") for q in r], tmp_path / "s.csv")
    assert main(["fit-sweep", str(tmp_path / "s.csv")]) == 0
    fit = json.loads((tmp_path / "s.fit.json").read_text())
    assert fit["estimates"][0] == pytest.approx(4.7e-6, rel=1e-8)
    write_voltage([(0.1, 4.7e-6, 0.1e-6), (0.6, 10.5e-6, 0.4e-6)], tmp_path / "v.csv")
    assert main(["fit-voltage", str(tmp_path / "v.csv")]) == 0


def test_sweep_tau_single_point(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep-tau", "--tau-values", "0.5", "--n-sequences", "1000",
                 "--out", str(out)]) == 0
    rows = read_sweep(out)
    assert len(rows) == 1 and rows[0][3] == "ok"
    assert rows[0][1] == pytest.approx(9.4e-6, rel=0.05)


def test_sensitivity_command(capsys):
    assert main(["sensitivity"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert 1.7 <= rep["deg_per_sqrt_hour"] <= 2.0


def test_invalid_figure_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["pipeline-figure", "9"])
    assert exc.value.code != 0


def test_handled_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["simulate-trace", "--config", str(bad)]) == 2
    assert main(["fit-trace", str(tmp_path / "missing.csv")]) == 2
