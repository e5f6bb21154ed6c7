import math
import os
import threading
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from planarcontact import cli
from planarcontact.config import ConfigError, ObstacleConfig, ScenarioConfig, load_config, loads_config
from planarcontact.harness import (RunSummary, SnapshotChannel, Trace, metrics, parse_trace,
                                   read_trace, run, trace_columns)

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="module")
def short_hold(tmp_path_factory):
    out = tmp_path_factory.mktemp("hold")
    cfg = replace(ScenarioConfig(), duration=1.0)
    return cfg, run(cfg, out_dir=out), out


# --- configuration ---------------------------------------------------------


def test_shipped_configs_equal_defaults():
    assert load_config(ROOT / "configs" / "hold.yaml") == replace(ScenarioConfig(),
                                                                  output_dir="out/hold")
    track = load_config(ROOT / "configs" / "track.yaml")
    assert track.scenario == "track" and track.trajectory == ScenarioConfig().trajectory


def test_partial_config_keeps_defaults():
    cfg = loads_config("duration: 2.0\nobstacle:\n  stiffness: 2e4\n")
    assert cfg.duration == 2.0
    assert cfg.obstacle.stiffness == 2e4  # YAML reads 2e4 as a string; still accepted
    assert cfg.obstacle.radius == ScenarioConfig().obstacle.radius


def test_obstacle_can_be_removed():
    assert loads_config("obstacle: null\n").obstacle is None


@pytest.mark.parametrize("text, line, fragment", [
    ("scenario: hold\nobserver:\n  gain: -1\n", 3, "observer.gain"),
    ("duration: 1\nrobot:\n  links: 4\n  massx: 2\n", 4, "unknown key 'robot.massx'"),
    ("duration: 1\nrates:\n  sim: 1000\n  estimator: 300\n", 4, "must divide"),
    ("initial_q: [0, 0, 0]\n", 1, "initial_q"),
    ("duration: fast\n", 1, "duration"),
    ("particle_filter:\n  count: 2.5\n", 2, "integer"),
    ("robot: 3\n", 1, "mapping"),
    ("duration: 1\nduration: 2\n", 2, "duplicate"),
    ("scenario: [unclosed\n", 2, "malformed"),
    ("noise:\n  qdot_std: -0.1\n", 2, "noise"),
    ("\n\nreporting:\n  cutoff_hz: 600\n", 4, "Nyquist"),
])
def test_config_errors_name_the_line(text, line, fragment):
    with pytest.raises(ConfigError) as err:
        loads_config(text, "cfg.yaml")
    msg = str(err.value)
    assert msg.startswith(f"cfg.yaml:{line}:"), msg
    assert fragment in msg


def test_direct_construction_is_validated():
    with pytest.raises(ConfigError):
        ScenarioConfig(duration=0.0)
    with pytest.raises(ConfigError):
        ScenarioConfig(obstacle=ObstacleConfig(radius=-1.0))


# --- metrics on constructed logs --------------------------------------------


def constructed_trace(offset=(0.0, 0.0), n_rows=300, impact_row=50):
    """Trace with a constant true contact from ``impact_row`` and copied estimates."""
    names = trace_columns(4)
    cols = {name: np.zeros(n_rows) for name in names}
    cols["t"] = np.arange(n_rows) * 0.01
    cols["est_tick"][:] = 1
    on = np.arange(n_rows) >= impact_row
    cols["true_contact"][on] = 1
    for name, value in (("true_px", 0.0), ("true_py", 0.4), ("true_fx", 3.0), ("true_fy", -2.0)):
        cols[name][:] = np.where(on, value, np.nan)
    for prefix in ("an", "pf"):
        for suffix in ("", "_filt"):
            cols[f"{prefix}_px{suffix}"] = cols["true_px"] + offset[0]
            cols[f"{prefix}_py{suffix}"] = cols["true_py"] + offset[1]
            cols[f"{prefix}_fx{suffix}"] = cols["true_fx"].copy()
            cols[f"{prefix}_fy{suffix}"] = cols["true_fy"].copy()
    cols["an_status"] = np.where(on, 0.0, 1.0)
    cols["pf_valid"] = on.astype(float)
    cols["detected"] = on.astype(float)
    return Trace(names, cols, {"scenario": "hold", "method": "both", "duration": "3.0",
                               "transient": "0.5"})


def test_metrics_exact_estimates_give_zero_error():
    s = metrics(constructed_trace())
    assert s.impact_time == pytest.approx(0.5)
    for m in (s.analytic, s.pf):
        assert m.steady_force_mean == 0.0 and m.steady_point_max == 0.0
        assert m.peak_transient_force == 0.0
        assert m.detection_latency == 0.0
        assert m.steady_ticks == 200 and m.steady_invalid_ticks == 0


def test_metrics_constant_offset_is_reported_exactly():
    s = metrics(constructed_trace(offset=(0.01, 0.0)))
    for m in (s.analytic, s.pf):
        assert m.steady_point_mean == pytest.approx(0.01, rel=0, abs=1e-16)
        assert m.steady_point_max == 0.01
        assert m.steady_force_mean == 0.0


def test_metrics_excludes_transient_window():
    tr = constructed_trace()
    tr.columns["an_fx"] = tr["an_fx"].copy()
    tr.columns["an_fx"][60] += 4.0  # 0.1 s after impact
    s = metrics(tr)
    assert s.analytic.peak_transient_force == 4.0
    assert s.analytic.steady_force_max == 0.0
    assert s.pf.peak_transient_force == 0.0


def test_metrics_without_contact():
    tr = constructed_trace(impact_row=10**6)
    s = metrics(tr)
    assert math.isnan(s.impact_time) and math.isnan(s.analytic.steady_force_mean)


def test_summary_text_round_trip():
    s = metrics(constructed_trace(offset=(0.003, -0.002)))
    assert RunSummary.from_text(s.to_text()) == s


# --- full runs ---------------------------------------------------------------


def test_free_space_run_detects_nothing():
    cfg = replace(ScenarioConfig(), duration=0.5, obstacle=None)
    res = run(cfg)
    assert not res.summary.detected
    assert res.summary.max_gamma < cfg.observer.epsilon
    assert res.summary.max_gamma < 1e-6
    assert math.isnan(res.summary.impact_time)


def test_default_geometry_contacts_before_contact_radius_is_passed():
    # 0.5 s before the impact time of the default hold run: nothing to see yet
    cfg = replace(ScenarioConfig(), duration=0.25)
    res = run(cfg)
    assert not res.summary.detected and math.isnan(res.summary.impact_time)


def test_outputs_written_and_summary_recomputable(short_hold):
    cfg, res, out = short_hold
    assert (out / "trace.csv").exists() and (out / "summary.txt").exists()
    recomputed = metrics(read_trace(out / "trace.csv"))
    assert recomputed == res.summary
    assert RunSummary.from_text((out / "summary.txt").read_text()) == res.summary
    assert res.summary.impact_time == pytest.approx(0.29)
    assert res.summary.analytic.steady_ticks > 0


def test_trace_layout_and_rate_contract(short_hold):
    cfg, res, out = short_hold
    lines = (out / "trace.csv").read_text().splitlines()
    header = [ln for ln in lines if not ln.startswith("#")][0]
    assert header.split(",") == trace_columns(4)
    tr = read_trace(out / "trace.csv")
    assert len(tr) == 1000
    ticks = np.flatnonzero(tr["est_tick"] == 1)
    assert np.all(np.diff(ticks) == cfg.steps_per_tick) and ticks[0] == 0
    # estimates only change on tick rows: the logged estimate is never older than one period
    changes = np.flatnonzero(np.diff(np.nan_to_num(tr["an_fx"], nan=-1e9)) != 0) + 1
    assert set(changes) <= set(ticks)
    for line in lines[5:10]:
        for field in line.split(","):
            if field not in ("nan", "-1", "0", "1"):
                digits = field.lstrip("-").split("e")[0].replace(".", "").lstrip("0")
                assert len(digits) <= 9


def test_method_selection_blanks_other_columns():
    cfg = replace(ScenarioConfig(), duration=0.4, method="analytic")
    tr = parse_trace(run(cfg).trace_text)
    assert np.all(np.isnan(tr["pf_fx"])) and np.all(np.isnan(tr["pf_valid"]))
    assert np.any(tr["an_status"] == 0)


def test_runs_are_deterministic_with_noise():
    cfg = replace(ScenarioConfig(), duration=0.4)
    cfg = replace(cfg, noise=replace(cfg.noise, qdot_std=1e-3, tau_std=1e-2))
    a, b = run(cfg).trace_text, run(cfg).trace_text
    assert a == b
    other = replace(cfg, particle_filter=replace(cfg.particle_filter, seed=3))
    assert run(other).trace_text != a


def test_fatal_error_is_reported(tmp_path):
    cfg = replace(ScenarioConfig(), duration=0.6,
                  obstacle=ObstacleConfig(stiffness=1e12, damping=0.0))
    res = run(cfg, out_dir=tmp_path)
    assert not res.summary.ok
    assert (tmp_path / "trace.csv").exists()
    assert "failure" in (tmp_path / "summary.txt").read_text()


def test_threaded_mode_produces_estimates():
    cfg = replace(ScenarioConfig(), duration=0.5)
    res = run(cfg, threaded=True)
    tr = parse_trace(res.trace_text)
    assert tr["est_tick"].sum() > 10
    assert res.summary.detected


# --- snapshot channel --------------------------------------------------------


def test_channel_keeps_latest_only():
    ch = SnapshotChannel()
    assert ch.take(timeout=0.0) is None
    for k in range(3):
        ch.put(k)
    assert ch.take() == 2 and ch.overwritten == 2 and ch.published == 3
    assert ch.take(timeout=0.0) is None


def test_channel_across_threads():
    ch = SnapshotChannel()
    seen = []

    def consumer():
        while True:
            item = ch.take(timeout=0.5)
            if item is None and ch.closed:
                return
            if item is not None:
                seen.append(item)

    th = threading.Thread(target=consumer)
    th.start()
    for k in range(200):
        ch.put(k)
    ch.close()
    th.join(timeout=2.0)
    assert not th.is_alive()
    assert seen == sorted(seen) and len(set(seen)) == len(seen)
    assert seen[-1] == 199 or ch.take(timeout=0.0) == 199


# --- command line ------------------------------------------------------------


def write_cfg(tmp_path, text):
    p = tmp_path / "cfg.yaml"
    p.write_text(text)
    return str(p)


def test_cli_run_writes_outputs(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "duration: 0.4\n")
    code = cli.main(["run", "--config", cfg, "--out", str(tmp_path / "o"), "--seed", "4",
                     "--method", "pf", "--scenario", "track"])
    assert code == 0
    text = (tmp_path / "o" / "summary.txt").read_text()
    assert "scenario = 'track'" in text and "method = 'pf'" in text
    assert "detected" in capsys.readouterr().out


def test_cli_config_error_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "observer:\n  epsilon: 0\n")
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "cfg.yaml:2:" in capsys.readouterr().err
    assert cli.main(["run", "--config", str(tmp_path / "missing.yaml"), "--out", "x"]) == 2


def test_cli_fatal_run_exit_code(tmp_path):
    cfg = write_cfg(tmp_path, "duration: 0.6\nobstacle:\n  stiffness: 1.0e+12\n  damping: 0\n")
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
