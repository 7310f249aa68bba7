import filecmp
import json

import numpy as np
import pytest

from adaptive_tracking import config as C
from adaptive_tracking.cli import OUTPUT_ENV, main
from adaptive_tracking.harness import (COLUMNS, HarnessConfig, SCENARIO_NAMES,
                                       artificial_uncertainty_suite, run_mode,
                                       scenario_by_name)
from adaptive_tracking.planner import EstimatorConfig
from adaptive_tracking.properties import check_t_re_ordering
from adaptive_tracking.results import (SUMMARY_COLUMNS, format_value, parse_value, read_csv,
                                       read_run_log)

SHORT = "harness.duration=1.0"


def test_suite_enumeration():
    suite = artificial_uncertainty_suite()
    assert len(suite) == 7 and tuple(s.name for s in suite) == SCENARIO_NAMES
    xi02 = scenario_by_name("flat_xi02")
    assert xi02.profile.evaluate(np.zeros(3), np.array([1.0, 0.0]))[0] == pytest.approx(0.2)
    with pytest.raises(KeyError):
        scenario_by_name("moon")


def test_row_count_matches_duration():
    sc = scenario_by_name("flat_xi00", harness=HarnessConfig(duration=3.0))
    rec = run_mode(sc, "mpc")
    assert len(rec) == 30
    t = rec.array("time")
    assert np.all(np.diff(t) > 0)


def test_value_formatting_round_trips():
    for v in (None, True, False, 3, 0.1, -2.5e-17, float("inf"), float("-inf")):
        assert parse_value(format_value(v)) == v
    assert format_value(float("nan")) == "nan"


def test_list_scenarios(capsys):
    assert main(["list-scenarios"]) == 0
    assert capsys.readouterr().out.split() == list(SCENARIO_NAMES)
    assert main(["run", "--list-scenarios"]) == 0
    assert capsys.readouterr().out.split() == list(SCENARIO_NAMES)


def test_run_writes_logs_summary_and_plot_data(tmp_path, capsys):
    out = tmp_path / "res"
    code = main(["run", "--scenario", "flat_xi02", "--modes", "van,mpc", "--set", SHORT,
                 "--output-dir", str(out)])
    assert code == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["plot_distance_flat_xi02.csv", "plot_path_flat_xi02.csv",
                     "plot_relerr_flat_xi02.csv", "runlog_flat_xi02_mpc.csv",
                     "runlog_flat_xi02_van.csv", "summary.csv"]
    log = read_run_log(out / "runlog_flat_xi02_van.csv")
    assert len(log["time"]) == 10 and set(log["schema_version"]) == {1}
    header, rows = read_csv(out / "summary.csv")
    assert tuple(header) == SUMMARY_COLUMNS
    assert [(r[1], r[2]) for r in rows] == [("flat_xi02", "van"), ("flat_xi02", "mpc")]
    mpc = dict(zip(header, rows[1]))
    assert mpc["e_rmsv"] is None and mpc["t_re"] is None


def test_summary_header_records_every_setting(tmp_path):
    out = tmp_path / "res"
    assert main(["run", "--scenario", "rubber", "--modes", "mpc", "--set", SHORT,
                 "--set", "planner.horizon=12", "--no-plot-data",
                 "--output-dir", str(out)]) == 0
    lines = [ln[2:] for ln in (out / "summary.csv").read_text().splitlines()
             if ln.startswith("# ")]
    assert lines[0] == "schema_version=1"
    pairs = [ln.split("=", 1) for ln in lines[1:]]
    rebuilt = C.apply_overrides(C.default_config(), [f"{k}={v}" for k, v in pairs])
    expected = C.apply_overrides(C.default_config(), [
        SHORT, "planner.horizon=12", "emit_plot_data=false", 'scenarios=["rubber"]',
        'modes=["mpc"]', f"output_dir={json.dumps(str(out))}"])
    assert rebuilt == expected


def test_reruns_are_byte_identical(tmp_path):
    dirs = []
    for name in ("a", "b"):
        d = tmp_path / name
        assert main(["run", "--scenario", "hollow_tiles", "--scenario", "varied",
                     "--set", SHORT, "--set", f"output_dir={json.dumps(str(tmp_path / 'x'))}",
                     "--output-dir", str(d)]) == 0
        dirs.append(d)
    files = sorted(p.name for p in dirs[0].iterdir())
    match, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], files, shallow=False)
    # summary headers name their own output directory; everything else is identical
    assert mismatch == ["summary.csv"] and not errors
    strip = lambda p: [ln for ln in p.read_text().splitlines() if "output_dir" not in ln]
    assert strip(dirs[0] / "summary.csv") == strip(dirs[1] / "summary.csv")


def test_parallel_workers_give_identical_logs(tmp_path):
    for name, workers in (("serial", "1"), ("pool", "2")):
        assert main(["run", "--scenario", "grass", "--modes", "mpc,van", "--set", SHORT,
                     "--workers", workers, "--no-plot-data",
                     "--output-dir", str(tmp_path / name)]) == 0
    for f in ("runlog_grass_mpc.csv", "runlog_grass_van.csv"):
        assert (tmp_path / "serial" / f).read_bytes() == (tmp_path / "pool" / f).read_bytes()


def test_environment_sets_the_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert main(["run", "--scenario", "flat_xi00", "--modes", "mpc", "--set", SHORT,
                 "--no-plot-data"]) == 0
    assert (tmp_path / "env" / "summary.csv").exists()
    # the command-line flag wins over the environment
    assert main(["run", "--scenario", "flat_xi00", "--modes", "mpc", "--set", SHORT,
                 "--no-plot-data", "--output-dir", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "summary.csv").exists()


@pytest.mark.parametrize("argv, message", [
    (["run", "--scenario", "moon"], "unknown scenario"),
    (["run", "--set", "planner.k_weights=[-1,1,1]"], "positive definite"),
    (["run", "--set", "planner.bogus=1"], "unknown key"),
    (["run", "--output-dir", "/proc/forbidden"], "not writable"),
    (["print-config", "--set", "seed=x"], "integer"),
    (["verify", "--set", "planner.k_weights=[-1,1,1]"], "positive definite"),
])
def test_config_errors_exit_with_status_one(argv, message, capsys):
    assert main(argv) == 1
    assert message in capsys.readouterr().err


def test_bad_config_file(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text("{ not json")
    assert main(["run", "--config", str(path)]) == 1
    assert "not valid JSON" in capsys.readouterr().err


def test_print_config_round_trips(tmp_path, capsys):
    assert main(["print-config", "--set", "seed=9"]) == 0
    text = capsys.readouterr().out
    cfg = C.loads(text)
    assert cfg.seed == 9
    path = tmp_path / "cfg.json"
    path.write_text(text)
    assert main(["print-config", "--config", str(path)]) == 0
    assert capsys.readouterr().out == text


def test_divergence_exits_with_status_two(tmp_path):
    assert main(["run", "--scenario", "flat_xi00", "--modes", "mpc", "--set", SHORT,
                 "--set", "harness.divergence_bound=0.01", "--no-plot-data",
                 "--output-dir", str(tmp_path)]) == 2
    header, rows = read_csv(tmp_path / "summary.csv")
    assert dict(zip(header, rows[0]))["diverged"] is True


def test_disabling_the_estimate_breaks_the_ordering_property():
    sc = scenario_by_name("flat_xi02", harness=HarnessConfig(duration=5.0))
    sabotaged = EstimatorConfig(force_zero_estimate=True)
    records = {"flat_xi02": {m: run_mode(sc, m, est_cfg=sabotaged)
                             for m in ("van", "an_large", "an_small")}}
    assert not check_t_re_ordering(records).passed


def test_run_log_columns_are_fixed():
    assert COLUMNS[:3] == ("schema_version", "time", "x") and len(set(COLUMNS)) == len(COLUMNS)
