"""
Harness tests: config validation, cell expansion, idempotent resumable runs,
report files and CLI exit codes. Experiments here are tiny (D=2, NP=10).
"""

import json

import pytest

import de_redist.harness as harness
from de_redist.core import ConfigurationError, UsageError
from de_redist.harness import (
    ConfigError,
    EXIT_CONFIG,
    EXIT_OBJECTIVE,
    EXIT_OK,
    EXIT_USAGE,
    cell_seed,
    config_from_dict,
    expand_cells,
    load_records,
    main,
    parse_config,
    report,
    run_experiment,
)
from de_redist.redistribution import DEFAULT_T_DIV

SMALL = {
    "functions": ["sphere", "sr_rastrigin"],
    "engines": {"classic": {"pop_size": 10}},
    "modes": ["OV", "CRV", "IRV"],
    "mfes": 200,
    "dim": 2,
    "seeds": 5,
    "workers": 1,
    "redistribution": {"g_n": 3, "t_div": [0.01], "t_gen": 5},
}


def small_config(tmp_path, name="exp", **overrides):
    raw = json.loads(json.dumps(SMALL))
    raw.update(overrides)
    return config_from_dict(raw, output_dir=str(tmp_path / name))


# ============================================================================
# CONFIG
# ============================================================================

def test_defaults(tmp_path):
    config = config_from_dict({"functions": ["sphere"], "engines": {"classic": {}}, "modes": ["IRV", "OV"],
                               "mfes": 1000, "dim": 10}, output_dir=str(tmp_path))
    params = config.redistribution
    assert (params.g_n, params.t_ir, params.t_gen, params.r) == (500, 1e-5, 1000, 0.9)
    assert config.t_divs == DEFAULT_T_DIV
    assert len(config.t_divs) == 7
    assert config.modes == ("OV", "IRV")
    assert config.seeds == tuple(range(25))
    engine = config.engines["classic"]
    assert (engine.F, engine.CR, engine.pop_size) == (0.5, 0.9, 100)


def test_empty_file_lists_every_required_key(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("")
    with pytest.raises(ConfigError) as info:
        parse_config(path)
    missing = [e for e in info.value.errors if e.startswith("missing required key")]
    assert len(missing) == 5
    for key in ("functions", "engines", "modes", "mfes", "dim"):
        assert any(f"'{key}'" in e for e in missing)


def test_all_problems_reported_together(tmp_path):
    raw = dict(SMALL, colour="blue", functions=["sphere", "sr_nothing"], modes=["OV", "XV"], mfes=0)
    with pytest.raises(ConfigError) as info:
        config_from_dict(raw, output_dir=str(tmp_path))
    errors = info.value.errors
    assert "unknown key 'colour'" in errors
    assert "unknown function 'sr_nothing'" in errors
    assert any("unknown mode 'XV'" in e for e in errors)
    assert any("'mfes'" in e for e in errors)
    assert isinstance(info.value, ConfigurationError)


def test_empty_t_div_with_irv_is_rejected(tmp_path):
    raw = dict(SMALL, redistribution={"t_div": []})
    with pytest.raises(ConfigError) as info:
        config_from_dict(raw, output_dir=str(tmp_path))
    assert any("t_div" in e for e in info.value.errors)
    config = config_from_dict(dict(SMALL, modes=["OV"], redistribution={"t_div": []}), output_dir=str(tmp_path))
    assert config.t_divs == ()


@pytest.mark.parametrize("engine", [
    {"F": 0.0},
    {"pop_size": 3},
    {"strategy": "best/2"},
    {"lpsr_min": 20},
    {"speed": 1},
])
def test_bad_engine_settings(tmp_path, engine):
    with pytest.raises(ConfigError) as info:
        config_from_dict(dict(SMALL, engines={"classic": {"pop_size": 10, **engine}}), output_dir=str(tmp_path))
    assert any("engines.classic" in e for e in info.value.errors)


def test_settings_reparse_to_same_fingerprint(tmp_path):
    config = small_config(tmp_path)
    again = config_from_dict(config.settings())
    assert again.fingerprint == config.fingerprint
    moved = config_from_dict(dict(config.settings(), output_dir="elsewhere", workers=4))
    assert moved.fingerprint == config.fingerprint
    changed = config_from_dict(dict(config.settings(), mfes=300))
    assert changed.fingerprint != config.fingerprint


# ============================================================================
# CELLS
# ============================================================================

def test_cell_expansion(tmp_path):
    config = small_config(tmp_path)
    cells = expand_cells(config)
    assert len(cells) == 2 * 3 * 1 * 5
    assert len({c.cell_id for c in cells}) == 30
    assert len({cell_seed(config, c) for c in cells}) == 30
    assert all((c.t_div is None) == (c.mode != "IRV") for c in cells)
    assert "classic__sphere__IRV__tdiv0.01__s000" in {c.cell_id for c in cells}

    wide = small_config(tmp_path, redistribution={"t_div": list(DEFAULT_T_DIV)})
    assert len(expand_cells(wide)) == 2 * (2 + 7) * 5


def test_close_thresholds_get_distinct_cells(tmp_path):
    config = small_config(tmp_path, functions=["sphere"], modes=["IRV"], seeds=2,
                          redistribution={"t_div": [0.01, 0.01000001]})
    cells = expand_cells(config)
    assert len(cells) == 2 * 2
    assert len({c.cell_id for c in cells}) == 4
    assert "classic__sphere__IRV__tdiv0.01000001__s001" in {c.cell_id for c in cells}



# ============================================================================
# EXPERIMENT
# ============================================================================

def read_reports(out_dir):
    return {name: (out_dir / name).read_bytes()
            for name in ("summary.txt", "summary.csv", "tdiv_ratio.csv", "traces_mean.csv")}


def test_run_writes_every_cell(tmp_path):
    config = small_config(tmp_path)
    result = run_experiment(config)
    assert (result.total, result.computed, result.skipped, result.failed) == (30, 30, 0, [])

    records = load_records(result.out_dir)
    assert len(records) == 30
    for rec in records:
        assert rec.ok
        assert rec.fes <= config.mfes + 10
        assert rec.fingerprint == config.fingerprint
        errors = [e for _, e in rec.samples]
        assert all(a >= b for a, b in zip(errors, errors[1:]))
    assert (result.out_dir / "suite.csv").exists()
    assert len((result.out_dir / "journal.log").read_text().splitlines()) == 30


def test_rerun_is_idempotent(tmp_path):
    config = small_config(tmp_path)
    run_experiment(config)
    first = read_reports(tmp_path / "exp")

    again = run_experiment(config)
    assert (again.computed, again.skipped) == (0, 30)
    assert read_reports(tmp_path / "exp") == first

    forced = run_experiment(config, force=True)
    assert forced.computed == 30
    assert read_reports(tmp_path / "exp") == first


def test_changed_config_recomputes(tmp_path):
    run_experiment(small_config(tmp_path))
    changed = run_experiment(small_config(tmp_path, master_seed=9))
    assert changed.computed == 30


def test_determinism_across_directories(tmp_path):
    run_experiment(small_config(tmp_path, "a"))
    run_experiment(small_config(tmp_path, "b"))
    assert read_reports(tmp_path / "a") == read_reports(tmp_path / "b")
    trace_a = sorted(p.name for p in (tmp_path / "a" / "runs").iterdir())
    assert trace_a == sorted(p.name for p in (tmp_path / "b" / "runs").iterdir())
    for name in trace_a:
        if name.endswith(".csv"):
            assert (tmp_path / "a" / "runs" / name).read_bytes() == (tmp_path / "b" / "runs" / name).read_bytes()


def test_single_mode_has_no_comparisons(tmp_path):
    result = run_experiment(small_config(tmp_path, modes=["OV"]))
    lines = result.reports["summary_csv"].read_text().splitlines()
    assert lines == ["engine,function,comparison,decision,p_value,method"]
    assert "no comparisons" in result.reports["summary_text"].read_text()


def test_tdiv_ratio_has_a_row_per_threshold(tmp_path):
    config = small_config(tmp_path, functions=["sphere"], modes=["IRV"], seeds=3,
                          redistribution={"g_n": 3, "t_gen": 5, "t_div": list(DEFAULT_T_DIV)})
    result = run_experiment(config)
    rows = result.reports["tdiv_ratio"].read_text().splitlines()
    assert rows[0] == "engine,t_div,best_count,ratio"
    assert len(rows) == 1 + 7
    ratio = rows[1].split(",")[3]
    assert len(ratio.split(":")) == 7


def test_missing_cell_is_flagged(tmp_path):
    result = run_experiment(small_config(tmp_path))
    (result.out_dir / "runs" / "classic__sphere__OV__s002.json").unlink()
    paths = report(result.out_dir)
    assert "1 of 30 cells not run yet" in paths["summary_text"].read_text()

    resumed = run_experiment(small_config(tmp_path))
    assert resumed.computed == 1
    assert "not run yet" not in resumed.reports["summary_text"].read_text()


def raise_on_first_seed(monkeypatch):
    original = harness.run_cell

    def run_cell(config, cell):
        if cell.seed == 0:
            raise UsageError("bad engine state")
        return original(config, cell)

    monkeypatch.setattr(harness, "run_cell", run_cell)


def test_crashing_cell_is_recorded_as_failed(tmp_path, monkeypatch):
    raise_on_first_seed(monkeypatch)
    result = run_experiment(small_config(tmp_path, functions=["sphere"], modes=["OV"], seeds=3))
    assert (result.total, result.computed) == (3, 3)
    assert result.failed == ["classic__sphere__OV__s000"]

    status = json.loads((result.out_dir / "runs" / "classic__sphere__OV__s000.json").read_text())
    assert status["status"] == "failed"
    assert status["error"] == "UsageError: bad engine state"
    records = load_records(result.out_dir)
    assert sorted(r.ok for r in records) == [False, True, True]
    text = result.reports["summary_text"].read_text()
    assert "GAPS" in text and "failed" in text


def test_cli_run_with_crashing_cell_exits_objective(tmp_path, monkeypatch):
    raise_on_first_seed(monkeypatch)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(dict(SMALL, functions=["sphere"], modes=["OV"], seeds=3)))
    assert main(["run", "--config", str(path), "--output-dir", str(tmp_path / "cli")]) == EXIT_OBJECTIVE



# ============================================================================
# CLI
# ============================================================================

def test_cli_exit_codes(tmp_path, capsys):
    assert main(["list-functions"]) == EXIT_OK
    assert "sr_rastrigin" in capsys.readouterr().out

    assert main(["run"]) == EXIT_USAGE

    empty = tmp_path / "empty.json"
    empty.write_text("")
    assert main(["run", "--config", str(empty)]) == EXIT_CONFIG
    assert "missing required key 'functions'" in capsys.readouterr().out

    assert main(["report", "--dir", str(tmp_path / "nowhere")]) == EXIT_USAGE


def test_cli_run_and_report(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(dict(SMALL, functions=["sphere"], seeds=3)))
    out = tmp_path / "cli"
    assert main(["run", "--config", str(path), "--output-dir", str(out)]) == EXIT_OK
    assert (out / "summary.txt").exists()
    assert main(["report", "--dir", str(out)]) == EXIT_OK
    assert "RESULT SUMMARY" in capsys.readouterr().out
