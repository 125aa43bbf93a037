import json

import pytest

from shadowlab.errors import ConfigError
from shadowlab.scenarios import (
    SCENARIO_NAMES,
    RunReport,
    ScenarioConfig,
    builtin_config,
    list_scenarios,
    load_config,
    parse_fn,
    run_scenario,
)


def test_catalog_is_complete():
    assert len(SCENARIO_NAMES) == 10
    for name in SCENARIO_NAMES:
        config = builtin_config(name)
        assert config.name == name
        rebuilt = ScenarioConfig.from_obj(config.to_obj())
        assert rebuilt.to_obj() == config.to_obj()
    summaries = list_scenarios()
    assert [s["name"] for s in summaries] == SCENARIO_NAMES
    assert all(s["summary"] for s in summaries)


def test_parse_fn_shorthands():
    assert parse_fn("const:2.0").eval([0.0, 0.0]) == 2.0
    assert parse_fn("decaying:1.0").eval([9.0, 0.0]) == pytest.approx(0.1)
    assert parse_fn("saddle_adversarial").eval([1.0, 0.0]) == 0.5
    assert parse_fn("table:[[0.0, 1.0], [2.0, 0.5]]").eval([1.0, 0.0]) == pytest.approx(0.75)
    assert parse_fn({"op": "const", "args": [3.0]}).eval([0.0, 0.0]) == 3.0
    with pytest.raises(ConfigError):
        parse_fn("mystery:1")


def test_config_validation_errors():
    with pytest.raises(ConfigError):
        ScenarioConfig.from_obj({"kind": "adversarial_box"})
    with pytest.raises(ConfigError):
        ScenarioConfig.from_obj({"name": "x", "kind": "k", "surprise": True})
    with pytest.raises(ConfigError):
        ScenarioConfig.from_obj({"name": "x", "kind": "k", "metric": "taxicab"})
    with pytest.raises(ConfigError):
        load_config("definitely-not-a-scenario")


def test_run_report_exit_codes():
    assert RunReport("x", "matches-paper", [], 0.0).exit_code == 0
    assert RunReport("x", "contradicts-paper", [], 0.0).exit_code == 2
    assert RunReport("x", "inconclusive", [], 0.0).exit_code == 1


def test_metric_warp_scenario_verdict(tmp_path):
    report = run_scenario(builtin_config("metric-warp"), str(tmp_path))
    assert report.verdict == "matches-paper"
    assert report.details["warped_point_found"] is False
    assert report.details["unwarped_point_found"] is True
    search = json.loads((tmp_path / "metric-warp" / "search.json").read_text())
    assert search["polar_warp"]["found"] is None
    assert search["sup"]["found"] is not None


def test_fixed_point_scan_consistency(tmp_path):
    report = run_scenario(builtin_config("fixed-point-scan"), str(tmp_path))
    assert report.verdict == "matches-paper"
    maps = report.details["maps"]
    assert maps["saddle"]["fixed_points"] and maps["saddle"]["evidence"] == "not-shadowing"
    assert maps["homothety-2"]["fixed_points"] and maps["homothety-2"]["evidence"] == "shadowing"
    assert maps["reverse-homothety"]["evidence"] == "shadowing"
    assert maps["translation"]["fixed_points"] == []
    assert maps["translation"]["evidence"] == "not-shadowing"
    assert not any(entry["contradiction"] for entry in maps.values())


def test_sweep_table_matches_brute_force_oracle():
    import numpy as np

    from shadowlab.scenarios import _chessboard_infconv_table

    rng = np.random.default_rng(1)
    v = rng.uniform(0.2, 3.0, size=(17, 17))
    h = 0.25
    idx = np.arange(17)
    ii, jj = np.meshgrid(idx, idx, indexing="ij")
    brute = np.empty_like(v)
    for a in range(17):
        for b in range(17):
            brute[a, b] = np.min(v + h * np.maximum(np.abs(ii - a), np.abs(jj - b)))
    sweep = _chessboard_infconv_table(v, h)
    assert np.array_equal(sweep, brute)


def test_saddle_scenario_artifacts(tmp_path):
    report = run_scenario(builtin_config("saddle-not-tsp"), str(tmp_path))
    assert report.verdict == "matches-paper"
    root = tmp_path / "saddle-not-tsp"
    cert = json.loads((root / "certificate.json").read_text())
    assert cert["outcome"] == "empty"
    assert cert["emptiness_window"] <= 32
    listed = json.loads((root / "report.json").read_text())["artifacts"]
    for name in ("certificate.json", "boxwidth.csv", "orbit.csv"):
        assert name in listed
    assert any(a.endswith(".svg") for a in listed)
    assert report.details["oracle"]["found"] is None
