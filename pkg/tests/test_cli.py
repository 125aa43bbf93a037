import json

import pytest

from shadowlab.cli import main
from shadowlab.scenarios import SCENARIO_NAMES


def test_list_prints_ten_names(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    for name in SCENARIO_NAMES:
        assert name in out
    assert len(out.strip().splitlines()) == 10


def test_list_json_catalog(capsys):
    assert main(["list", "--json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert [e["name"] for e in payload["scenarios"]] == SCENARIO_NAMES


def test_unknown_subcommand_is_usage_error(capsys):
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 64


def test_missing_subcommand_is_usage_error():
    assert main([]) == 64


def test_unknown_scenario_is_usage_error(capsys):
    assert main(["run", "no-such-scenario"]) == 64
    assert "config error" in capsys.readouterr().err


def test_run_builtin_scenario(tmp_path, capsys):
    assert main(["run", "translation-adversarial", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "translation-adversarial: matches-paper" in out
    report = json.loads((tmp_path / "translation-adversarial" / "report.json").read_text())
    assert report["verdict"] == "matches-paper"
    assert "wall" not in json.dumps(report)


def test_run_config_file_with_overrides(tmp_path, capsys):
    config = {
        "name": "small-translation",
        "kind": "adversarial_box",
        "metric": "sup",
        "seed": 3,
        "window_limit": 16,
        "margin": 1e-12,
        "params": {
            "map": {"kind": "translation"},
            "epsilon": "decaying:1.0",
            "forward_seed": [0.0, 0.0],
            "jump_direction": [0.0, 1.0],
            "jump": 0.5,
            "oracle": {"box": [[-1.0, 1.0], [-1.0, 1.0]], "step": 0.05},
        },
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    assert main(["run", str(path), "--out", str(tmp_path / "out"), "--seed", "9"]) == 0
    report = json.loads((tmp_path / "out" / "small-translation" / "report.json").read_text())
    assert report["seed"] == 9


def test_bad_config_reports_location(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{"name": "x",, }', encoding="utf-8")
    assert main(["run", str(path)]) == 64
    err = capsys.readouterr().err
    assert "line 1" in err

    path2 = tmp_path / "fields.json"
    path2.write_text(json.dumps({"name": "x", "kind": "adversarial_box", "bogus": 1}), encoding="utf-8")
    assert main(["run", str(path2)]) == 64
    assert "bogus" in capsys.readouterr().err


def test_plot_subcommand(tmp_path, capsys):
    import numpy as np

    from shadowlab.maps import saddle
    from shadowlab.pseudo_orbit import PseudoOrbitSpec, SplicedRule, orbit_to_csv, realize

    spec = PseudoOrbitSpec(
        SplicedRule(np.array([1.0, 0.0]), np.array([1.0, 0.1]), 0), (-4, 4), saddle())
    csv_path = tmp_path / "orbit.csv"
    csv_path.write_text(orbit_to_csv(realize(spec)), encoding="utf-8")
    out_path = tmp_path / "orbit.svg"
    assert main(["plot", str(csv_path), "--kind", "orbit2d", "--out", str(out_path)]) == 0
    assert out_path.exists()
    assert str(out_path) in capsys.readouterr().out


def test_internal_contract_violation_exits_70(tmp_path, capsys):
    # A tolerance tree that evaluates non-positive trips the guarded node at
    # runtime: an internal contract violation, not a usage error.
    config = {
        "name": "broken-pipeline",
        "kind": "homothety_shadow",
        "seed": 1,
        "params": {
            "map": {"kind": "homothety", "factor": 2.0},
            "epsilon": {"op": "sub", "args": [{"op": "const", "args": [1.0]},
                                              {"op": "const", "args": [2.0]}]},
            "count": 5,
            "window": [-4, 8],
        },
    }
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    assert main(["run", str(path), "--out", str(tmp_path / "out")]) == 70
    assert "contract violation" in capsys.readouterr().err


def test_output_dir_env_override(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("OUTPUT_DIR", str(tmp_path / "from-env"))
    assert main(["run", "fixed-point-scan"]) == 0
    assert (tmp_path / "from-env" / "fixed-point-scan" / "report.json").exists()


def test_parallel_run_matches_sequential(tmp_path):
    names = ["translation-adversarial", "fixed-point-scan"]
    assert main(["run", names[0], "--out", str(tmp_path / "seq")]) == 0
    assert main(["run", names[1], "--out", str(tmp_path / "seq")]) == 0
    # A parallel sweep of the same two scenarios produces identical bytes.
    import shadowlab.scenarios as sc

    from concurrent.futures import ThreadPoolExecutor

    configs = [sc.builtin_config(n) for n in names]
    with ThreadPoolExecutor(max_workers=2) as pool:
        list(pool.map(lambda c: sc.run_scenario(c, str(tmp_path / "par")), configs))
    for name in names:
        for f in sorted((tmp_path / "seq" / name).iterdir()):
            assert f.read_bytes() == (tmp_path / "par" / name / f.name).read_bytes()
