import csv
import json

import pytest

from geonet import cli
from geonet.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK


def write_config(tmp_path, space="ball", dim=2, count=2, metric=None, **extra):
    metric = metric or {"space": space, "dim": dim, "kind": "standard", "epsilon": 0.0, "poly": []}
    data = {"schema": "geonet.config/1", "space": space, "dim": dim, "metric": metric,
            "multistart": {"count": count, "seed": 0}, "output": {"dir": str(tmp_path / "out"), "resolution": 8}}
    data.update(extra)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(data, indent=2))
    return path


def test_solve_verify_export_cycle(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert cli.main(["solve-ball", "--config", str(cfg)]) == EXIT_OK
    data = json.loads((tmp_path / "out" / "report.json").read_text())
    assert data["summary"]["classes"] == 1
    assert all(r["value"] == pytest.approx(3.0, abs=1e-9) for r in data["results"])
    assert cli.main(["verify", "--config", str(cfg)]) == EXIT_OK
    (tmp_path / "out" / "networks.csv").unlink()
    assert cli.main(["export", "--config", str(cfg)]) == EXIT_OK
    rows = list(csv.reader((tmp_path / "out" / "networks.csv").open()))
    assert len(rows) == 1 + 2 * 3 * 9
    assert "2 verified of 2 starts" in capsys.readouterr().out


def test_out_and_seed_overrides(tmp_path):
    cfg = write_config(tmp_path, count=1)
    out = tmp_path / "elsewhere"
    assert cli.main(["solve-ball", "--config", str(cfg), "--out", str(out), "--seed", "17"]) == EXIT_OK
    data = json.loads((out / "report.json").read_text())
    assert data["config"]["multistart"]["seed"] == 17
    assert data["results"][0]["seed"] == [17, 0]


def test_same_seed_gives_identical_bytes(tmp_path):
    cfg = write_config(tmp_path, count=2)
    for name in ("a", "b"):
        assert cli.main(["solve-ball", "--config", str(cfg), "--out", str(tmp_path / name)]) == EXIT_OK
    for f in ("report.json", "networks.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_sphere_standard_solve(tmp_path):
    cfg = write_config(tmp_path, space="sphere", count=1)
    assert cli.main(["solve-sphere", "--config", str(cfg)]) == EXIT_OK
    data = json.loads((tmp_path / "out" / "report.json").read_text())
    assert data["results"][0]["value"] == pytest.approx(3.14159265358979 * 3, abs=1e-8)
    assert data["context"]["label"] == "paper-asserted, not computed"
    rows = list(csv.reader((tmp_path / "out" / "networks.csv").open()))[1:]
    assert len(rows) == 3 * 9
    assert max(abs(sum(float(v) ** 2 for v in r[3:]) ** 0.5 - 1.0) for r in rows) <= 1e-9


def test_config_errors_exit_2(tmp_path, capsys):
    cfg = write_config(tmp_path, multistart={"count": 0, "seed": 0})
    assert cli.main(["solve-ball", "--config", str(cfg)]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "multistart.count" in err and "line" in err
    assert cli.main(["solve-ball", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    assert cli.main(["solve-sphere", "--config", str(write_config(tmp_path))]) == EXIT_CONFIG


def test_bad_seed_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as info:
        cli.main(["solve-ball", "--config", str(write_config(tmp_path)), "--seed", "-3"])
    assert info.value.code == 2


def test_total_failure_exits_1(tmp_path):
    metric = {"space": "ball", "dim": 2, "kind": "conformal", "epsilon": 0.01,
              "poly": [{"coeff": 1.0, "powers": [3, 0]}, {"coeff": -3.0, "powers": [1, 2]}]}
    cfg = write_config(tmp_path, count=2, metric=metric, search={"max_outer": 1})
    assert cli.main(["solve-ball", "--config", str(cfg)]) == EXIT_FAIL
    data = json.loads((tmp_path / "out" / "report.json").read_text())
    assert data["summary"]["verified"] == 0


def test_verify_without_report_fails(tmp_path):
    assert cli.main(["verify", "--config", str(write_config(tmp_path))]) == EXIT_FAIL


def test_oracle_check_command(tmp_path):
    assert cli.main(["oracle-check", "--config", str(write_config(tmp_path))]) == EXIT_OK
    data = json.loads((tmp_path / "out" / "report.json").read_text())
    assert all(o["passed"] for o in data["oracles"])
