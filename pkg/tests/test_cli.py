import csv
import json
import subprocess
import sys

import pytest

from hetflux.cli import ConfigError, effective_config, main, validate_config
from hetflux.serialize import loads

FLIP = {"kind": "multiplicative", "g": "x", "h": "u^2"}
BOX = {"kind": "piecewise", "pieces": [{"lo": -1, "hi": 1, "u": -1}]}


def _run(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def _config(tmp_path, cfg, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg), encoding="utf-8")
    return str(p)


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_validate_accepts_flipping_flux(tmp_path, capsys):
    code, out, _ = _run(capsys, "validate", "--config", _config(tmp_path, {"flux": FLIP}))
    assert code == 0
    rep = loads(out)
    assert rep["front_tracking"] == "accepted"


def test_validate_quadratic_g_fails_cg(tmp_path, capsys):
    cfg = {"flux": {"kind": "multiplicative", "g": "x^2", "h": "u^2"}}
    code, out, _ = _run(capsys, "validate", "--config", _config(tmp_path, cfg))
    assert code == 1
    rep = loads(out)
    assert rep["front_tracking"] == "rejected" and rep["characteristics"] == "accepted"
    assert "CG" in out


def test_schema_errors_carry_json_pointers(tmp_path, capsys):
    cfg = {"flux": {"kind": "bogus"}, "delta": -1}
    code, _, err = _run(capsys, "solve", "--config", _config(tmp_path, cfg))
    assert code == 2
    paths = {d["path"] for d in json.loads(err)["details"]}
    assert "/flux/kind" in paths and "/delta" in paths
    with pytest.raises(ConfigError) as exc:
        validate_config({"solve": {"horizon": "soon"}})
    assert exc.value.errors[0][0] == "/solve/horizon"


def test_bad_json_and_usage_errors(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text("{", encoding="utf-8")
    assert _run(capsys, "solve", "--config", str(p))[0] == 2
    assert _run(capsys, "nosuchcommand")[0] == 2
    assert _run(capsys, "repro")[0] == 2
    assert _run(capsys, "solve", "--config", str(tmp_path / "missing.json"))[0] == 2
    # T must be positive even when given as a flag
    assert _run(capsys, "solve", "--config", _config(tmp_path, {"flux": FLIP, "datum": BOX}),
                "--delta", "0.2", "--horizon", "-1")[0] == 2


def test_flags_override_sections_override_top_level():
    class Args:
        delta, horizon, out, check = 0.05, None, None, ["rh"]

    cfg = {"delta": 0.2, "horizon": 1.0, "solve": {"delta": 0.1, "horizon": 0.5}}
    eff = effective_config(cfg, "solve", Args())
    assert eff["delta"] == 0.05 and eff["horizon"] == 0.5 and eff["checks"] == ["rh"]
    assert "solve" not in eff


def test_solve_writes_exports_deterministically(tmp_path, capsys):
    cfg = {"flux": FLIP, "datum": BOX, "delta": 0.2, "horizon": 0.5, "window": [-2, 2],
           "solve": {"grid": {"nx": 11, "nt": 3}}}
    path = _config(tmp_path, cfg)
    outs = []
    for d in ("a", "b"):
        code, out, _ = _run(capsys, "solve", "--config", path, "--out", str(tmp_path / d))
        assert code == 0
        outs.append(out)
    assert outs[0] == outs[1]
    assert (tmp_path / "a" / "solution.json").read_bytes() == (tmp_path / "b" / "solution.json").read_bytes()
    field = _rows(tmp_path / "a" / "field.csv")
    assert field[0] == ["t", "x", "u"] and len(field) == 1 + 33
    assert _rows(tmp_path / "a" / "trajectories.csv")[0] == ["front_id", "t", "y"]


def test_solve_from_catalog_datum(tmp_path, capsys):
    cfg = {"datum": {"kind": "catalog", "name": "bounded_blowup"}, "delta": 0.2, "horizon": 1.0,
           "window": [-3, 1]}
    code, out, _ = _run(capsys, "solve", "--config", _config(tmp_path, cfg))
    assert code == 0
    assert loads(out)["kind"] == "front_tracking_solution"


def test_characteristics_command(tmp_path, capsys):
    cfg = {"flux": FLIP, "seeds": [[1, -1], [0.5, -1]], "horizon": 2.0}
    code, out, _ = _run(capsys, "characteristics", "--config", _config(tmp_path, cfg),
                        "--out", str(tmp_path / "c"))
    assert code == 0
    data = loads(out)
    assert data["trajectories"][0]["termination"]["cause"] == "value_blowup"
    assert data["blowup_estimates"][0] == pytest.approx(1.0, abs=1e-2)
    assert "crossings" in data
    rows = _rows(tmp_path / "c" / "characteristic_000.csv")
    assert rows[0] == ["t", "q", "p", "flux_residual"]
    assert (tmp_path / "c" / "manifest.json").exists()


def test_characteristics_requires_seeds(tmp_path, capsys):
    code, _, err = _run(capsys, "characteristics", "--config", _config(tmp_path, {"flux": FLIP}))
    assert code == 2 and "/seeds" in err


def test_verify_catalog_field(tmp_path, capsys):
    cfg = {"verify": {"field": {"catalog": "shock_nonunique_family", "params": {"lam": 0.5}}, "n_phi": 4}}
    code, out, _ = _run(capsys, "verify", "--config", _config(tmp_path, cfg), "--check", "rh",
                        "--check", "interface")
    # the interface condition fails for the moving member
    assert code == 1
    verdicts = [r["verdict"] for r in loads(out)["reports"]]
    assert verdicts == ["pass", "fail"]


def test_verify_weak_solution_on_bad_data(tmp_path, capsys):
    cfg = {"field": {"catalog": "bad_data_no_weak"}}
    code, out, _ = _run(capsys, "verify", "--config", _config(tmp_path, cfg), "--check", "weak_solution")
    assert code == 1 and loads(out)["reports"][0]["verdict"] == "fail"


def test_verify_solved_field(tmp_path, capsys):
    cfg = {"flux": FLIP, "datum": BOX, "delta": 0.2, "horizon": 0.5, "window": [-2, 2]}
    code, out, _ = _run(capsys, "verify", "--config", _config(tmp_path, cfg), "--check", "interface")
    assert code == 0 and loads(out)["reports"][0]["verdict"] == "pass"


def test_catalog_list_emit_crossvalidate(tmp_path, capsys):
    code, out, _ = _run(capsys, "catalog", "list")
    assert code == 0 and len(loads(out)["entries"]) == 8
    code, out, _ = _run(capsys, "catalog", "emit", "power_family", "--param", "s=3")
    assert code == 0 and loads(out)["params"] == {"s": 3.0}
    code, out, _ = _run(capsys, "catalog", "crossvalidate", "global_illposed")
    assert code == 0 and loads(out)["verdict"] == "pass"
    assert _run(capsys, "catalog", "emit", "nope")[0] == 2
    assert _run(capsys, "catalog", "emit")[0] == 2
    assert _run(capsys, "catalog", "emit", "power_family", "--param", "s")[0] == 2


def test_repro_figblowup(tmp_path, capsys):
    code, out, _ = _run(capsys, "repro", "figblowup", "--out", str(tmp_path))
    assert code == 0
    rows = _rows(tmp_path / "figblowup_characteristics.csv")
    assert rows[0] == ["group", "index", "t", "q", "p"]
    assert {r[0] for r in rows[1:]} == {"box", "fan_right", "fan_left", "outside"}
    # box characteristics either blow up in value at t = 1 or stop at the interface
    causes = {c["cause"] for c in loads(out)["terminations"]["box"]}
    assert causes <= {"value_blowup", "entered_interface"}


@pytest.mark.parametrize("fig", ["linfblowup", "disco"])
def test_repro_other_figures(tmp_path, capsys, fig):
    code, out, _ = _run(capsys, "repro", "--figure", fig, "--out", str(tmp_path))
    assert code == 0
    for name in loads(out)["files"]:
        rows = _rows(tmp_path / name)
        assert len(rows) > 1 and all(len(r) == len(rows[0]) for r in rows)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "hetflux", "catalog", "list"], capture_output=True, text=True)
    assert res.returncode == 0 and "stat_equality" in res.stdout
