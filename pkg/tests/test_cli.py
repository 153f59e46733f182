import json

import numpy as np
import pytest

from rel_euler.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, load_schema, main, validate_config, ConfigError
from rel_euler.dynamics import DiagnosticSeries
from rel_euler.fields import read_snapshot


def run(tmp_path, *argv, config=None):
    args = list(argv) + ["--output-dir", str(tmp_path / "out")]
    if config is not None:
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(config))
        args += ["--config", str(path)]
    return main(args)


def report(tmp_path, name):
    return json.loads((tmp_path / "out" / f"{name}.json").read_text())


def test_jet_verify_example(tmp_path):
    code = run(tmp_path, "jet-verify", "--order", "2", "--count", "100", "--identities", "WTe-h,CEQ", "--seed", "7")
    assert code == EXIT_OK
    rep = report(tmp_path, "jet-verify")
    assert rep["status"] == "pass"
    for name in ("WTe-h", "CEQ"):
        entry = rep["checks"][name]
        assert entry["max_rel_residual"] < 1e-12
        assert entry["jet_order"] == 2 and entry["anchor"]


def test_reports_are_deterministic(tmp_path):
    argv = ("jet-verify", "--count", "10", "--identities", "WTe-u,HDe", "--seed", "3")
    run(tmp_path, *argv)
    first = (tmp_path / "out" / "jet-verify.json").read_bytes()
    run(tmp_path, *argv)
    assert (tmp_path / "out" / "jet-verify.json").read_bytes() == first


def test_impossible_tolerance_fails(tmp_path, capsys):
    code = run(tmp_path, "jet-verify", "--count", "5", "--identities", "WTe-h", "--tolerance", "1e-30")
    assert code == EXIT_FAIL
    assert report(tmp_path, "jet-verify")["status"] == "fail"
    assert "[FAIL]" in capsys.readouterr().out


def test_control_run_passes_by_breaking_identities(tmp_path):
    code = run(tmp_path, "jet-verify", "--count", "20", "--identities", "WTe-h,CEQ", "--control")
    assert code == EXIT_OK
    for entry in report(tmp_path, "jet-verify")["checks"].values():
        assert entry["median_rel_residual"] >= 1e-3


@pytest.mark.parametrize("argv", [
    ("jet-verify", "--identities", "WTe-h,NOPE"),
    ("jet-verify", "--order", "2", "--identities", "SDe"),
    ("jet-verify", "--order", "7"),
    ("frobnicate",),
    ("simulate", "--cfl", "3.0"),
    ("verify-identities", "--identities", "fdr"),
])
def test_bad_requests_exit_two(tmp_path, argv):
    assert run(tmp_path, *argv) == EXIT_CONFIG


def test_missing_or_malformed_config(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["simulate", "--config", str(bad)]) == EXIT_CONFIG


def test_unknown_config_key_rejected(tmp_path, capsys):
    assert run(tmp_path, "simulate", config={"run": {"n": 16, "colour": "red"}}) == EXIT_CONFIG
    assert "colour" in capsys.readouterr().err


def test_schema_rejects_wrong_types():
    schema = load_schema()
    assert schema["additionalProperties"] is False
    with pytest.raises(ConfigError):
        validate_config({"run": {"n": "sixteen"}})
    with pytest.raises(ConfigError):
        validate_config({"jet": {"order": 5}})


def test_simulate_rest_state(tmp_path):
    cfg = {"run": {"dim": 1, "n": 16, "t_max": 0.5, "snapshot_every": 5}, "initial": {"kind": "rest"}}
    assert run(tmp_path, "simulate", config=cfg) == EXIT_OK
    out = tmp_path / "out"
    diag = DiagnosticSeries.from_csv(out / "diagnostics.csv")
    assert np.max(diag.column("Linf_du")) == 0.0
    snaps = sorted(out.glob("snapshot_*.bin"))
    assert snaps
    grid, t, fields = read_snapshot(snaps[-1])
    assert set(fields) == {"p", "u1", "u2", "u3"}
    assert np.max(np.abs(fields["u1"])) == 0.0


def test_verify_identities(tmp_path):
    cfg = {"grid_identities": {"n": 32}}
    assert run(tmp_path, "verify-identities", "--identities", "WTe-h,CEQ,HDe", config=cfg) == EXIT_OK
    rep = report(tmp_path, "verify-identities")
    assert set(rep["checks"]) == {"WTe-h", "CEQ", "HDe"}
    for e in rep["checks"].values():
        assert set(e) >= {"max_rel_residual", "l2_rel_residual", "n_points", "jet_order", "anchor"}


def test_norms_writes_energy_csv(tmp_path):
    cfg = {"run": {"dim": 1, "n": 32, "t_max": 0.5, "snapshot_every": 5}}
    assert run(tmp_path, "norms", config=cfg) == EXIT_OK
    lines = (tmp_path / "out" / "energies.csv").read_text().splitlines()
    assert lines[0] == "t,E_s,Etilde_s,Ebb,M,Linf_du,Linf_dh,besov_du"
    assert "gronwall" in report(tmp_path, "norms")["checks"]


def test_geometry_flags_select_checks(tmp_path):
    cfg = {"run": {"dim": 2, "n": 16}, "geometry": {"trace_steps": 200}}
    assert run(tmp_path, "geometry", "--trace", "--frame-check", config=cfg) == EXIT_OK
    rep = report(tmp_path, "geometry")
    assert rep["result"]["selected"] == ["trace", "frame_check"]
    assert set(rep["checks"]) == {"hamiltonian", "frame_constant", "frame_perturbed"}
    header = (tmp_path / "out" / "trace.csv").read_text().splitlines()[0]
    assert header == "s,t,x1,x2,x3,xi0,xi1,xi2,xi3,H"


def test_every_check_has_an_anchor(tmp_path):
    assert run(tmp_path, "duhamel", config={"geometry": {"duhamel_nt": [20, 40], "duhamel_n": 16}}) == EXIT_OK
    for entry in report(tmp_path, "duhamel")["checks"].values():
        assert entry["anchor"]
