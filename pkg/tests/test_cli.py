import json
import math

import numpy as np
import pytest

from hopfbound.cli import main
from hopfbound.fields import BumpProfile, FieldSpec, save_field
from hopfbound.sphere import canonical_center


def run_cli(*argv):
    return main(list(argv))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def test_energy_full_sphere(tmp_path):
    out = tmp_path / "e.json"
    assert run_cli("energy", "--k", "1", "--domain", "full",
                   "--out", str(out)) == 0
    payload = read_json(out)
    assert abs(payload["energy"]["energy"] - 5 * math.pi ** 2) < 1e-6
    assert abs(payload["energy"]["gap"]) < 1e-9
    assert payload["meta"]["artifact"] == "hopfbound"
    assert payload["meta"]["version"]
    assert payload["meta"]["k"] == 1
    assert payload["meta"]["seed"] == 0
    assert payload["meta"]["resolution"]["radial"] == 64
    assert "wall" not in json.dumps(payload)  # deterministic report


def test_energy_cap_gap_small(tmp_path):
    out = tmp_path / "e.json"
    assert run_cli("energy", "--domain", "cap:rho=1.0", "--resolution", "24,12",
                   "--out", str(out)) == 0
    payload = read_json(out)
    assert abs(payload["energy"]["gap"]) < 1e-3 * payload["energy"]["vol"]


def test_energy_formats(tmp_path, capsys):
    assert run_cli("energy", "--resolution", "16,8", "--format", "pretty") == 0
    pretty = capsys.readouterr().out
    assert "energy" in pretty and "wall clock" in pretty
    out = tmp_path / "e.csv"
    assert run_cli("energy", "--resolution", "16,8", "--format", "csv",
                   "--out", str(out)) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("k,vol,dirichlet,energy,bound,gap")
    assert len(lines) == 2


def test_verify_identities_default_passes(tmp_path):
    out = tmp_path / "vi.json"
    assert run_cli("verify-identities", "--samples", "20000",
                   "--out", str(out)) == 0
    payload = read_json(out)
    assert payload["pass"] is True
    assert set(payload["identities"]["dims"]) == {"2", "4", "6"}


def test_verify_identities_zero_samples_vacuous(tmp_path):
    out = tmp_path / "vi.json"
    assert run_cli("verify-identities", "--samples", "0", "--skew-samples", "0",
                   "--out", str(out)) == 0
    assert read_json(out)["pass"] is True


def test_verify_identities_impossible_tolerance_exits_2(tmp_path):
    out = tmp_path / "vi.json"
    assert run_cli("verify-identities", "--samples", "5000", "--dims", "4",
                   "--identity-tol", "0", "--out", str(out)) == 2
    payload = read_json(out)
    assert payload["pass"] is False
    sample = np.array(payload["violations"][0]["sample"])
    assert sample.shape == (4, 4)
    assert abs(np.trace(sample)) < 1e-12


def test_transport_residuals(tmp_path):
    out = tmp_path / "t.json"
    assert run_cli("transport", "--domain", "cap:rho=1.0",
                   "--resolution", "16,8", "--out", str(out)) == 0
    payload = read_json(out)
    resid = payload["transport"]["residual_direct"]
    assert len(resid) == 2
    assert max(resid) < 1e-6 * payload["transport"]["vol"]


def test_transport_custom_grid(tmp_path):
    out = tmp_path / "t.json"
    assert run_cli("transport", "--resolution", "16,8",
                   "--t-grid", "0.01,0.03,0.06,0.1", "--out", str(out)) == 0
    assert read_json(out)["transport"]["t_grid"] == [0.01, 0.03, 0.06, 0.1]


def test_jacobian_passes(tmp_path):
    out = tmp_path / "j.json"
    assert run_cli("jacobian", "--samples", "30", "--out", str(out)) == 0
    payload = read_json(out)
    assert payload["jacobian"]["pass"] is True
    assert [row["t"] for row in payload["jacobian"]["rows"]] == [0.01, 0.05, 0.1]


def test_jacobian_impossible_tolerance_exits_2(tmp_path):
    assert run_cli("jacobian", "--samples", "5", "--det-tol", "0",
                   "--out", str(tmp_path / "j.json")) == 2


def test_jacobian_k2(tmp_path):
    out = tmp_path / "j.json"
    assert run_cli("jacobian", "--k", "2", "--samples", "10",
                   "--out", str(out)) == 0
    assert read_json(out)["jacobian"]["pass"] is True


def test_optimize_runs_and_respects_bound(tmp_path):
    out = tmp_path / "o.json"
    assert run_cli("optimize", "--resolution", "10,5", "--max-iters", "40",
                   "--seed", "2", "--out", str(out)) == 0
    payload = read_json(out)
    opt = payload["optimization"]
    assert opt["final_energy"] >= opt["bound"] - 1e-3 * opt["vol"]
    objs = [row["objective"] for row in opt["trajectory"]]
    assert all(b <= a + 1e-12 for a, b in zip(objs, objs[1:]))


def test_field_file_round_trip_through_cli(tmp_path):
    path = tmp_path / "field.json"
    rng = np.random.default_rng(0)
    spec = FieldSpec.perturbed(1, rng.uniform(-0.2, 0.2, 12),
                               BumpProfile(1.0, canonical_center(1)))
    save_field(spec, path)
    out = tmp_path / "e.json"
    assert run_cli("energy", "--field", f"file:{path}", "--domain", "cap:rho=1.0",
                   "--resolution", "16,8", "--out", str(out)) == 0
    payload = read_json(out)
    assert payload["energy"]["field_kind"] == "perturbed"
    assert payload["energy"]["energy"] >= payload["energy"]["bound"] - 1e-6


def test_field_file_k_mismatch_is_operational_error(tmp_path):
    path = tmp_path / "field.json"
    save_field(FieldSpec.hopf(2), path)
    assert run_cli("energy", "--k", "1", "--field", f"file:{path}") == 1


def test_sweep_rows(tmp_path):
    out = tmp_path / "s.json"
    assert run_cli("sweep", "--rhos", "0.5,1.0", "--resolution", "10,5",
                   "--starts", "1", "--max-iters", "25", "--out", str(out)) == 0
    payload = read_json(out)
    assert len(payload["rows"]) == 2
    for row, rho in zip(payload["rows"], (0.5, 1.0)):
        assert row["bound"] == pytest.approx(2.5 * row["vol"])
        expected = 2 * math.pi * (rho - math.sin(rho) * math.cos(rho))
        assert row["vol"] == pytest.approx(expected, abs=1e-6)


def test_config_file_layering(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"resolution": "16,8", "domain": "cap:rho=0.7"}))
    out = tmp_path / "e.json"
    # flag overrides config's domain; config supplies resolution
    assert run_cli("energy", "--config", str(cfg), "--domain", "cap:rho=1.0",
                   "--out", str(out)) == 0
    payload = read_json(out)
    assert payload["meta"]["domain"] == "cap:rho=1"
    assert payload["meta"]["resolution"]["radial"] == 16


def test_config_unknown_key_rejected(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"resolutionn": "16,8"}))
    assert run_cli("energy", "--config", str(cfg)) == 1


def test_bad_domain_is_operational_error():
    assert run_cli("energy", "--domain", "sphere") == 1


def test_unknown_flag_is_operational_error():
    assert run_cli("energy", "--nope", "1") == 1


def test_byte_identical_reports(tmp_path):
    pairs = [
        ("energy", ["--resolution", "24,12", "--seed", "5"]),
        ("transport", ["--resolution", "16,8", "--seed", "5"]),
        ("jacobian", ["--samples", "20", "--seed", "5"]),
        ("verify-identities", ["--samples", "10000", "--seed", "5"]),
        ("optimize", ["--resolution", "8,4", "--max-iters", "8", "--seed", "5"]),
    ]
    for cmd, flags in pairs:
        a, b = tmp_path / f"{cmd}-a.json", tmp_path / f"{cmd}-b.json"
        assert run_cli(cmd, *flags, "--out", str(a)) in (0, 2)
        assert run_cli(cmd, *flags, "--out", str(b)) in (0, 2)
        assert a.read_bytes() == b.read_bytes()


def test_threads_do_not_change_output(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["energy", "--domain", "cap:rho=1.0", "--resolution", "24,12"]
    assert run_cli(*args, "--threads", "1", "--out", str(a)) == 0
    assert run_cli(*args, "--threads", "4", "--out", str(b)) == 0
    assert a.read_bytes() == b.read_bytes()
