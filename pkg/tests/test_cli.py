import json

import pytest

from copolymer import artifacts
from copolymer.cli import build_parser, main


@pytest.fixture(autouse=True)
def single_thread(monkeypatch):
    monkeypatch.delenv("COPOLYMER_THREADS", raising=False)


def write_config(tmp_path, text):
    path = tmp_path / "run.cfg"
    path.write_text(text, encoding="utf-8")
    return str(path)


def snapshot(directory):
    return {path.name: path.read_bytes() for path in sorted(directory.iterdir())}


ENTROPY_CONFIG = """\
# small entropy run
entropy_ladder = 8, 16, 32
entropy_u = 2.0, 3.0
entropy_l = 0.0, 1.0
oracle_max_L = 2
"""


def test_entropy_run_is_reproducible(tmp_path):
    config = write_config(tmp_path, ENTROPY_CONFIG)
    out = tmp_path / "entropy"
    argv = ["entropy", "--config", config, "--out", str(out), "--budget", "8", "--seed", "3"]
    assert main(argv) == 0
    first = snapshot(out)
    assert set(first) == {
        "entropy_grid.csv",
        "entropy_ladder.csv",
        "entropy_oracle.csv",
        "config.txt",
        "manifest.json",
    }
    assert artifacts.verify_manifest(out) == []
    assert main(argv) == 0
    assert snapshot(out) == first

    header, rows = artifacts.read_csv(out / "entropy_oracle.csv")
    assert header[-1] == "equal"
    assert rows and all(row[-1] == "true" for row in rows)
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["command"] == "entropy"
    assert manifest["config"]["seed"] == 3


def test_oracle_check(tmp_path):
    config = write_config(tmp_path, "oracle_max_L = 2\npath_budget = 6\n")
    out = tmp_path / "oracle"
    assert main(["oracle-check", "--config", config, "--out", str(out), "--budget", "8"]) == 0
    header, rows = artifacts.read_csv(out / "oracle_check.csv")
    assert header == ["check", "case", "expected", "actual", "passed"]
    assert {row[0] for row in rows} == {
        "path_count",
        "path_free_energy",
        "flat_entropy",
        "derivative",
        "chi_inverse",
        "psi_grid",
        "psi_unique",
    }
    assert all(row[-1] == "true" for row in rows)


def test_free_energy_below_zero(tmp_path):
    config = write_config(tmp_path, "alpha = 2.0\nbeta = -1.0\nfamily = hor\n")
    out = tmp_path / "free"
    assert main(["free-energy", "--config", config, "--out", str(out)]) == 0
    data = json.loads((out / "free_energy.json").read_text(encoding="utf-8"))
    assert data["summary"]["argmax"] == "hor"
    assert data["summary"]["bound"] == "lower bound (family of size 1)"
    member = data["members"]["hor"]
    assert member["value"] == max(member["localized"], member["delocalized"])


def test_invalid_configuration_exit_code(tmp_path):
    config = write_config(tmp_path, "alpha = 1.0\nbeta = 2.0\n")
    assert main(["entropy", "--config", config, "--out", str(tmp_path / "bad")]) == 2
    assert not (tmp_path / "bad").exists()


def test_unknown_key_exit_code(tmp_path):
    config = write_config(tmp_path, "gamma = 1.0\n")
    assert main(["entropy", "--config", config]) == 2


def test_verb_is_required():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
    args = build_parser().parse_args(["phase-diagram", "--threads", "2", "-v"])
    assert (args.command, args.threads, args.verbose) == ("phase-diagram", 2, True)


def test_interface_run(tmp_path):
    text = "alpha = 2.0\nbeta = 1.0\ninterface_ladder = 4, 8\ninterface_samples = 4\n"
    text += "mu_max = 2.0\nmu_step = 0.5\n"
    out = tmp_path / "interface"
    assert main(["interface", "--config", write_config(tmp_path, text), "--out", str(out)]) == 0
    assert set(snapshot(out)) == {
        "interface_table.json",
        "interface.csv",
        "interface_diagnostics.json",
        "config.txt",
        "manifest.json",
    }
    assert artifacts.verify_manifest(out) == []
    header, rows = artifacts.read_csv(out / "interface.csv")
    assert header == ["mu", "estimate", "error", "envelope", "kappa0"]
    assert [float(row[0]) for row in rows] == [1.0, 1.5, 2.0]
    assert all(float(row[3]) >= float(row[4]) - 1e-12 for row in rows)
    diagnostics = json.loads((out / "interface_diagnostics.json").read_text(encoding="utf-8"))
    assert not diagnostics["exact"]
    assert "collapse" not in diagnostics


def test_interface_run_below_zero_collapses(tmp_path):
    text = "alpha = 2.0\nbeta = -1.0\nmu_max = 3.0\nmu_step = 0.5\n"
    out = tmp_path / "interface"
    assert main(["interface", "--config", write_config(tmp_path, text), "--out", str(out)]) == 0
    diagnostics = json.loads((out / "interface_diagnostics.json").read_text(encoding="utf-8"))
    assert diagnostics["exact"]
    assert [entry["mu"] for entry in diagnostics["collapse"]] == [1.5, 2.0, 3.0]
    assert all(entry["passed"] for entry in diagnostics["collapse"])


PHASE_CONFIG = """\
family = hor
p = 0.5
scan_alpha_min = 1.0
scan_alpha_max = 2.0
scan_alpha_steps = 2
scan_beta_min = -1.0
scan_beta_max = 0.0
scan_beta_steps = 2
betac_alphas = 1.0
betac_samples = 4
betac_ladder = 4
"""


def test_phase_diagram_run(tmp_path):
    out = tmp_path / "phases"
    assert main(["phase-diagram", "--config", write_config(tmp_path, PHASE_CONFIG), "--out", str(out)]) == 0
    assert set(snapshot(out)) == {"phases.csv", "critical_curve.csv", "config.txt", "manifest.json"}
    assert artifacts.verify_manifest(out) == []
    header, rows = artifacts.read_csv(out / "phases.csv")
    assert header[:4] == ["alpha", "beta", "p", "phase"]
    assert len(rows) == 4
    assert not any(row[3].startswith("L") for row in rows)
    header, rows = artifacts.read_csv(out / "critical_curve.csv")
    assert header == ["alpha", "beta_c", "lower", "upper", "decided"]
    assert [float(row[0]) for row in rows] == [1.0]
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["family_size"] == 1
    assert manifest["betac_ladder"] == [4]
    assert "alpha_star" not in manifest
