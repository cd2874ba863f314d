import json
from pathlib import Path

import pytest

from realclocks import cli, textio
from realclocks.config import load_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc) if isinstance(doc, dict) else doc)
    return p


def _summary(out_dir):
    text = (Path(out_dir) / "summary.txt").read_text()
    return dict(line.split(" = ", 1) for line in text.splitlines())


SMALL_DEPHASING = {
    "experiment": "dephasing_compare",
    "clock": {"theta": 0.1, "kappa": 0.01},
    "system": {"energies": [0.0, 1.0, 2.5]},
    "initial_state": {"preset": "plus"},
    "numeric": {"dt": 0.005, "horizon": 2.0, "n_paths": 600, "n_snapshots": 20, "seed": 4},
}


def test_validate_prints_derived_quantities(capsys):
    assert cli.main(["validate", str(CONFIGS / "qubit_dephasing.json")]) == 0
    out = capsys.readouterr().out
    assert "D = 0.00025" in out and "config OK" in out


def test_validate_warns_outside_markov_regime(capsys):
    assert cli.main(["validate", str(CONFIGS / "classical_release.json")]) == 0
    assert "Markov approximation questionable" in capsys.readouterr().out


def test_unparseable_json_is_status_2(tmp_path, capsys):
    p = _write(tmp_path, '{"experiment": "clock_stats",\n  "clock": {"theta": 1 "kappa": 2}}')
    assert cli.main(["run", str(p)]) == 2
    assert ":2:" in capsys.readouterr().err


def test_schema_violation_is_status_2(tmp_path):
    p = _write(tmp_path, {"experiment": "clock_stats", "clock": {"theta": 1.0, "kappa": 0.1}, "bogus": 1})
    assert cli.main(["validate", str(p)]) == 2


def test_missing_hamiltonian_file_is_status_2(tmp_path, capsys):
    doc = dict(SMALL_DEPHASING, system={"file": "nowhere.ham"})
    assert cli.main(["run", str(_write(tmp_path, doc)), "--out", str(tmp_path / "o")]) == 2
    assert "nowhere.ham" in capsys.readouterr().err


def test_numeric_bound_is_status_3(tmp_path):
    doc = dict(SMALL_DEPHASING, clock={"theta": -1.0, "kappa": 0.01})
    assert cli.main(["validate", str(_write(tmp_path, doc))]) == 3
    doc = dict(SMALL_DEPHASING, numeric=dict(SMALL_DEPHASING["numeric"], dt=0.05))
    assert cli.main(["run", str(_write(tmp_path, doc))]) == 3


def test_failed_check_is_status_1(tmp_path):
    # too coarse a step for a 1e-8 match against the exact solution
    doc = {
        "experiment": "master_trajectory",
        "clock": {"theta": 0.1, "kappa": 0.005},
        "system": {"energies": [0.0, 1.0]},
        "initial_state": {"preset": "plus"},
        "numeric": {"dt": 0.1, "horizon": 3000.0, "n_snapshots": 10},
        "output_dir": "o",
    }
    assert cli.main(["run", str(_write(tmp_path, doc))]) == 1
    s = _summary(tmp_path / "o")
    assert s["check_matches_exact_1e-8"] == "fail" and s["status"] == "1"


def test_relative_paths_resolve_against_config(tmp_path):
    (tmp_path / "h.ham").write_text("2\n0 0 0 0\n0 1 0 0\n1 0 0 0\n1 1 1 0\n")
    doc = dict(SMALL_DEPHASING, system={"file": "h.ham"}, output_dir="results")
    cfg = load_config(_write(tmp_path, doc))
    assert cfg.H.dim == 2 and cfg.output_dir == tmp_path / "results"


def test_seed_override_changes_output(tmp_path):
    p = _write(tmp_path, SMALL_DEPHASING)
    assert cli.main(["run", str(p), "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["run", str(p), "--out", str(tmp_path / "b"), "--seed", "5"]) == 0
    assert _summary(tmp_path / "b")["numeric_seed"] == "5"
    assert (tmp_path / "a" / "dephasing_report.csv").read_bytes() != \
        (tmp_path / "b" / "dephasing_report.csv").read_bytes()


def test_threads_give_byte_identical_outputs(tmp_path):
    p = _write(tmp_path, SMALL_DEPHASING)
    for k in (1, 3):
        assert cli.main(["run", str(p), "--out", str(tmp_path / f"t{k}"), "--threads", str(k)]) == 0
    files = sorted(f.name for f in (tmp_path / "t1").iterdir())
    assert files == sorted(f.name for f in (tmp_path / "t3").iterdir())
    for name in files:
        assert (tmp_path / "t1" / name).read_bytes() == (tmp_path / "t3" / name).read_bytes(), name


def test_bad_thread_count(tmp_path):
    assert cli.main(["run", str(_write(tmp_path, SMALL_DEPHASING)), "--threads", "0"]) == 2


@pytest.mark.parametrize("name,artifacts", [
    ("bath_spectrum.json", ["bath_spectrum.csv", "bath_chi_squared.csv"]),
    ("classical_bump.json", ["density_grid.csv", "density_spectral.csv", "modes.csv"]),
])
def test_shipped_configs_run_clean(tmp_path, name, artifacts):
    out = tmp_path / "out"
    assert cli.main(["run", str(CONFIGS / name), "--out", str(out)]) == 0
    for a in artifacts:
        header, data, _ = textio.read_csv(out / a)
        assert data.size > 0
    assert _summary(out)["status"] == "0"


def test_clock_stats_ideal_clock(tmp_path):
    doc = {"experiment": "clock_stats", "clock": {"theta": 1.0, "kappa": 0.0},
           "numeric": {"dt": 0.05, "horizon": 5.0, "n_paths": 3}}
    assert cli.main(["run", str(_write(tmp_path, doc)), "--out", str(tmp_path / "o")]) == 0
    s = _summary(tmp_path / "o")
    assert s["check_ideal_clock_zero_stats"] == "pass"
    assert s["stats_theta_hat"] == "absent"
