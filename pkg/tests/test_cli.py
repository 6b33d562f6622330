import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lorentz_gas.cli import EXIT_INVALID, EXIT_OK, EXIT_PARTIAL, main
from lorentz_gas.experiment import (
    RAW_COLUMNS,
    ExperimentPlan,
    RunSettings,
    config_hash,
    dataset_name,
    load_dataset,
)

PLAN = """
# desk-scale sweep
radii = 0, 0.25, 0.6
n_particles = 10000
seed = 4
probes = log 10 200 16   ; sixteen probes
out = {out}
"""


def test_plan_parsing(tmp_path):
    plan = ExperimentPlan.from_text(PLAN.format(out=tmp_path) + "n_particles[0.25] = 1e5\n")
    assert plan.radii == [0.0, 0.25, 0.6]
    assert plan.settings.seed == 4
    assert len(plan.settings.probes) == 16
    assert plan.settings_for(0.25).n_particles == 100_000
    assert plan.settings_for(0.6).n_particles == 10_000
    assert plan.spec_for(0.6).config.R == 0.6


@given(st.lists(st.floats(0.0, 0.7), min_size=1, max_size=5, unique=True),
       st.integers(1, 10**7), st.integers(0, 2**63),
       st.lists(st.floats(1.0, 500.0), min_size=1, max_size=8),
       st.sampled_from(["wall", "disk", "total"]))
def test_plan_round_trip(radii, n, seed, probes, norm):
    settings = RunSettings(n_particles=n, seed=seed, probes=probes, normalization=norm, t_obs=600.0)
    overrides = {radii[0]: {"n_particles": n + 1, "probes": sorted(probes)[:1]}}
    plan = ExperimentPlan(radii, settings, overrides, out="somewhere/else")
    back = ExperimentPlan.from_text(plan.to_text())
    assert back == plan
    assert back.to_text() == plan.to_text()


@pytest.mark.parametrize("text", ["radii = 0.2, 0.8", "radii = -0.1", "radii = 0.2\nbogus = 1",
                                  "radii = 0.2\nn_particles[0.3] = 5", "n_particles = 3"])
def test_plan_rejects(text):
    with pytest.raises(ValueError):
        ExperimentPlan.from_text(text)


def test_invalid_radius_rejected_before_simulation(tmp_path, capsys):
    out = tmp_path / "bad"
    assert main(["simulate", "--radii", "0.2,0.8", "--out", str(out)]) == EXIT_INVALID
    assert not out.exists()
    assert "0.8" in capsys.readouterr().err


@pytest.fixture(scope="module")
def sweep(tmp_path_factory):
    root = tmp_path_factory.mktemp("sweep")
    cfg = root / "plan.txt"
    cfg.write_text(PLAN.format(out=root / "a"))
    assert main(["simulate", "--config", str(cfg), "--workers", "4"]) == EXIT_OK
    assert main(["simulate", "--config", str(cfg), "--out", str(root / "b")]) == EXIT_OK
    return root


def test_simulate_writes_datasets(sweep):
    for R in (0.0, 0.25, 0.6):
        d = sweep / "a" / dataset_name(R)
        man = json.loads((d / "manifest.json").read_text())
        assert man["R"] == R and man["seed"] == 4 and man["n_particles"] == 10_000
        assert man["aborted"] == []
        assert {"python", "numpy", "scipy", "lorentz_gas"} <= set(man["versions"])
        assert len(man["probe_times"]) == 16
        with open(d / "probe_000.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == RAW_COLUMNS
        assert len(rows) == 10_001


def test_rerun_is_byte_identical(sweep):
    for R in (0.0, 0.25, 0.6):
        a, b = sweep / "a" / dataset_name(R), sweep / "b" / dataset_name(R)
        for f in sorted(a.glob("*.csv")):
            assert f.read_bytes() == (b / f.name).read_bytes(), f.name
        assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()


def test_dataset_reload_matches_manifest(sweep):
    ds = load_dataset(sweep / "a" / dataset_name(0.25))
    assert ds.n_wall.shape == (10_000, 16)
    plan = ExperimentPlan.load(sweep / "a" / "plan.cfg")
    assert config_hash(plan.spec_for(0.25)) == ds.manifest["config_hash"]
    m = ds.moments()
    assert m.mean("wall", 15) == pytest.approx(200.0, rel=0.02)


def test_fit_report(sweep):
    assert main(["fit", str(sweep / "a"), "--window", "50:200"]) == EXIT_OK
    rep = json.loads((sweep / "a" / "fit_report.json").read_text())
    assert [e["R"] for e in rep["datasets"]] == [0.0, 0.25, 0.6]
    for e in rep["datasets"]:
        assert {"z", "stderr", "window", "normalization", "R", "L", "N", "seed", "zeta4_wall"} <= set(e)
        assert e["z"] > 0 and e["window_requested"] == [50.0, 200.0]
        assert 50.0 <= e["window"][0] < e["window"][1] <= 200.0 * (1 + 1e-12)
    assert rep["datasets"][0]["z"] == pytest.approx(1.0, abs=0.05)


def test_hist_and_missing_probe(sweep, capsys, tmp_path):
    d = sweep / "a" / dataset_name(0.6)
    assert main(["hist", str(d), "--probe", "100"]) == EXIT_INVALID
    err = capsys.readouterr().err
    assert "available" in err and "200" in err
    assert main(["hist", str(d), "--probe", "200", "--kind", "disk", "--out", str(tmp_path)]) == EXIT_OK
    with open(tmp_path / "hist_disk_015.csv", newline="") as fh:
        header = next(csv.reader(fh))
    assert header == ["bin_center", "density", "reduced_bin_center", "reduced_density"]
    gof = json.loads((tmp_path / "hist_disk_015_gof.json").read_text())
    assert gof["oracle"] == "gaussian"
    assert (tmp_path / "hist_disk_015_oracle_gaussian.csv").exists()


def test_oracle_command(tmp_path, capsys):
    out = tmp_path / "d0.csv"
    assert main(["oracle", "square", "--grid", "0.7:1.15:46", "--out", str(out)]) == EXIT_OK
    data = np.genfromtxt(out, delimiter=",", names=True)
    assert data["density"][0] == 0.0 and np.all(np.isfinite(data["density"]))
    assert main(["oracle", "gaussian", "--grid=-4:4:9"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "x,density" and len(lines) == 10
    assert float(lines[5].split(",")[1]) == pytest.approx(1 / math.sqrt(2 * math.pi))
    assert main(["oracle", "sigma-quasi-chaotic", "--grid", "0:0.5:11"]) == EXIT_OK
    assert main(["oracle", "nope"]) == EXIT_INVALID
    assert "available" in capsys.readouterr().err


def test_partial_failure_exit_code(tmp_path):
    cfg = tmp_path / "p.txt"
    cfg.write_text(f"radii = 0.3\nn_particles = 30\nevent_budget = 60\nprobes = 30, 60\nt_obs = 60\nout = {tmp_path}\n")
    assert main(["simulate", "--config", str(cfg)]) == EXIT_PARTIAL
    man = json.loads((tmp_path / dataset_name(0.3) / "manifest.json").read_text())
    assert man["aborted"]


def test_validate_quick(capsys):
    assert main(["validate", "--quick"]) == EXIT_OK
    assert "checks passed" in capsys.readouterr().out
