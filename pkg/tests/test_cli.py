import csv
import json
import math

import numpy as np
import pytest
import yaml

from sepp_green import config as cfgmod
from sepp_green.cli import main
from sepp_green.config import ConfigError, RunConfig
from sepp_green.kernels import TriggerKernel


@pytest.fixture
def sim_dir(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "-o", str(out), "--set", "simulation.horizon=90",
                 "--set", "simulation.expected_events=700"]) == 0
    return out


def test_defaults_mirror_setup():
    c = RunConfig()
    assert (c.grid.dx_km, c.grid.dt_days, c.data.radius_km) == (0.25, 1.0, 5.0)
    assert (c.data.center_lat, c.data.center_lon) == (41.765, -87.665)
    assert (c.protocol.training_days, c.protocol.shift_days, c.protocol.samples) == (400, 2, 50)


def test_unknown_keys_rejected(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("protocol:\n  windows: 3\n")
    with pytest.raises(ConfigError, match="windows"):
        cfgmod.load(p)
    with pytest.raises(ConfigError):
        cfgmod.load(None, ["grid.dx_km=fast"])
    with pytest.raises(ConfigError):
        cfgmod.load(None, ["method=svm"])
    assert cfgmod.load(None, ["kde.bandwidth=3e-1"]).kde.bandwidth == 0.3


def test_example_config_loads():
    from pathlib import Path
    cfg = cfgmod.load(Path(__file__).parent.parent / "configs" / "burglary_chicago.yaml")
    assert cfg.protocol.r_cut == 0.4 and cfg.data.kinds == ["BURGLARY"]


def test_dump_roundtrip():
    cfg = cfgmod.load(None, ["protocol.samples=3", "ddgf.nt_lag=20", "data.start_date=2011-01-01"])
    again = cfgmod.from_dict(RunConfig, yaml.safe_load(cfgmod.dump(cfg)))
    assert cfgmod.to_dict(again) == cfgmod.to_dict(cfg)


def test_fit_ddgf_kernel_csv(sim_dir, tmp_path):
    out = tmp_path / "fit"
    assert main(["fit", "-i", str(sim_dir / "catalog.csv"), "-o", str(out), "--set", "ddgf.nt_lag=25"]) == 0
    k = TriggerKernel.from_csv(out / "kernel.csv")
    rows = list(csv.reader(l for l in open(out / "kernel.csv") if not l.startswith("#")))[1:]
    per_radius = {}
    for lag, r, _ in rows:
        per_radius.setdefault(r, []).append(float(lag))
    # lags 0 .. nt_lag for every radius
    assert all(v == [float(n) for n in range(26)] for v in per_radius.values())
    assert k.g.shape == (26, len(per_radius))
    assert (out / "phi.csv").exists() and (out / "resolved_config.yaml").exists()


def test_fit_em(sim_dir, tmp_path):
    out = tmp_path / "em"
    assert main(["fit", "-m", "em", "-i", str(sim_dir / "catalog.csv"), "-o", str(out),
                 "--set", "em.iterations=5"]) == 0
    model = json.loads((out / "em_model.json").read_text())
    assert len(model["loglik"]) == 5


def test_backtest_phm_report(sim_dir, tmp_path):
    out = tmp_path / "bt"
    rc = main(["backtest", "-i", str(sim_dir / "catalog.csv"), "-o", str(out), "--set", "methods=[phm]",
               "--set", "protocol.training_days=40", "--set", "protocol.samples=4"])
    assert rc == 0
    rep = json.loads((out / "report.json").read_text())
    for curve in rep["methods"]["phm"]["per_sample"]:
        if curve is None:
            continue
        for pai, area, hit in zip(curve["pai"], curve["area_fraction"], curve["hit_rate"]):
            assert abs(pai * area - hit) <= 2 * np.spacing(max(hit, 1e-300))
    assert (out / "table.csv").exists() and (out / "curves.csv").exists() and (out / "pai.svg").exists()


def test_kernel_export_log_fit(tmp_path):
    t = np.arange(0, 401, dtype=float)
    g0 = np.where(t > 0, -0.1 * np.log(0.01 * np.maximum(t, 1)), 0.0)
    k = TriggerKernel(np.stack([g0, g0 / 2], axis=1), t, np.array([0.0, 0.5]), 1.0, 0.25, method="ddgf")
    with open(tmp_path / "k.csv", "w") as fh:
        k.to_csv(fh)
    out = tmp_path / "exp"
    assert main(["kernel-export", "-k", str(tmp_path / "k.csv"), "-o", str(out)]) == 0
    fit = json.loads((out / "tail_fit.json").read_text())["fit"]
    assert fit["a"] == pytest.approx(0.1, rel=0.01) and fit["b"] == pytest.approx(0.01, rel=0.01)
    assert len((out / "g_r0.csv").read_text().splitlines()) == 402


def test_predict_outputs(sim_dir, tmp_path):
    out = tmp_path / "pred"
    assert main(["predict", "-m", "phm", "-i", str(sim_dir / "catalog.csv"), "-o", str(out), "--day", "91"]) == 0
    rows = (out / "ranking.csv").read_text().splitlines()
    assert rows[0] == "rank,j,i,value" and len(rows) > 1000


def test_config_echo_reproduces(sim_dir, tmp_path):
    out = tmp_path / "a"
    assert main(["fit", "-i", str(sim_dir / "catalog.csv"), "-o", str(out), "--set", "ddgf.nt_lag=10"]) == 0
    echoed = out / "resolved_config.yaml"
    out2 = tmp_path / "b"
    assert main(["fit", "-c", str(echoed), "-o", str(out2)]) == 0
    assert (out / "kernel.csv").read_bytes() == (out2 / "kernel.csv").read_bytes()
    resolved = yaml.safe_load(echoed.read_text())
    assert resolved["protocol"]["samples"] == 50 and resolved["ddgf"]["nt_lag"] == 10


def test_exit_codes(tmp_path, capsys):
    assert main(["fit", "-o", str(tmp_path), "--set", "nonsense=1"]) == 2
    assert main(["fit", "-o", str(tmp_path), "-i", str(tmp_path / "missing.csv")]) == 2
    assert main(["simulate", "-o", str(tmp_path), "--set", "simulation.branching=1.2"]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert all(line.startswith("sepp-green") for line in err)


def test_numerical_failure_exit_code(sim_dir, tmp_path):
    rc = main(["fit", "-i", str(sim_dir / "catalog.csv"), "-o", str(tmp_path / "x"),
               "--set", "ddgf.nt_lag=5", "--set", "ddgf.gamma=.nan"])
    assert rc == 3
