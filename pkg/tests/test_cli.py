import json
import os

import numpy as np
import pytest

from dyadreg.cli import main
from dyadreg.dgp import load_dataset, make_dgp, simulate
from dyadreg.estimator import BandwidthRule, bandwidth, nw_estimate
from dyadreg.kernels import make_kernel


def test_simulate_writes_dataset_and_manifest(tmp_path):
    out = str(tmp_path / "d.csv")
    rc = main(["simulate", "--n", "20", "--dgp", "theorem1", "--g", "sin_additive",
               "--seed", "7", "--out", out])
    assert rc == 0
    assert os.path.exists(out)
    assert os.path.exists(str(tmp_path / "d.units.csv"))
    assert os.path.exists(str(tmp_path / "d.manifest.json"))
    data, manifest = load_dataset(out)
    assert data.n_units == 20
    assert manifest["meta"]["seed"] == 7
    # identical to the in-memory pipeline
    direct = simulate(make_dgp("theorem1", "sin_additive"), 20, 7)
    assert np.array_equal(data.y, direct.y, equal_nan=True)


def test_roundtrip_estimate_matches_in_memory(tmp_path):
    out = str(tmp_path / "d.csv")
    est = str(tmp_path / "est.csv")
    assert main(["simulate", "--n", "25", "--seed", "3", "--out", out]) == 0
    rc = main(["estimate", "--data", out, "--kernel", "gaussian",
               "--bandwidth", "uniform-optimal:1.0", "--grid", "0.2:0.8:4", "--out", est])
    assert rc == 0
    data = simulate(make_dgp("theorem1", "sin_additive"), 25, 3)
    kernel = make_kernel("gaussian", 2)
    h = bandwidth(BandwidthRule("uniform-optimal", 1.0, 2.0, 1), 25)
    axis = np.linspace(0.2, 0.8, 4)
    a, b = np.meshgrid(axis, axis, indexing="ij")
    grid = np.stack([a.ravel(), b.ravel()], axis=-1)
    expect = nw_estimate(data, kernel, h, grid)
    with open(est) as fh:
        rows = [line.split(",") for line in fh.read().strip().splitlines()[1:]]
    assert len(rows) == 16
    for row, g_exp, f_exp, d_exp in zip(rows, expect.g_hat, expect.f_hat, expect.defined):
        assert float(row[2]) == pytest.approx(f_exp, rel=1e-12)
        if d_exp:
            assert float(row[3]) == pytest.approx(g_exp, rel=1e-12)
            assert row[4] == "1"
        else:
            assert row[3] == "" and row[4] == "0"


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_config_error_exits_2(tmp_path):
    out = str(tmp_path / "d.csv")
    assert main(["simulate", "--n", "10", "--seed", "1", "--out", out]) == 0
    est = str(tmp_path / "est.csv")
    rc = main(["estimate", "--data", out, "--kernel", "sinc",
               "--grid", "0:1:3", "--out", est])
    assert rc == 2
    assert not os.path.exists(est)


def test_rates_config_unknown_key_exits_2(tmp_path):
    cfg = tmp_path / "r.cfg"
    cfg.write_text("n_list = 10,20,40,80\nreps = 50\nout.prefix = x\nbogus.key = 1\nw0 = 0.5,0.5\n")
    rc = main(["rates", "--config", str(cfg)])
    assert rc == 2


def test_rates_missing_key_exits_2(tmp_path):
    cfg = tmp_path / "r.cfg"
    cfg.write_text("reps = 50\nw0 = 0.5,0.5\nout.prefix = x\n")
    assert main(["rates", "--config", str(cfg)]) == 2


def test_rates_bad_values_exit_2(tmp_path):
    base = "n_list = 10,20,40,80\nreps = 50\nw0 = 0.5,0.5\nout.prefix = x\n"
    cfg = tmp_path / "k.cfg"
    cfg.write_text(base + "kernel = sinc\n")
    assert main(["rates", "--config", str(cfg)]) == 2
    cfg2 = tmp_path / "m.cfg"
    cfg2.write_text(base + "bandwidth.mode = magic\n")
    assert main(["rates", "--config", str(cfg2)]) == 2
    cfg3 = tmp_path / "g.cfg"
    cfg3.write_text(base + "dgp.g = nope\n")
    assert main(["rates", "--config", str(cfg3)]) == 2
    cfg4 = tmp_path / "missing.cfg"
    assert main(["rates", "--config", str(cfg4)]) == 2


def test_rates_outputs_and_determinism(tmp_path):
    prefix1 = str(tmp_path / "a")
    prefix2 = str(tmp_path / "b")
    base = (
        "dgp.kind = theorem1\n"
        "dgp.g = sin_additive\n"
        "kernel = epanechnikov\n"
        "bandwidth.mode = pointwise-optimal\n"
        "bandwidth.c0 = 0.8\n"
        "mode = pointwise\n"
        "w0 = 0.5,0.5\n"
        "n_list = 20,40,80,160\n"
        "reps = 50\n"
        "seed = 5\n"
    )
    cfg1 = tmp_path / "r1.cfg"
    cfg1.write_text(base + f"out.prefix = {prefix1}\n")
    cfg2 = tmp_path / "r2.cfg"
    cfg2.write_text(base + f"out.prefix = {prefix2}\n")
    assert main(["rates", "--config", str(cfg1)]) == 0
    assert main(["rates", "--config", str(cfg2)]) == 0
    for ext in (".csv", ".fit.json", ".plot.dat"):
        with open(prefix1 + ext, "rb") as f1, open(prefix2 + ext, "rb") as f2:
            b1, b2 = f1.read(), f2.read()
        assert b1 == b2
        assert len(b1) > 0


def test_minimax_report(tmp_path):
    out = str(tmp_path / "mm.json")
    rc = main(["minimax", "--variant", "two-point", "--beta", "2", "--c0", "1",
               "--n", "10,50", "--reps", "60", "--seed", "1", "--out", out])
    assert rc == 0
    with open(out) as fh:
        report = json.load(fh)
    assert len(report["reports"]) == 2
    for body in report["reports"]:
        assert body["kl_mean"] <= body["bound"] + 3 * body["kl_se"]
        assert body["separation"]["passed"]
        assert body["holder_pass"]
        assert body["woodbury_max_gap"] <= 1e-8
        assert body["kl_within_bound"]


def test_minimax_refusal_exits_3_without_partial_output(tmp_path):
    out = str(tmp_path / "mm.json")
    rc = main(["minimax", "--variant", "two-point", "--c0", "0.05",
               "--n", "10", "--reps", "10", "--seed", "1", "--out", out])
    assert rc == 3
    assert not os.path.exists(out)


def test_fano_packing_refusal_exits_3(tmp_path):
    out = str(tmp_path / "mm.json")
    rc = main(["minimax", "--variant", "fano", "--c0", "1.0",
               "--n", "50", "--reps", "10", "--seed", "1", "--out", out])
    assert rc == 3
    assert not os.path.exists(out)


def test_diagnose_writes_table(tmp_path):
    out = str(tmp_path / "dom.csv")
    rc = main(["diagnose", "--n", "20,40", "--reps", "50", "--w", "0.5,0.5",
               "--bandwidth", "uniform-optimal:1.0", "--seed", "2", "--out", out])
    assert rc == 0
    with open(out) as fh:
        lines = fh.read().strip().splitlines()
    assert lines[0] == "n,var_t1,var_t2,ratio,n_excluded"
    assert len(lines) == 3


def test_manifest_flag_writes_run_manifest(tmp_path):
    out = str(tmp_path / "d.csv")
    rc = main(["--manifest", "simulate", "--n", "10", "--seed", "4", "--out", out])
    assert rc == 0
    with open(out + ".run.json") as fh:
        man = json.load(fh)
    assert man["subcommand"] == "simulate"
    assert man["seed"] == 4
    assert len(man["config_hash"]) == 64
    assert any(p.endswith("d.csv") for p in man["outputs"])


def test_version_flag():
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
