import json
import math

import numpy as np
import pytest

from singularflow.cli import main

POWER_CFG = """
field = power1d
alpha = 0.3333333333333333
x0 = 1.0,
t0 = 0.0
t1 = 1.0
"""

SADDLE_CFG = """
field = saddle2d
alpha = 0.3333333333333333
x0 = -1.0, 0.0
t0 = 0.0
t1 = 3.0
"""

SPIRAL_CFG = """
field = spiral2d
alpha = 0.3333333333333333
x0 = 1.0, 0.0
t0 = 0.0
t1 = 1.0
"""

SWEEP_EXPEL_CFG = """
field = saddle2d
alpha = 0.3333333333333333
x0 = -1.0, 0.0
t0 = 0.0
t1 = 2.5
regularization.kind = polynomial_blend
regularization.g0 = 1.0, -2.0
nu.list = 0.1, 0.05, 0.025
sweep.t_start = 0.0
sweep.t_stop = 2.5
sweep.t_points = 61
"""

SWEEP_TRAP_CFG = SWEEP_EXPEL_CFG.replace("regularization.g0 = 1.0, -2.0",
                                         "regularization.g0 = 1.0, 1.3")


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_simulate_power1d(tmp_path):
    cfg = write(tmp_path, "run.cfg", POWER_CFG)
    out = tmp_path / "out"
    assert main(["simulate", cfg, "--outdir", str(out), "--quiet"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "completed"
    assert summary["final_state"][0] == pytest.approx((5 / 3) ** 1.5, rel=1e-8)
    assert summary["schema_version"] == "1"
    lines = (out / "trajectory.csv").read_text().strip().split("\n")
    assert lines[0] == "t,x1"


def test_simulate_saddle_reports_blowup(tmp_path):
    cfg = write(tmp_path, "run.cfg", SADDLE_CFG)
    out = tmp_path / "out"
    assert main(["simulate", cfg, "--outdir", str(out), "--quiet"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "hit_radius_floor"
    assert summary["t_b"] == pytest.approx(1.5, abs=1e-6)


def test_simulate_invalid_alpha_exits_2(tmp_path):
    cfg = write(tmp_path, "bad.cfg", POWER_CFG.replace("0.3333333333333333", "1.5"))
    assert main(["simulate", cfg, "--outdir", str(tmp_path), "--quiet"]) == 2


def test_simulate_missing_key_exits_2(tmp_path):
    cfg = write(tmp_path, "bad.cfg", "field = saddle2d\nalpha = 0.3\n")
    assert main(["simulate", cfg, "--outdir", str(tmp_path), "--quiet"]) == 2


def test_classify_saddle_catalog(tmp_path):
    cfg = write(tmp_path, "run.cfg", SADDLE_CFG)
    out = tmp_path / "out"
    assert main(["classify", cfg, "--outdir", str(out), "--quiet"]) == 0
    catalog = json.loads((out / "attractors.json").read_text())
    fps = [a for a in catalog["attractors"] if a["kind"] == "fixed_point"]
    assert len(fps) == 4
    labels = sorted(a["label"] for a in fps)
    assert labels == ["defocusing", "defocusing", "focusing", "focusing"]
    verdict = json.loads((out / "verdict.json").read_text())
    assert verdict["verdict"] == "blowup"
    assert verdict["t_b"] == pytest.approx(1.5, abs=1e-6)
    assert verdict["averages"]["upper"] == pytest.approx(-1.0, abs=1e-6)


def test_classify_spiral_periodic_orbit(tmp_path):
    cfg = write(tmp_path, "run.cfg", SPIRAL_CFG)
    out = tmp_path / "out"
    assert main(["classify", cfg, "--outdir", str(out), "--quiet"]) == 0
    catalog = json.loads((out / "attractors.json").read_text())
    cycles = [a for a in catalog["attractors"] if a["kind"] == "limit_cycle"]
    assert len(cycles) == 1
    assert cycles[0]["mean_radial"] == pytest.approx(1.0, abs=1e-8)
    assert cycles[0]["period"] == pytest.approx(2 * math.pi, abs=1e-8)
    verdict = json.loads((out / "verdict.json").read_text())
    assert verdict["verdict"] == "escape_to_infinity"


def test_sweep_expelling(tmp_path):
    cfg = write(tmp_path, "run.cfg", SWEEP_EXPEL_CFG)
    out = tmp_path / "out"
    assert main(["sweep", cfg, "--outdir", str(out), "--quiet"]) == 0
    report = json.loads((out / "sweep.json").read_text())
    assert report["verdict"] == "converged_to(fixed_ray)"
    assert len(report["nu"]) == 3
    for name in report["trajectory_files"]:
        assert (out / name).exists()
    rows = (out / report["trajectory_files"][0]).read_text().strip().split("\n")
    assert rows[0] == "t,x1,x2"
    assert len(rows) == 62


def test_sweep_trapping(tmp_path):
    cfg = write(tmp_path, "run.cfg", SWEEP_TRAP_CFG)
    out = tmp_path / "out"
    assert main(["sweep", cfg, "--outdir", str(out), "--quiet"]) == 0
    report = json.loads((out / "sweep.json").read_text())
    assert report["verdict"] == "trivial_zero"
    assert report["decay_exponent"] > 0


def test_sweep_requires_regularization(tmp_path):
    cfg = write(tmp_path, "run.cfg", SADDLE_CFG)
    assert main(["sweep", cfg, "--outdir", str(tmp_path), "--quiet"]) == 2


def test_reproduce_figtriv(tmp_path):
    out = tmp_path / "fig"
    assert main(["reproduce", "figTriv", "--outdir", str(out), "--quiet"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["figure"] == "figTriv"
    names = {f["name"] for f in manifest["files"]}
    assert "figTriv_expel_right.csv" in names
    for f in manifest["files"]:
        assert (out / f["name"]).exists()
    # the expelling curve passes through nu^{1/3} sigma / 2 at x = 0
    rows = (out / "figTriv_expel_right.csv").read_text().strip().split("\n")[1:]
    data = np.array([[float(v) for v in row.split(",")] for row in rows])
    mid = np.argmin(np.abs(data[:, 0]))
    assert data[mid, 1] == pytest.approx(0.4 ** (1 / 3) / 2, abs=1e-9)


def test_reproduce_unknown_figure(tmp_path):
    assert main(["reproduce", "fig99", "--outdir", str(tmp_path), "--quiet"]) == 3


def test_outputs_deterministic(tmp_path):
    cfg = write(tmp_path, "run.cfg", SADDLE_CFG)
    outs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        assert main(["simulate", cfg, "--outdir", str(out), "--quiet"]) == 0
        outs.append((out / "trajectory.csv").read_bytes() + (out / "summary.json").read_bytes())
    assert outs[0] == outs[1]


def test_tol_scale_flag(tmp_path):
    cfg = write(tmp_path, "run.cfg", POWER_CFG)
    out1, out2 = tmp_path / "t1", tmp_path / "t2"
    assert main(["simulate", cfg, "--outdir", str(out1), "--quiet", "--tol-scale", "1e4"]) == 0
    assert main(["simulate", cfg, "--outdir", str(out2), "--quiet"]) == 0
    n1 = len((out1 / "trajectory.csv").read_text().strip().split("\n"))
    n2 = len((out2 / "trajectory.csv").read_text().strip().split("\n"))
    assert n1 < n2  # looser tolerances take fewer steps


def test_classify_budget_exhaustion_exits_3(tmp_path):
    # a generic start needs a longer run than this budget allows
    cfg = write(
        tmp_path,
        "run.cfg",
        SADDLE_CFG.replace("x0 = -1.0, 0.0", "x0 = -0.6, 0.8") + "classify.s_budget = 20\n",
    )
    out = tmp_path / "out"
    assert main(["classify", cfg, "--outdir", str(out), "--quiet"]) == 3
    verdict = json.loads((out / "verdict.json").read_text())
    assert verdict["verdict"] == "undetermined"
    assert verdict["reason"] == "budget_exhausted"


@pytest.mark.parametrize("figure", ["fig1", "fig3", "fig3b", "fig6", "fig8n"])
def test_reproduce_all_figures(tmp_path, figure):
    out = tmp_path / figure
    assert main(["reproduce", figure, "--outdir", str(out), "--quiet"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["figure"] == figure
    assert len(manifest["files"]) >= 2
    for f in manifest["files"]:
        assert (out / f["name"]).exists()


def test_sweep_thread_env_is_deterministic(tmp_path, monkeypatch):
    cfg = write(tmp_path, "run.cfg", SWEEP_EXPEL_CFG)
    payloads = []
    for threads in ("1", "3"):
        monkeypatch.setenv("SINGULAR_FLOW_THREADS", threads)
        out = tmp_path / f"threads{threads}"
        assert main(["sweep", cfg, "--outdir", str(out), "--quiet"]) == 0
        payloads.append((out / "sweep.json").read_bytes())
    assert payloads[0] == payloads[1]
