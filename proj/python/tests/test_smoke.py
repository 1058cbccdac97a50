import math

import numpy as np
import pytest

import chaoslab


def test_gamma_cases():
    assert chaoslab.gamma_rate(5, 2, 3, 100) == pytest.approx(0.16309573444801934, rel=1e-12)
    assert chaoslab.gamma_rate(5, 2, 4, 100) == pytest.approx(0.5246077861321453, rel=1e-12)
    assert chaoslab.gamma_rate(5, 2, 5, 100) == pytest.approx(0.22158505369413067, rel=1e-12)
    with pytest.raises(ValueError, match="q > m/2"):
        chaoslab.gamma_rate(4, 2, 3, 100)
    assert chaoslab.predicted_exponent(8, 2, 1) == pytest.approx(-0.5)


def test_simulate_shapes_and_determinism():
    a = chaoslab.simulate("ou", n=50, T=0.5, dt=0.05, snapshots=6, seed=3, workers=1)
    b = chaoslab.simulate("ou", n=50, T=0.5, dt=0.05, snapshots=6, seed=3, workers=2)
    assert a["states"].shape == (6, 50, 1)
    assert a["jump_counts"].shape == (6, 50)
    assert np.array_equal(a["states"], b["states"])
    assert not a["truncated"]


def test_fhn_run_stays_in_box():
    r = chaoslab.simulate("fhn", n=10, T=1.0, dt=1e-3, snapshots=101, seed=2)
    y = r["states"][:, :, 2]
    assert y.min() >= -0.05 and y.max() <= 1.05


def test_solve_limit_matches_ou_mean():
    r = chaoslab.solve_limit("ou", M=5000, T=1.0, dt=0.01, snapshots=3, seed=4)
    assert r["converged"]
    # m' = -0.5 m + 0.5 with m(0) = 1 stays at its fixed point
    assert r["mean_curve"][-1][0] == pytest.approx(1.0, rel=0.02)
    r = chaoslab.solve_limit("ou", {"x0_mean": 0.0}, M=5000, T=1.0, dt=0.01, snapshots=3, seed=4)
    assert r["mean_curve"][-1][0] == pytest.approx(1.0 - math.exp(-0.5), rel=0.03)


def test_compactified_distance():
    assert chaoslab.compactified_distance([0.0, 0.0], None) == 1.0
    assert chaoslab.compactified_distance(None, None) == 0.0
    d = chaoslab.compactified_distance([1.0, 2.0], [0.0, 0.0])
    assert d == pytest.approx(1.0 - 1.0 / (1.0 + math.sqrt(5.0)))


def test_bl_distance_identical_is_zero():
    x = np.linspace(-1, 1, 20).reshape(-1, 1)
    r = chaoslab.bl_distance([x, x], x)
    assert r["value"] == 0.0


def test_validate_models():
    assert chaoslab.validate_model("ou", probes=2000)["pass"]
    assert not chaoslab.validate_model("cubic", probes=2000)["pass"]
    fhn = chaoslab.validate_model("fhn", probes=5000, lower=[-3, -3, 0], upper=[3, 3, 1])
    assert fhn["pass"]
    assert chaoslab.fhn_chi(0.5) == pytest.approx(0.1 * math.exp(-0.5), rel=1e-14)


def test_errors_map_to_python():
    with pytest.raises(ValueError):
        chaoslab.simulate("no-such-model")
    with pytest.raises(ValueError):
        chaoslab.simulate("ou", dt=0.3)


def test_chaos_study_and_cli(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(
        "[model]\nname = ou\n\n[study]\nn_grid = 20,40,80\nreplications = 6\n"
        "M_reference = 800\ndt = 0.05\neval_points = 3\n\n[metric]\ndictionary_size = 8\n"
    )
    report = chaoslab.chaos_study(cfg, workers=1)
    assert report["schema"] == "chaoslab.report/1"
    assert len(report["rows"]) == 3
    assert chaoslab.cli(["gamma", "--kappa", "5", "--m", "3", "--n", "100"]) == 0
    assert chaoslab.cli(["chaos-study", "--config", str(tmp_path / "missing.cfg")]) == 1
