import math

import numpy as np
import pytest

import pyviot


def test_geometry_roundtrip():
    r = pyviot.axis_angle(np.array([0.0, 0.0, 1.0]), 0.3)
    assert pyviot.rotation_angle(r) == pytest.approx(0.3)
    r2 = pyviot.integrate_rotation(np.eye(3), np.array([0.0, 0.0, 0.3 / 0.005]), 0.005)
    assert np.allclose(r, r2, atol=1e-12)


def test_projection():
    k = pyviot.CameraIntrinsics()
    pose = pyviot.Pose()
    pose.translation = np.array([0.0, 0.0, 1.2])
    uv = pyviot.project(k, pose, np.array([0.0, 0.0, 0.0]))
    assert uv == pytest.approx((320.0, 240.0))
    behind = pyviot.Pose()
    behind.translation = np.array([0.0, 0.0, -1.0])
    assert pyviot.project(k, behind, np.array([0.0, 0.0, 0.0])) is None


def test_scripts_and_trajectory():
    s = pyviot.parse_script("circ-hard")
    assert pyviot.script_name(s) == "circ-hard"
    sample = pyviot.sample_trajectory(s, 1.5)
    assert sample["t"] == 1.5
    assert sample["velocity_world"].shape == (3,)
    with pytest.raises(Exception):
        pyviot.parse_script("not-a-script")


def test_delay_endpoints():
    m = pyviot.LatencyModel()
    assert pyviot.compute_delay(102400, m, 0.0) == pytest.approx(35.625)
    assert pyviot.compute_delay(102400, m, 30.0) == pytest.approx(65.625)


def test_backend_oracle():
    truth = pyviot.Pose()
    truth.translation = np.array([0.0, 0.0, 1.2])
    gt = pyviot.BackendConfig()
    assert np.allclose(pyviot.estimate(truth, 1, gt).translation, truth.translation)

    noisy = pyviot.BackendConfig()
    noisy.mode = pyviot.BackendMode.noisy
    noisy.rng_seed = 3
    est = pyviot.estimate(truth, 1, noisy)
    delta = np.linalg.norm(est.translation - truth.translation)
    assert 0.0 < delta < 0.05
    # deterministic per (seed, request_id)
    again = pyviot.estimate(truth, 1, noisy)
    assert np.array_equal(est.translation, again.translation)


def test_inspection():
    assert pyviot.inspection_threshold_px(30.0) == pytest.approx(20.0)
    assert pyviot.inspection_threshold_px(120.0) == pytest.approx(12.5)
    k = pyviot.CameraIntrinsics()
    good = pyviot.Pose()
    good.translation = np.array([0.0, 0.0, 1.2])
    half = np.array([0.1, 0.1, 0.1])
    assert pyviot.inspect_pose(good, good, half, k, 30.0) == pyviot.TrackerStatus.finePose
    behind = pyviot.Pose()
    behind.translation = np.array([0.0, 0.0, -1.2])
    assert pyviot.inspect_pose(behind, good, half, k, 30.0) == pyviot.TrackerStatus.trackingLost


def test_run_experiment_and_reports():
    cfg = pyviot.ExperimentConfig()
    cfg.script = pyviot.parse_script("trans-easy")
    cfg.script.duration = 2.0
    cfg.duration = 2.0
    cfg.seed = 1
    cfg.script.perturbation_seed = 1
    report = pyviot.run_experiment(cfg)
    assert report.script == "trans-easy"
    assert report.frame_rate == 60.0
    assert len(report.frames) == 120
    assert report.mean_proj_px < 2.0
    assert report.refinement_count > 0

    summary = pyviot.summary_csv(report)
    assert summary.splitlines()[0] == "script,frame_rate,backend,pos_mm,orient_deg,proj_px"
    assert "trans-easy" in summary
    assert '"proj_px"' in pyviot.report_json(report)

    # determinism through the bindings
    report2 = pyviot.run_experiment(cfg)
    assert pyviot.series_csv(report) == pyviot.series_csv(report2)
