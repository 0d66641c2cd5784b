import math

import numpy as np
import pytest

from clutteredge.covmodel import ClutterScene, Hypothesis, RankTriple, StructureKind
from clutteredge.detectors import DetectorConfig, standard_detectors
from clutteredge.experiments import (
    CalibrationSpec, SweepResult, calibrate_thresholds, exceedance_rates, ped_sweep, rms_error,
    rmse_sweep, simulate, threshold_from_statistics,
)

SCENE = ClutterScene(N=9, L=27, cnr_db=25.0, true_l1=11)
R4 = RankTriple.uniform(4)
CCED = DetectorConfig("ced", StructureKind.CENTROSYMMETRIC, R4, "omega")
HCCD = DetectorConfig("ccd", StructureKind.HERMITIAN)


def test_threshold_is_kth_largest():
    stats = np.arange(1.0, 11.0)
    assert threshold_from_statistics(stats, 0.2) == 9.0
    assert threshold_from_statistics(stats, 0.1) == 10.0
    with pytest.raises(ValueError):
        threshold_from_statistics(stats, 0.01)


def test_nonpositive_threshold_warns():
    with pytest.warns(RuntimeWarning):
        threshold_from_statistics(np.zeros(100), 0.1)


def test_calibration_trial_default():
    assert CalibrationSpec(SCENE, CCED, pfed=1e-3).n_trials == 100_000
    with pytest.raises(ValueError):
        CalibrationSpec(SCENE, CCED, pfed=0.7)


def test_simulation_independent_of_chunking_and_threads():
    a = simulate(SCENE, [CCED, HCCD], 30, 5, Hypothesis.H1, chunk_size=1000)
    b = simulate(SCENE, [CCED, HCCD], 30, 5, Hypothesis.H1, chunk_size=7, threads=3)
    for key in ("C-CED", "H-CCD"):
        np.testing.assert_array_equal(a[key][0], b[key][0])
        np.testing.assert_array_equal(a[key][1], b[key][1])
    c = simulate(SCENE, [CCED], 30, 6, Hypothesis.H1)
    assert not np.array_equal(a["C-CED"][0], c["C-CED"][0])


def test_simulation_prefix_stable():
    a = simulate(SCENE, CCED, 20, 3)["C-CED"][0]
    b = simulate(SCENE, CCED, 35, 3)["C-CED"][0]
    np.testing.assert_array_equal(a, b[:20])


def test_h1_without_change_point_rejected():
    with pytest.raises(ValueError):
        simulate(ClutterScene(N=9, L=27, cnr_db=25.0), CCED, 5, 0, Hypothesis.H1)
    with pytest.raises(ValueError):
        simulate(SCENE, CCED, 5, 0, Hypothesis.H1, l1=27)


def test_zero_cpr_matches_false_edge_rate():
    # with identical clutter on both sides H1 data is H0 data
    dets = [CCED, HCCD]
    etas = calibrate_thresholds(CalibrationSpec(SCENE, dets, pfed=0.05, trials=2000, master_seed=1))
    res = ped_sweep(SCENE, dets, etas, [0.0], 2000, master_seed=2)
    for d in dets:
        assert abs(res[d.name].ped[0] - 0.05) < 0.02
    rates = exceedance_rates(SCENE, dets, etas, 2000, master_seed=1)
    for d in dets:
        assert abs(rates[d.name] - 0.05) < 0.02


def test_ped_increases_with_cpr():
    etas = calibrate_thresholds(CalibrationSpec(SCENE, [CCED], pfed=0.01, trials=1000, master_seed=1))
    res = ped_sweep(SCENE, [CCED], etas, [0, 3, 6, 9, 12], 400, master_seed=3)["C-CED"]
    assert np.all(np.diff(res.ped) >= -0.02)
    assert res.ped[-1] > 0.9
    assert np.all(res.trials == 400)
    np.testing.assert_allclose(res.ped, res.detections / 400)


def test_rmse_absent_when_nothing_fires():
    res = rmse_sweep(SCENE, [CCED], {"C-CED": math.inf}, [10.0], 20, master_seed=0)["C-CED"]
    assert res.detections[0] == 0
    assert np.isnan(res.rmse[0])
    assert res.rows()[0]["rmse"] is None
    assert res.to_csv().splitlines()[1].split(",")[2] == ""


def test_rmse_random_change_points_cover_grid():
    sim = simulate(SCENE, CCED, 400, 0, Hypothesis.H1, l1=range(10, 18))
    assert set(sim["_true_l1"].tolist()) == set(range(10, 18))


def test_rms_error():
    l1hat = np.array([10, 12, 0, 15])
    true = np.array([11, 12, 11, 11])
    fired = np.array([True, True, False, True])
    assert rms_error(l1hat, true, fired) == pytest.approx(math.sqrt((1 + 0 + 16) / 3))
    assert math.isnan(rms_error(l1hat, true, np.zeros(4, bool)))


def test_sweep_csv_layout():
    r = SweepResult("C-CED", np.array([0.0, 3.0]), np.array([0.1, 0.5]), np.array([2.5, np.nan]),
                    np.array([10, 50]), np.array([100, 100]), 12.5)
    lines = r.to_csv().splitlines()
    assert lines == ["cpr_db,ped,rmse,detections,trials", "0.0,0.1,2.5,10,100", "3.0,0.5,,50,100"]
    assert '"threshold": 12.5' in r.to_json()


def test_standard_detectors_share_windows():
    sim = simulate(SCENE, standard_detectors(R4), 10, 0, Hypothesis.H1)
    assert set(sim) == {d.name for d in standard_detectors(R4)} | {"_true_l1"}
    np.testing.assert_array_equal(sim["_true_l1"], 11)
