import numpy as np
import pytest

from clutteredge.covmodel import ClutterScene, RankTriple, StructureKind
from clutteredge.detectors import DetectorConfig
from clutteredge.errors import DataError
from clutteredge.experiments import CalibrationSpec, calibrate_thresholds
from clutteredge.scan import (
    BACKWARD, FORWARD, EdgeReport, RangeProfile, calibrate_from_profile, extract_windows,
    fuse_edges, scan_profile, synthetic_cube, window_positions,
)

CCED = DetectorConfig("ced", StructureKind.CENTROSYMMETRIC, RankTriple.uniform(4), "omega")


def test_window_positions():
    pos = window_positions(100, 27, 1)
    assert pos[FORWARD][0] == 2 and pos[FORWARD][-1] == 74
    assert pos[BACKWARD] == []
    pos = window_positions(100, 27, 50)
    assert pos[BACKWARD][0] == 49 and pos[BACKWARD][-1] == 27
    with pytest.raises(DataError):
        window_positions(54, 27, 1)


def test_extract_windows_column_order():
    K = 12
    cube = np.tile(np.arange(1, K + 1, dtype=complex), (2, 3, 1))   # value = bin number
    fwd = extract_windows(cube, 4, FORWARD, [3, 5])
    np.testing.assert_array_equal(fwd[0, 0].real, [3, 4, 5, 6])
    np.testing.assert_array_equal(fwd[1, 0].real, [5, 6, 7, 8])
    assert fwd.shape == (4, 3, 4)
    bwd = extract_windows(cube, 4, BACKWARD, [9])
    np.testing.assert_array_equal(bwd[0, 0].real, [9, 8, 7, 6])


def _report(start, edge, direction=FORWARD, decision=True):
    return EdgeReport(0, direction, start, decision, 1, edge, 1.0)


def test_fuse_edges_mode_and_removal():
    L = 5
    reps = [_report(1, 3), _report(2, 3), _report(3, 4), _report(20, 22), _report(21, 22),
            _report(22, 23), _report(30, 31, decision=False)]
    fused = fuse_edges(reps, L)
    # bin 3 wins (2 votes, beats 22 on the tie), removing windows 1..5, 2..6, 3..7
    assert fused == [(3, 2), (22, 2)]


def test_fuse_edges_tie_goes_to_smaller_bin():
    assert fuse_edges([_report(10, 12), _report(1, 2)], 3)[0] == (2, 1)
    assert fuse_edges([], 3) == []


def test_backward_span():
    r = _report(30, 28, BACKWARD)
    assert r.span(5) == (26, 30)


def test_backward_scan_mirrors_forward_scan():
    sc = ClutterScene(N=9, L=27, cnr_db=25.0, cpr_db=10.0)
    cube = synthetic_cube(sc, 90, 1, 40, master_seed=3)
    K = 90
    fwd = scan_profile(RangeProfile(cube, 1), 27, CCED, 30.0, directions=(FORWARD,))
    bwd = scan_profile(RangeProfile(cube[..., ::-1], K), 27, CCED, 30.0, directions=(BACKWARD,))
    f = {r.window_start: r for r in fwd.reports}
    assert len(f) == len(bwd.reports)
    for r in bwd.reports:
        g = f[K + 1 - r.window_start]
        assert r.statistic == pytest.approx(g.statistic, rel=1e-10, abs=1e-10)
        assert r.l1hat == g.l1hat
        if r.absolute_edge is not None:
            assert g.absolute_edge == K - r.absolute_edge


def test_absolute_edge_arithmetic():
    sc = ClutterScene(N=9, L=27, cnr_db=25.0, cpr_db=10.0)
    cube = synthetic_cube(sc, 90, 1, 40, master_seed=3)
    res = scan_profile(RangeProfile(cube, 45), 20, CCED, 0.0)
    for r in res.reports:
        if r.l1hat is None:
            continue
        if r.direction == FORWARD:
            assert r.absolute_edge == r.window_start + r.l1hat - 1
        else:
            assert r.absolute_edge == r.window_start - r.l1hat
        lo, hi = r.span(20)
        assert lo <= r.absolute_edge < hi


def test_planted_edge_found():
    sc = ClutterScene(N=9, L=27, cnr_db=25.0, cpr_db=15.0)
    etas = calibrate_thresholds(CalibrationSpec(sc, [CCED], pfed=1e-2, trials=2000, master_seed=1))
    cube = synthetic_cube(sc, 100, 20, 40, master_seed=9)
    res = scan_profile(RangeProfile(cube, 1), 27, CCED, etas["C-CED"], directions=(FORWARD,))
    hits = sum(res.primary_edge(b) == 40 for b in range(20))
    assert hits >= 16
    # the same boundary seen from the far side is reported at the same bin
    res = scan_profile(RangeProfile(cube, 100), 27, CCED, etas["C-CED"], directions=(BACKWARD,))
    hits = sum(res.primary_edge(b, BACKWARD) == 40 for b in range(20))
    assert hits >= 16


def test_homogeneous_cube_calibration():
    sc = ClutterScene(N=9, L=27, cnr_db=25.0)
    cube = synthetic_cube(sc, 100, 10, None, master_seed=2)
    prof = RangeProfile(cube, 1)
    eta = calibrate_from_profile(prof, 27, CCED, 0.05, (1, 74))
    res = scan_profile(prof, 27, CCED, eta, directions=(FORWARD,))
    rate = np.mean([r.decision for r in res.reports])
    assert rate < 0.1
    with pytest.raises(DataError):
        calibrate_from_profile(prof, 27, CCED, 0.05, (1, 80))


def test_profile_validation():
    with pytest.raises(DataError):
        RangeProfile(np.ones((2, 10)), 11)
    with pytest.raises(DataError):
        RangeProfile(np.full((2, 10), np.nan), 1)
    with pytest.raises(ValueError):
        synthetic_cube(ClutterScene(N=9, L=27, cnr_db=25.0), 50, 1, 50, 0)
