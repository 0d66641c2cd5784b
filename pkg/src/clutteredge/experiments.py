"""Monte Carlo evaluation: threshold calibration, P_ED and RMSE sweeps.

Every trial owns a counter-based random substream keyed by
``(master_seed, trial, stream)``, so results are independent of chunking
and thread scheduling. Different purposes draw from different streams
(see the ``STREAM_*`` constants); sweep points reuse the same trial
noise (common random numbers), which keeps curves smooth in CPR.

Several detectors are always evaluated on the same windows: calibration
and sweeps accept a list of ``DetectorConfig`` and return per-detector
results keyed by ``DetectorConfig.name``.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .covmodel import ClutterScene, Hypothesis, color_batch, scene_roots, trial_rng, white_noise
from .detectors import DetectorConfig, L1Grid, batch_statistics, reduce_candidates, window_spectra
from .rank import MosRule, estimate_r0_batch, estimated_ced_candidates

log = logging.getLogger(__name__)

STREAM_CALIBRATION = 0
STREAM_VALIDATION = 1
STREAM_EVALUATION = 2
STREAM_RANK = 3

DEFAULT_CHUNK = 1000


def _as_list(detectors) -> list:
    return [detectors] if isinstance(detectors, DetectorConfig) else list(detectors)


def _chunks(n: int, size: int):
    return [range(i, min(i + size, n)) for i in range(0, n, size)]


def _run_chunks(fn, n: int, chunk_size: int, threads: int) -> list:
    chunks = _chunks(n, chunk_size)
    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, chunks))
    return [fn(c) for c in chunks]


def draw_noise(master_seed: int, trials: Sequence[int], N: int, L: int, stream: int,
               l1_choices: Optional[Sequence[int]] = None) -> tuple:
    """White windows for the given trials and, optionally, a uniform L1 per trial."""
    W = np.empty((len(trials), N, L), dtype=complex)
    l1 = np.zeros(len(trials), dtype=int)
    for j, t in enumerate(trials):
        rng = trial_rng(master_seed, t, stream)
        W[j] = white_noise(rng, N, L)
        if l1_choices is not None:
            l1[j] = rng.choice(np.asarray(l1_choices))
    return W, l1


def simulate(scene: ClutterScene, detectors, trials: int, master_seed: int,
             hypothesis: Hypothesis = Hypothesis.H0, stream: int = STREAM_CALIBRATION,
             l1: Union[None, int, Sequence[int]] = None, chunk_size: int = DEFAULT_CHUNK,
             threads: int = 1) -> dict:
    """Run detectors on ``trials`` independent windows drawn from ``scene``.

    Under H1, ``l1`` is a fixed change point or a sequence of values to
    draw uniformly per trial (defaults to ``scene.true_l1``).

    Returns
    -------
    dict
        ``{name: (statistic, l1hat)}`` plus the key ``"_true_l1"`` holding
        the per-trial change points (zeros under H0).
    """
    dets = _as_list(detectors)
    hypothesis = Hypothesis(hypothesis)
    N, L = scene.N, scene.L
    roots = scene_roots(scene)
    choices = None
    fixed = None
    if hypothesis is Hypothesis.H1:
        l1 = scene.true_l1 if l1 is None else l1
        if l1 is None:
            raise ValueError("H1 simulation needs a change point")
        if np.ndim(l1) == 0:
            fixed = int(l1)
            if not 1 <= fixed < L:
                raise ValueError(f"change point {fixed} outside window")
        else:
            choices = [int(v) for v in l1]

    def work(chunk):
        W, true_l1 = draw_noise(master_seed, chunk, N, L, stream, choices)
        if hypothesis is Hypothesis.H0:
            Z = color_batch(W, roots[0])
        else:
            if fixed is not None:
                true_l1[:] = fixed
            Z = color_batch(W, roots[1], roots[2], true_l1)
        res = batch_statistics(Z, dets)
        res["_true_l1"] = (true_l1, None)
        return res

    parts = _run_chunks(work, trials, chunk_size, threads)
    out = {}
    for key in parts[0]:
        if key == "_true_l1":
            out[key] = np.concatenate([p[key][0] for p in parts])
        else:
            out[key] = (np.concatenate([p[key][0] for p in parts]),
                        np.concatenate([p[key][1] for p in parts]))
    return out


def threshold_from_statistics(stats: np.ndarray, pfed: float) -> float:
    """k-th largest statistic with ``k = round(trials * pfed)``."""
    stats = np.asarray(stats, dtype=float)
    k = int(round(stats.size * pfed))
    if k < 1:
        raise ValueError(f"{stats.size} trials are too few for pfed={pfed}")
    eta = float(np.sort(stats)[::-1][k - 1])
    if eta <= 0:
        warnings.warn(f"calibrated threshold {eta:.4g} is not positive", RuntimeWarning)
    return eta


@dataclass(frozen=True)
class CalibrationSpec:
    scene: ClutterScene
    detector: Union[DetectorConfig, tuple]
    pfed: float = 1e-3
    trials: Optional[int] = None
    master_seed: int = 0

    def __post_init__(self):
        if not 0 < self.pfed < 0.5:
            raise ValueError("pfed must lie in (0, 0.5)")

    @property
    def n_trials(self) -> int:
        return self.trials if self.trials is not None else int(math.ceil(100 / self.pfed))


def calibrate_thresholds(spec: CalibrationSpec, chunk_size: int = DEFAULT_CHUNK, threads: int = 1) -> dict:
    """Thresholds for every detector in ``spec`` from shared H0 trials."""
    dets = _as_list(spec.detector)
    log.info("calibrating %d detector(s) on %d H0 trials", len(dets), spec.n_trials)
    sim = simulate(spec.scene, dets, spec.n_trials, spec.master_seed, Hypothesis.H0,
                   STREAM_CALIBRATION, chunk_size=chunk_size, threads=threads)
    return {d.name: threshold_from_statistics(sim[d.name][0], spec.pfed) for d in dets}


def calibrate_threshold(spec: CalibrationSpec, **kw) -> float:
    dets = _as_list(spec.detector)
    if len(dets) != 1:
        raise ValueError("calibrate_threshold takes a single detector; use calibrate_thresholds")
    return calibrate_thresholds(spec, **kw)[dets[0].name]


def exceedance_rates(scene: ClutterScene, detectors, etas: dict, trials: int, master_seed: int,
                     **kw) -> dict:
    """False-edge rate at fixed thresholds on fresh H0 trials (validation stream)."""
    sim = simulate(scene, detectors, trials, master_seed, Hypothesis.H0, STREAM_VALIDATION, **kw)
    return {d.name: float(np.mean(sim[d.name][0] > etas[d.name])) for d in _as_list(detectors)}


@dataclass
class SweepResult:
    detector: str
    axis: np.ndarray
    ped: np.ndarray
    rmse: np.ndarray
    detections: np.ndarray
    trials: np.ndarray
    threshold: float
    extra: dict = field(default_factory=dict)

    def rows(self) -> list:
        out = []
        for i, x in enumerate(self.axis):
            rm = self.rmse[i]
            out.append({
                "cpr_db": float(x),
                "ped": float(self.ped[i]),
                "rmse": None if not np.isfinite(rm) else float(rm),
                "detections": int(self.detections[i]),
                "trials": int(self.trials[i]),
            })
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cpr_db", "ped", "rmse", "detections", "trials"])
        for row in self.rows():
            w.writerow([repr(row["cpr_db"]), repr(row["ped"]),
                        "" if row["rmse"] is None else repr(row["rmse"]),
                        row["detections"], row["trials"]])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {"detector": self.detector, "threshold": self.threshold, "points": self.rows()}
        doc.update(self.extra)
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def rms_error(l1hat: np.ndarray, true_l1: np.ndarray, detected: np.ndarray) -> float:
    """RMS change-point error over the detecting trials; NaN if none detected."""
    if not np.any(detected):
        return float("nan")
    err = (l1hat[detected] - true_l1[detected]).astype(float)
    return float(np.sqrt(np.mean(err ** 2)))


def _sweep(scene, detectors, etas, cpr_grid, trials_per_point, master_seed, l1, **kw) -> dict:
    dets = _as_list(detectors)
    cpr_grid = np.asarray(cpr_grid, dtype=float)
    acc = {d.name: {"ped": [], "rmse": [], "det": [], "n": []} for d in dets}
    for cpr in cpr_grid:
        sim = simulate(scene.replace(cpr_db=float(cpr)), dets, trials_per_point, master_seed,
                       Hypothesis.H1, STREAM_EVALUATION, l1=l1, **kw)
        true_l1 = sim["_true_l1"]
        for d in dets:
            stat, l1hat = sim[d.name]
            fired = stat > etas[d.name]
            a = acc[d.name]
            a["det"].append(int(fired.sum()))
            a["n"].append(int(stat.size))
            a["ped"].append(float(fired.mean()))
            a["rmse"].append(rms_error(l1hat, true_l1, fired))
        log.debug("CPR %.1f dB done", cpr)
    return {
        d.name: SweepResult(d.name, cpr_grid, np.array(acc[d.name]["ped"]), np.array(acc[d.name]["rmse"]),
                            np.array(acc[d.name]["det"]), np.array(acc[d.name]["n"]), float(etas[d.name]))
        for d in dets
    }


def ped_sweep(scene: ClutterScene, detectors, etas: dict, cpr_grid: Sequence[float],
              trials_per_point: int, master_seed: int, true_l1: Optional[int] = None, **kw) -> dict:
    """P_ED (and conditional RMSE) versus CPR at a fixed true change point."""
    l1 = scene.true_l1 if true_l1 is None else true_l1
    return _sweep(scene, detectors, etas, cpr_grid, trials_per_point, master_seed, l1, **kw)


def rmse_sweep(scene: ClutterScene, detectors, etas: dict, cpr_grid: Sequence[float],
               trials_per_point: int, master_seed: int, l1_values: Optional[Sequence[int]] = None,
               **kw) -> dict:
    """RMS localization error versus CPR, true L1 uniform over ``l1_values`` (default omega).

    The error is computed over trials where the detector fired; points with
    no detections report NaN.
    """
    if l1_values is None:
        l1_values = L1Grid.omega(scene.N, scene.L).values
    return _sweep(scene, detectors, etas, cpr_grid, trials_per_point, master_seed, list(l1_values), **kw)


def structure_change_experiment(scene: ClutterScene, detectors, etas: dict, trials: int,
                                master_seed: int, **kw) -> dict:
    """P_ED when the second region's covariance has a different structure.

    ``scene.ccm2`` supplies the second-region clutter covariance (e.g. from
    ``random_hermitian_ccm``); ``scene.true_l1`` the change point.
    """
    sim = simulate(scene, detectors, trials, master_seed, Hypothesis.H1, STREAM_EVALUATION, **kw)
    return {d.name: float(np.mean(sim[d.name][0] > etas[d.name])) for d in _as_list(detectors)}


def rank_experiment(scene: ClutterScene, structure, rule: MosRule, trials: int, master_seed: int,
                    hypothesis: Hypothesis = Hypothesis.H0, grid: Optional[L1Grid] = None,
                    search_max: Optional[int] = None, chunk_size: int = DEFAULT_CHUNK) -> dict:
    """Monte Carlo distribution of rank estimates.

    Returns per-trial arrays: ``r0hat`` always; under H1 also the selected
    ``r1hat``, ``r2hat`` and ``l1hat`` from the combined procedure.
    """
    hypothesis = Hypothesis(hypothesis)
    N, L = scene.N, scene.L
    grid = L1Grid.omega(N, L) if grid is None else grid
    roots = scene_roots(scene)
    out = {"r0hat": [], "r1hat": [], "r2hat": [], "l1hat": []}
    for chunk in _chunks(trials, chunk_size):
        W, _ = draw_noise(master_seed, chunk, N, L, STREAM_RANK)
        if hypothesis is Hypothesis.H0:
            Z = color_batch(W, roots[0])
        else:
            Z = color_batch(W, roots[1], roots[2], scene.true_l1)
        sp = window_spectra(Z, structure, grid)
        if hypothesis is Hypothesis.H0:
            out["r0hat"].append(estimate_r0_batch(sp.g0, L, rule, search_max))
            continue
        cand, r0hat, r1hat, r2hat = estimated_ced_candidates(sp, rule, search_max)
        _, l1hat = reduce_candidates(cand, sp.l1)
        g = np.clip(np.searchsorted(sp.l1, l1hat), 0, len(sp.l1) - 1)
        rows = np.arange(len(chunk))
        out["r0hat"].append(r0hat)
        out["r1hat"].append(r1hat[rows, g])
        out["r2hat"].append(r2hat[rows, g])
        out["l1hat"].append(l1hat)
    return {k: np.concatenate(v) for k, v in out.items() if v}
