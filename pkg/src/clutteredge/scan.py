"""Sliding-window scan of a range profile away from the cell under test.

Bins are 1-based. The forward scan uses windows ``s .. s+L-1`` for
``s = cut+1 .. K-L+1``. The backward scan mirrors it: a window is
identified by its bin nearest the CUT, ``w = cut-1 .. L``, and its
snapshots are taken in order ``w, w-1, .., w-L+1`` so that the window-local
change point always counts away from the CUT. The reported absolute edge is
always in profile coordinates: the last bin of the lower-index region,
``s + l1hat - 1`` forward and ``w - l1hat`` backward, so a boundary between
bins ``e`` and ``e+1`` is reported as ``e`` from either side.

Fusion: per block and direction, repeatedly take the most frequent absolute
edge among declaring windows (ties to the smaller bin), record it, and drop
every declaring window whose span contains it.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .covmodel import ClutterScene, covariance_sqrt, trial_rng, white_noise
from .detectors import DetectorConfig, batch_statistics
from .errors import DataError
from .experiments import threshold_from_statistics

FORWARD = "forward"
BACKWARD = "backward"


@dataclass(frozen=True)
class RangeProfile:
    """``cube`` is ``(N, K)`` or ``(blocks, N, K)``; ``cut_index`` is 1-based."""

    cube: np.ndarray
    cut_index: int

    def __post_init__(self):
        cube = np.asarray(self.cube)
        if cube.ndim == 2:
            cube = cube[None]
        if cube.ndim != 3:
            raise DataError(f"profile must be (N, K) or (blocks, N, K), got {cube.shape}")
        if not np.all(np.isfinite(cube)):
            raise DataError("profile contains non-finite values")
        object.__setattr__(self, "cube", cube.astype(complex, copy=False))
        if not 1 <= self.cut_index <= self.K:
            raise DataError(f"cut index {self.cut_index} outside 1..{self.K}")

    @property
    def blocks(self) -> int:
        return self.cube.shape[0]

    @property
    def N(self) -> int:
        return self.cube.shape[1]

    @property
    def K(self) -> int:
        return self.cube.shape[2]


@dataclass(frozen=True)
class EdgeReport:
    block: int
    direction: str
    window_start: int
    decision: bool
    l1hat: Optional[int]
    absolute_edge: Optional[int]
    statistic: float

    def span(self, L: int) -> tuple:
        if self.direction == FORWARD:
            return self.window_start, self.window_start + L - 1
        return self.window_start - L + 1, self.window_start

    def to_dict(self) -> dict:
        return {
            "type": "window",
            "block": self.block,
            "direction": self.direction,
            "window_start": self.window_start,
            "decision": self.decision,
            "l1hat": self.l1hat,
            "absolute_edge": self.absolute_edge,
            "statistic": self.statistic,
        }


@dataclass
class ScanResult:
    L: int
    reports: list
    fused: dict = field(default_factory=dict)

    def fused_edges(self, block: int = 0, direction: str = FORWARD) -> list:
        return self.fused.get((block, direction), [])

    def primary_edge(self, block: int = 0, direction: str = FORWARD) -> Optional[int]:
        edges = self.fused_edges(block, direction)
        return edges[0][0] if edges else None


def window_positions(K: int, L: int, cut: int) -> dict:
    """Window identifiers per direction (see module docstring)."""
    if not L < K / 2:
        raise DataError(f"profile of {K} bins too short for window L={L} (need L < K/2)")
    return {
        FORWARD: list(range(cut + 1, K - L + 2)),
        BACKWARD: list(range(cut - 1, L - 1, -1)),
    }


def _column_index(direction: str, start: int, L: int) -> np.ndarray:
    if direction == FORWARD:
        return np.arange(start - 1, start - 1 + L)
    return np.arange(start - 1, start - 1 - L, -1)


def extract_windows(cube: np.ndarray, L: int, direction: str, starts) -> np.ndarray:
    """``(blocks * len(starts), N, L)`` stack, block-major."""
    idx = np.stack([_column_index(direction, s, L) for s in starts])
    W = cube[:, :, idx]                       # (B, N, P, L)
    return W.transpose(0, 2, 1, 3).reshape(-1, cube.shape[1], L)


def _statistics(windows: np.ndarray, det: DetectorConfig, chunk: int = 2000) -> tuple:
    stats, l1s = [], []
    for i in range(0, windows.shape[0], chunk):
        s, l = batch_statistics(windows[i:i + chunk], [det])[det.name]
        stats.append(s)
        l1s.append(l)
    if not stats:
        return np.zeros(0), np.zeros(0, dtype=int)
    return np.concatenate(stats), np.concatenate(l1s)


def fuse_edges(reports, L: int) -> list:
    """Mode-based fusion of declaring windows; returns ``[(edge_bin, votes), ...]``."""
    pending = [r for r in reports if r.decision and r.absolute_edge is not None]
    fused = []
    while pending:
        counts = Counter(r.absolute_edge for r in pending)
        top = max(counts.values())
        edge = min(e for e, c in counts.items() if c == top)
        fused.append((edge, top))
        kept = []
        for r in pending:
            lo, hi = r.span(L)
            if not lo <= edge <= hi:
                kept.append(r)
        pending = kept
    return fused


def scan_profile(profile: RangeProfile, L: int, detector: DetectorConfig, eta: float,
                 directions=(FORWARD, BACKWARD)) -> ScanResult:
    """Run the detector at every window position in each direction and fuse edges.

    Each block of a multi-block profile is scanned independently.
    """
    K, B = profile.K, profile.blocks
    positions = window_positions(K, L, profile.cut_index)
    reports = []
    for direction in directions:
        starts = positions[direction]
        if not starts:
            continue
        stats, l1hat = _statistics(extract_windows(profile.cube, L, direction, starts), detector)
        stats = stats.reshape(B, len(starts))
        l1hat = l1hat.reshape(B, len(starts))
        for b in range(B):
            for j, s in enumerate(starts):
                lh = int(l1hat[b, j]) or None
                if lh is None:
                    edge = None
                elif direction == FORWARD:
                    edge = s + lh - 1
                else:
                    edge = s - lh
                st = float(stats[b, j])
                reports.append(EdgeReport(b, direction, s, bool(st > eta), lh, edge, st))
    groups = {(b, d): [] for b in range(B) for d in directions}
    for r in reports:
        groups[(r.block, r.direction)].append(r)
    result = ScanResult(L, reports)
    for key, sub in groups.items():
        result.fused[key] = fuse_edges(sub, L)
    return result


def calibrate_from_profile(profile: RangeProfile, L: int, detector: DetectorConfig, pfed: float,
                           start_bins: tuple, blocks: Optional[range] = None) -> float:
    """Threshold from forward windows starting at bins ``start_bins[0]..start_bins[1]``.

    Intended for recordings where a stretch of range is known to be
    homogeneous; every (block, start) pair contributes one H0 statistic.
    """
    lo, hi = start_bins
    if not (1 <= lo <= hi and hi + L - 1 <= profile.K):
        raise DataError(f"calibration starts {lo}..{hi} do not fit K={profile.K} with L={L}")
    cube = profile.cube if blocks is None else profile.cube[list(blocks)]
    windows = extract_windows(cube, L, FORWARD, list(range(lo, hi + 1)))
    stats, _ = _statistics(windows, detector)
    return threshold_from_statistics(stats, pfed)


def synthetic_cube(scene: ClutterScene, K: int, blocks: int, edge_bin: Optional[int],
                   master_seed: int, stream: int = 0) -> np.ndarray:
    """``(blocks, N, K)`` profiles with a planted clutter edge.

    Bins ``1..edge_bin`` follow the first-region covariance and the rest
    the second-region one; ``edge_bin=None`` gives a homogeneous profile
    drawn from the H0 covariance. Block ``b`` uses substream ``b``.
    """
    N = scene.N
    if edge_bin is None:
        roots = (covariance_sqrt(scene.covariance(0)),) * 2
        edge_bin = K
    else:
        if not 1 <= edge_bin < K:
            raise ValueError(f"edge bin {edge_bin} outside 1..{K - 1}")
        roots = (covariance_sqrt(scene.covariance(1)), covariance_sqrt(scene.covariance(2)))
    cube = np.empty((blocks, N, K), dtype=complex)
    for b in range(blocks):
        W = white_noise(trial_rng(master_seed, b, stream), N, K)
        cube[b, :, :edge_bin] = roots[0] @ W[:, :edge_bin]
        cube[b, :, edge_bin:] = roots[1] @ W[:, edge_bin:]
    return cube
