"""Clutter-edge detectors.

Two families share one computational core:

* CED: the gated log-GLRT for known ranks ``(r0, r1, r2)``. For each
  candidate change point the maximized H1 log-likelihood minus the H0 one
  is kept only if every modeled segment eigenvalue (normalized by its
  segment length) exceeds the pooled noise estimate; otherwise the
  candidate is 0.
* CCD: the log determinant ratio
  ``L log det(S0/L) - L1 log det(S1/L1) - L2 log det(S2/L2)``.

Each family comes in four variants selected by ``StructureKind``, which
only changes the projection applied to the scatter matrices. Because both
families consume the same eigenvalues, ``window_spectra`` is computed once
per (structure, grid) and reused.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .covmodel import DataWindow, RankTriple, StructureKind, project
from .likelihood import h0_loglik_batch, h1_parts, h1_combine, sorted_eigvals


@dataclass(frozen=True)
class L1Grid:
    """Candidate change points (1-based count of snapshots in the first segment)."""

    values: tuple

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        if not vals:
            raise ValueError("L1 grid is empty")
        if list(vals) != sorted(set(vals)):
            raise ValueError("L1 grid must be strictly increasing")
        object.__setattr__(self, "values", vals)

    @classmethod
    def span(cls, lo: int, hi: int) -> "L1Grid":
        return cls(tuple(range(lo, hi + 1)))

    @classmethod
    def from_ranks(cls, L: int, ranks: RankTriple) -> "L1Grid":
        """Admissible change points for known ranks: max(r1,r2)+1 .. L-max(r1,r2)-1."""
        m = max(ranks.r1, ranks.r2)
        return cls.span(m + 1, L - m - 1)

    @classmethod
    def omega(cls, N: int, L: int) -> "L1Grid":
        """Grid N+1 .. L-N-1, valid for both families (segment scatters full rank)."""
        return cls.span(N + 1, L - N - 1)

    def check_window(self, L: int) -> None:
        if self.values[0] < 1 or self.values[-1] > L - 1:
            raise ValueError(f"grid {self.values[0]}..{self.values[-1]} does not fit window L={L}")

    def check_ccd(self, N: int, L: int) -> None:
        if not (self.values[0] > N and L - self.values[-1] > N):
            raise ValueError(
                f"CCD grid needs l_min > N and L - l_max > N (N={N}, L={L}, "
                f"grid {self.values[0]}..{self.values[-1]})")

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


@dataclass(frozen=True)
class DetectionResult:
    statistic: float
    l1hat: Optional[int]
    decision: bool
    threshold: float
    per_l1: tuple = field(default=(), repr=False)


@dataclass
class WindowSpectra:
    """Descending eigenvalues of the structured scatters for a batch of windows.

    ``g0`` is ``(T, N)`` for the whole window; ``g1`` and ``g2`` are
    ``(T, G, N)`` for the two segments at each grid point ``l1[g]``.
    """

    g0: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    l1: np.ndarray
    L: int
    structure: StructureKind

    @property
    def N(self) -> int:
        return self.g0.shape[-1]


def _as_batch(Z) -> np.ndarray:
    if isinstance(Z, DataWindow):
        Z = Z.Z
    Z = np.asarray(Z)
    return Z[None] if Z.ndim == 2 else Z


def window_spectra(Z, structure: StructureKind, grid: Union[L1Grid, Sequence[int]]) -> WindowSpectra:
    """Eigen-spectra of S_h0 and of (S_h1, S_h2) at every grid point.

    ``Z`` is an ``(N, L)`` window or a ``(T, N, L)`` stack. Segment scatters
    are formed directly from their columns (no incremental updates).
    """
    structure = StructureKind.parse(structure)
    Zb = _as_batch(Z)
    L = Zb.shape[-1]
    l1 = np.asarray(grid.values if isinstance(grid, L1Grid) else grid, dtype=int)
    ZH = Zb.conj().swapaxes(-1, -2)
    S0 = project(Zb @ ZH, structure)
    S1 = np.stack([Zb[..., :k] @ ZH[..., :k, :] for k in l1], axis=1)
    S2 = np.stack([Zb[..., k:] @ ZH[..., k:, :] for k in l1], axis=1)
    return WindowSpectra(
        g0=sorted_eigvals(S0),
        g1=sorted_eigvals(project(S1, structure)),
        g2=sorted_eigvals(project(S2, structure)),
        l1=l1, L=L, structure=structure,
    )


def _pick(arr: np.ndarray, r) -> np.ndarray:
    if np.ndim(r) == 0:
        return arr[..., int(r)]
    r = np.asarray(r)
    shape = np.broadcast_shapes(arr.shape[:-1], r.shape)
    arr = np.broadcast_to(arr, shape + arr.shape[-1:])
    return np.take_along_axis(arr, np.broadcast_to(r, shape)[..., None], -1)[..., 0]


def ced_candidates(sp: WindowSpectra, r0, r1, r2) -> np.ndarray:
    """Gated per-grid-point values ``l1_hat - l0_hat`` of shape ``(T, G)``.

    Ranks may be scalars or arrays broadcastable to ``(T,)`` for ``r0`` and
    ``(T, G)`` for ``r1``/``r2`` (used by the estimated-rank detector).
    Degenerate likelihoods come back as ``-inf``.
    """
    N, L = sp.N, sp.L
    L1 = sp.l1.astype(float)
    L2 = L - L1
    ll0, _ = h0_loglik_batch(sp.g0, r0, L)
    h1a, t1a, d1a = h1_parts(sp.g1, L1)
    h2a, t2a, d2a = h1_parts(sp.g2, L2)
    ll1, s2 = h1_combine(_pick(h1a, r1), _pick(t1a, r1), _pick(d1a, r1),
                         _pick(h2a, r2), _pick(t2a, r2), _pick(d2a, r2), N, L)
    r1a = np.broadcast_to(np.asarray(r1), ll1.shape)
    r2a = np.broadcast_to(np.asarray(r2), ll1.shape)
    low1 = np.where(r1a > 0, _pick(sp.g1, np.maximum(r1a - 1, 0)) / L1, np.inf)
    low2 = np.where(r2a > 0, _pick(sp.g2, np.maximum(r2a - 1, 0)) / L2, np.inf)
    gate = (low1 > s2) & (low2 > s2)
    ll0 = np.asarray(ll0)[..., None]
    # H0 is nested in H1, so a negative gated value is rounding only
    with np.errstate(invalid="ignore"):
        cand = np.where(gate, np.maximum(ll1 - ll0, 0.0), 0.0)
    ok = np.isfinite(ll1) & np.isfinite(ll0)
    return np.where(ok, cand, -np.inf)


def ccd_candidates(sp: WindowSpectra) -> np.ndarray:
    """Per-grid-point log determinant ratios, ``(T, G)``; singular segments give ``-inf``."""
    L = sp.L
    L1 = sp.l1.astype(float)
    L2 = L - L1
    with np.errstate(divide="ignore", invalid="ignore"):
        ld0 = np.log(sp.g0 / L).sum(-1)
        ld1 = np.log(sp.g1 / L1[:, None]).sum(-1)
        ld2 = np.log(sp.g2 / L2[:, None]).sum(-1)
        # log det is concave, so the exact value is never negative
        cand = np.maximum(L * ld0[:, None] - L1 * ld1 - L2 * ld2, 0.0)
    ok = np.isfinite(ld1) & np.isfinite(ld2) & np.isfinite(ld0)[:, None]
    return np.where(ok, cand, -np.inf)


def reduce_candidates(cand: np.ndarray, l1: np.ndarray) -> tuple:
    """Max over the grid; ties go to the smallest L1.

    Returns ``(statistic, l1hat)`` with ``l1hat = 0`` marking "absent"
    (every candidate ``-inf``, statistic forced to 0).
    """
    cand = np.where(np.isnan(cand), -np.inf, cand)
    idx = np.argmax(cand, axis=-1)
    stat = np.take_along_axis(cand, idx[..., None], -1)[..., 0]
    valid = np.isfinite(stat)
    return np.where(valid, stat, 0.0), np.where(valid, l1[idx], 0)


def _result(cand_row, l1, eta) -> DetectionResult:
    stat, l1hat = reduce_candidates(cand_row[None], l1)
    stat, l1hat = float(stat[0]), int(l1hat[0])
    return DetectionResult(
        statistic=stat,
        l1hat=l1hat or None,
        decision=bool(stat > eta),
        threshold=float(eta),
        per_l1=tuple(zip(l1.tolist(), cand_row.tolist())),
    )


def ced_statistic(Z, r: RankTriple, structure: StructureKind,
                  grid: Optional[L1Grid] = None, eta: float = math.inf) -> DetectionResult:
    """Gated log-GLRT (H/P/S/C-CED) for one window.

    Parameters
    ----------
    Z : DataWindow or ndarray
        N x L window.
    r : RankTriple
        Known ranks.
    structure : StructureKind
        Covariance structure the detector exploits.
    grid : L1Grid, optional
        Candidate change points; defaults to the rank-derived admissible set.
    eta : float
        Threshold in the log domain; the default never declares.
    """
    Zw = Z if isinstance(Z, DataWindow) else DataWindow(Z)
    r.check(Zw.N, Zw.L)
    grid = L1Grid.from_ranks(Zw.L, r) if grid is None else grid
    grid.check_window(Zw.L)
    sp = window_spectra(Zw, structure, grid)
    cand = ced_candidates(sp, r.r0, r.r1, r.r2)[0]
    return _result(cand, sp.l1, eta)


def ccd_statistic(Z, structure: StructureKind, grid: Optional[L1Grid] = None,
                  eta: float = math.inf) -> DetectionResult:
    """Log covariance-change detector (H/P/S/C-CCD) for one window.

    Singular segment scatters yield ``-inf`` candidates, visible in
    ``per_l1``.
    """
    Zw = Z if isinstance(Z, DataWindow) else DataWindow(Z)
    grid = L1Grid.omega(Zw.N, Zw.L) if grid is None else grid
    grid.check_window(Zw.L)
    grid.check_ccd(Zw.N, Zw.L)
    sp = window_spectra(Zw, structure, grid)
    return _result(ccd_candidates(sp)[0], sp.l1, eta)


# -- detector configurations for batch evaluation ---------------------------

FAMILIES = ("ced", "ccd")


@dataclass(frozen=True)
class DetectorConfig:
    """One detector variant.

    ``ranks=None`` with ``family="ced"`` selects the estimated-rank detector
    (model order selection with ``mos``). ``grid`` is an explicit tuple of
    change points, the string ``"omega"``, or ``None`` for the family
    default (rank-derived for CED, omega for CCD and estimated-rank CED).
    """

    family: str
    structure: StructureKind
    ranks: Optional[RankTriple] = None
    grid: Union[None, str, tuple] = None
    mos: Optional[object] = None
    search_max: Optional[int] = None

    def __post_init__(self):
        fam = self.family.lower()
        if fam not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "structure", StructureKind.parse(self.structure))
        if self.grid is not None and not isinstance(self.grid, str):
            object.__setattr__(self, "grid", tuple(int(v) for v in self.grid))
        if fam == "ced" and self.ranks is None and self.mos is None:
            from .rank import MosRule
            object.__setattr__(self, "mos", MosRule("bic"))

    @property
    def estimated(self) -> bool:
        return self.family == "ced" and self.ranks is None

    @property
    def name(self) -> str:
        base = f"{self.structure.letter}-{self.family.upper()}"
        return base + "(est)" if self.estimated else base

    def l1_grid(self, N: int, L: int) -> L1Grid:
        if isinstance(self.grid, tuple):
            grid = L1Grid(self.grid)
        elif self.grid == "omega" or self.family == "ccd" or self.estimated:
            grid = L1Grid.omega(N, L)
        elif self.grid is None:
            grid = L1Grid.from_ranks(L, self.ranks)
        else:
            raise ValueError(f"unknown grid spec {self.grid!r}")
        grid.check_window(L)
        if self.family == "ccd":
            grid.check_ccd(N, L)
        if self.ranks is not None:
            self.ranks.check(N, L)
        return grid

    def fingerprint(self, N: int, L: int) -> str:
        payload = {
            "family": self.family,
            "structure": self.structure.value,
            "ranks": None if self.ranks is None else list(self.ranks.as_tuple()),
            "mos": None if not self.estimated else self.mos.describe(),
            "search_max": self.search_max if self.estimated else None,
            "grid": list(self.l1_grid(N, L).values),
            "N": int(N),
            "L": int(L),
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def candidates_from_spectra(sp: WindowSpectra, det: DetectorConfig) -> np.ndarray:
    if det.family == "ccd":
        return ccd_candidates(sp)
    if det.estimated:
        from .rank import estimated_ced_candidates
        return estimated_ced_candidates(sp, det.mos, det.search_max)[0]
    return ced_candidates(sp, det.ranks.r0, det.ranks.r1, det.ranks.r2)


def batch_statistics(Z: np.ndarray, detectors: Sequence[DetectorConfig]) -> dict:
    """Evaluate several detectors on a ``(T, N, L)`` stack.

    Spectra are shared between detectors with the same structure and grid.
    Returns ``{name: (statistic[T], l1hat[T])}``.
    """
    Zb = _as_batch(Z)
    N, L = Zb.shape[-2:]
    cache = {}
    out = {}
    for det in detectors:
        grid = det.l1_grid(N, L)
        key = (det.structure, grid.values)
        if key not in cache:
            cache[key] = window_spectra(Zb, det.structure, grid)
        sp = cache[key]
        out[det.name] = reduce_candidates(candidates_from_spectra(sp, det), sp.l1)
    return out


def standard_detectors(ranks: RankTriple, grid="omega") -> list:
    """The eight variants compared in the synthetic experiments (CED and CCD x 4 structures)."""
    dets = []
    for family in FAMILIES:
        for s in StructureKind:
            dets.append(DetectorConfig(family, s, ranks if family == "ced" else None, grid))
    return dets
