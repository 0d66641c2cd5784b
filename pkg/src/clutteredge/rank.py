"""Model-order selection for unknown clutter ranks.

Ranks are chosen by minimizing ``-2 * loglik + q * (number of parameters)``
with the Hermitian parameter counts ``p(r0) = r0 (2N - r0) + 1`` under H0
and ``zeta(r1, r2) = 1 + r1 (2N - r1) + r2 (2N - r2)`` under H1, for every
structure. The H1 pair is chosen separately at each candidate change point
and then plugged into the gated CED statistic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .covmodel import DataWindow, StructureKind
from .detectors import L1Grid, ced_candidates, reduce_candidates, window_spectra
from .likelihood import EigenSpectrum, h0_loglik_all, h1_combine, h1_parts

RULES = ("aic", "bic", "gic")


@dataclass(frozen=True)
class MosRule:
    kind: str = "bic"
    a: float = 4.0

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in RULES:
            raise ValueError(f"MOS rule must be one of {RULES}")
        if kind == "gic" and not self.a > 1:
            raise ValueError("GIC requires a > 1")
        object.__setattr__(self, "kind", kind)

    def q(self, L: int) -> float:
        if self.kind == "aic":
            return 2.0
        if self.kind == "bic":
            return math.log(L)
        return 1.0 + self.a

    def describe(self) -> dict:
        return {"kind": self.kind, "a": self.a if self.kind == "gic" else None}


@dataclass(frozen=True)
class RankEstimate:
    r0hat: int
    r_minus_hat: tuple
    l1hat: Optional[int]
    statistic: float = 0.0
    score_per_l1: tuple = field(default=(), repr=False)


def params_h0(r0, N: int):
    return r0 * (2 * N - r0) + 1


def params_h1(r1, r2, N: int):
    return 1 + r1 * (2 * N - r1) + r2 * (2 * N - r2)


def _search_max(N: int, search_max: Optional[int]) -> int:
    sm = N - 2 if search_max is None else int(search_max)
    if not 0 <= sm <= N - 1:
        raise ValueError(f"search_max must lie in [0, {N - 1}]")
    return sm


def estimate_r0_batch(g0: np.ndarray, L: int, rule: MosRule, search_max: Optional[int] = None) -> np.ndarray:
    N = g0.shape[-1]
    sm = _search_max(N, search_max)
    ll, _ = h0_loglik_all(g0, L)
    r = np.arange(sm + 1)
    score = -2.0 * ll[..., : sm + 1] + rule.q(L) * params_h0(r, N)
    return np.argmin(score, axis=-1)


def estimate_r0(spec: EigenSpectrum, L: int = None, N: int = None, rule: MosRule = MosRule(),
                search_max: Optional[int] = None) -> int:
    """Rank under H0 minimizing the penalized likelihood; smallest rank wins ties."""
    g = spec.gamma if isinstance(spec, EigenSpectrum) else np.asarray(spec, dtype=float)
    L = spec.sample_count if L is None else L
    if N is not None and g.size != N:
        raise ValueError("spectrum size does not match N")
    return int(estimate_r0_batch(g, L, rule, search_max))


def estimate_pairs(sp, rule: MosRule, search_max: Optional[int] = None) -> tuple:
    """Per-grid-point (r1, r2) minimizing the penalized H1 likelihood.

    Returns ``(r1hat, r2hat, valid)``, each ``(T, G)``. Pairs whose
    admissible change-point range excludes the grid point are skipped;
    ``valid`` is False where no pair survives.
    """
    N, L = sp.N, sp.L
    sm = _search_max(N, search_max)
    R = sm + 1
    L1 = sp.l1.astype(float)
    L2 = L - L1
    h1a, t1a, d1a = (x[..., :R] for x in h1_parts(sp.g1, L1))
    h2a, t2a, d2a = (x[..., :R] for x in h1_parts(sp.g2, L2))
    ll, _ = h1_combine(h1a[..., :, None], t1a[..., :, None], d1a[..., :, None],
                       h2a[..., None, :], t2a[..., None, :], d2a[..., None, :], N, L)
    r = np.arange(R)
    pen = params_h1(r[:, None], r[None, :], N)
    score = -2.0 * ll + rule.q(L) * pen
    m = np.maximum(r[:, None], r[None, :])
    ok = ((m + 1 <= sp.l1[:, None, None]) & (sp.l1[:, None, None] <= L - m - 1)
          & (r[:, None] + r[None, :] <= L))
    score = np.where(ok, score, np.inf)
    score = np.where(np.isnan(score), np.inf, score)
    flat = score.reshape(score.shape[:-2] + (R * R,))
    best = np.argmin(flat, axis=-1)
    valid = np.isfinite(np.take_along_axis(flat, best[..., None], -1)[..., 0])
    return best // R, best % R, valid


def estimated_ced_candidates(sp, rule: MosRule, search_max: Optional[int] = None) -> tuple:
    """Gated CED candidates with ranks estimated from the data.

    Returns ``(candidates, r0hat, r1hat, r2hat)``.
    """
    r0hat = estimate_r0_batch(sp.g0, sp.L, rule, search_max)
    r1hat, r2hat, valid = estimate_pairs(sp, rule, search_max)
    cand = ced_candidates(sp, r0hat, r1hat, r2hat)
    return np.where(valid, cand, -np.inf), r0hat, r1hat, r2hat


def estimate_ranks_h1(Z, structure: StructureKind, grid: Optional[L1Grid] = None,
                      rule: MosRule = MosRule(), search_max: Optional[int] = None) -> RankEstimate:
    """Joint rank and change-point estimate for one window.

    The H1 rank pair is selected at every grid point, the gated statistic is
    evaluated with ``(r0hat, r1hat, r2hat)``, and the grid point with the
    largest value (smallest on ties) fixes the returned pair.
    """
    Zw = Z if isinstance(Z, DataWindow) else DataWindow(Z)
    grid = L1Grid.omega(Zw.N, Zw.L) if grid is None else grid
    grid.check_window(Zw.L)
    sp = window_spectra(Zw, structure, grid)
    cand, r0hat, r1hat, r2hat = estimated_ced_candidates(sp, rule, search_max)
    stat, l1hat = reduce_candidates(cand, sp.l1)
    l1hat = int(l1hat[0])
    if l1hat:
        g = int(np.searchsorted(sp.l1, l1hat))
        pair = (int(r1hat[0, g]), int(r2hat[0, g]))
    else:
        pair = (int(r0hat[0]), int(r0hat[0]))
    per = tuple(zip(sp.l1.tolist(), cand[0].tolist(), r1hat[0].tolist(), r2hat[0].tolist()))
    return RankEstimate(int(r0hat[0]), pair, l1hat or None, float(stat[0]), per)
