"""Maximized log-likelihoods for the low-rank-plus-white-noise covariance model.

Under H0 the window has covariance ``sigma^2 I + M0`` with rank(M0) = r0;
under H1 the two segments share ``sigma^2`` and carry ranks r1 and r2.
After maximizing over the noise power and the clutter components, both
likelihoods depend on the data only through the (descending) eigenvalues
of the structured scatter matrices. The batched ``*_batch`` functions
operate on eigenvalue arrays of shape ``(..., N)`` and are what the Monte
Carlo engine uses; the scalar functions wrap them with validation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .covmodel import ScatterMatrix
from .errors import DegenerateDataError, NumericError

CLAMP_TOL = 1e-10


@dataclass(frozen=True)
class EigenSpectrum:
    gamma: np.ndarray
    sample_count: int

    @property
    def N(self) -> int:
        return self.gamma.shape[-1]


@dataclass(frozen=True)
class LikelihoodValue:
    """Maximized log-likelihood and the matching noise-power estimate.

    ``signal_ratios`` holds the per-segment ``gamma_i / L_seg`` of the
    modeled eigenvalues, which is what the detector gate compares against
    ``noise_estimate``.
    """

    value: float
    noise_estimate: float
    signal_ratios: tuple = field(default=())

    @property
    def gate_passes(self) -> bool:
        return all(np.all(r > self.noise_estimate) for r in self.signal_ratios)


def sorted_eigvals(S: np.ndarray) -> np.ndarray:
    """Descending eigenvalues of a stack of Hermitian matrices, tiny negatives clamped."""
    g = np.linalg.eigvalsh(S)[..., ::-1]
    top = np.maximum(g[..., :1], 0.0)
    return np.where((g < 0) & (g >= -CLAMP_TOL * top), 0.0, g)


def eigdecompose(S: Union[ScatterMatrix, np.ndarray], sample_count: int = None) -> EigenSpectrum:
    if isinstance(S, ScatterMatrix):
        sample_count = S.sample_count if sample_count is None else sample_count
        S = S.S
    S = np.asarray(S)
    try:
        g = sorted_eigvals(S)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigensolver failed: {exc}") from exc
    if g[-1] < 0:
        raise NumericError(f"scatter matrix is not PSD (eigenvalue {g[-1]:.3g})")
    return EigenSpectrum(g, sample_count)


def _head_logs(gamma, n):
    # log(gamma_i / n), with log 0 -> -inf silently
    with np.errstate(divide="ignore"):
        return np.log(gamma / n)


def _tail_sums(gamma):
    """tails[..., r] = sum_{i >= r} gamma_i for r = 0..N (reverse cumsum)."""
    rev = np.cumsum(gamma[..., ::-1], axis=-1)[..., ::-1]
    zero = np.zeros(gamma.shape[:-1] + (1,))
    return np.concatenate([rev, zero], axis=-1)


def _head_sums(logs):
    """heads[..., r] = sum_{i < r} logs_i for r = 0..N."""
    zero = np.zeros(logs.shape[:-1] + (1,))
    return np.concatenate([zero, np.cumsum(logs, axis=-1)], axis=-1)


def h0_loglik_all(gamma: np.ndarray, L: int) -> tuple:
    """Profile of the H0 maximized log-likelihood over every rank r0 = 0..N-1.

    Returns ``(loglik, sigma2)`` with shapes ``(..., N)``; degenerate entries
    (vanishing modeled eigenvalue or zero noise estimate) are ``-inf``.
    """
    gamma = np.asarray(gamma, dtype=float)
    N = gamma.shape[-1]
    r = np.arange(N)
    heads = _head_sums(_head_logs(gamma, L))[..., :N]
    tails = _tail_sums(gamma)[..., :N]
    sigma2 = tails / (L * (N - r))
    with np.errstate(divide="ignore", invalid="ignore"):
        val = -L * N * np.log(np.pi) - L * N - L * (heads + (N - r) * np.log(sigma2))
    ok = np.isfinite(heads) & (sigma2 > 0)
    return np.where(ok, val, -np.inf), sigma2


def h0_loglik_batch(gamma: np.ndarray, r0: Union[int, np.ndarray], L: int) -> tuple:
    ll, s2 = h0_loglik_all(gamma, L)
    r0 = np.asarray(r0)
    if r0.ndim == 0:
        return ll[..., int(r0)], s2[..., int(r0)]
    idx = r0[..., None]
    return np.take_along_axis(ll, idx, -1)[..., 0], np.take_along_axis(s2, idx, -1)[..., 0]


def h1_parts(gamma: np.ndarray, n: Union[int, np.ndarray]) -> tuple:
    """Per-segment ingredients for every rank 0..N-1: (n * head log sum, tail sum, n*(N-r))."""
    gamma = np.asarray(gamma, dtype=float)
    N = gamma.shape[-1]
    n = np.asarray(n, dtype=float)[..., None]
    heads = n * _head_sums(_head_logs(gamma, n))[..., :N]
    tails = _tail_sums(gamma)[..., :N]
    dof = n * (N - np.arange(N))
    return heads, tails, dof


def h1_combine(head1, tail1, dof1, head2, tail2, dof2, N: int, L: int) -> tuple:
    """Combine segment ingredients (broadcastable) into (loglik, sigma2)."""
    dof = dof1 + dof2
    sigma2 = (tail1 + tail2) / dof
    with np.errstate(divide="ignore", invalid="ignore"):
        val = -L * N * np.log(np.pi) - L * N - dof * np.log(sigma2) - head1 - head2
    ok = np.isfinite(head1) & np.isfinite(head2) & (sigma2 > 0)
    return np.where(ok, val, -np.inf), sigma2


def h1_loglik_batch(gamma1, gamma2, r1: int, r2: int, L1, L2) -> tuple:
    N = np.shape(gamma1)[-1]
    L = np.asarray(L1) + np.asarray(L2)
    h1, t1, d1 = h1_parts(gamma1, L1)
    h2, t2, d2 = h1_parts(gamma2, L2)
    return h1_combine(h1[..., r1], t1[..., r1], d1[..., r1],
                      h2[..., r2], t2[..., r2], d2[..., r2], N, L)


def _spectrum(spec, n_expected, N):
    g = spec.gamma if isinstance(spec, EigenSpectrum) else np.asarray(spec, dtype=float)
    if g.ndim != 1:
        raise ValueError("expected a single spectrum")
    if N is not None and g.size != N:
        raise ValueError(f"spectrum has {g.size} eigenvalues, expected N={N}")
    if isinstance(spec, EigenSpectrum) and n_expected is not None and spec.sample_count not in (None, n_expected):
        raise ValueError(f"spectrum built from {spec.sample_count} samples, expected {n_expected}")
    return g


def h0_loglik(spec: Union[EigenSpectrum, np.ndarray], r0: int, L: int = None, N: int = None) -> LikelihoodValue:
    """Maximized H0 log-likelihood for clutter rank ``r0``.

    ``L`` defaults to the spectrum's sample count. Raises
    ``DegenerateDataError`` when the noise-power estimate is not positive;
    a vanishing modeled eigenvalue yields ``value = -inf``.
    """
    if L is None:
        L = spec.sample_count
    g = _spectrum(spec, L, N)
    N = g.size
    if not 0 <= r0 < N:
        raise ValueError(f"r0={r0} outside [0, {N - 1}]")
    val, s2 = h0_loglik_batch(g, r0, L)
    if not s2 > 0:
        raise DegenerateDataError("noise-power estimate under H0 is not positive")
    return LikelihoodValue(float(val), float(s2), (g[:r0] / L,))


def h1_loglik(spec1, spec2, r1: int, r2: int, L1: int = None, L2: int = None, N: int = None) -> LikelihoodValue:
    """Maximized H1 log-likelihood for segment ranks ``(r1, r2)``."""
    L1 = spec1.sample_count if L1 is None else L1
    L2 = spec2.sample_count if L2 is None else L2
    g1 = _spectrum(spec1, L1, N)
    g2 = _spectrum(spec2, L2, N)
    N = g1.size
    if g2.size != N:
        raise ValueError("segment spectra differ in size")
    if not (0 <= r1 < N and 0 <= r2 < N):
        raise ValueError(f"ranks ({r1}, {r2}) outside [0, {N - 1}]")
    if L1 < 1 or L2 < 1:
        raise ValueError("segments need at least one snapshot")
    val, s2 = h1_loglik_batch(g1, g2, r1, r2, L1, L2)
    if not s2 > 0:
        raise DegenerateDataError("noise-power estimate under H1 is not positive")
    return LikelihoodValue(float(val), float(s2), (g1[:r1] / L1, g2[:r2] / L2))
