"""Data model for multichannel training windows.

Covers the domain types, the four structured projections of a scatter
matrix, clutter covariance synthesis from steering vectors, and seeded
Gaussian sampling of windows under both hypotheses.

Index conventions: snapshots (columns) and change points are 1-based,
matching how edge positions are reported everywhere else in the package.
Angles are in degrees at every public interface.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DataError, NumericError


class StructureKind(enum.Enum):
    """Assumed structure of the clutter covariance."""

    HERMITIAN = "hermitian"
    PERSYMMETRIC = "persymmetric"
    SYMMETRIC = "symmetric"
    CENTROSYMMETRIC = "centrosymmetric"

    @property
    def letter(self) -> str:
        return self.value[0].upper()

    @property
    def is_real(self) -> bool:
        return self in (StructureKind.SYMMETRIC, StructureKind.CENTROSYMMETRIC)

    @classmethod
    def parse(cls, value: Union[str, "StructureKind"]) -> "StructureKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for kind in cls:
            if key in (kind.value, kind.letter.lower()):
                return kind
        raise ValueError(f"unknown structure {value!r}")


class Hypothesis(enum.Enum):
    H0 = 0
    H1 = 1


@dataclass(frozen=True)
class DataWindow:
    """N x L complex window of training snapshots (one column per range bin)."""

    Z: np.ndarray

    def __post_init__(self):
        Z = np.asarray(self.Z)
        if Z.ndim != 2:
            raise DataError(f"window must be 2-D, got shape {Z.shape}")
        if Z.shape[0] < 2 or Z.shape[1] < 2:
            raise DataError(f"window needs N >= 2 and L >= 2, got {Z.shape}")
        if not np.all(np.isfinite(Z)):
            raise DataError("window contains non-finite values")
        object.__setattr__(self, "Z", Z.astype(complex, copy=False))

    @property
    def N(self) -> int:
        return self.Z.shape[0]

    @property
    def L(self) -> int:
        return self.Z.shape[1]


@dataclass(frozen=True)
class RankTriple:
    """Assumed ranks of the clutter covariance under H0 and in the two H1 regions."""

    r0: int
    r1: int
    r2: int

    def __post_init__(self):
        for name in ("r0", "r1", "r2"):
            if int(getattr(self, name)) < 0:
                raise ValueError(f"{name} must be non-negative")

    @classmethod
    def uniform(cls, r: int) -> "RankTriple":
        return cls(r, r, r)

    def check(self, N: int, L: Optional[int] = None) -> None:
        """Validate against the channel count and, if given, the window length."""
        if max(self.r0, self.r1, self.r2) >= N:
            raise ValueError(f"ranks {self.as_tuple()} must be < N={N}")
        if L is not None and L < self.r1 + self.r2:
            raise ValueError(f"window L={L} shorter than r1+r2={self.r1 + self.r2}")

    def as_tuple(self) -> tuple:
        return (self.r0, self.r1, self.r2)


@dataclass(frozen=True)
class ScatterMatrix:
    S: np.ndarray
    structure: StructureKind
    sample_count: int

    @property
    def N(self) -> int:
        return self.S.shape[-1]


def exchange(X: np.ndarray) -> np.ndarray:
    """Return J X J for the anti-identity J, applied over the last two axes."""
    return X[..., ::-1, ::-1]


def project(S: np.ndarray, structure: StructureKind) -> np.ndarray:
    """Structured projection of (a stack of) Hermitian scatter matrices."""
    structure = StructureKind.parse(structure)
    if structure is StructureKind.HERMITIAN:
        return S
    if structure is StructureKind.PERSYMMETRIC:
        return 0.5 * (S + exchange(S.conj()))
    R = np.ascontiguousarray(S.real)
    if structure is StructureKind.SYMMETRIC:
        return R
    # Re{S*} = Re{S}^T = Re{S} for Hermitian S
    return 0.5 * (R + exchange(R))


def structured_scatter(
    Z: Union[DataWindow, np.ndarray],
    structure: StructureKind,
    a: int = 1,
    b: Optional[int] = None,
) -> ScatterMatrix:
    """Structured scatter matrix of columns ``a..b`` (1-based, inclusive).

    Parameters
    ----------
    Z : DataWindow or ndarray
        N x L data matrix.
    structure : StructureKind
        Selects the projection: Hermitian leaves ``S = sum z z^H`` untouched,
        persymmetric averages with ``J S* J``, symmetric keeps ``Re{S}``,
        centrosymmetric averages ``Re{S}`` with ``J Re{S} J``.
    a, b : int
        Column range; ``b`` defaults to L.

    Returns
    -------
    ScatterMatrix
    """
    Zm = Z.Z if isinstance(Z, DataWindow) else np.asarray(Z)
    L = Zm.shape[1]
    b = L if b is None else b
    if not 1 <= a <= b <= L:
        raise DataError(f"empty or invalid column range [{a}..{b}] for L={L}")
    cols = Zm[:, a - 1:b]
    if not np.all(np.isfinite(cols)):
        raise DataError("non-finite samples in scatter range")
    S = cols @ cols.conj().T
    return ScatterMatrix(project(S, structure), StructureKind.parse(structure), b - a + 1)


def steering_vector(theta_deg: float, N: int) -> np.ndarray:
    """Spatial steering vector, element m = exp(j*pi*(m - (N-1)/2)*sin(theta))."""
    if N < 2:
        raise ValueError("N must be >= 2")
    m = np.arange(N) - (N - 1) / 2.0
    return np.exp(1j * np.pi * m * np.sin(np.deg2rad(theta_deg)))


def build_ccm(angles_deg: Sequence[float], clutter_power: float, N: int) -> np.ndarray:
    """Clutter covariance ``sigma_c^2 * sum_k v(theta_k) v(theta_k)^H``."""
    angles = np.atleast_1d(np.asarray(angles_deg, dtype=float))
    if clutter_power < 0:
        raise ValueError("clutter power must be non-negative")
    if not 1 <= angles.size < N:
        raise ValueError(f"need 1 <= |angles| < N, got {angles.size} angles for N={N}")
    if np.unique(angles).size != angles.size:
        raise ValueError("angles must be distinct")
    V = np.stack([steering_vector(t, N) for t in angles], axis=1)
    M = clutter_power * (V @ V.conj().T)
    return 0.5 * (M + M.conj().T)


def random_hermitian_ccm(rank: int, N: int, trace: float, seed: int) -> np.ndarray:
    """Random unstructured Hermitian PSD matrix of given rank and trace."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((N, rank)) + 1j * rng.standard_normal((N, rank))
    M = A @ A.conj().T
    M *= trace / np.trace(M).real
    return 0.5 * (M + M.conj().T)


def db_to_linear(x_db: float) -> float:
    return float(10.0 ** (x_db / 10.0))


REFERENCE_ANGLES = (-20.0, -10.0, 10.0, 20.0)


@dataclass(frozen=True)
class ClutterScene:
    """Synthetic scene for the two-region clutter model.

    ``ccm2`` optionally replaces the steering-vector construction of the
    second region's covariance (used for structure-change experiments);
    when given it is used as-is and ``cpr_db`` is ignored for region 2.
    """

    N: int
    L: int
    cnr_db: float
    cpr_db: float = 0.0
    sigma_n2: float = 1.0
    theta0: tuple = REFERENCE_ANGLES
    theta1: tuple = REFERENCE_ANGLES
    theta2: tuple = REFERENCE_ANGLES
    true_l1: Optional[int] = None
    ccm2: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.sigma_n2 <= 0:
            raise ValueError("sigma_n2 must be positive")
        if self.N < 2 or self.L < 2:
            raise ValueError("scene needs N >= 2 and L >= 2")
        for name in ("theta0", "theta1", "theta2"):
            th = tuple(float(t) for t in np.atleast_1d(getattr(self, name)))
            if not 1 <= len(th) < self.N:
                raise ValueError(f"{name} must hold between 1 and N-1 angles")
            object.__setattr__(self, name, th)
        if self.ccm2 is not None:
            ccm2 = np.asarray(self.ccm2, dtype=complex)
            if ccm2.shape != (self.N, self.N):
                raise ValueError("ccm2 must be N x N")
            object.__setattr__(self, "ccm2", ccm2)

    @property
    def clutter_powers(self) -> tuple:
        """(sigma_c0^2, sigma_c1^2, sigma_c2^2) in linear units."""
        c0 = self.sigma_n2 * db_to_linear(self.cnr_db)
        return c0, c0, c0 * db_to_linear(self.cpr_db)

    def ccm(self, region: int) -> np.ndarray:
        if region == 2 and self.ccm2 is not None:
            return self.ccm2
        angles = (self.theta0, self.theta1, self.theta2)[region]
        return build_ccm(angles, self.clutter_powers[region], self.N)

    def covariance(self, region: int) -> np.ndarray:
        return self.sigma_n2 * np.eye(self.N) + self.ccm(region)

    def replace(self, **changes) -> "ClutterScene":
        params = {f: getattr(self, f) for f in self.__dataclass_fields__}
        params.update(changes)
        return ClutterScene(**params)


def covariance_sqrt(R: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Hermitian square root via eigendecomposition."""
    R = 0.5 * (R + R.conj().T)
    w, U = np.linalg.eigh(R)
    if w[0] < -tol * max(abs(w[-1]), 1.0):
        raise NumericError(f"covariance is not PSD (min eigenvalue {w[0]:.3g})")
    w = np.clip(w, 0.0, None)
    return (U * np.sqrt(w)) @ U.conj().T


# -- randomness -------------------------------------------------------------

def _philox_key(master_seed: int) -> np.ndarray:
    return np.random.SeedSequence(int(master_seed)).generate_state(2, np.uint64)


def trial_rng(master_seed: int, trial: int, stream: int = 0) -> np.random.Generator:
    """Counter-based substream for one Monte Carlo trial.

    The Philox key comes from ``master_seed``; the trial and stream indices
    occupy the high counter words, so each trial owns a disjoint block of
    the counter space and results do not depend on evaluation order.
    """
    bitgen = np.random.Philox(key=_philox_key(master_seed),
                              counter=[0, 0, int(trial), int(stream)])
    return np.random.Generator(bitgen)


def white_noise(rng: np.random.Generator, N: int, L: int) -> np.ndarray:
    """Standard circular complex Gaussian N x L matrix (unit variance entries)."""
    x = rng.standard_normal((2, N, L))
    return (x[0] + 1j * x[1]) * np.sqrt(0.5)


def white_batch(master_seed: int, trials: Sequence[int], N: int, L: int,
                stream: int = 0) -> np.ndarray:
    return np.stack([white_noise(trial_rng(master_seed, t, stream), N, L) for t in trials])


def color_batch(W: np.ndarray, root_first: np.ndarray, root_second: Optional[np.ndarray] = None,
                l1: Union[None, int, np.ndarray] = None) -> np.ndarray:
    """Apply covariance roots to white windows.

    Columns ``1..l1`` get ``root_first`` and the rest ``root_second``;
    ``l1`` may be a per-window array. With ``root_second`` omitted the
    whole window uses ``root_first``.
    """
    Z = root_first @ W
    if root_second is None:
        return Z
    Z2 = root_second @ W
    L = W.shape[-1]
    l1 = np.broadcast_to(np.asarray(l1), (W.shape[0],))
    second = np.arange(L)[None, :] >= l1[:, None]
    return np.where(second[:, None, :], Z2, Z)


def scene_roots(scene: ClutterScene) -> tuple:
    return tuple(covariance_sqrt(scene.covariance(i)) for i in range(3))


def sample_window(scene: ClutterScene, hypothesis: Hypothesis, seed: int,
                  l1: Optional[int] = None) -> DataWindow:
    """Draw one window; identical seed gives bit-identical output.

    Under H1 the change point defaults to ``scene.true_l1``.
    """
    hypothesis = Hypothesis(hypothesis) if not isinstance(hypothesis, Hypothesis) else hypothesis
    W = white_noise(trial_rng(seed, 0), scene.N, scene.L)
    if hypothesis is Hypothesis.H0:
        return DataWindow(covariance_sqrt(scene.covariance(0)) @ W)
    l1 = scene.true_l1 if l1 is None else l1
    if l1 is None or not 1 <= l1 < scene.L:
        raise ValueError(f"H1 sampling needs 1 <= L1 < L, got {l1}")
    Z = color_batch(W[None], covariance_sqrt(scene.covariance(1)),
                    covariance_sqrt(scene.covariance(2)), l1)[0]
    return DataWindow(Z)
