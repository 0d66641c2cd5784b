"""Clutter edge detection in multichannel radar training data.

Structure-aware GLRT detectors (Hermitian, persymmetric, symmetric,
centrosymmetric), the covariance-change competitor family, rank estimation
by model order selection, Monte Carlo evaluation and a sliding-window scan.
"""

__version__ = "0.1.0"

from .covmodel import (
    ClutterScene, DataWindow, Hypothesis, RankTriple, ScatterMatrix, StructureKind,
    build_ccm, random_hermitian_ccm, sample_window, steering_vector, structured_scatter,
)
from .detectors import (
    DetectionResult, DetectorConfig, L1Grid, batch_statistics, ccd_statistic, ced_statistic,
    standard_detectors,
)
from .likelihood import EigenSpectrum, LikelihoodValue, eigdecompose, h0_loglik, h1_loglik
from .rank import MosRule, RankEstimate, estimate_r0, estimate_ranks_h1

__all__ = [
    "ClutterScene", "DataWindow", "Hypothesis", "RankTriple", "ScatterMatrix", "StructureKind",
    "build_ccm", "random_hermitian_ccm", "sample_window", "steering_vector", "structured_scatter",
    "DetectionResult", "DetectorConfig", "L1Grid", "batch_statistics", "ccd_statistic",
    "ced_statistic", "standard_detectors",
    "EigenSpectrum", "LikelihoodValue", "eigdecompose", "h0_loglik", "h1_loglik",
    "MosRule", "RankEstimate", "estimate_r0", "estimate_ranks_h1",
]
