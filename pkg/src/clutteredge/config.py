"""Run configuration loaded from a TOML document.

Every section is optional; omitted values fall back to the reference
synthetic setting (N=9, L=27, CNR 25 dB, four clutter angles at +-10
and +-20 degrees, rank 4). Unknown keys are rejected so
typos surface as configuration errors rather than silent defaults.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .covmodel import REFERENCE_ANGLES, ClutterScene, RankTriple, StructureKind
from .detectors import DetectorConfig
from .errors import ConfigError
from .rank import MosRule

SCHEMA = {
    "": {"seed", "threads", "detector", "window", "scene", "calibration", "sweep",
         "generate", "scan", "rank"},
    "detector": {"family", "structure", "ranks", "mos", "gic_a", "search_max"},
    "window": {"L", "grid"},
    "scene": {"N", "sigma_n2", "cnr_db", "cpr_db", "theta0_deg", "theta1_deg", "theta2_deg",
              "true_l1"},
    "calibration": {"pfed", "trials"},
    "sweep": {"cpr_db", "trials_per_point", "true_l1"},
    "generate": {"K", "blocks", "edge_bin", "cut_index", "precision", "cpr_db"},
    "scan": {"cut_index", "calibration_start_bins", "calibration_blocks", "pfed"},
    "rank": {"trials", "hypothesis"},
}


@dataclass
class RunConfig:
    detector: DetectorConfig
    scene: ClutterScene
    seed: int = 0
    threads: int = 1
    pfed: float = 1e-3
    calibration_trials: Optional[int] = None
    sweep_cpr_db: tuple = tuple(range(0, 21, 2))
    sweep_trials: int = 10_000
    sweep_true_l1: Optional[int] = None
    generate: dict = field(default_factory=dict)
    scan: dict = field(default_factory=dict)
    rank: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.scene.N

    @property
    def L(self) -> int:
        return self.scene.L

    @property
    def n_calibration_trials(self) -> int:
        if self.calibration_trials is not None:
            return self.calibration_trials
        return int(math.ceil(100 / self.pfed))

    def fingerprint(self) -> str:
        return self.detector.fingerprint(self.N, self.L)


def _check_keys(doc: dict, section: str) -> None:
    allowed = SCHEMA[section]
    unknown = set(doc) - allowed
    if unknown:
        where = f"[{section}]" if section else "top level"
        raise ConfigError(f"unknown key(s) {sorted(unknown)} at {where}")


def _parse_detector(d: dict, N: int) -> DetectorConfig:
    family = d.get("family", "ced")
    structure = StructureKind.parse(d.get("structure", "centrosymmetric"))
    ranks_raw = d.get("ranks", [4, 4, 4])
    mos = MosRule(d.get("mos", "bic"), float(d.get("gic_a", 4.0)))
    if ranks_raw == "estimate":
        ranks = None
    else:
        if isinstance(ranks_raw, int):
            ranks_raw = [ranks_raw] * 3
        if len(ranks_raw) != 3:
            raise ConfigError("detector.ranks must be three integers or \"estimate\"")
        ranks = RankTriple(*(int(v) for v in ranks_raw))
        ranks.check(N)
    if family == "ccd":
        ranks = None
    return DetectorConfig(family, structure, ranks, None, mos, d.get("search_max"))


def parse_config(doc: dict) -> RunConfig:
    """Build a RunConfig from an already-parsed TOML mapping."""
    try:
        _check_keys(doc, "")
        for sec in SCHEMA:
            if sec and sec in doc:
                if not isinstance(doc[sec], dict):
                    raise ConfigError(f"[{sec}] must be a table")
                _check_keys(doc[sec], sec)
        sc = doc.get("scene", {})
        win = doc.get("window", {})
        N = int(sc.get("N", 9))
        L = int(win.get("L", 27))
        scene = ClutterScene(
            N=N, L=L,
            cnr_db=float(sc.get("cnr_db", 25.0)),
            cpr_db=float(sc.get("cpr_db", 0.0)),
            sigma_n2=float(sc.get("sigma_n2", 1.0)),
            theta0=tuple(sc.get("theta0_deg", REFERENCE_ANGLES)),
            theta1=tuple(sc.get("theta1_deg", sc.get("theta0_deg", REFERENCE_ANGLES))),
            theta2=tuple(sc.get("theta2_deg", sc.get("theta0_deg", REFERENCE_ANGLES))),
            true_l1=sc.get("true_l1"),
        )
        det = _parse_detector(doc.get("detector", {}), N)
        grid = win.get("grid", "omega")
        if grid == "ranks":
            grid = None
        elif isinstance(grid, list):
            if len(grid) != 2:
                raise ConfigError("window.grid must be \"omega\", \"ranks\" or [lo, hi]")
            grid = tuple(range(int(grid[0]), int(grid[1]) + 1))
        elif grid != "omega":
            raise ConfigError(f"unknown window.grid {grid!r}")
        det = DetectorConfig(det.family, det.structure, det.ranks, grid, det.mos, det.search_max)
        det.l1_grid(N, L)  # validates grid against window and family
        cal = doc.get("calibration", {})
        sw = doc.get("sweep", {})
        cfg = RunConfig(
            detector=det,
            scene=scene,
            seed=int(doc.get("seed", 0)),
            threads=int(doc.get("threads", 1)),
            pfed=float(cal.get("pfed", 1e-3)),
            calibration_trials=cal.get("trials"),
            sweep_cpr_db=tuple(float(x) for x in sw.get("cpr_db", range(0, 21, 2))),
            sweep_trials=int(sw.get("trials_per_point", 10_000)),
            sweep_true_l1=sw.get("true_l1", sc.get("true_l1")),
            generate=dict(doc.get("generate", {})),
            scan=dict(doc.get("scan", {})),
            rank=dict(doc.get("rank", {})),
        )
        if not 0 < cfg.pfed < 0.5:
            raise ConfigError("calibration.pfed must lie in (0, 0.5)")
        return cfg
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return parse_config({})
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(doc)
