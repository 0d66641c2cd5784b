"""Command-line interface: ``clutteredge <command> [options]``.

Commands
--------
calibrate   Monte Carlo threshold for the configured detector (JSON).
sweep       P_ED versus CPR at a fixed change point (CSV or JSON).
rmse        RMS localization error versus CPR, change point uniform on omega.
scan        Sliding-window scan of a data-cube file (JSON lines).
generate    Synthetic data cube with a planted clutter edge.
rank-est    Monte Carlo distribution of model-order-selection rank estimates.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .cubefile import read_cube, write_cube
from .errors import ConfigError, DataError, NumericError
from .experiments import (
    CalibrationSpec, calibrate_thresholds, ped_sweep, rank_experiment, rmse_sweep,
)
from .rank import MosRule
from .scan import RangeProfile, calibrate_from_profile, scan_profile, synthetic_cube

log = logging.getLogger("clutteredge")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _emit(text: str, output) -> None:
    if output:
        with open(output, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def load_threshold(path, cfg: RunConfig) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
        eta = float(doc["eta"])
        fp = str(doc["fingerprint"])
    except OSError as exc:
        raise DataError(f"cannot read threshold file {path}: {exc}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"threshold file {path} is corrupted or incomplete: {exc}") from exc
    if fp != cfg.fingerprint():
        raise ConfigError(
            f"threshold fingerprint {fp} does not match configured detector "
            f"{cfg.detector.name} ({cfg.fingerprint()})")
    doc["eta"] = eta
    return doc


def cmd_calibrate(cfg: RunConfig, args) -> int:
    spec = CalibrationSpec(cfg.scene, cfg.detector, cfg.pfed, cfg.n_calibration_trials, cfg.seed)
    eta = calibrate_thresholds(spec, threads=cfg.threads)[cfg.detector.name]
    doc = {
        "eta": eta,
        "pfed": cfg.pfed,
        "trials": spec.n_trials,
        "seed": cfg.seed,
        "detector": cfg.detector.name,
        "fingerprint": cfg.fingerprint(),
        "N": cfg.N,
        "L": cfg.L,
    }
    _emit(_dumps(doc), args.output)
    return EXIT_OK


def _sweep_common(cfg: RunConfig, args, runner) -> int:
    if not args.threshold:
        raise ConfigError("--threshold is required")
    th = load_threshold(args.threshold, cfg)
    etas = {cfg.detector.name: th["eta"]}
    res = runner(etas)[cfg.detector.name]
    res.extra = {"pfed": th.get("pfed"), "seed": cfg.seed, "fingerprint": cfg.fingerprint()}
    _emit(res.to_json() if args.format == "json" else res.to_csv(), args.output)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> int:
    l1 = cfg.sweep_true_l1
    if l1 is None:
        raise ConfigError("sweep needs scene.true_l1 or sweep.true_l1")
    return _sweep_common(cfg, args, lambda etas: ped_sweep(
        cfg.scene, cfg.detector, etas, cfg.sweep_cpr_db, cfg.sweep_trials, cfg.seed,
        true_l1=int(l1), threads=cfg.threads))


def cmd_rmse(cfg: RunConfig, args) -> int:
    grid = cfg.detector.l1_grid(cfg.N, cfg.L).values
    return _sweep_common(cfg, args, lambda etas: rmse_sweep(
        cfg.scene, cfg.detector, etas, cfg.sweep_cpr_db, cfg.sweep_trials, cfg.seed,
        l1_values=grid, threads=cfg.threads))


def cmd_generate(cfg: RunConfig, args) -> int:
    if not args.output:
        raise ConfigError("generate needs --output")
    g = cfg.generate
    K = int(g.get("K", 4 * cfg.L))
    blocks = int(g.get("blocks", 1))
    edge = g.get("edge_bin")
    scene = cfg.scene.replace(cpr_db=float(g.get("cpr_db", cfg.scene.cpr_db)))
    cube = synthetic_cube(scene, K, blocks, None if edge is None else int(edge), cfg.seed)
    write_cube(args.output, cube, int(g.get("precision", 64)))
    return EXIT_OK


def cmd_scan(cfg: RunConfig, args) -> int:
    if not args.cube:
        raise ConfigError("scan needs --cube")
    cube = read_cube(args.cube)
    if cube.shape[1] != cfg.N:
        raise DataError(f"cube has N={cube.shape[1]} channels, config says N={cfg.N}")
    sc = cfg.scan
    cut = int(sc.get("cut_index", cfg.generate.get("cut_index", 1)))
    eval_blocks = range(cube.shape[0])
    if args.threshold:
        eta = load_threshold(args.threshold, cfg)["eta"]
    elif "calibration_start_bins" in sc:
        n_cal = int(sc.get("calibration_blocks", cube.shape[0]))
        if not 1 <= n_cal <= cube.shape[0]:
            raise ConfigError(f"calibration_blocks={n_cal} outside 1..{cube.shape[0]}")
        eta = calibrate_from_profile(RangeProfile(cube, cut), cfg.L, cfg.detector,
                                     float(sc.get("pfed", cfg.pfed)),
                                     tuple(sc["calibration_start_bins"]), range(n_cal))
        if n_cal < cube.shape[0]:
            eval_blocks = range(n_cal, cube.shape[0])
    else:
        raise ConfigError("scan needs --threshold or scan.calibration_start_bins")
    profile = RangeProfile(cube[list(eval_blocks)], cut)
    res = scan_profile(profile, cfg.L, cfg.detector, eta)
    lines = []
    offset = eval_blocks.start
    for r in res.reports:
        d = r.to_dict()
        d["block"] += offset
        lines.append(json.dumps(d, sort_keys=True))
    for (b, direction), edges in res.fused.items():
        lines.append(json.dumps({"type": "fused", "block": b + offset, "direction": direction,
                                 "edges": [list(e) for e in edges]}, sort_keys=True))
    lines.append(json.dumps({"type": "summary", "eta": eta, "detector": cfg.detector.name,
                             "blocks": len(eval_blocks), "L": cfg.L, "cut_index": cut},
                            sort_keys=True))
    _emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK


def cmd_rank_est(cfg: RunConfig, args) -> int:
    rk = cfg.rank
    hyp = str(rk.get("hypothesis", "H0")).upper()
    if hyp not in ("H0", "H1"):
        raise ConfigError("rank.hypothesis must be H0 or H1")
    rule = cfg.detector.mos or MosRule()
    trials = int(rk.get("trials", 500))
    out = rank_experiment(cfg.scene, cfg.detector.structure, rule, trials, cfg.seed,
                          hypothesis=1 if hyp == "H1" else 0,
                          search_max=cfg.detector.search_max)
    doc = {"hypothesis": hyp, "rule": rule.describe(), "trials": trials, "seed": cfg.seed,
           "r0hat": {str(k): v for k, v in sorted(Counter(out["r0hat"].tolist()).items())}}
    if hyp == "H1":
        pairs = Counter(zip(out["r1hat"].tolist(), out["r2hat"].tolist()))
        doc["pairs"] = {f"{a},{b}": v for (a, b), v in sorted(pairs.items())}
        doc["l1hat"] = {str(k): v for k, v in sorted(Counter(out["l1hat"].tolist()).items())}
    _emit(_dumps(doc), args.output)
    return EXIT_OK


COMMANDS = {
    "calibrate": cmd_calibrate,
    "sweep": cmd_sweep,
    "rmse": cmd_rmse,
    "scan": cmd_scan,
    "generate": cmd_generate,
    "rank-est": cmd_rank_est,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clutteredge", description="Clutter edge detection toolkit")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="TOML run configuration")
        sp.add_argument("--threshold", help="threshold JSON written by 'calibrate'")
        sp.add_argument("--cube", help="data-cube file (scan)")
        sp.add_argument("--seed", type=int, help="master seed (overrides config)")
        sp.add_argument("--threads", type=int, help="worker threads (overrides config)")
        sp.add_argument("--output", "-o", help="output path (default stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.threads is not None:
            cfg.threads = args.threads
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except (NumericError, np.linalg.LinAlgError, FloatingPointError) as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC
    except ValueError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
