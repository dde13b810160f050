"""Command-line entry point: ``breathtaking <command> ...``.

Rates are given and reported in breaths per minute; records carry Hz as
well. Exit status is 0 when the run completed (whatever was detected),
1 on bad input data, 2 on bad usage.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io
from .detect import DEFAULT_GAMMA_NET, network_detect
from .estimate import estimate
from .evaluate import WindowResult, node_subset_ablation, summarize
from .model import (
    DEFAULT_F_MAX,
    DEFAULT_F_MIN,
    DEFAULT_GRID_STEP,
    EstimatorConfig,
    hz_to_bpm,
)
from .preprocess import infer_sample_period, iter_windows, prepare
from .simulate import PRESET_NAMES, Dataset, generate, preset

log = logging.getLogger("breathtaking")


class UsageError(Exception):
    pass


class _DefaultsFormatter(argparse.HelpFormatter):
    """Append ``(default: X)`` to help text unless the default is empty."""

    def _get_help_string(self, action):
        text = action.help or ""
        if "%(default)" in text or "default:" in text or action.default in (None, False, argparse.SUPPRESS):
            return text
        if action.option_strings and not action.required:
            text += " (default: %(default)s)"
        return text


def _formatter(prog):
    return _DefaultsFormatter(prog, max_help_position=32)


def _sizes(text: str) -> list[int]:
    try:
        sizes = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not sizes:
        raise argparse.ArgumentTypeError("empty subset-size list")
    return sizes


def _add_window_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("traces", type=Path, help="trace file written by 'simulate' or a logger")
    p.add_argument("--T", type=float, default=30.0, metavar="SECONDS", help="observation period per window")
    p.add_argument("--stride", type=float, default=5.0, metavar="SECONDS", help="start-to-start window spacing")
    p.add_argument("--fmin", type=float, default=DEFAULT_F_MIN, metavar="HZ", help="lower search bound (10 bpm)")
    p.add_argument("--fmax", type=float, default=DEFAULT_F_MAX, metavar="HZ", help="upper search bound (40 bpm)")
    p.add_argument("--grid-step", type=float, default=DEFAULT_GRID_STEP, metavar="HZ", help="frequency grid step")
    p.add_argument(
        "--sample-period",
        type=float,
        default=None,
        metavar="SECONDS",
        help="resampling period (default: median sample spacing in the file)",
    )
    p.add_argument(
        "--max-gap",
        type=float,
        default=None,
        metavar="SECONDS",
        help="longest gap bridged by interpolation (default: 5 sample periods)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="breathtaking",
        description="Detect breathing and estimate its rate from multi-link RSS traces.",
        formatter_class=_formatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    # accept -v after the command too, without clobbering a leading one
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS, help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("simulate", help="generate synthetic traces plus ground truth", formatter_class=_formatter, parents=[common])
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=PRESET_NAMES, default=None, help="named scenario (default: patch_quiet)")
    src.add_argument("--scenario", type=Path, default=None, help="scenario TOML file")
    p.add_argument("--seed", type=int, default=None, help="random seed (default: the scenario's own, 0 for presets)")
    p.add_argument("--duration", type=float, default=None, metavar="SECONDS", help="override the trace length")
    p.add_argument("--rate-bpm", type=float, default=None, help="override the breathing rate")
    p.add_argument("--no-breathing", action="store_true", help="simulate the empty-bed (H0) case")
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("estimate", help="per-window breathing-rate estimates", formatter_class=_formatter, parents=[common])
    _add_window_args(p)
    p.add_argument("--out", type=Path, default=None, help="JSON report path (default: stdout)")

    p = sub.add_parser("detect", help="per-window breathing detection", formatter_class=_formatter, parents=[common])
    _add_window_args(p)
    p.add_argument(
        "--gamma-net",
        type=float,
        default=DEFAULT_GAMMA_NET,
        help="network statistic threshold (default: %(default)s, simulator-calibrated for T=30 s)",
    )
    p.add_argument("--gamma-link", type=float, default=None, help="per-link threshold on N*A^2 (optional)")
    p.add_argument("--out", type=Path, default=None, help="JSON report path (default: stdout)")

    p = sub.add_parser("evaluate", help="score estimates against ground truth", formatter_class=_formatter, parents=[common])
    _add_window_args(p)
    p.add_argument("--truth", type=Path, required=True, help="ground-truth JSON written by 'simulate'")
    p.add_argument("--gamma-net", type=float, default=None, help="also score detections at this threshold")
    p.add_argument("--subset-sizes", type=_sizes, default=None, help="node-subset ablation sizes, e.g. 7,10,13,16,19")
    p.add_argument("--trials", type=int, default=100, help="random subsets per size")
    p.add_argument("--seed", type=int, default=0, help="seed for subset draws")
    p.add_argument("--out", type=Path, default=None, help="JSON report path (default: stdout)")

    p = sub.add_parser("psd", help="summed periodogram of one window as CSV", formatter_class=_formatter, parents=[common])
    _add_window_args(p)
    p.add_argument("--at", type=float, default=0.0, metavar="SECONDS", help="use the window starting nearest this time")
    p.add_argument("--out", type=Path, required=True, help="CSV path (f_hz, raw_psd, normalized_psd)")
    return parser


def _config(args) -> EstimatorConfig:
    return EstimatorConfig(f_min=args.fmin, f_max=args.fmax, grid_step=args.grid_step)


def _grid(args):
    traces = io.read_traces(args.traces)
    if not traces:
        raise ValueError(f"{args.traces}: no samples")
    ts = args.sample_period if args.sample_period is not None else infer_sample_period(traces)
    return prepare(traces, ts, args.max_gap), traces


def _windows(args, grid):
    cfg = _config(args)
    cfg.check(grid.sample_period)
    windows = list(iter_windows(grid, args.T, args.stride))
    if not windows:
        raise ValueError("no window with a usable link")
    return cfg, windows


def _window_args(args) -> dict:
    return {
        "traces": str(args.traces),
        "T_s": args.T,
        "stride_s": args.stride,
        "f_min_hz": args.fmin,
        "f_max_hz": args.fmax,
        "grid_step_hz": args.grid_step,
        "sample_period_s": args.sample_period,
        "max_gap_s": args.max_gap,
    }


def _emit(out: Optional[Path], kind: str, result, config: dict) -> None:
    if out is None:
        doc = {"kind": kind, "config": io.to_jsonable(config), "result": io.to_jsonable(result)}
        json.dump(doc, sys.stdout, indent=1, allow_nan=False)
        sys.stdout.write("\n")
    else:
        io.write_report(result, out, config=config, kind=kind)


def cmd_simulate(args) -> int:
    if args.scenario is not None:
        scenario = io.read_scenario(args.scenario)
    else:
        scenario = preset(args.preset or "patch_quiet")
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.duration is not None:
        changes["duration_s"] = args.duration
    if args.rate_bpm is not None:
        if args.no_breathing:
            raise UsageError("--rate-bpm conflicts with --no-breathing")
        changes["breathing_rate_bpm"] = args.rate_bpm
    if args.no_breathing:
        changes["breathing_rate_bpm"] = None
    if changes:
        scenario = scenario.replace(**changes)
    ds = generate(scenario)
    args.out.mkdir(parents=True, exist_ok=True)
    io.write_traces(ds.traces, args.out / "traces.csv")
    io.write_truth(ds.truth, args.out / "truth.json")
    io.write_scenario(scenario, args.out / "scenario.toml")
    rate = "none" if ds.truth.rate_bpm is None else f"{ds.truth.rate_bpm:g} bpm"
    log.info("wrote %d links, breathing %s, to %s", len(ds.traces), rate, args.out)
    return 0


def _record(w, est, det) -> dict:
    return {
        "start_time_s": w.start_time,
        "n_links": w.n_links,
        "f_hat_hz": est.f_hat,
        "rate_bpm": hz_to_bpm(est.f_hat),
        "s_hat": det.s_hat,
    }


def cmd_estimate(args) -> int:
    grid, _ = _grid(args)
    cfg, windows = _windows(args, grid)
    records = []
    for w in windows:
        est = estimate(w, cfg)
        records.append(_record(w, est, network_detect(est, gamma_net=np.inf)))
    _emit(args.out, "estimate", records, _window_args(args))
    return 0


def cmd_detect(args) -> int:
    grid, _ = _grid(args)
    cfg, windows = _windows(args, grid)
    records = []
    for w in windows:
        est = estimate(w, cfg)
        det = network_detect(est, args.gamma_net, args.gamma_link)
        rec = _record(w, est, det)
        rec["decision"] = det.network_decision.value
        if args.gamma_link is not None:
            rec["links_h1"] = [str(l) for l, d in zip(w.link_ids, det.per_link_decision) if d.value == "H1"]
        records.append(rec)
    config = {**_window_args(args), "gamma_net": args.gamma_net, "gamma_link": args.gamma_link}
    _emit(args.out, "detect", records, config)
    return 0


def cmd_evaluate(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    truth = io.read_truth(args.truth)
    grid, traces = _grid(args)
    cfg, windows = _windows(args, grid)
    results = []
    for w in windows:
        est = estimate(w, cfg)
        det = network_detect(est, gamma_net=np.inf)
        results.append(WindowResult(w.start_time, w.n_links, est.f_hat, det.s_hat))
    result = {"overall": summarize(results, truth.rate_bpm, args.gamma_net)}
    if args.subset_sizes:
        if truth.rate_bpm is None:
            raise UsageError("--subset-sizes needs ground truth with a breathing rate")
        table = node_subset_ablation(
            Dataset(traces, truth),
            args.subset_sizes,
            trials=args.trials,
            seed=args.seed,
            T=args.T,
            stride=args.stride,
            cfg=cfg,
            grid=grid,
        )
        result["subset_ablation"] = [{"nodes": k, **v.to_dict()} for k, v in table.items()]
    config = {
        **_window_args(args),
        "truth": str(args.truth),
        "gamma_net": args.gamma_net,
        "subset_sizes": args.subset_sizes,
        "trials": args.trials,
        "seed": args.seed,
    }
    _emit(args.out, "evaluate", result, config)
    return 0


def cmd_psd(args) -> int:
    grid, _ = _grid(args)
    cfg, windows = _windows(args, grid)
    w = min(windows, key=lambda w: abs(w.start_time - args.at))
    est = estimate(w, cfg)
    io.write_psd(est.freqs, est.psd, args.out)
    log.info("window at t=%.2f s: peak %.4f Hz (%.2f bpm)", w.start_time, est.f_hat, est.rate_bpm)
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "detect": cmd_detect,
    "evaluate": cmd_evaluate,
    "psd": cmd_psd,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        parser.error(str(exc))
    except (ValueError, OSError) as exc:
        print(f"breathtaking {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
