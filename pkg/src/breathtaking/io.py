"""On-disk formats: trace files, ground-truth sidecars, scenario configs, reports.

Trace file (text, one record per line)::

    #breathtrace v1
    time_s,tx,rx,rss_dbm
    0.000000,0,1,-40
    0.012000,1,0,-43

Times carry six decimals; RSS is written as an integer when integral and
as the shortest round-tripping decimal otherwise. Records are ordered by
time, then transmitter, then receiver.
"""
from __future__ import annotations

import csv
import dataclasses
import io as _io
import json
import logging
import math
import os
import tempfile
from collections import defaultdict
from pathlib import Path
from typing import Any, Iterable, Optional

import numpy as np
import tomli
import tomli_w

from .model import LinkId, LinkTrace
from .simulate import GroundTruth, SimScenario

log = logging.getLogger(__name__)

TRACE_MAGIC = "#breathtrace"
TRACE_VERSION = "v1"
TRACE_COLUMNS = ("time_s", "tx", "rx", "rss_dbm")


class TraceFormatError(ValueError):
    pass


class ScenarioFormatError(ValueError):
    pass


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def atomic_write(path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt_rss(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


def format_traces(traces: Iterable[LinkTrace]) -> str:
    rows = []
    for tr in traces:
        for t, r in zip(tr.times, tr.rss):
            rows.append((round(float(t), 6), tr.link.tx, tr.link.rx, float(r)))
    rows.sort(key=lambda row: row[:3])
    out = [f"{TRACE_MAGIC} {TRACE_VERSION}", ",".join(TRACE_COLUMNS)]
    out.extend(f"{t:.6f},{tx},{rx},{_fmt_rss(r)}" for t, tx, rx, r in rows)
    return "\n".join(out) + "\n"


def write_traces(traces: Iterable[LinkTrace], path) -> None:
    atomic_write(path, format_traces(traces))


def parse_traces(text: str, source: str = "<string>") -> list[LinkTrace]:
    lines = text.splitlines()
    lineno = 0
    while lineno < len(lines) and not lines[lineno].strip():
        lineno += 1
    if lineno == len(lines):
        raise TraceFormatError(f"{source}: missing '{TRACE_MAGIC} {TRACE_VERSION}' header")
    header = lines[lineno].split()
    if len(header) != 2 or header[0] != TRACE_MAGIC:
        raise TraceFormatError(f"{source}:{lineno + 1}: not a trace file (expected '{TRACE_MAGIC} {TRACE_VERSION}')")
    if header[1] != TRACE_VERSION:
        raise TraceFormatError(f"{source}:{lineno + 1}: unknown trace format version {header[1]!r}")

    samples: dict[LinkId, dict[float, float]] = defaultdict(dict)
    for k in range(lineno + 1, len(lines)):
        line = lines[k].strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        if tuple(fields) == TRACE_COLUMNS:
            continue
        if len(fields) != 4:
            raise TraceFormatError(f"{source}:{k + 1}: expected 4 fields, got {len(fields)}")
        try:
            t = float(fields[0])
            link = LinkId.make(int(fields[1]), int(fields[2]))
            r = float(fields[3])
        except ValueError as exc:
            raise TraceFormatError(f"{source}:{k + 1}: {exc}") from None
        if not (math.isfinite(t) and math.isfinite(r)) or t < 0:
            raise TraceFormatError(f"{source}:{k + 1}: time must be finite and non-negative, rss finite")
        if t in samples[link]:
            raise TraceFormatError(f"{source}:{k + 1}: duplicate record for link {link} at t={t}")
        samples[link][t] = r

    traces = []
    for link in sorted(samples):
        times = np.array(sorted(samples[link]))
        traces.append(LinkTrace(link, times, [samples[link][t] for t in times]))
    return traces


def read_traces(path) -> list[LinkTrace]:
    path = Path(path)
    return parse_traces(path.read_text(), str(path))


def truth_to_dict(truth: GroundTruth) -> dict:
    return {
        "rate_bpm": truth.rate_bpm,
        "sample_period_s": truth.sample_period,
        "seed": truth.seed,
        "links": [
            {
                "tx": l.tx,
                "rx": l.rx,
                "amplitude_db": float(truth.amplitudes[k]),
                "phase_rad": float(truth.phases[k]),
                "crosses_chest": bool(truth.crosses_chest[k]),
                "mean_rss_dbm": float(truth.mean_rss[k]),
                "noise_sigma_db": float(truth.noise_sigma[k]),
            }
            for k, l in enumerate(truth.link_ids)
        ],
    }


def truth_from_dict(d: dict) -> GroundTruth:
    links = d.get("links", [])
    col = lambda key, dtype=float: np.array([e[key] for e in links], dtype=dtype)  # noqa: E731
    return GroundTruth(
        rate_bpm=d.get("rate_bpm"),
        link_ids=tuple(LinkId(e["tx"], e["rx"]) for e in links),
        amplitudes=col("amplitude_db"),
        phases=col("phase_rad"),
        crosses_chest=col("crosses_chest", bool),
        mean_rss=col("mean_rss_dbm"),
        noise_sigma=col("noise_sigma_db"),
        sample_period=float(d["sample_period_s"]),
        seed=int(d.get("seed", 0)),
    )


def write_truth(truth: GroundTruth, path) -> None:
    atomic_write(path, json.dumps(truth_to_dict(truth), indent=1) + "\n")


def read_truth(path) -> GroundTruth:
    return truth_from_dict(json.loads(Path(path).read_text()))


_NONE = "none"


def scenario_to_dict(s: SimScenario) -> dict:
    out = {}
    for f in dataclasses.fields(s):
        v = getattr(s, f.name)
        if v is None:
            if f.name == "node_positions":
                continue
            v = _NONE
        elif isinstance(v, tuple):
            v = [list(p) if isinstance(p, tuple) else p for p in v]
        out[f.name] = v
    return out


def scenario_from_dict(d: dict, strict: bool = True) -> SimScenario:
    known = {f.name: f for f in dataclasses.fields(SimScenario)}
    kwargs: dict[str, Any] = {}
    for key, value in d.items():
        if key not in known:
            if strict:
                raise ScenarioFormatError(f"unknown scenario key {key!r}")
            log.warning("ignoring unknown scenario key %r", key)
            continue
        if value == _NONE:
            value = None
        kwargs[key] = value
    try:
        return SimScenario(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ScenarioFormatError(str(exc)) from exc


def format_scenario(s: SimScenario) -> str:
    return tomli_w.dumps(scenario_to_dict(s))


def write_scenario(s: SimScenario, path) -> None:
    atomic_write(path, format_scenario(s))


def read_scenario(path, strict: bool = True) -> SimScenario:
    path = Path(path)
    try:
        d = tomli.loads(path.read_text())
    except tomli.TOMLDecodeError as exc:
        raise ScenarioFormatError(f"{path}: {exc}") from None
    return scenario_from_dict(d, strict=strict)


def to_jsonable(obj):
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def write_report(report, path, config: Optional[dict] = None, kind: str = "report") -> None:
    """One JSON document per run, embedding the effective configuration."""
    doc = {"kind": kind, "config": to_jsonable(config or {}), "result": to_jsonable(report)}
    atomic_write(path, json.dumps(doc, indent=1, allow_nan=False) + "\n")


def read_report(path) -> dict:
    return json.loads(Path(path).read_text())


def format_csv(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_csv(header, rows, path) -> None:
    atomic_write(path, format_csv(header, rows))


def write_psd(freqs, psd, path) -> None:
    psd = np.asarray(psd, dtype=float)
    peak = psd.max() if psd.size and psd.max() > 0 else 1.0
    rows = [(f"{f:.6f}", repr(float(p)), repr(float(p / peak))) for f, p in zip(freqs, psd)]
    write_csv(("f_hz", "raw_psd", "normalized_psd"), rows, path)
