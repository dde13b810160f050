"""Raw link traces to uniform-grid, DC-removed network windows.

The pipeline per link is: linear interpolation onto a uniform grid, a
causal Chebyshev type-I high-pass filter, then slicing into sliding
windows. Links whose trace has a long silence inside a window are left out
of that window.

Under token passing every link is sampled once per round, at its own slot
within the round. Each link is therefore resampled on a grid shifted by
that slot offset, so that a clean schedule passes through interpolation
unchanged; sample ``k`` of every link belongs to round ``k`` and the
offsets travel with the windows.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

import numpy as np
from scipy import signal

from .model import DEFAULT_F_MIN, DEFAULT_SAMPLE_PERIOD, LinkTrace, NetworkWindow

log = logging.getLogger(__name__)

DEFAULT_ORDER = 7
DEFAULT_RIPPLE_DB = 0.1
MIN_WINDOW_SECONDS = 10.0
# gaps up to this many sample periods are bridged by interpolation
DEFAULT_MAX_GAP_PERIODS = 5
# transient length in passband-edge periods
TRANSIENT_PERIODS = 5.0


class InvalidSpecError(ValueError):
    pass


class TraceUnusableError(ValueError):
    pass


def samples_for(duration: float, sample_period: float) -> int:
    """Number of samples covering ``duration`` (rounded half up)."""
    return int(math.floor(duration / sample_period + 0.5))


@dataclass(frozen=True)
class FilterSpec:
    sample_rate_hz: float
    order: int = DEFAULT_ORDER
    passband_ripple_db: float = DEFAULT_RIPPLE_DB
    passband_edge_hz: float = DEFAULT_F_MIN

    def __post_init__(self):
        if self.order < 1:
            raise InvalidSpecError(f"filter order must be >= 1, got {self.order}")
        if self.passband_ripple_db <= 0:
            raise InvalidSpecError("passband ripple must be positive")
        if not 0 < self.passband_edge_hz < self.sample_rate_hz / 2:
            raise InvalidSpecError(
                f"passband edge {self.passband_edge_hz} Hz must lie in (0, {self.sample_rate_hz / 2}) Hz"
            )

    @classmethod
    def for_period(cls, sample_period: float, **kw) -> "FilterSpec":
        return cls(sample_rate_hz=1.0 / sample_period, **kw)

    def transient_samples(self) -> int:
        return math.ceil(TRANSIENT_PERIODS / self.passband_edge_hz * self.sample_rate_hz - 1e-9)


@dataclass(frozen=True)
class FilterCoefficients:
    numerator: np.ndarray
    denominator: np.ndarray

    @property
    def order(self) -> int:
        return len(self.denominator) - 1

    def response(self, f, sample_rate_hz: float) -> np.ndarray:
        """Complex frequency response at ``f`` Hz."""
        z = np.exp(-2j * np.pi * np.asarray(f, dtype=float) / sample_rate_hz)
        return np.polyval(self.numerator[::-1], z) / np.polyval(self.denominator[::-1], z)


def design_highpass(spec: FilterSpec) -> FilterCoefficients:
    """Chebyshev type-I high-pass, bilinear transform with pre-warping."""
    b, a = signal.cheby1(
        spec.order,
        spec.passband_ripple_db,
        spec.passband_edge_hz,
        btype="highpass",
        fs=spec.sample_rate_hz,
    )
    b, a = b / a[0], a / a[0]
    return FilterCoefficients(np.asarray(b), np.asarray(a))


def apply_filter(coeffs: FilterCoefficients, x) -> np.ndarray:
    """Causal IIR filtering along the last axis; output has the input's length."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] <= 3 * coeffs.order:
        raise TraceUnusableError(
            f"signal of {x.shape[-1]} samples is too short for an order-{coeffs.order} filter"
        )
    return signal.lfilter(coeffs.numerator, coeffs.denominator, x, axis=-1)


@dataclass(frozen=True)
class Regularized:
    times: np.ndarray
    values: np.ndarray
    usable_mask: np.ndarray

    @property
    def usable(self) -> bool:
        return bool(self.usable_mask.size) and bool(self.usable_mask.all())

    def usable_between(self, t0: float, t1: float) -> bool:
        sel = (self.times >= t0) & (self.times < t1)
        return bool(sel.any()) and bool(self.usable_mask[sel].all())


def schedule_offset(trace: LinkTrace, sample_period: float = DEFAULT_SAMPLE_PERIOD) -> float:
    """A link's slot within the sampling round, in ``[0, sample_period)``.

    Circular mean of the sample times modulo the period, so jittered
    schedules get their typical slot.
    """
    if len(trace) == 0:
        raise TraceUnusableError(f"trace of link {trace.link} is empty")
    angle = np.angle(np.mean(np.exp(2j * np.pi * trace.times / sample_period)))
    offset = round(float(np.mod(angle, 2 * np.pi) / (2 * np.pi) * sample_period), 9)
    # float noise on an on-grid schedule can land just below one period
    return offset % round(sample_period, 9)


def regularize(
    trace: LinkTrace,
    sample_period: float = DEFAULT_SAMPLE_PERIOD,
    max_gap: Optional[float] = None,
    start: Optional[float] = None,
    n: Optional[int] = None,
) -> Regularized:
    """Linearly interpolate a trace onto ``start + k * sample_period``.

    A grid point is unusable when the stretch of silence around it (between
    the bracketing samples, or to the first/last sample at the edges) is
    longer than ``max_gap``.
    """
    if len(trace) == 0:
        raise TraceUnusableError(f"trace of link {trace.link} is empty")
    if max_gap is None:
        max_gap = DEFAULT_MAX_GAP_PERIODS * sample_period
    t, r = trace.times, trace.rss
    if start is None:
        start = float(t[0])
    if n is None:
        n = int(math.floor((t[-1] - start) / sample_period + 1e-6)) + 1
    grid = start + sample_period * np.arange(n)
    values = np.interp(grid, t, r)

    k = np.searchsorted(t, grid, side="right")
    gap = np.empty(n)
    inside = (k > 0) & (k < t.size)
    gap[inside] = t[k[inside]] - t[k[inside] - 1]
    before = k == 0
    gap[before] = t[0] - grid[before]
    after = k == t.size
    gap[after] = grid[after] - t[-1]
    # exact hits on a sample are always usable
    on_sample = np.isclose(grid, t[np.clip(k - 1, 0, t.size - 1)], rtol=0, atol=1e-9)
    usable = (gap <= max_gap + 1e-9) | on_sample
    return Regularized(grid, values, usable)


@dataclass(frozen=True)
class FilteredGrid:
    """All links filtered on one common time grid, before windowing."""

    link_ids: tuple
    data: np.ndarray
    usable: np.ndarray
    start_time: float
    sample_period: float
    offsets: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.offsets is None:
            object.__setattr__(self, "offsets", np.zeros(len(self.link_ids)))

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples * self.sample_period

    def restrict(self, nodes: Iterable[int]) -> "FilteredGrid":
        nodes = set(int(v) for v in nodes)
        rows = [i for i, l in enumerate(self.link_ids) if l.tx in nodes and l.rx in nodes]
        return FilteredGrid(
            tuple(self.link_ids[i] for i in rows),
            self.data[rows],
            self.usable[rows],
            self.start_time,
            self.sample_period,
            self.offsets[rows],
        )


def prepare(
    traces: Iterable[LinkTrace],
    sample_period: float = DEFAULT_SAMPLE_PERIOD,
    max_gap: Optional[float] = None,
    filter_spec: Optional[FilterSpec] = None,
    start: Optional[float] = None,
    end: Optional[float] = None,
) -> FilteredGrid:
    """Regularize and high-pass filter every trace onto one round grid.

    Link ``l`` is resampled at ``start + offset_l + k * sample_period`` where
    ``offset_l`` is its :func:`schedule_offset`. Each link's mean RSS is
    subtracted before filtering from rest, which is the filter's steady
    state for a constant input at that level. Starting from rest on the raw
    dBm values instead leaves ringing of several dB after
    ``filter_spec.transient_samples()`` samples.
    """
    traces = [tr for tr in traces if len(tr)]
    if filter_spec is None:
        filter_spec = FilterSpec.for_period(sample_period)
    if not math.isclose(filter_spec.sample_rate_hz * sample_period, 1.0, rel_tol=1e-9):
        raise InvalidSpecError("filter sample rate does not match the sample period")
    coeffs = design_highpass(filter_spec)
    if not traces:
        return FilteredGrid((), np.zeros((0, 0)), np.zeros((0, 0), bool), 0.0, sample_period)

    traces = sorted(traces, key=lambda tr: tr.link)
    offsets = np.array([schedule_offset(tr, sample_period) for tr in traces])
    if start is None:
        start = min(float(tr.times[0]) - o for tr, o in zip(traces, offsets))
    if end is None:
        end = max(float(tr.times[-1]) - o for tr, o in zip(traces, offsets))
    n = int(math.floor((end - start) / sample_period + 1e-6)) + 1

    link_ids, rows, masks, kept = [], [], [], []
    for tr, offset in zip(traces, offsets):
        reg = regularize(tr, sample_period, max_gap, start=start + offset, n=n)
        try:
            filtered = apply_filter(coeffs, reg.values - tr.mean_rss)
        except TraceUnusableError as exc:
            log.warning("link %s dropped: %s", tr.link, exc)
            continue
        link_ids.append(tr.link)
        rows.append(filtered)
        masks.append(reg.usable_mask)
        kept.append(offset)
    if not rows:
        return FilteredGrid((), np.zeros((0, n)), np.zeros((0, n), bool), start, sample_period)
    return FilteredGrid(
        tuple(link_ids), np.vstack(rows), np.vstack(masks), start, sample_period, np.array(kept)
    )


def window_starts(n_total: int, n_window: int, stride: float, sample_period: float) -> list[int]:
    starts = []
    j = 0
    while True:
        idx = samples_for(j * stride, sample_period)
        if idx + n_window > n_total:
            return starts
        starts.append(idx)
        j += 1


def iter_windows(grid: FilteredGrid, T: float, stride: float) -> Iterator[NetworkWindow]:
    """Sliding windows over a filtered grid.

    Each window keeps only links usable over its whole span, and has the
    residual per-row mean removed.
    """
    if T < MIN_WINDOW_SECONDS:
        raise ValueError(f"observation period T={T} s is below the {MIN_WINDOW_SECONDS} s floor")
    if not stride > 0:
        raise ValueError("stride must be positive")
    ts = grid.sample_period
    n = samples_for(T, ts)
    if n > grid.n_samples:
        raise ValueError(f"T={T} s is longer than the {grid.duration:.2f} s of data")
    for idx in window_starts(grid.n_samples, n, stride, ts):
        ok = grid.usable[:, idx : idx + n].all(axis=1)
        t0 = grid.start_time + idx * ts
        if not ok.any():
            log.warning("window at t=%.2f s has no usable link; omitted", t0)
            continue
        block = grid.data[ok, idx : idx + n]
        block = block - block.mean(axis=1, keepdims=True)
        ids = tuple(l for l, keep in zip(grid.link_ids, ok) if keep)
        yield NetworkWindow(ids, block, ts, t0, grid.offsets[ok])


def segment(
    traces: Iterable[LinkTrace],
    T: float,
    stride: float,
    sample_period: float = DEFAULT_SAMPLE_PERIOD,
    max_gap: Optional[float] = None,
) -> list[NetworkWindow]:
    grid = prepare(traces, sample_period, max_gap)
    return list(iter_windows(grid, T, stride))



def infer_sample_period(traces: Iterable[LinkTrace]) -> float:
    """Median spacing of consecutive samples across all links."""
    gaps = [np.diff(tr.times) for tr in traces if len(tr) > 1]
    if not gaps:
        raise TraceUnusableError("need a link with at least two samples to infer the sample period")
    return float(np.round(np.median(np.concatenate(gaps)), 6))
