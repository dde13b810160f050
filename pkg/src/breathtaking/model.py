"""Shared domain types.

Frequencies are stored in Hz everywhere; breaths per minute only appear at
I/O boundaries (see :func:`hz_to_bpm` / :func:`bpm_to_hz`). RSS values and
breathing amplitudes are in dB(m); nothing is linearised to milliwatts.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional, Sequence

import numpy as np

BPM_PER_HZ = 60.0

# 10 to 40 breaths per minute
DEFAULT_F_MIN = 0.167
DEFAULT_F_MAX = 0.667
DEFAULT_GRID_STEP = 0.001
DEFAULT_SAMPLE_PERIOD = 0.24


def hz_to_bpm(f):
    return f * BPM_PER_HZ


def bpm_to_hz(rate):
    return rate / BPM_PER_HZ


def wrap_phase(phi):
    """Wrap angles into (-pi, pi]."""
    wrapped = np.mod(np.asarray(phi, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    wrapped = np.where(wrapped <= -np.pi, wrapped + 2.0 * np.pi, wrapped)
    return wrapped if np.ndim(phi) else float(wrapped)


def _frozen(arr, dtype=float) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


class Hypothesis(str, Enum):
    H0 = "H0"
    H1 = "H1"


class LinkId(NamedTuple):
    """Directed link ``tx -> rx``; ``(a, b)`` and ``(b, a)`` are distinct."""

    tx: int
    rx: int

    @classmethod
    def make(cls, tx: int, rx: int) -> "LinkId":
        tx, rx = int(tx), int(rx)
        if tx < 0 or rx < 0:
            raise ValueError(f"node ids must be non-negative, got ({tx}, {rx})")
        if tx == rx:
            raise ValueError(f"link endpoints must differ, got ({tx}, {rx})")
        return cls(tx, rx)

    def __str__(self) -> str:
        return f"{self.tx}->{self.rx}"


class RssSample(NamedTuple):
    time: float
    rss: float


@dataclass(frozen=True)
class LinkTrace:
    """Time-stamped RSS samples of one directed link.

    Samples are held as two parallel read-only arrays. ``mean_rss`` is always
    recomputed from the raw samples.
    """

    link: LinkId
    times: np.ndarray
    rss: np.ndarray
    mean_rss: float = field(init=False)

    def __post_init__(self):
        times = _frozen(self.times)
        rss = _frozen(self.rss)
        if times.shape != rss.shape or times.ndim != 1:
            raise ValueError("times and rss must be 1-D arrays of equal length")
        if times.size and np.any(np.diff(times) <= 0):
            raise ValueError(f"sample times of link {self.link} must strictly increase")
        if times.size and times[0] < 0:
            raise ValueError("sample times must be non-negative")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "rss", rss)
        object.__setattr__(self, "mean_rss", float(rss.mean()) if rss.size else float("nan"))

    @classmethod
    def from_samples(cls, link: LinkId, samples: Sequence[RssSample]) -> "LinkTrace":
        samples = sorted(samples)
        return cls(link, [s.time for s in samples], [s.rss for s in samples])

    @property
    def samples(self) -> list[RssSample]:
        return [RssSample(float(t), float(r)) for t, r in zip(self.times, self.rss)]

    def __len__(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class NetworkWindow:
    """L filtered, zero-mean link signals, N samples each, one per round.

    Row ``l`` sample ``i`` was taken at
    ``start_time + offsets[l] + i * sample_period``; the offsets (all zero by
    default) are each link's slot within the sampling round.
    """

    link_ids: tuple
    data: np.ndarray
    sample_period: float
    start_time: float = 0.0
    offsets: Optional[np.ndarray] = None

    def __post_init__(self):
        data = _frozen(np.atleast_2d(self.data))
        link_ids = tuple(LinkId(*l) for l in self.link_ids)
        offsets = np.zeros(len(link_ids)) if self.offsets is None else np.asarray(self.offsets, dtype=float)
        if offsets.shape != (len(link_ids),):
            raise ValueError("need one time offset per link")
        if data.ndim != 2:
            raise ValueError("window data must be an L x N matrix")
        if data.shape[0] != len(link_ids):
            raise ValueError(f"{len(link_ids)} link ids for {data.shape[0]} rows")
        if data.shape[1] < 2:
            raise ValueError("a window needs at least 2 samples per link")
        if not self.sample_period > 0:
            raise ValueError("sample_period must be positive")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "link_ids", link_ids)
        object.__setattr__(self, "offsets", _frozen(offsets))

    @property
    def n_links(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration(self) -> float:
        """Observation period T = N * Ts."""
        return self.n_samples * self.sample_period

    @property
    def nyquist(self) -> float:
        return 0.5 / self.sample_period

    def select(self, rows) -> "NetworkWindow":
        rows = np.asarray(rows, dtype=int)
        return NetworkWindow(
            tuple(self.link_ids[r] for r in rows),
            self.data[rows],
            self.sample_period,
            self.start_time,
            self.offsets[rows],
        )

    def scaled(self, c: float) -> "NetworkWindow":
        return NetworkWindow(self.link_ids, self.data * c, self.sample_period, self.start_time, self.offsets)


@dataclass(frozen=True)
class EstimatorConfig:
    f_min: float = DEFAULT_F_MIN
    f_max: float = DEFAULT_F_MAX
    grid_step: float = DEFAULT_GRID_STEP

    def __post_init__(self):
        if not 0 < self.f_min < self.f_max:
            raise ValueError(f"need 0 < f_min < f_max, got {self.f_min}, {self.f_max}")
        if not self.grid_step > 0:
            raise ValueError("grid_step must be positive")

    def check(self, sample_period: float) -> None:
        if self.f_max >= 0.5 / sample_period:
            raise ValueError(
                f"f_max={self.f_max} Hz is not below the Nyquist rate {0.5 / sample_period:.4f} Hz"
            )

    def grid(self) -> np.ndarray:
        n = int(np.floor((self.f_max - self.f_min) / self.grid_step + 1e-9)) + 1
        f = self.f_min + self.grid_step * np.arange(n)
        if f[-1] < self.f_max - 1e-12:
            f = np.append(f, self.f_max)
        return f


@dataclass(frozen=True)
class BreathingEstimate:
    f_hat: float
    amplitudes: np.ndarray
    phases: np.ndarray
    freqs: np.ndarray
    psd: np.ndarray
    n_samples: int
    link_ids: tuple = ()

    def __post_init__(self):
        for name in ("amplitudes", "phases", "freqs", "psd"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def rate_bpm(self) -> float:
        return hz_to_bpm(self.f_hat)

    @property
    def n_links(self) -> int:
        return self.amplitudes.size

    @property
    def objective(self) -> list[tuple[float, float]]:
        return list(zip(self.freqs.tolist(), self.psd.tolist()))

    @property
    def normalized_psd(self) -> np.ndarray:
        peak = self.psd.max() if self.psd.size else 0.0
        return self.psd / peak if peak > 0 else np.zeros_like(self.psd)


@dataclass(frozen=True)
class DetectorConfig:
    gamma_link: float
    gamma_net: float

    def __post_init__(self):
        if self.gamma_link < 0 or self.gamma_net < 0:
            raise ValueError("thresholds must be non-negative")


@dataclass(frozen=True)
class DetectionResult:
    s_hat: float
    per_link_stat: np.ndarray
    network_decision: Hypothesis
    per_link_decision: tuple

    def __post_init__(self):
        object.__setattr__(self, "per_link_stat", _frozen(self.per_link_stat))


@dataclass(frozen=True)
class EvaluationReport:
    """Rate and detector metrics over K realisations.

    ``rmse_bpm``/``bias_bpm`` are ``None`` when no estimate is valid;
    ``p_fa``/``p_m`` are ``None`` when the matching truth class never occurs.
    """

    rmse_bpm: Optional[float] = None
    bias_bpm: Optional[float] = None
    invalid_fraction: Optional[float] = None
    p_fa: Optional[float] = None
    p_m: Optional[float] = None
    realization_count: int = 0

    def to_dict(self) -> dict:
        return {
            "rmse_bpm": self.rmse_bpm,
            "bias_bpm": self.bias_bpm,
            "invalid_fraction": self.invalid_fraction,
            "p_fa": self.p_fa,
            "p_m": self.p_m,
            "realization_count": self.realization_count,
        }
