"""Breathing detectors: one link alone, or the whole network at once."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .estimate import estimate, estimate_amp_phase, estimate_frequency, estimate_frequency_per_link
from .model import (
    BreathingEstimate,
    DetectionResult,
    EstimatorConfig,
    Hypothesis,
    NetworkWindow,
)

DEFAULT_MARGIN = 0.03
# zero-false-alarm thresholds calibrated on the simulator's patch_quiet
# preset at T = 30 s (largest H0 value plus the default margin, rounded up)
DEFAULT_GAMMA_NET = 1.32
DEFAULT_GAMMA_LINK = 37.0


@dataclass(frozen=True)
class LinkDetection:
    statistic: float
    f_hat: float
    amplitude: float
    decision: Hypothesis


def _decide(stat: float, gamma: float) -> Hypothesis:
    return Hypothesis.H1 if stat > gamma else Hypothesis.H0


def single_link_detect(
    window: NetworkWindow,
    row: int = 0,
    cfg: Optional[EstimatorConfig] = None,
    gamma_link: float = np.inf,
) -> LinkDetection:
    """Estimate frequency from one link alone and threshold ``N * A^2``."""
    sub = window.select([row])
    if not np.any(sub.data):
        return LinkDetection(0.0, float("nan"), 0.0, Hypothesis.H0)
    f_hat, _, _ = estimate_frequency(sub, cfg)
    amp, _ = estimate_amp_phase(sub, f_hat)
    stat = sub.n_samples * float(amp[0]) ** 2
    return LinkDetection(stat, f_hat, float(amp[0]), _decide(stat, gamma_link))


def single_link_all(
    window: NetworkWindow, cfg: Optional[EstimatorConfig] = None, gamma_link: float = np.inf
) -> list[LinkDetection]:
    """:func:`single_link_detect` for every link, vectorised over rows."""
    f_hat, amp = estimate_frequency_per_link(window, cfg)
    stats = window.n_samples * amp**2
    silent = ~np.any(window.data, axis=1)
    return [
        LinkDetection(0.0, float("nan"), 0.0, Hypothesis.H0)
        if silent[r]
        else LinkDetection(float(stats[r]), float(f_hat[r]), float(amp[r]), _decide(stats[r], gamma_link))
        for r in range(window.n_links)
    ]


def network_detect(
    est: BreathingEstimate,
    gamma_net: float,
    gamma_link: Optional[float] = None,
    n_samples: Optional[int] = None,
) -> DetectionResult:
    """Network statistic ``S = (N / L) * sum_l A_l^2`` against ``gamma_net``.

    Per-link decisions threshold ``N * A_l^2`` at the jointly estimated
    frequency against ``gamma_link`` (all H0 when it is not given).
    """
    n = est.n_samples if n_samples is None else n_samples
    per_link = n * np.asarray(est.amplitudes, dtype=float) ** 2
    s_hat = float(per_link.mean()) if per_link.size else 0.0
    if gamma_link is None:
        link_dec = tuple(Hypothesis.H0 for _ in per_link)
    else:
        link_dec = tuple(_decide(v, gamma_link) for v in per_link)
    return DetectionResult(s_hat, per_link, _decide(s_hat, gamma_net), link_dec)


def detect_window(
    window: NetworkWindow,
    gamma_net: float,
    cfg: Optional[EstimatorConfig] = None,
    gamma_link: Optional[float] = None,
) -> tuple[BreathingEstimate, DetectionResult]:
    est = estimate(window, cfg)
    return est, network_detect(est, gamma_net, gamma_link)


def network_statistic(window: NetworkWindow, cfg: Optional[EstimatorConfig] = None) -> float:
    est = estimate(window, cfg)
    return float(window.n_samples * np.mean(est.amplitudes**2))


def calibrate_threshold(h0_statistics: Sequence[float], margin: float = DEFAULT_MARGIN) -> float:
    """Zero-false-alarm threshold: the largest H0 statistic raised by ``margin``."""
    values = np.asarray(h0_statistics, dtype=float)
    if values.size == 0:
        raise ValueError("need at least one H0 statistic to calibrate a threshold")
    return float(values.max() * (1.0 + margin))
