"""Performance metrics and the experiment designs built on them."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .detect import network_detect
from .estimate import estimate
from .model import (
    BreathingEstimate,
    EstimatorConfig,
    EvaluationReport,
    Hypothesis,
    hz_to_bpm,
    wrap_phase,
)
from .preprocess import FilteredGrid, iter_windows, prepare
from .simulate import Dataset

INVALID_BPM = 5.0


def rate_metrics(estimates: Iterable[tuple[float, float]]) -> EvaluationReport:
    """RMSE, bias and invalid fraction of ``(estimate_bpm, truth_bpm)`` pairs.

    Estimates more than 5 bpm off are invalid: they count toward the
    invalid fraction and are left out of RMSE and bias.
    """
    pairs = np.asarray(list(estimates), dtype=float).reshape(-1, 2)
    if pairs.shape[0] == 0:
        raise ValueError("need at least one estimate")
    err = pairs[:, 0] - pairs[:, 1]
    valid = np.abs(err) <= INVALID_BPM
    k = err.size
    if not valid.any():
        return EvaluationReport(invalid_fraction=1.0, realization_count=k)
    ev = err[valid]
    return EvaluationReport(
        rmse_bpm=float(np.sqrt(np.mean(ev**2))),
        bias_bpm=float(np.mean(ev)),
        invalid_fraction=float(1.0 - valid.mean()),
        realization_count=k,
    )


def detector_metrics(decisions: Iterable[tuple]) -> tuple[Optional[float], Optional[float]]:
    """``(P_FA, P_M)`` from ``(decision, truth)`` pairs; a rate is ``None`` if its class is absent."""
    pairs = [(Hypothesis(d), Hypothesis(t)) for d, t in decisions]
    if not pairs:
        raise ValueError("need at least one decision")
    h0 = [d for d, t in pairs if t is Hypothesis.H0]
    h1 = [d for d, t in pairs if t is Hypothesis.H1]
    p_fa = sum(d is Hypothesis.H1 for d in h0) / len(h0) if h0 else None
    p_m = sum(d is Hypothesis.H0 for d in h1) / len(h1) if h1 else None
    return p_fa, p_m


@dataclass(frozen=True)
class WindowResult:
    start_time: float
    n_links: int
    f_hat: float
    s_hat: float
    estimate: Optional[BreathingEstimate] = None

    @property
    def rate_bpm(self) -> float:
        return hz_to_bpm(self.f_hat)


def run_windows(
    grid: FilteredGrid,
    T: float,
    stride: float,
    cfg: Optional[EstimatorConfig] = None,
    keep_estimates: bool = False,
) -> list[WindowResult]:
    out = []
    for w in iter_windows(grid, T, stride):
        est = estimate(w, cfg)
        det = network_detect(est, gamma_net=np.inf)
        out.append(WindowResult(w.start_time, w.n_links, est.f_hat, det.s_hat, est if keep_estimates else None))
    return out


def summarize(
    results: Sequence[WindowResult],
    truth_bpm: Optional[float],
    gamma_net: Optional[float] = None,
) -> EvaluationReport:
    """Metrics over per-window results of one dataset."""
    if not results:
        return EvaluationReport()
    rate = rate_metrics((r.rate_bpm, truth_bpm) for r in results) if truth_bpm is not None else EvaluationReport()
    p_fa = p_m = None
    if gamma_net is not None:
        truth = Hypothesis.H0 if truth_bpm is None else Hypothesis.H1
        dec = [(Hypothesis.H1 if r.s_hat > gamma_net else Hypothesis.H0, truth) for r in results]
        p_fa, p_m = detector_metrics(dec)
    return EvaluationReport(
        rmse_bpm=rate.rmse_bpm,
        bias_bpm=rate.bias_bpm,
        invalid_fraction=rate.invalid_fraction,
        p_fa=p_fa,
        p_m=p_m,
        realization_count=len(results),
    )


@dataclass(frozen=True)
class SweepRow:
    T: float
    report: EvaluationReport
    s_min: float
    s_mean: float
    s_max: float
    hypothesis: Hypothesis

    def to_dict(self) -> dict:
        return {
            "T_s": self.T,
            "hypothesis": self.hypothesis.value,
            "s_hat_min": self.s_min,
            "s_hat_mean": self.s_mean,
            "s_hat_max": self.s_max,
            **self.report.to_dict(),
        }


def _grid_of(dataset: Dataset, grid: Optional[FilteredGrid]) -> FilteredGrid:
    return grid if grid is not None else prepare(dataset.traces, dataset.truth.sample_period)


def sweep_T(
    dataset: Dataset,
    T_values: Iterable[float],
    stride: float = 5.0,
    cfg: Optional[EstimatorConfig] = None,
    gamma_net: Optional[float] = None,
    grid: Optional[FilteredGrid] = None,
) -> list[SweepRow]:
    """Run the full pipeline once per observation period."""
    T_values = list(T_values)
    grid = _grid_of(dataset, grid)
    if max(T_values) > grid.duration + 1e-9:
        raise ValueError(f"T={max(T_values)} s exceeds the {grid.duration:.1f} s of data")
    truth = dataset.truth.rate_bpm
    hyp = Hypothesis.H0 if truth is None else Hypothesis.H1
    rows = []
    for T in T_values:
        res = run_windows(grid, T, stride, cfg)
        s = np.array([r.s_hat for r in res])
        rows.append(SweepRow(T, summarize(res, truth, gamma_net), float(s.min()), float(s.mean()), float(s.max()), hyp))
    return rows


def _mean_or_none(values: list) -> Optional[float]:
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


def node_subset_ablation(
    dataset: Dataset,
    sizes: Iterable[int],
    trials: int = 100,
    seed: int = 0,
    T: float = 30.0,
    stride: float = 5.0,
    cfg: Optional[EstimatorConfig] = None,
    grid: Optional[FilteredGrid] = None,
) -> dict[int, EvaluationReport]:
    """Rate metrics on random node subsets, averaged over ``trials`` draws per size."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    grid = _grid_of(dataset, grid)
    nodes = sorted({v for l in grid.link_ids for v in l})
    truth = dataset.truth.rate_bpm
    if truth is None:
        raise ValueError("node-subset ablation needs a dataset with breathing")
    rng = np.random.default_rng(seed)
    out = {}
    for size in sizes:
        if size < 2 or size > len(nodes):
            raise ValueError(f"subset size {size} outside [2, {len(nodes)}]")
        reports = []
        for _ in range(trials):
            subset = rng.choice(nodes, size=size, replace=False)
            res = run_windows(grid.restrict(subset), T, stride, cfg)
            reports.append(summarize(res, truth))
        out[size] = EvaluationReport(
            rmse_bpm=_mean_or_none([r.rmse_bpm for r in reports]),
            bias_bpm=_mean_or_none([r.bias_bpm for r in reports]),
            invalid_fraction=_mean_or_none([r.invalid_fraction for r in reports]),
            realization_count=sum(r.realization_count for r in reports),
        )
    return out


@dataclass(frozen=True)
class PhaseMode:
    angle: float
    weight: float


_KDE_POINTS = 720
_MAX_KAPPA = 500.0


def _kde_concentration(phases: np.ndarray) -> float:
    """Von Mises kernel concentration matched to the per-mode angular spread.

    The spread is taken from the tighter of the plain and the doubled-angle
    circular variance, so that two antipodal clusters are not mistaken for
    a flat distribution. With only a few tens of phases the kernel is kept
    as wide as one cluster, which avoids splitting a cluster into peaks.
    """
    r1 = np.abs(np.mean(np.exp(1j * phases)))
    r2 = np.abs(np.mean(np.exp(2j * phases)))
    s1 = np.sqrt(-2.0 * np.log(max(r1, 1e-12)))
    s2 = np.sqrt(-2.0 * np.log(max(r2, 1e-12))) / 2.0
    h = min(s1, s2)
    return _MAX_KAPPA if h <= 1.0 / np.sqrt(_MAX_KAPPA) else 1.0 / h**2


def circular_kde(phases, kappa: float, n_points: int = _KDE_POINTS) -> tuple[np.ndarray, np.ndarray]:
    grid = np.linspace(-np.pi, np.pi, n_points, endpoint=False) + np.pi / n_points
    # exp(kappa (cos - 1)) keeps large concentrations finite
    dens = np.exp(kappa * (np.cos(grid[:, None] - np.asarray(phases)[None, :]) - 1.0)).sum(axis=1)
    dens /= dens.sum() * (2 * np.pi / n_points)
    return grid, dens


def phase_modes(
    est: BreathingEstimate,
    amplitude_quantile: float = 0.95,
    min_links: int = 5,
    min_weight: float = 0.1,
) -> list[PhaseMode]:
    """Modes of the phase distribution of the highest-amplitude links.

    Links with amplitude above the given quantile are kept, a von Mises
    kernel density is fitted to their phases, and every local maximum is
    returned with the probability mass of its basin. Modes lighter than
    ``min_weight`` are dropped; the rest are sorted by weight.
    """
    amps = np.asarray(est.amplitudes)
    phases = np.asarray(est.phases)
    keep = amps > np.quantile(amps, amplitude_quantile) if amps.size else np.zeros(0, bool)
    if keep.sum() < min_links:
        raise ValueError(f"only {int(keep.sum())} links above the amplitude quantile; need {min_links}")
    return modes_of(phases[keep], min_weight=min_weight)


def modes_of(phases, min_weight: float = 0.1) -> list[PhaseMode]:
    phases = wrap_phase(np.asarray(phases, dtype=float))
    grid, dens = circular_kde(phases, _kde_concentration(phases))
    left, right = np.roll(dens, 1), np.roll(dens, -1)
    peaks = np.flatnonzero((dens > left) & (dens >= right))
    if peaks.size == 0:
        return []
    mass = dens * (2 * np.pi / grid.size)
    troughs = np.flatnonzero((dens <= left) & (dens < right))
    modes = []
    for p in peaks:
        if troughs.size == 0:
            w = float(mass.sum())
        else:
            # basin runs from the previous trough to the next one, circularly
            prev = troughs[troughs < p].max() if (troughs < p).any() else troughs.max() - grid.size
            nxt = troughs[troughs > p].min() if (troughs > p).any() else troughs.min() + grid.size
            idx = np.arange(prev, nxt) % grid.size
            w = float(mass[idx].sum())
        if w >= min_weight:
            modes.append(PhaseMode(float(wrap_phase(grid[p])), w))
    return sorted(modes, key=lambda m: -m.weight)


def mode_separation(a: float, b: float) -> float:
    return float(abs(wrap_phase(a - b)))
