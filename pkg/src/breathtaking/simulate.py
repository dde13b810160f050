"""Synthetic multi-link RSS traces for a breathing person in a static mesh.

Nodes sit on a rectangle around a bed; the person's chest is an ellipse in
plan view. Only links whose line segment crosses the chest carry a
breathing component, with a phase of 0 or pi (inhaling may raise or lower
RSS) plus jitter. Those links are also placed in a deep fade (lower mean
RSS). Links that cross the rest of the body but miss the chest pick up
wideband fluctuation instead. Each link is sampled whenever its
transmitter holds the token.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import signal

from .model import LinkId, LinkTrace, bpm_to_hz


class InvalidScenarioError(ValueError):
    pass


def rectangle_layout(n: int, width: float = 2.6, length: float = 3.6) -> tuple:
    """``n`` points spaced evenly along the perimeter of a centred rectangle."""
    perimeter = 2 * (width + length)
    pos = []
    for k in range(n):
        s = (k + 0.5) * perimeter / n
        if s < width:
            p = (-width / 2 + s, -length / 2)
        elif s < width + length:
            p = (width / 2, -length / 2 + (s - width))
        elif s < 2 * width + length:
            p = (width / 2 - (s - width - length), length / 2)
        else:
            p = (-width / 2, length / 2 - (s - 2 * width - length))
        pos.append((round(p[0], 6), round(p[1], 6)))
    return tuple(pos)


@dataclass(frozen=True)
class SimScenario:
    nodes: int = 20
    node_positions: Optional[tuple] = None
    chest_center: tuple = (0.0, 0.45)
    chest_axes: tuple = (0.3, 0.2)
    body_center: tuple = (0.0, 0.05)
    body_axes: tuple = (0.28, 0.9)
    breathing_rate_bpm: Optional[float] = 15.0
    breathing_depth: float = 1.0
    # breathing amplitude (dB) on chest-crossing links, log-normal
    amplitude_median_db: float = 0.23
    amplitude_spread: float = 0.3
    phase_jitter_deg: float = 8.0
    noise_sigma_db: float = 0.42
    noise_sigma_spread: float = 0.25
    link_mean_rss_db: float = -39.9
    link_mean_rss_spread_db: float = 6.0
    chest_rss_offset_db: float = 9.0
    # wideband fluctuation (limbs, bed) on links crossing the body but not the chest
    presence_noise_db: float = 1.0
    # hallway motion: low-passed Gaussian on every link, bursty in time
    motion_noise_db: float = 0.0
    motion_cutoff_hz: float = 0.8
    motion_duty: float = 0.5
    slot_ms: float = 12.0
    packet_loss_prob: float = 0.0
    quantize: bool = True
    duration_s: float = 60.0
    seed: int = 0

    def __post_init__(self):
        if self.node_positions is not None:
            pos = tuple((float(x), float(y)) for x, y in self.node_positions)
            object.__setattr__(self, "node_positions", pos)
            object.__setattr__(self, "nodes", len(pos))
        for name in ("chest_center", "chest_axes", "body_center", "body_axes"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        problems = []
        if self.nodes < 2:
            problems.append("need at least 2 nodes")
        if not self.duration_s > 0:
            problems.append("duration_s must be positive")
        if not 0 <= self.packet_loss_prob < 1:
            problems.append("packet_loss_prob must lie in [0, 1)")
        if not self.slot_ms > 0:
            problems.append("slot_ms must be positive")
        if self.breathing_rate_bpm is not None and not self.breathing_rate_bpm > 0:
            problems.append("breathing rate must be positive")
        for region in ("chest", "body"):
            center, axes = getattr(self, f"{region}_center"), getattr(self, f"{region}_axes")
            if len(center) != 2 or len(axes) != 2 or min(axes) <= 0:
                problems.append(f"{region} region must be a 2-D ellipse with positive semi-axes")
        for name in (
            "noise_sigma_db",
            "noise_sigma_spread",
            "amplitude_median_db",
            "amplitude_spread",
            "presence_noise_db",
            "motion_noise_db",
            "breathing_depth",
            "link_mean_rss_spread_db",
        ):
            if getattr(self, name) < 0:
                problems.append(f"{name} must be non-negative")
        if not 0 < self.motion_duty <= 1:
            problems.append("motion_duty must lie in (0, 1]")
        if self.motion_cutoff_hz <= 0 or self.motion_cutoff_hz >= 500.0 / (self.slot_ms * self.nodes):
            problems.append("motion_cutoff_hz must lie below the per-link Nyquist rate")
        if problems:
            raise InvalidScenarioError("; ".join(problems))

    @property
    def positions(self) -> np.ndarray:
        pos = self.node_positions or rectangle_layout(self.nodes)
        return np.asarray(pos, dtype=float)

    @property
    def sample_period(self) -> float:
        """Per-link period: every node transmits once per round."""
        return self.slot_ms * self.nodes / 1000.0

    @property
    def breathing(self) -> bool:
        return self.breathing_rate_bpm is not None and self.breathing_depth > 0

    def replace(self, **changes) -> "SimScenario":
        if "nodes" in changes and "node_positions" not in changes:
            changes["node_positions"] = None
        return dataclasses.replace(self, **changes)

    def without_breathing(self) -> "SimScenario":
        return self.replace(breathing_rate_bpm=None)


@dataclass(frozen=True)
class GroundTruth:
    rate_bpm: Optional[float]
    link_ids: tuple
    amplitudes: np.ndarray
    phases: np.ndarray
    crosses_chest: np.ndarray
    mean_rss: np.ndarray
    noise_sigma: np.ndarray
    sample_period: float
    seed: int = 0

    @property
    def f_hz(self) -> Optional[float]:
        return None if self.rate_bpm is None else bpm_to_hz(self.rate_bpm)

    def index(self) -> dict:
        return {l: k for k, l in enumerate(self.link_ids)}


@dataclass
class Dataset:
    traces: list
    truth: GroundTruth
    scenario: Optional[SimScenario] = field(default=None)


def all_links(n_nodes: int) -> list[LinkId]:
    return [LinkId(a, b) for a in range(n_nodes) for b in range(n_nodes) if a != b]


def segment_hits_ellipse(p, q, center, axes) -> np.ndarray:
    """Whether segments p[k] -> q[k] intersect an axis-aligned ellipse."""
    p = (np.atleast_2d(p) - center) / axes
    q = (np.atleast_2d(q) - center) / axes
    d = q - p
    dd = (d * d).sum(axis=1)
    t = np.clip(-(p * d).sum(axis=1) / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
    closest = p + t[:, None] * d
    return (closest * closest).sum(axis=1) <= 1.0


def crossing_links(scenario: SimScenario, links: list[LinkId], region: str = "chest") -> np.ndarray:
    pos = scenario.positions
    tx = np.array([l.tx for l in links])
    rx = np.array([l.rx for l in links])
    center = np.array(getattr(scenario, f"{region}_center"))
    axes = np.array(getattr(scenario, f"{region}_axes"))
    return segment_hits_ellipse(pos[tx], pos[rx], center, axes)


def _motion_process(rng, n_links, n_samples, scenario: SimScenario) -> np.ndarray:
    ts = scenario.sample_period
    white = rng.standard_normal((n_links, n_samples))
    b, a = signal.butter(2, scenario.motion_cutoff_hz, fs=1.0 / ts)
    colored = signal.lfilter(b, a, white, axis=1)
    colored /= colored.std(axis=1, keepdims=True) + 1e-12
    # the walker is active in random bursts shared by all links
    burst_len = max(1, int(round(10.0 / ts)))
    n_bursts = -(-n_samples // burst_len)
    active = rng.random(n_bursts) < scenario.motion_duty
    level = rng.uniform(0.3, 1.0, n_bursts) * active
    envelope = np.repeat(level, burst_len)[:n_samples]
    kernel = np.hanning(max(3, burst_len // 2))
    envelope = np.convolve(envelope, kernel / kernel.sum(), mode="same")
    coupling = scenario.motion_noise_db * np.exp(0.5 * rng.standard_normal(n_links))
    return coupling[:, None] * envelope[None, :] * colored


def generate(scenario: SimScenario) -> Dataset:
    """Draw one realisation of every directed link's RSS trace.

    Deterministic given ``scenario.seed``.
    """
    scenario.validate()
    links = all_links(scenario.nodes)
    n_links = len(links)
    ts = scenario.sample_period
    n_rounds = int(np.ceil(scenario.duration_s / ts - 1e-9))
    seeds = np.random.SeedSequence(scenario.seed).spawn(8)
    rng_mean, rng_sigma, rng_amp, rng_phase, rng_noise, rng_loss, rng_motion, rng_presence = (
        np.random.default_rng(s) for s in seeds
    )

    crosses = crossing_links(scenario, links)
    mean_rss = scenario.link_mean_rss_db + scenario.link_mean_rss_spread_db * rng_mean.standard_normal(n_links)
    mean_rss = np.where(crosses, mean_rss - scenario.chest_rss_offset_db, mean_rss)
    sigma = scenario.noise_sigma_db * np.exp(scenario.noise_sigma_spread * rng_sigma.standard_normal(n_links))

    amp_draw = scenario.amplitude_median_db * np.exp(scenario.amplitude_spread * rng_amp.standard_normal(n_links))
    flip = rng_phase.random(n_links) < 0.5
    jitter = np.deg2rad(scenario.phase_jitter_deg) * rng_phase.standard_normal(n_links)
    phases = np.angle(np.exp(1j * (np.where(flip, np.pi, 0.0) + jitter)))
    if scenario.breathing:
        amplitudes = np.where(crosses, scenario.breathing_depth * amp_draw, 0.0)
        f = bpm_to_hz(scenario.breathing_rate_bpm)
    else:
        amplitudes = np.zeros(n_links)
        f = 0.0

    tx = np.array([l.tx for l in links])
    offsets = tx * scenario.slot_ms / 1000.0
    times = offsets[:, None] + ts * np.arange(n_rounds)[None, :]

    rss = mean_rss[:, None] + sigma[:, None] * rng_noise.standard_normal(times.shape)
    if scenario.breathing:
        rss += amplitudes[:, None] * np.cos(2 * np.pi * f * times + phases[:, None])
        if scenario.presence_noise_db > 0:
            extra = scenario.presence_noise_db * rng_presence.standard_normal(times.shape)
            body = crossing_links(scenario, links, "body") & ~crosses
            rss += np.where(body[:, None], extra, 0.0)
    if scenario.motion_noise_db > 0:
        rss += _motion_process(rng_motion, n_links, n_rounds, scenario)
    if scenario.quantize:
        rss = np.round(rss)
    keep = rng_loss.random(times.shape) >= scenario.packet_loss_prob
    keep &= times < scenario.duration_s

    traces = [LinkTrace(link, times[k][keep[k]], rss[k][keep[k]]) for k, link in enumerate(links)]
    truth = GroundTruth(
        rate_bpm=scenario.breathing_rate_bpm if scenario.breathing else None,
        link_ids=tuple(links),
        amplitudes=amplitudes,
        phases=phases if scenario.breathing else np.zeros(n_links),
        crosses_chest=crosses,
        mean_rss=mean_rss,
        noise_sigma=sigma,
        sample_period=ts,
        seed=scenario.seed,
    )
    return Dataset(traces, truth, scenario)


_PRESETS = {
    "patch_quiet": {},
    "patch_hall_motion": {"motion_noise_db": 0.08},
    "dipole_quiet": {"noise_sigma_db": 0.46, "motion_noise_db": 0.08},
    "dipole_hall_motion": {"noise_sigma_db": 0.46, "motion_noise_db": 0.35},
    "empty_room": {"breathing_rate_bpm": None},
}

PRESET_NAMES = tuple(_PRESETS)


def preset(name: str, **overrides) -> SimScenario:
    """Scenario approximating one of the measured conditions.

    Patch antennas see little of the hallway; dipoles couple hallway motion
    into every link and show a higher noise floor.
    """
    try:
        fields = dict(_PRESETS[name])
    except KeyError:
        raise InvalidScenarioError(f"unknown preset {name!r}; choose from {', '.join(_PRESETS)}") from None
    fields.update(overrides)
    return SimScenario(**fields)
