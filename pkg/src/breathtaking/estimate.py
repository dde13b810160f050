"""Multi-link sinusoid MLE.

A breathing component common to all links is modelled as
``y_l(i) = A_l cos(2 pi f Ts i + phi_l) + noise`` for ``i = 0..N-1``. The
frequency estimate maximises the summed per-link periodogram over the
search band; per-link amplitude and phase then follow in closed form at
that frequency.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .model import BreathingEstimate, EstimatorConfig, NetworkWindow, wrap_phase

_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


class GridTooLargeError(RuntimeError):
    pass


@lru_cache(maxsize=64)
def _trig_tables(n: int, sample_period: float, freqs: tuple) -> tuple[np.ndarray, np.ndarray]:
    arg = 2.0 * np.pi * sample_period * np.outer(np.asarray(freqs), np.arange(n))
    cos, sin = np.cos(arg), np.sin(arg)
    cos.setflags(write=False)
    sin.setflags(write=False)
    return cos, sin


def _check_window(window: NetworkWindow) -> None:
    if window.n_links == 0:
        raise ValueError("window holds no links")


def link_dft(window: NetworkWindow, f) -> np.ndarray:
    """``sum_i y_l(i) exp(-j 2 pi f Ts i)`` for every link (rows) and frequency (cols)."""
    f = np.atleast_1d(np.asarray(f, dtype=float))
    if f.size > 8:
        cos, sin = _trig_tables(window.n_samples, window.sample_period, tuple(f.tolist()))
    else:
        arg = 2.0 * np.pi * window.sample_period * np.outer(f, np.arange(window.n_samples))
        cos, sin = np.cos(arg), np.sin(arg)
    y = window.data
    return y @ cos.T - 1j * (y @ sin.T)


def psd_objective(window: NetworkWindow, f):
    """Summed periodogram ``sum_l |sum_i y_l(i) e^{-j 2 pi f Ts i}|^2``.

    Accepts a scalar or an array of frequencies.
    """
    _check_window(window)
    f_arr = np.asarray(f, dtype=float)
    if np.any(f_arr <= 0) or np.any(f_arr >= window.nyquist):
        raise ValueError(f"frequency must lie in (0, {window.nyquist}) Hz")
    X = link_dft(window, f_arr)
    power = (X.real**2 + X.imag**2).sum(axis=0)
    return float(power[0]) if f_arr.ndim == 0 else power


def _golden_max(fun, lo, hi, tol: float = 1e-8):
    """Golden-section maximisation, elementwise over arrays of brackets."""
    a, b = np.array(lo, dtype=float), np.array(hi, dtype=float)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = fun(c), fun(d)
    while np.max(b - a) > tol:
        left = fc >= fd
        # maximum in [a, d]: shrink from the right, else from the left
        a, b = np.where(left, a, c), np.where(left, d, b)
        new_c = b - _INV_PHI * (b - a)
        new_d = a + _INV_PHI * (b - a)
        probe = np.where(left, new_c, new_d)
        fp = fun(probe)
        c, d, fc, fd = (
            np.where(left, new_c, d),
            np.where(left, c, new_d),
            np.where(left, fp, fd),
            np.where(left, fc, fp),
        )
    x = 0.5 * (a + b)
    return x, fun(x)


def _rowwise_power(y: np.ndarray, f: np.ndarray, sample_period: float) -> np.ndarray:
    """``|sum_i y_l(i) e^{-j 2 pi f_l Ts i}|^2`` with one frequency per row."""
    arg = 2.0 * np.pi * sample_period * f[:, None] * np.arange(y.shape[1])[None, :]
    re = (y * np.cos(arg)).sum(axis=1)
    im = (y * np.sin(arg)).sum(axis=1)
    return re**2 + im**2


def estimate_frequency(window: NetworkWindow, cfg: Optional[EstimatorConfig] = None):
    """Grid search plus golden-section refinement of the summed periodogram.

    Returns ``(f_hat, freqs, psd)`` where ``psd`` is the objective on the
    search grid ``freqs``. Grid ties go to the lowest frequency.
    """
    cfg = cfg or EstimatorConfig()
    _check_window(window)
    cfg.check(window.sample_period)
    freqs = cfg.grid()
    psd = psd_objective(window, freqs)
    k = int(np.argmax(psd))
    lo = max(cfg.f_min, freqs[k] - cfg.grid_step)
    hi = min(cfg.f_max, freqs[k] + cfg.grid_step)
    f_ref, p_ref = _golden_max(lambda f: np.atleast_1d(psd_objective(window, f)), [lo], [hi])
    f_hat = float(f_ref[0]) if p_ref[0] > psd[k] else float(freqs[k])
    return f_hat, freqs, psd


def estimate_frequency_per_link(window: NetworkWindow, cfg: Optional[EstimatorConfig] = None):
    """Single-link frequency estimates for every row at once.

    Equivalent to running :func:`estimate_frequency` on each one-link
    sub-window. Returns ``(f_hat, amplitudes)`` arrays of length L.
    """
    cfg = cfg or EstimatorConfig()
    _check_window(window)
    cfg.check(window.sample_period)
    freqs = cfg.grid()
    X = link_dft(window, freqs)
    power = X.real**2 + X.imag**2
    k = power.argmax(axis=1)
    rows = np.arange(window.n_links)
    lo = np.maximum(cfg.f_min, freqs[k] - cfg.grid_step)
    hi = np.minimum(cfg.f_max, freqs[k] + cfg.grid_step)
    y = window.data
    f_ref, p_ref = _golden_max(lambda f: _rowwise_power(y, f, window.sample_period), lo, hi)
    better = p_ref > power[rows, k]
    f_hat = np.where(better, f_ref, freqs[k])
    p_hat = np.where(better, p_ref, power[rows, k])
    return f_hat, 2.0 / window.n_samples * np.sqrt(p_hat)


def estimate_amp_phase(window: NetworkWindow, f_hat: float) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form per-link amplitude (dB) and phase (rad, in (-pi, pi]) at ``f_hat``.

    Phases refer to ``window.start_time``: a link sampled ``offsets[l]``
    seconds into each round has that delay removed from its phase.
    """
    if not 0 < f_hat < window.nyquist:
        raise ValueError(f"f_hat={f_hat} Hz outside (0, {window.nyquist}) Hz")
    X = link_dft(window, f_hat)[:, 0]
    amplitudes = 2.0 / window.n_samples * np.abs(X)
    phases = wrap_phase(np.arctan2(X.imag, X.real) - 2.0 * np.pi * f_hat * window.offsets)
    return amplitudes, np.atleast_1d(phases)


def estimate(window: NetworkWindow, cfg: Optional[EstimatorConfig] = None) -> BreathingEstimate:
    f_hat, freqs, psd = estimate_frequency(window, cfg)
    amplitudes, phases = estimate_amp_phase(window, f_hat)
    return BreathingEstimate(
        f_hat=f_hat,
        amplitudes=amplitudes,
        phases=phases,
        freqs=freqs,
        psd=psd,
        n_samples=window.n_samples,
        link_ids=window.link_ids,
    )


@dataclass(frozen=True)
class Theta:
    f: float
    amplitudes: np.ndarray
    phases: np.ndarray
    cost: float


def mle_cost(window: NetworkWindow, f: float, amplitudes, phases) -> float:
    """Sum of squared residuals of the multi-link sinusoid model."""
    i = np.arange(window.n_samples)
    model = np.asarray(amplitudes)[:, None] * np.cos(
        2 * np.pi * f * window.sample_period * i[None, :] + np.asarray(phases)[:, None]
    )
    return float(((window.data - model) ** 2).sum())


def brute_force_mle(
    window: NetworkWindow,
    cfg: Optional[EstimatorConfig] = None,
    freqs=None,
    amplitudes=None,
    phases=None,
    max_cells: int = 5 * 10**8,
) -> Theta:
    """Exhaustive minimisation of the squared-residual cost over dense grids.

    Meant as a test oracle for small windows (a few links, tens of
    samples). The cost is a sum of per-link terms that share only ``f``, so
    for each frequency every link's (A, phi) grid is scanned independently;
    the scan covers the full Cartesian grid all the same.
    """
    cfg = cfg or EstimatorConfig()
    y = window.data
    n_links, n = y.shape
    if freqs is None:
        freqs = cfg.grid()
    if phases is None:
        phases = np.linspace(-np.pi, np.pi, 720, endpoint=False)
    if amplitudes is None:
        top = 2.0 * np.sqrt(2.0) * np.abs(y).max(initial=0.0) + 1e-12
        amplitudes = np.linspace(0.0, top, 2001)
    freqs, amplitudes, phases = (np.asarray(g, dtype=float) for g in (freqs, amplitudes, phases))
    cells = freqs.size * phases.size * (n + n_links * amplitudes.size)
    if cells > max_cells:
        raise GridTooLargeError(f"brute-force grid needs {cells:.3g} evaluations (limit {max_cells:.3g})")

    i = np.arange(n)
    energy = (y**2).sum(axis=1)
    best = None
    for f in freqs:
        basis = np.cos(2 * np.pi * f * window.sample_period * i[None, :] + phases[:, None])
        corr = y @ basis.T
        sq = (basis**2).sum(axis=1)
        # J_l(A, phi) = sum y^2 - 2 A sum(y cos) + A^2 sum(cos^2)
        cost = (
            energy[:, None, None]
            - 2.0 * amplitudes[None, None, :] * corr[:, :, None]
            + amplitudes[None, None, :] ** 2 * sq[None, :, None]
        )
        flat = cost.reshape(n_links, -1)
        idx = flat.argmin(axis=1)
        total = float(flat[np.arange(n_links), idx].sum())
        if best is None or total < best[0]:
            p_idx, a_idx = np.divmod(idx, amplitudes.size)
            best = (total, float(f), amplitudes[a_idx], phases[p_idx])
    total, f, a, p = best
    return Theta(f=f, amplitudes=a.copy(), phases=wrap_phase(p.copy()), cost=total)
