import numpy as np
import pytest

from breathtaking.model import (
    BreathingEstimate,
    DetectionResult,
    DetectorConfig,
    EstimatorConfig,
    EvaluationReport,
    Hypothesis,
    LinkId,
    LinkTrace,
    NetworkWindow,
    RssSample,
    bpm_to_hz,
    hz_to_bpm,
    wrap_phase,
)


def test_bpm_conversion_factor_is_sixty():
    assert hz_to_bpm(0.25) == 15.0
    assert bpm_to_hz(12.0) == pytest.approx(0.2)
    assert hz_to_bpm(bpm_to_hz(19.0)) == pytest.approx(19.0)


def test_wrap_phase_range():
    x = np.linspace(-20, 20, 2001)
    w = wrap_phase(x)
    assert np.all(w > -np.pi) and np.all(w <= np.pi)
    assert np.allclose(np.exp(1j * w), np.exp(1j * x))
    assert wrap_phase(-np.pi) == pytest.approx(np.pi)
    assert isinstance(wrap_phase(1.0), float)


def test_link_id_is_ordered_and_validated():
    assert LinkId.make(1, 2) != LinkId.make(2, 1)
    assert str(LinkId(3, 4)) == "3->4"
    with pytest.raises(ValueError):
        LinkId.make(2, 2)
    with pytest.raises(ValueError):
        LinkId.make(-1, 2)


def test_link_trace_mean_and_ordering():
    tr = LinkTrace.from_samples(LinkId(0, 1), [RssSample(0.24, -42), RssSample(0.0, -40)])
    assert tr.mean_rss == -41.0
    assert list(tr.times) == [0.0, 0.24]
    assert tr.samples[0] == RssSample(0.0, -40.0)
    assert len(tr) == 2
    with pytest.raises(ValueError):
        tr.rss[0] = 0.0
    with pytest.raises(ValueError):
        LinkTrace(LinkId(0, 1), [0.0, 0.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        LinkTrace(LinkId(0, 1), [-1.0, 0.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        LinkTrace(LinkId(0, 1), [0.0, 1.0], [1.0])


def test_network_window_shape_rules():
    w = NetworkWindow([(0, 1), (1, 0)], np.zeros((2, 125)), 0.24, 3.0)
    assert (w.n_links, w.n_samples) == (2, 125)
    assert w.duration == pytest.approx(30.0)
    assert w.nyquist == pytest.approx(25 / 12)
    assert w.link_ids[1] == LinkId(1, 0)
    assert w.select([1]).link_ids == (LinkId(1, 0),)
    with pytest.raises(ValueError):
        NetworkWindow([(0, 1)], np.zeros((1, 1)), 0.24)
    with pytest.raises(ValueError):
        NetworkWindow([(0, 1)], np.zeros((2, 10)), 0.24)
    with pytest.raises(ValueError):
        NetworkWindow([(0, 1)], np.zeros((1, 10)), 0.0)


def test_estimator_config_grid_and_nyquist():
    cfg = EstimatorConfig()
    g = cfg.grid()
    assert g[0] == cfg.f_min and g[-1] == pytest.approx(cfg.f_max)
    assert np.allclose(np.diff(g), 0.001)
    cfg.check(0.24)
    with pytest.raises(ValueError):
        EstimatorConfig(f_min=0.5, f_max=0.4)
    with pytest.raises(ValueError):
        EstimatorConfig(grid_step=0)
    with pytest.raises(ValueError):
        EstimatorConfig(f_max=2.2).check(0.24)


def test_breathing_estimate_views():
    est = BreathingEstimate(0.25, [1.0, 2.0], [0.0, 1.0], [0.2, 0.25, 0.3], [1.0, 4.0, 2.0], 125)
    assert est.rate_bpm == 15.0
    assert est.n_links == 2
    assert est.objective[1] == (0.25, 4.0)
    assert np.allclose(est.normalized_psd, [0.25, 1.0, 0.5])


def test_detector_config_non_negative():
    DetectorConfig(0.0, 1.5)
    with pytest.raises(ValueError):
        DetectorConfig(-1.0, 1.5)


def test_detection_result_and_report():
    res = DetectionResult(2.0, [1.0, 3.0], Hypothesis.H1, (Hypothesis.H0, Hypothesis.H1))
    assert res.per_link_stat.mean() == res.s_hat
    rep = EvaluationReport(p_fa=0.0, p_m=0.0, realization_count=4)
    d = rep.to_dict()
    assert d["p_fa"] == 0.0 and d["p_m"] == 0.0 and d["rmse_bpm"] is None
