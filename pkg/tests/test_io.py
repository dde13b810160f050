import json

import numpy as np
import pytest

from breathtaking import io
from breathtaking.model import EvaluationReport, LinkId, LinkTrace
from breathtaking.simulate import SimScenario, generate, preset


def test_empty_body_gives_no_traces():
    assert io.parse_traces("#breathtrace v1\ntime_s,tx,rx,rss_dbm\n") == []


def test_header_errors():
    with pytest.raises(io.TraceFormatError, match="version"):
        io.parse_traces("#breathtrace v2\n")
    with pytest.raises(io.TraceFormatError):
        io.parse_traces("time_s,tx,rx,rss_dbm\n0,0,1,-40\n")
    with pytest.raises(io.TraceFormatError):
        io.parse_traces("")


@pytest.mark.parametrize(
    "row, message",
    [
        ("0.0,0,1", "expected 4 fields"),
        ("x,0,1,-40", ":3:"),
        ("0.0,1,1,-40", "differ"),
        ("-1.0,0,1,-40", "non-negative"),
        ("0.0,0,1,nan", "finite"),
    ],
)
def test_malformed_rows_report_line(row, message):
    with pytest.raises(io.TraceFormatError, match=message) as err:
        io.parse_traces(f"#breathtrace v1\ntime_s,tx,rx,rss_dbm\n{row}\n", "f.csv")
    assert "f.csv:3" in str(err.value)


def test_duplicate_record_rejected():
    text = "#breathtrace v1\ntime_s,tx,rx,rss_dbm\n0.0,0,1,-40\n0.0,0,1,-41\n"
    with pytest.raises(io.TraceFormatError, match="duplicate"):
        io.parse_traces(text)


def test_unsorted_input_is_sorted():
    text = "#breathtrace v1\ntime_s,tx,rx,rss_dbm\n0.48,0,1,-42\n0.0,0,1,-40\n0.24,1,0,-45\n"
    traces = io.parse_traces(text)
    assert [tr.link for tr in traces] == [LinkId(0, 1), LinkId(1, 0)]
    assert list(traces[0].times) == [0.0, 0.48]
    assert traces[0].mean_rss == -41.0


def test_trace_round_trip_is_byte_identical(tmp_path):
    ds = generate(preset("patch_quiet", duration_s=10.0, packet_loss_prob=0.05, seed=2))
    p = tmp_path / "t.csv"
    io.write_traces(ds.traces, p)
    back = io.read_traces(p)
    assert len(back) == 380
    for a, b in zip(ds.traces, back):
        assert a.link == b.link
        assert np.array_equal(a.rss, b.rss)
        assert np.allclose(a.times, b.times, atol=5e-7)
    q = tmp_path / "u.csv"
    io.write_traces(back, q)
    assert p.read_bytes() == q.read_bytes()


def test_millisecond_timestamps_survive():
    tr = LinkTrace(LinkId(3, 4), [0.036, 0.276], [-50.0, -51.5])
    back = io.parse_traces(io.format_traces([tr]))[0]
    assert list(back.times) == [0.036, 0.276]
    assert list(back.rss) == [-50.0, -51.5]


def test_simulated_file_shape(tmp_path):
    ds = generate(preset("patch_quiet", duration_s=60.0, seed=3))
    io.write_traces(ds.traces, tmp_path / "t.csv")
    back = io.read_traces(tmp_path / "t.csv")
    assert len(back) == 380
    assert all(len(tr) == 250 for tr in back)


def test_truth_round_trip(tmp_path):
    truth = generate(preset("patch_quiet", duration_s=5.0)).truth
    io.write_truth(truth, tmp_path / "truth.json")
    back = io.read_truth(tmp_path / "truth.json")
    assert back.rate_bpm == truth.rate_bpm
    assert back.link_ids == truth.link_ids
    for name in ("amplitudes", "phases", "crosses_chest", "mean_rss", "noise_sigma"):
        assert np.array_equal(getattr(back, name), getattr(truth, name))
    empty = generate(preset("empty_room", duration_s=5.0)).truth
    assert io.truth_from_dict(io.truth_to_dict(empty)).rate_bpm is None


def test_scenario_defaults_from_minimal_file(tmp_path):
    p = tmp_path / "s.toml"
    p.write_text("nodes = 20\n")
    assert io.read_scenario(p) == SimScenario()


def test_scenario_round_trip(tmp_path):
    for s in (
        preset("dipole_hall_motion", seed=9, packet_loss_prob=0.02),
        preset("empty_room"),
        SimScenario(node_positions=[(0, 0), (1, 0), (0, 1)], chest_axes=(0.2, 0.1)),
    ):
        io.write_scenario(s, tmp_path / "s.toml")
        assert io.read_scenario(tmp_path / "s.toml") == s


def test_scenario_unknown_keys(tmp_path, caplog):
    p = tmp_path / "s.toml"
    p.write_text("nodes = 20\nwall_material = 'brick'\n")
    with pytest.raises(io.ScenarioFormatError, match="wall_material"):
        io.read_scenario(p)
    assert io.read_scenario(p, strict=False) == SimScenario()
    assert "wall_material" in caplog.text


def test_scenario_invalid_values(tmp_path):
    p = tmp_path / "s.toml"
    p.write_text("nodes = 1\n")
    with pytest.raises(io.ScenarioFormatError):
        io.read_scenario(p)
    p.write_text("nodes = [\n")
    with pytest.raises(io.ScenarioFormatError):
        io.read_scenario(p)


def test_report_keeps_zero_rates(tmp_path):
    rep = EvaluationReport(p_fa=0.0, p_m=0.0, realization_count=400)
    io.write_report(rep, tmp_path / "r.json", config={"T_s": 30.0}, kind="detect")
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["kind"] == "detect"
    assert doc["config"] == {"T_s": 30.0}
    assert doc["result"]["p_fa"] == 0 and doc["result"]["p_m"] == 0
    assert "rmse_bpm" in doc["result"] and doc["result"]["rmse_bpm"] is None


def test_unwritable_path_raises(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        io.write_report({}, blocker / "r.json")


def test_atomic_write_leaves_no_temp_files(tmp_path):
    io.atomic_write(tmp_path / "a.txt", "hello\n")
    assert [p.name for p in tmp_path.iterdir()] == ["a.txt"]


def test_psd_csv(tmp_path):
    io.write_psd([0.2, 0.25], [2.0, 4.0], tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "f_hz,raw_psd,normalized_psd"
    assert lines[2] == "0.250000,4.0,1.0"
