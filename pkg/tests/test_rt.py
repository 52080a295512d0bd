import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from bmui.control import Calibration, ControlCommand
from bmui.neural import DirectionClassifier, EnvelopeRegressor
from bmui.neural.gradcheck import TINY_CLASSIFIER, TINY_REGRESSOR
from bmui.rt.pipeline import PipelineConfig, PipelineEngine, PipelineRunner, run_fast
from bmui.rt.server import create_app
from bmui.rt.sources import ReplaySource, SyntheticLiveSource, make_source
from bmui.synth import SynthConfig, synthesize_session, save_synthetic_session


def tiny_source(seed=5):
    return SyntheticLiveSource(SynthConfig(seed=seed, n_eeg_ch=3, n_emg_ch=2, n_trials=1))


def make_engine(seed=5, chunk_ms=10):
    return PipelineEngine(
        source=tiny_source(seed),
        regressor=EnvelopeRegressor(TINY_REGRESSOR, seed=0),
        classifier=DirectionClassifier(TINY_CLASSIFIER, seed=0),
        calib=Calibration(0, 0.1, 1.1),
        chunk_ms=chunk_ms,
    )


class FixedController:
    """Bypasses classification so arm kinematics can be tested in isolation."""

    def __init__(self, direction="flex", magnitude=0.5):
        self.cmd = (direction, magnitude)
        self._t = 0

    def step(self, envelope):
        d, m = self.cmd
        t = self._t
        self._t += 1
        return ControlCommand(d, m, t)

    def reset(self):
        pass


class TestSources:
    def test_synthetic_chunk_shapes(self):
        src = tiny_source()
        chunk = src.next_chunk(50)
        assert chunk.shape == (3, 50)
        assert src.n_channels == 3

    def test_synthetic_never_exhausts(self):
        src = tiny_source()
        for _ in range(20):
            assert src.next_chunk(50) is not None

    def test_intent_raises_signal_power(self):
        src = tiny_source()
        quiet = np.concatenate([src.next_chunk(100) for _ in range(20)], axis=1)
        src.set_intent("flex", 1.0)
        loud = np.concatenate([src.next_chunk(100) for _ in range(20)], axis=1)
        assert loud.std() > 1.5 * quiet.std()

    def test_intent_validation(self):
        src = tiny_source()
        with pytest.raises(ValueError):
            src.set_intent("up", 1.0)
        with pytest.raises(ValueError):
            src.set_intent("flex", 2.0)

    def test_rest_clears_intent(self):
        src = tiny_source()
        src.set_intent("flex", 1.0)
        src.set_intent("rest", 0.0)
        assert src._u == {"flex": 0.0, "extend": 0.0}

    def test_replay_exhausts_and_pads(self, tmp_path):
        s = synthesize_session(
            SynthConfig(seed=1, n_trials=1, trial_duration_s=1.0, rest_duration_s=0.5)
        )
        save_synthetic_session(s, tmp_path / "sess")
        src = ReplaySource(tmp_path / "sess")
        n_total = 0
        while True:
            chunk = src.next_chunk(50)
            if chunk is None:
                break
            assert chunk.shape == (16, 50)
            n_total += 50
        assert n_total >= 2000

    def test_make_source_specs(self, tmp_path):
        assert isinstance(make_source("synthetic:3"), SyntheticLiveSource)
        with pytest.raises(ValueError):
            make_source("magic:1")
        with pytest.raises(ValueError):
            make_source("synthetic:")


class TestEngine:
    def test_one_frame_per_chunk(self):
        engine = make_engine()
        frames = run_fast(engine, 25)
        assert len(frames) == 25
        assert [f.t_step for f in frames] == list(range(25))

    def test_replay_run_terminates(self, tmp_path):
        s = synthesize_session(
            SynthConfig(
                seed=2, n_trials=1, trial_duration_s=1.0, rest_duration_s=0.5,
                n_eeg_ch=3, n_emg_ch=2,
            )
        )
        save_synthetic_session(s, tmp_path / "sess")
        engine = PipelineEngine(
            source=ReplaySource(tmp_path / "sess"),
            regressor=EnvelopeRegressor(TINY_REGRESSOR, seed=0),
            classifier=DirectionClassifier(TINY_CLASSIFIER, seed=0),
            calib=Calibration(0, 0.1, 1.1),
            chunk_ms=50,
        )
        frames = run_fast(engine, 10_000)
        assert 30 <= len(frames) <= 45  # ~2 s of signal in 50 ms chunks

    def test_channel_mismatch_rejected(self):
        with pytest.raises(ValueError):
            PipelineEngine(
                source=SyntheticLiveSource(SynthConfig(seed=0, n_eeg_ch=4, n_trials=1)),
                regressor=EnvelopeRegressor(TINY_REGRESSOR, seed=0),
                classifier=DirectionClassifier(TINY_CLASSIFIER, seed=0),
                calib=Calibration(0, 0.1, 1.1),
            )

    def test_frame_fields(self):
        engine = make_engine()
        frame = run_fast(engine, 3)[-1]
        d = frame.to_dict()
        assert d["type"] == "telemetry"
        assert d["schema"] == "bmui-ws/1"
        assert len(d["pred_envelope"]) == 2
        assert len(d["eeg_preview"]) == 3  # min(channels, preview limit)
        assert d["processing_latency_ms"] >= 0.0
        assert 0.0 <= d["elbow_angle_deg"] <= 150.0

    def test_arm_integrates_fixed_command(self):
        engine = make_engine(chunk_ms=50)
        engine.controller = FixedController("flex", 0.5)
        run_fast(engine, 20)
        # 60 deg/s * 0.5 * 1 s
        assert engine.arm.elbow_angle_deg == pytest.approx(30.0, abs=1e-6)

    def test_threshold_fraction_dead_zone(self):
        engine = make_engine(chunk_ms=50)
        engine.controller = FixedController("flex", 0.25)
        assert engine.handle_control_message(
            {"type": "set_threshold_fraction", "value": 0.25}
        )["type"] == "ack"
        run_fast(engine, 10)
        assert engine.arm.elbow_angle_deg == 0.0  # magnitude at the dead-zone edge

    def test_threshold_fraction_rescales(self):
        engine = make_engine(chunk_ms=50)
        engine.controller = FixedController("flex", 1.0)
        engine.handle_control_message({"type": "set_threshold_fraction", "value": 0.5})
        run_fast(engine, 20)
        # full effort still reaches full speed after remap
        assert engine.arm.elbow_angle_deg == pytest.approx(60.0, abs=1e-6)

    def test_gain_scales_motion(self):
        fast, slow = make_engine(chunk_ms=50), make_engine(chunk_ms=50)
        for e in (fast, slow):
            e.controller = FixedController("flex", 1.0)
        fast.handle_control_message({"type": "set_gain", "value": 2.0})
        slow.handle_control_message({"type": "set_gain", "value": 0.5})
        run_fast(fast, 10)
        run_fast(slow, 10)
        assert fast.arm.elbow_angle_deg == pytest.approx(4 * slow.arm.elbow_angle_deg)


class TestControlMessages:
    def test_acks(self):
        engine = make_engine()
        for msg in (
            {"type": "set_gain", "value": 1.5},
            {"type": "set_threshold_fraction", "value": 0.1},
            {"type": "intent", "direction": "flex", "level": 0.8},
            {"type": "reset_arm"},
            {"type": "stop"},
            {"type": "start"},
        ):
            reply = engine.handle_control_message(msg)
            assert reply["type"] == "ack", reply

    def test_bad_values_get_err(self):
        engine = make_engine()
        for msg in (
            {"type": "set_gain", "value": 11.0},
            {"type": "set_gain", "value": -1.0},
            {"type": "set_gain"},
            {"type": "set_threshold_fraction", "value": 1.0},
            {"type": "intent", "direction": "sideways", "level": 1.0},
            {"type": "set_source", "value": "nope"},
            {"type": "warp"},
            {"no_type": True},
        ):
            assert engine.handle_control_message(msg)["type"] == "err", msg

    def test_non_dict_is_err(self):
        assert make_engine().handle_control_message("hello")["type"] == "err"

    def test_reset_arm_zeroes_angle(self):
        engine = make_engine(chunk_ms=50)
        engine.controller = FixedController("flex", 1.0)
        run_fast(engine, 10)
        assert engine.arm.elbow_angle_deg > 0
        engine.handle_control_message({"type": "reset_arm"})
        assert engine.arm.elbow_angle_deg == 0.0

    def test_stop_freezes_pipeline_state(self):
        engine = make_engine()
        engine.handle_control_message({"type": "stop"})
        assert engine.running is False
        engine.handle_control_message({"type": "start"})
        assert engine.running is True

    def test_set_source_resets_state(self):
        engine = make_engine(chunk_ms=50)
        engine.controller = FixedController("flex", 1.0)
        run_fast(engine, 5)
        engine.set_source(tiny_source(seed=9))
        assert engine._filled == 0


class TestRunner:
    def test_unpaced_run_delivers_frames(self):
        runner = PipelineRunner(make_engine(), paced=False)
        q = runner.subscribe()
        runner.start()
        frames = [q.get(timeout=2.0) for _ in range(5)]
        runner.stop()
        steps = [f.t_step for f in frames]
        assert steps == sorted(steps)

    def test_control_round_trip(self):
        runner = PipelineRunner(make_engine(), paced=False)
        runner.start()
        reply = runner.submit_control({"type": "set_gain", "value": 3.0})
        runner.stop()
        assert reply == {"type": "ack", "detail": "set_gain"}
        assert runner.engine.gain == 3.0

    def test_finishes_on_exhausted_replay(self, tmp_path):
        s = synthesize_session(
            SynthConfig(
                seed=3, n_trials=1, trial_duration_s=1.0, rest_duration_s=0.5,
                n_eeg_ch=3, n_emg_ch=2,
            )
        )
        save_synthetic_session(s, tmp_path / "sess")
        engine = PipelineEngine(
            source=ReplaySource(tmp_path / "sess"),
            regressor=EnvelopeRegressor(TINY_REGRESSOR, seed=0),
            classifier=DirectionClassifier(TINY_CLASSIFIER, seed=0),
            calib=Calibration(0, 0.1, 1.1),
        )
        runner = PipelineRunner(engine, paced=False)
        runner.start()
        deadline = time.monotonic() + 10.0
        while not runner.finished and time.monotonic() < deadline:
            time.sleep(0.05)
        runner.stop()
        assert runner.finished

    def test_unsubscribed_queue_stops_filling(self):
        runner = PipelineRunner(make_engine(), paced=False)
        q = runner.subscribe()
        runner.start()
        q.get(timeout=2.0)
        runner.unsubscribe(q)
        time.sleep(0.2)
        while not q.empty():
            q.get_nowait()
        time.sleep(0.2)
        runner.stop()
        assert q.qsize() <= 1  # at most one in-flight frame after unsubscribe


class TestConfig:
    def test_port_bounds(self):
        with pytest.raises(ValueError):
            PipelineConfig("synthetic:0", "r", "c", "k", port=80)

    def test_env_port_default(self, monkeypatch):
        monkeypatch.setenv("BMUI_PORT", "9000")
        assert PipelineConfig("synthetic:0", "r", "c", "k").port == 9000


class TestWebSocket:
    def test_telemetry_and_control(self):
        runner = PipelineRunner(make_engine(), paced=False)
        runner.start()
        app = create_app(runner, ui_dir=None)
        try:
            with TestClient(app) as client:
                with client.websocket_connect("/ws") as ws:
                    msg = ws.receive_json()
                    assert msg["type"] == "telemetry"
                    assert msg["schema"] == "bmui-ws/1"
                    ws.send_json({"type": "set_gain", "value": 2.0})
                    while True:
                        reply = ws.receive_json()
                        if reply["type"] != "telemetry":
                            break
                    assert reply == {"type": "ack", "detail": "set_gain"}
                    ws.send_json({"type": "bogus"})
                    while True:
                        reply = ws.receive_json()
                        if reply["type"] != "telemetry":
                            break
                    assert reply["type"] == "err"
        finally:
            runner.stop()
