"""Chunked online pipeline: source -> causal preprocess -> inference -> control.

The engine itself is synchronous and single-owner; :class:`PipelineRunner`
wraps it in the three-stage threaded topology (ingest, process, broadcast)
with bounded queues for the paced serve mode. Tests drive the engine directly
in fast mode.
"""

from __future__ import annotations

import os
import queue
import sys
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .. import dsp
from ..control import ArmState, Calibration, DpEmgController, arm_update
from ..neural.classifier import DirectionClassifier
from ..neural.regressor import EnvelopeRegressor
from ..signals import ALIGNED_RATE_HZ

CHUNK_MS = 50
PREVIEW_CHANNELS = 4
PREVIEW_DECIMATION = 10
QUEUE_DEPTH = 4
DEFAULT_PORT = 8765


def default_port() -> int:
    return int(os.environ.get("BMUI_PORT", DEFAULT_PORT))


def _request_realtime_priority():
    """Best-effort FIFO scheduling for a pipeline thread.

    The control loop has a hard 50 ms budget; on a loaded desktop the default
    scheduler can park a thread for a whole timeslice, which alone blows the
    budget. Silently degrades where unprivileged.
    """
    try:
        os.sched_setscheduler(0, os.SCHED_FIFO, os.sched_param(10))
    except (AttributeError, OSError):
        pass


@dataclass(frozen=True)
class PipelineConfig:
    source: str  # replay:<dir> | synthetic:<seed>
    regressor_path: str
    classifier_path: str
    calibration_path: str
    port: int = field(default_factory=default_port)
    chunk_ms: int = CHUNK_MS
    fast: bool = False

    def __post_init__(self):
        if not (1024 <= self.port <= 65535):
            raise ValueError(f"port {self.port} outside [1024, 65535]")


@dataclass(frozen=True)
class TelemetryFrame:
    t_step: int
    elbow_angle_deg: float
    direction: str
    magnitude: float
    pred_envelope: tuple[float, ...]
    eeg_preview: tuple[tuple[float, ...], ...]
    processing_latency_ms: float

    def to_dict(self) -> dict:
        return {
            "type": "telemetry",
            "schema": "bmui-ws/1",
            "t_step": self.t_step,
            "elbow_angle_deg": self.elbow_angle_deg,
            "direction": self.direction,
            "magnitude": self.magnitude,
            "pred_envelope": list(self.pred_envelope),
            "eeg_preview": [list(ch) for ch in self.eeg_preview],
            "processing_latency_ms": self.processing_latency_ms,
        }


class PipelineEngine:
    """Advances the decode-and-control loop one 50 ms chunk at a time."""

    def __init__(
        self,
        source,
        regressor: EnvelopeRegressor,
        classifier: DirectionClassifier,
        calib: Calibration,
        chunk_ms: int = CHUNK_MS,
    ):
        if source.n_channels != regressor.hp.n_eeg_ch:
            raise ValueError(
                f"source has {source.n_channels} EEG channels, "
                f"regressor expects {regressor.hp.n_eeg_ch}"
            )
        if classifier.hp.n_emg_ch != regressor.hp.n_emg_ch:
            raise ValueError(
                f"classifier expects {classifier.hp.n_emg_ch} EMG channels, "
                f"regressor outputs {regressor.hp.n_emg_ch}"
            )
        self.source = source
        self.regressor = regressor
        self.controller = DpEmgController(classifier, calib)
        self.chunk_samples = int(round(chunk_ms * ALIGNED_RATE_HZ / 1000.0))
        self.dt_s = chunk_ms / 1000.0
        self.window = regressor.hp.window
        self._bandpass = dsp.StreamingFilter(
            dsp.eeg_bandpass(ALIGNED_RATE_HZ), source.n_channels
        )
        self._ring = np.zeros((source.n_channels, self.window))
        self._filled = 0
        self.arm = ArmState()
        self.gain = 1.0
        self.threshold_fraction = 0.0  # extra dead-zone on the calibrated range
        self.t_step = 0
        self.running = True

    def reset_arm(self):
        self.arm = ArmState()

    def set_source(self, source):
        if source.n_channels != self.regressor.hp.n_eeg_ch:
            raise ValueError("new source channel count does not match the model")
        self.source = source
        self._bandpass.reset()
        self._ring[:] = 0.0
        self._filled = 0
        self.controller.reset()

    def step(self, chunk: np.ndarray | None = None) -> TelemetryFrame | None:
        """Process one chunk (pulled from the source unless given explicitly);
        returns None when the source is exhausted."""
        if chunk is None:
            chunk = self.source.next_chunk(self.chunk_samples)
        if chunk is None:
            return None
        started = time.perf_counter()
        # Causal preprocess: per-sample CAR is stateless, band-pass is streaming.
        chunk = chunk - chunk.mean(axis=0, keepdims=True)
        chunk = self._bandpass.process(chunk)
        keep = min(chunk.shape[1], self.window)
        self._ring = np.roll(self._ring, -keep, axis=1)
        self._ring[:, -keep:] = chunk[:, -keep:]
        self._filled = min(self.window, self._filled + chunk.shape[1])

        if self._filled >= self.window:
            envelope = self.regressor.predict(self._ring)
        else:
            envelope = np.zeros(self.regressor.hp.n_emg_ch)
        cmd = self.controller.step(envelope)
        if cmd.direction != "rest" and self.threshold_fraction > 0:
            magnitude = max(0.0, cmd.magnitude - self.threshold_fraction) / max(
                1e-9, 1.0 - self.threshold_fraction
            )
            cmd = type(cmd)(cmd.direction, min(magnitude, 1.0), cmd.t)
            if cmd.magnitude == 0.0:
                cmd = type(cmd)("rest", 0.0, cmd.t)
        self.arm = arm_update(self.arm, cmd, self.dt_s, gain=self.gain)

        preview = self._ring[:PREVIEW_CHANNELS, -self.chunk_samples :: PREVIEW_DECIMATION]
        latency_ms = (time.perf_counter() - started) * 1000.0
        frame = TelemetryFrame(
            t_step=self.t_step,
            elbow_angle_deg=self.arm.elbow_angle_deg,
            direction=cmd.direction,
            magnitude=cmd.magnitude,
            pred_envelope=tuple(float(v) for v in envelope),
            eeg_preview=tuple(tuple(float(v) for v in ch) for ch in preview),
            processing_latency_ms=latency_ms,
        )
        self.t_step += 1
        return frame

    # -- control messages ---------------------------------------------------

    def handle_control_message(self, msg: dict) -> dict:
        """Apply an operator message; returns an ack or err reply."""
        if not isinstance(msg, dict) or "type" not in msg:
            return {"type": "err", "detail": "message must be an object with a 'type'"}
        kind = msg["type"]
        try:
            if kind == "set_gain":
                value = float(msg["value"])
                if not (0.0 <= value <= 10.0):
                    raise ValueError(f"gain {value} outside [0, 10]")
                self.gain = value
            elif kind == "set_threshold_fraction":
                value = float(msg["value"])
                if not (0.0 <= value < 1.0):
                    raise ValueError(f"threshold fraction {value} outside [0, 1)")
                self.threshold_fraction = value
            elif kind == "intent":
                if not hasattr(self.source, "set_intent"):
                    raise ValueError("current source does not accept intent")
                self.source.set_intent(str(msg["direction"]), float(msg["level"]))
            elif kind == "set_source":
                from .sources import make_source

                self.set_source(make_source(str(msg["value"])))
            elif kind == "reset_arm":
                self.reset_arm()
            elif kind == "start":
                self.running = True
            elif kind == "stop":
                self.running = False
            else:
                return {"type": "err", "detail": f"unknown message type {kind!r}"}
        except (KeyError, TypeError, ValueError) as e:
            return {"type": "err", "detail": f"{kind}: {e}"}
        return {"type": "ack", "detail": kind}


def run_fast(engine: PipelineEngine, max_steps: int) -> list[TelemetryFrame]:
    """Unpaced run for tests and replay; returns all emitted frames."""
    frames = []
    for _ in range(max_steps):
        frame = engine.step()
        if frame is None:
            break
        frames.append(frame)
    return frames


class PipelineRunner:
    """Three-stage paced runner: ingest -> process -> broadcast.

    Stages are connected by bounded queues (depth 4); back-pressure in the
    broadcast stage drops the oldest frames but the control path (inside the
    process stage) never loses samples.
    """

    def __init__(self, engine: PipelineEngine, paced: bool = True):
        self.engine = engine
        self.paced = paced
        self.control_queue: queue.Queue = queue.Queue()
        self.reply_queue: queue.Queue = queue.Queue()
        self._chunks: queue.Queue = queue.Queue(maxsize=QUEUE_DEPTH)
        self._frames: queue.Queue = queue.Queue(maxsize=QUEUE_DEPTH)
        self._subscribers: list[queue.Queue] = []
        self._sub_lock = threading.Lock()
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self.latencies_ms: list[float] = []

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=64)
        with self._sub_lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue):
        with self._sub_lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    def submit_control(self, msg: dict) -> dict:
        """Thread-safe control entry point; applied before the next chunk."""
        done = threading.Event()
        slot: dict = {}
        self.control_queue.put((msg, slot, done))
        done.wait(timeout=2.0)
        return slot.get("reply", {"type": "err", "detail": "control timeout"})

    def _ingest_loop(self):
        _request_realtime_priority()
        period = self.engine.dt_s
        next_due = time.perf_counter()
        while not self._stop.is_set():
            if self.paced:
                now = time.perf_counter()
                if now < next_due:
                    time.sleep(next_due - now)
                next_due += period
            chunk = self.engine.source.next_chunk(self.engine.chunk_samples)
            if chunk is None:
                self._chunks.put(None)
                return
            # Control-path chunks must not be dropped; block with timeout so
            # shutdown stays responsive.
            while not self._stop.is_set():
                try:
                    self._chunks.put(chunk, timeout=0.1)
                    break
                except queue.Full:
                    continue

    def _process_loop(self):
        _request_realtime_priority()
        while not self._stop.is_set():
            while not self.control_queue.empty():
                msg, slot, done = self.control_queue.get()
                slot["reply"] = self.engine.handle_control_message(msg)
                done.set()
            try:
                chunk = self._chunks.get(timeout=0.1)
            except queue.Empty:
                continue
            if chunk is None:
                self._frames.put(None)
                return
            if not self.engine.running:
                continue
            frame = self.engine.step(chunk)
            self.latencies_ms.append(frame.processing_latency_ms)
            try:
                self._frames.put(frame, timeout=0.1)
            except queue.Full:
                # Broadcast back-pressure: drop the oldest frame, keep the new.
                try:
                    self._frames.get_nowait()
                except queue.Empty:
                    pass
                self._frames.put(frame)

    def _broadcast_loop(self):
        _request_realtime_priority()
        while not self._stop.is_set():
            try:
                frame = self._frames.get(timeout=0.1)
            except queue.Empty:
                continue
            if frame is None:
                self._stop.set()
                return
            with self._sub_lock:
                subs = list(self._subscribers)
            for q in subs:
                try:
                    q.put_nowait(frame)
                except queue.Full:
                    try:
                        q.get_nowait()  # drop oldest preview data
                    except queue.Empty:
                        pass
                    q.put_nowait(frame)

    def start(self):
        # A blocked stage waits a full interpreter switch interval for the
        # GIL; at the default 5 ms that dwarfs the ~1 ms of real work per
        # chunk, so tighten it while the paced loop runs.
        self._saved_switch_interval = sys.getswitchinterval()
        sys.setswitchinterval(0.0005)
        for target in (self._ingest_loop, self._process_loop, self._broadcast_loop):
            t = threading.Thread(target=target, daemon=True)
            t.start()
            self._threads.append(t)

    def stop(self):
        self._stop.set()
        for t in self._threads:
            t.join(timeout=2.0)
        sys.setswitchinterval(self._saved_switch_interval)

    @property
    def finished(self) -> bool:
        return self._stop.is_set()
