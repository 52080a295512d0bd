"""Direction-proportional control: calibration, fusion, virtual-elbow kinematics."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import CalibrationError
from .neural.classifier import DirectionClassifier

DIRECTIONS = ("flex", "extend", "rest")
DIRECTION_SIGN = {"flex": 1.0, "extend": -1.0, "rest": 0.0}

ELBOW_MIN_DEG = 0.0
ELBOW_MAX_DEG = 150.0
MAX_SPEED_DEG_S = 60.0  # full flexion at max effort takes 2.5 s

DEBOUNCE_STEPS = 3  # 150 ms at the 50 ms control step
REST_PERCENTILE = 95.0
EFFORT_PERCENTILE = 90.0


@dataclass(frozen=True)
class Calibration:
    """Proportional-mapping range on the best-predicted channel."""

    channel_index: int
    env_min: float
    env_max: float

    def __post_init__(self):
        if not (self.env_max > self.env_min >= 0):
            raise CalibrationError(
                f"need env_max > env_min >= 0, got [{self.env_min}, {self.env_max}]"
            )

    def to_dict(self) -> dict:
        return {
            "channel_index": self.channel_index,
            "env_min": self.env_min,
            "env_max": self.env_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Calibration":
        return cls(int(d["channel_index"]), float(d["env_min"]), float(d["env_max"]))


@dataclass(frozen=True)
class ControlCommand:
    direction: str
    magnitude: float
    t: int

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.direction == "rest" and self.magnitude != 0.0:
            raise ValueError("rest command must have zero magnitude")
        if not (0.0 <= self.magnitude <= 1.0):
            raise ValueError(f"magnitude {self.magnitude} outside [0, 1]")


@dataclass(frozen=True)
class ArmState:
    elbow_angle_deg: float = 0.0
    angular_velocity_deg_s: float = 0.0

    def __post_init__(self):
        object.__setattr__(
            self,
            "elbow_angle_deg",
            float(np.clip(self.elbow_angle_deg, ELBOW_MIN_DEG, ELBOW_MAX_DEG)),
        )


def calibrate(
    rest_envelopes: np.ndarray,
    effort_envelopes: np.ndarray,
    scc_per_channel,
) -> Calibration:
    """Pick the best-predicted channel and its usable envelope range.

    ``rest_envelopes``/``effort_envelopes`` are [n_channels, n_samples] of
    predicted envelopes from rest and max-effort segments (>= 1 s each).
    Percentile bounds keep the range robust to outliers.
    """
    rest_envelopes = np.asarray(rest_envelopes, dtype=np.float64)
    effort_envelopes = np.asarray(effort_envelopes, dtype=np.float64)
    channel = int(np.argmax(scc_per_channel))
    env_min = float(np.percentile(rest_envelopes[channel], REST_PERCENTILE))
    env_max = float(np.percentile(effort_envelopes[channel], EFFORT_PERCENTILE))
    if env_max <= env_min:
        raise CalibrationError(
            f"channel {channel} unusable: rest p{REST_PERCENTILE:g}={env_min:.4g} >= "
            f"effort p{EFFORT_PERCENTILE:g}={env_max:.4g}"
        )
    return Calibration(channel, max(env_min, 0.0), env_max)


def proportional_map(env_value: float, calib: Calibration) -> float:
    """Linear map of envelope onto [0, 1], clamped."""
    frac = (env_value - calib.env_min) / (calib.env_max - calib.env_min)
    return float(np.clip(frac, 0.0, 1.0))


class DpEmgController:
    """Fuses CNN direction with proportional magnitude, with debounce.

    Owns the envelope history buffer and the debounce state machine; exactly
    one pipeline stage may advance it.
    """

    def __init__(
        self,
        classifier: DirectionClassifier,
        calib: Calibration,
        seq_len: int | None = None,
    ):
        self.classifier = classifier
        self.calib = calib
        self.seq_len = seq_len or classifier.hp.seq_len
        self.history: deque[np.ndarray] = deque(maxlen=self.seq_len)
        self.direction = "rest"
        self._candidate = "rest"
        self._candidate_count = 0
        self._t = 0

    @property
    def warmed_up(self) -> bool:
        return len(self.history) == self.seq_len

    def push(self, envelope: np.ndarray):
        self.history.append(np.asarray(envelope, dtype=np.float64))

    def step(self, envelope: np.ndarray) -> ControlCommand:
        """Advance one control step; emits rest while the buffer warms up."""
        self.push(envelope)
        t = self._t
        self._t += 1
        if not self.warmed_up:
            return ControlCommand("rest", 0.0, t)
        seq = np.stack(self.history, axis=1)  # [n_emg_ch, seq_len]
        raw = self.classifier.predict_direction(seq)
        if raw == self.direction:
            self._candidate = raw
            self._candidate_count = 0
        elif raw == self._candidate:
            self._candidate_count += 1
            if self._candidate_count >= DEBOUNCE_STEPS:
                self.direction = raw
                self._candidate_count = 0
        else:
            self._candidate = raw
            self._candidate_count = 1
        if self.direction == "rest":
            return ControlCommand("rest", 0.0, t)
        magnitude = proportional_map(envelope[self.calib.channel_index], self.calib)
        return ControlCommand(self.direction, magnitude, t)

    def reset(self):
        self.history.clear()
        self.direction = "rest"
        self._candidate = "rest"
        self._candidate_count = 0


def arm_update(
    state: ArmState, cmd: ControlCommand, dt_s: float, gain: float = 1.0
) -> ArmState:
    """Integrate command into the elbow angle; angle stays in [0, 150] deg."""
    velocity = gain * MAX_SPEED_DEG_S * cmd.magnitude * DIRECTION_SIGN[cmd.direction]
    angle = state.elbow_angle_deg + velocity * dt_s
    return ArmState(elbow_angle_deg=angle, angular_velocity_deg_s=velocity)
