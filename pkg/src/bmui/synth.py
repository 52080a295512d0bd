"""Seeded synthetic session generator, a desk-scale stand-in for recordings.

Intent is encoded as beta-band (15-35 Hz) amplitude modulation in EEG, so the
standard EEG preprocessing recovers it by construction; EMG carries the same
intent, delayed, as amplitude-modulated 20-450 Hz activity whose envelope is
proportional to gain x intent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from . import dsp
from .sessions import ActiveInterval
from .signals import MultiChannelSignal, RawSession

MASTER_RATE_HZ = 1000.0
EEG_RATE_HZ = 500.0
FORCE_RATE_HZ = 6.6

DIRECTIONS = ("flex", "extend")
# Trial labels cycle through direction x effort; a stand-in for the six
# offline movement types, which are not enumerated anywhere.
TRIAL_LABEL_CYCLE = ("flex-low", "flex-high", "extend-low", "extend-high")
EFFORT_LEVELS = {"low": 0.6, "high": 1.0}

TRAPEZOID_RAMP_S = 0.3


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_trials: int = 60
    trial_duration_s: float = 3.0
    rest_duration_s: float = 2.0
    n_eeg_ch: int = 16
    n_emg_ch: int = 12
    emg_gains: np.ndarray | None = None  # [n_emg_ch, 2]; derived from seed if None
    delay_ms: float = 50.0
    eeg_snr: float = 1.0
    emg_snr: float = 4.0

    def __post_init__(self):
        if self.n_eeg_ch < 1 or self.n_emg_ch < 1:
            raise ValueError("need at least one EEG and one EMG channel")
        if self.n_trials < 1:
            raise ValueError("need at least one trial")


@dataclass(frozen=True)
class CouplingParams:
    """Seed-derived coupling between intent and channels; shared by the batch
    generator and the live streaming source so trained models transfer."""

    eeg_alpha: np.ndarray  # [n_eeg_ch, 2] beta-amplitude coupling per direction
    emg_gains: np.ndarray  # [n_emg_ch, 2]


@dataclass(frozen=True)
class GroundTruth:
    """Generator internals exposed for oracle tests, at the 1000 Hz master rate."""

    u_flex: np.ndarray
    u_extend: np.ndarray
    intervals: tuple[ActiveInterval, ...]
    params: CouplingParams
    delay_ms: float


@dataclass(frozen=True)
class SyntheticSession:
    raw: RawSession
    truth: GroundTruth


def derive_params(cfg: SynthConfig) -> CouplingParams:
    """Deterministic per-seed couplings; half the EMG channels are flexors."""
    rng = np.random.default_rng([cfg.seed, 101])
    alpha = rng.uniform(0.4, 1.2, size=(cfg.n_eeg_ch, 2))
    # Give each EEG channel a dominant direction so CAR cannot cancel intent
    # and the two directions stay separable.
    dominant = rng.integers(0, 2, size=cfg.n_eeg_ch)
    for i, d in enumerate(dominant):
        alpha[i, 1 - d] *= 0.25
    if cfg.emg_gains is not None:
        gains = np.asarray(cfg.emg_gains, dtype=np.float64)
        if gains.shape != (cfg.n_emg_ch, 2):
            raise ValueError(f"emg_gains shape {gains.shape}, expected ({cfg.n_emg_ch}, 2)")
    else:
        gains = rng.uniform(0.3, 1.0, size=(cfg.n_emg_ch, 2))
        half = cfg.n_emg_ch // 2
        # Antagonists co-activate at half their agonist gain: groups stay
        # separable for the direction classifier while every channel keeps a
        # usable envelope in both directions for proportional control.
        gains[:half, 1] = 0.5 * gains[:half, 0]  # flexor group
        gains[half:, 0] = 0.5 * gains[half:, 1]  # extensor group
    return CouplingParams(eeg_alpha=alpha, emg_gains=gains)


def _trapezoid(n: int, rate_hz: float, peak: float) -> np.ndarray:
    """Smooth trapezoid over n samples: 0.3 s cosine rise, hold, 0.3 s fall."""
    ramp = int(round(TRAPEZOID_RAMP_S * rate_hz))
    ramp = min(ramp, n // 2)
    u = np.full(n, peak)
    if ramp > 0:
        edge = 0.5 * (1 - np.cos(np.linspace(0, np.pi, ramp)))
        u[:ramp] = peak * edge
        u[n - ramp :] = peak * edge[::-1]
    return u


def _bandlimited_noise(rng, cascade, shape) -> np.ndarray:
    """Unit-variance noise confined to a cascade's passband."""
    white = rng.standard_normal(shape)
    out = sps.sosfilt(cascade.sos, white, axis=-1)
    std = out.std(axis=-1, keepdims=True)
    std[std == 0] = 1.0
    return out / std


def _pink_noise(rng, shape) -> np.ndarray:
    """Approximate 1/f noise: one-pole low-passed white plus a white floor."""
    white = rng.standard_normal(shape)
    low = sps.lfilter([1.0], [1.0, -0.98], white, axis=-1)
    out = 0.1 * low + 0.5 * white
    std = out.std(axis=-1, keepdims=True)
    std[std == 0] = 1.0
    return out / std


def intent_timeline(cfg: SynthConfig):
    """Per-direction intent u(t) at the master rate, plus true intervals/labels."""
    trial_n = int(round(cfg.trial_duration_s * MASTER_RATE_HZ))
    rest_n = int(round(cfg.rest_duration_s * MASTER_RATE_HZ))
    total_n = rest_n + cfg.n_trials * (trial_n + rest_n)
    u = {d: np.zeros(total_n) for d in DIRECTIONS}
    intervals = []
    labels = []
    for k in range(cfg.n_trials):
        label = TRIAL_LABEL_CYCLE[k % len(TRIAL_LABEL_CYCLE)]
        direction, effort = label.split("-")
        start = rest_n + k * (trial_n + rest_n)
        u[direction][start : start + trial_n] = _trapezoid(
            trial_n, MASTER_RATE_HZ, EFFORT_LEVELS[effort]
        )
        intervals.append(ActiveInterval(start, start + trial_n, label))
        labels.append((k, label))
    return u["flex"], u["extend"], tuple(intervals), tuple(labels)


def nominal_drive_rms(cfg: SynthConfig) -> float:
    """RMS of the EEG intent drive over the canonical timeline.

    Deterministic given the config; used for noise scaling by both the batch
    generator and the live streaming source.
    """
    params = derive_params(cfg)
    u_flex, u_extend, _, _ = intent_timeline(cfg)
    drive = (
        params.eeg_alpha[:, 0:1] * u_flex[None, :]
        + params.eeg_alpha[:, 1:2] * u_extend[None, :]
    )
    return max(float(np.sqrt(np.mean(drive**2))), 1e-12)


def save_synthetic_session(s: SyntheticSession, directory):
    """Save the raw session plus a groundtruth.csv (t, u_flex, u_extend)."""
    from pathlib import Path

    from .sessions import save_session

    directory = Path(save_session(s.raw, directory))
    with (directory / "groundtruth.csv").open("w", encoding="utf-8", newline="\n") as f:
        f.write("t,u_flex,u_extend\n")
        for i in range(len(s.truth.u_flex)):
            f.write(
                f"{i / MASTER_RATE_HZ:.9g},{s.truth.u_flex[i]:.9g},{s.truth.u_extend[i]:.9g}\n"
            )
    return directory


def synthesize_session(cfg: SynthConfig) -> SyntheticSession:
    """Generate one deterministic session at native rates with ground truth."""
    params = derive_params(cfg)
    u_flex, u_extend, intervals, labels = intent_timeline(cfg)
    n = len(u_flex)
    rng = np.random.default_rng([cfg.seed, 202])

    # EEG at the master rate, then decimated 2:1 to its native 500 Hz.
    carrier = _bandlimited_noise(
        rng, dsp.eeg_bandpass(MASTER_RATE_HZ), (cfg.n_eeg_ch, n)
    )
    drive = (
        params.eeg_alpha[:, 0:1] * u_flex[None, :]
        + params.eeg_alpha[:, 1:2] * u_extend[None, :]
    )
    eeg_signal = drive * carrier
    noise = _pink_noise(rng, (cfg.n_eeg_ch, n))
    # Noise scale from the deterministic drive (carriers are unit variance),
    # so the live streaming source can reproduce it exactly.
    sig_scale = max(float(np.sqrt(np.mean(drive**2))), 1e-12)
    eeg = eeg_signal + noise * (sig_scale / cfg.eeg_snr)

    # EMG: delayed intent modulating 20-450 Hz activity.
    delay_n = int(round(cfg.delay_ms * MASTER_RATE_HZ / 1000.0))
    uf_d = np.concatenate([np.zeros(delay_n), u_flex])[:n]
    ue_d = np.concatenate([np.zeros(delay_n), u_extend])[:n]
    hf = _bandlimited_noise(rng, dsp.emg_bandpass(MASTER_RATE_HZ), (cfg.n_emg_ch, n))
    emg_drive = (
        params.emg_gains[:, 0:1] * uf_d[None, :]
        + params.emg_gains[:, 1:2] * ue_d[None, :]
    )
    emg_signal = emg_drive * hf
    emg_scale = max(float(np.sqrt(np.mean(emg_drive**2))), 1e-12)
    emg = emg_signal + rng.standard_normal((cfg.n_emg_ch, n)) * (emg_scale / cfg.emg_snr)

    # Force: smoothed total drive per direction, sampled at 6.6 Hz.
    lp = dsp.design_butterworth("lowpass", 4, 2.0, MASTER_RATE_HZ)
    force_master = np.stack(
        [
            10.0 * params.emg_gains[:, 0].sum() * uf_d,
            10.0 * params.emg_gains[:, 1].sum() * ue_d,
        ]
    )
    force_master = sps.sosfiltfilt(lp.sos, force_master, axis=-1)
    t_master = np.arange(n) / MASTER_RATE_HZ
    n_force = int(np.floor(t_master[-1] * FORCE_RATE_HZ)) + 1
    t_force = np.arange(n_force) / FORCE_RATE_HZ
    force = np.stack([np.interp(t_force, t_master, ch) for ch in force_master])

    raw = RawSession(
        subject_id=f"synth-{cfg.seed}",
        eeg=MultiChannelSignal(
            EEG_RATE_HZ, tuple(f"eeg{i}" for i in range(cfg.n_eeg_ch)), eeg[:, ::2]
        ),
        emg=MultiChannelSignal(
            MASTER_RATE_HZ, tuple(f"emg{j}" for j in range(cfg.n_emg_ch)), emg
        ),
        force=MultiChannelSignal(
            FORCE_RATE_HZ, ("force_flex", "force_extend"), force
        ),
        movement_labels=labels,
    )
    truth = GroundTruth(
        u_flex=u_flex,
        u_extend=u_extend,
        intervals=intervals,
        params=params,
        delay_ms=cfg.delay_ms,
    )
    return SyntheticSession(raw=raw, truth=truth)
