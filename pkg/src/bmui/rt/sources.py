"""EEG chunk sources for the online pipeline: replay and live synthetic."""

from __future__ import annotations

import numpy as np
from scipy import signal as sps

from .. import dsp, synth
from ..sessions import load_session
from ..signals import ALIGNED_RATE_HZ, align


class ReplaySource:
    """Replays a saved session's EEG, upsampled to 1000 Hz, chunk by chunk."""

    def __init__(self, directory):
        aligned = align(load_session(directory))
        self._eeg = aligned.eeg.data
        self._pos = 0

    @property
    def n_channels(self) -> int:
        return self._eeg.shape[0]

    def next_chunk(self, n_samples: int) -> np.ndarray | None:
        if self._pos >= self._eeg.shape[1]:
            return None
        chunk = self._eeg[:, self._pos : self._pos + n_samples]
        self._pos += n_samples
        if chunk.shape[1] < n_samples:
            chunk = np.pad(chunk, ((0, 0), (0, n_samples - chunk.shape[1])))
        return chunk


class _StreamingBandNoise:
    """Unit-variance band-limited noise, produced causally chunk by chunk."""

    def __init__(self, cascade, n_channels: int, rng):
        self._filt = dsp.StreamingFilter(cascade, n_channels)
        self._rng = rng
        # Steady-state output std for unit white input: sqrt of the impulse
        # response energy.
        impulse = np.zeros(4096)
        impulse[0] = 1.0
        h = sps.sosfilt(cascade.sos, impulse)
        self._norm = max(float(np.sqrt(np.sum(h**2))), 1e-12)
        self.n_channels = n_channels

    def next(self, n_samples: int) -> np.ndarray:
        white = self._rng.standard_normal((self.n_channels, n_samples))
        return self._filt.process(white) / self._norm


class _StreamingPinkNoise:
    """Matches the batch generator's pink model: one-pole low-pass + white floor."""

    _A = 0.98
    _LOW_W = 0.1
    _WHITE_W = 0.5

    def __init__(self, n_channels: int, rng):
        self._rng = rng
        # lfilter carry-over state for the one-pole recursion, per channel
        self._zi = np.zeros((n_channels, 1))
        self.n_channels = n_channels
        var_low = 1.0 / (1.0 - self._A**2)
        # low and white share the same source; cov(low, white) = 1
        var = self._LOW_W**2 * var_low + self._WHITE_W**2 + 2 * self._LOW_W * self._WHITE_W
        self._norm = np.sqrt(var)

    def next(self, n_samples: int) -> np.ndarray:
        white = self._rng.standard_normal((self.n_channels, n_samples))
        low, self._zi = sps.lfilter(
            [1.0], [1.0, -self._A], white, axis=-1, zi=self._zi
        )
        return (self._LOW_W * low + self._WHITE_W * white) / self._norm


class SyntheticLiveSource:
    """Generates EEG on the fly from operator intent.

    Shares its per-seed couplings and noise scale with the batch generator,
    so models trained on a synthesized session of the same seed transfer.
    Intent is set via :meth:`set_intent` (the desk-scale substitute for a
    human thinking about moving).
    """

    def __init__(self, cfg: synth.SynthConfig):
        self.cfg = cfg
        self.params = synth.derive_params(cfg)
        rng = np.random.default_rng([cfg.seed, 303])
        self._carrier = _StreamingBandNoise(
            dsp.eeg_bandpass(ALIGNED_RATE_HZ), cfg.n_eeg_ch, rng
        )
        self._pink = _StreamingPinkNoise(cfg.n_eeg_ch, np.random.default_rng([cfg.seed, 304]))
        self._noise_scale = synth.nominal_drive_rms(cfg) / cfg.eeg_snr
        self._u = {"flex": 0.0, "extend": 0.0}

    @property
    def n_channels(self) -> int:
        return self.cfg.n_eeg_ch

    def set_intent(self, direction: str, level: float):
        if direction not in ("flex", "extend", "rest"):
            raise ValueError(f"unknown direction {direction!r}")
        if not (0.0 <= level <= 1.0):
            raise ValueError(f"intent level {level} outside [0, 1]")
        if direction == "rest":
            self._u = {"flex": 0.0, "extend": 0.0}
        else:
            self._u = {d: (level if d == direction else 0.0) for d in ("flex", "extend")}

    def next_chunk(self, n_samples: int) -> np.ndarray:
        drive = (
            self.params.eeg_alpha[:, 0:1] * self._u["flex"]
            + self.params.eeg_alpha[:, 1:2] * self._u["extend"]
        )
        carrier = self._carrier.next(n_samples)
        noise = self._pink.next(n_samples)
        return drive * carrier + noise * self._noise_scale


def make_source(spec: str):
    """Parse a source spec: ``replay:<dir>`` or ``synthetic:<seed>``."""
    kind, _, arg = spec.partition(":")
    if kind == "replay" and arg:
        return ReplaySource(arg)
    if kind == "synthetic" and arg:
        return SyntheticLiveSource(synth.SynthConfig(seed=int(arg)))
    raise ValueError(f"bad source spec {spec!r}; expected replay:<dir> or synthetic:<seed>")
