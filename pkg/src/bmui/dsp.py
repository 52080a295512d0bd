"""Filtering: CAR, Butterworth cascades (zero-phase and streaming), envelopes.

Batch ops are pure; :class:`StreamingFilter` carries per-channel biquad state
for the causal online path and must be owned by a single pipeline stage.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import signal as sps

from .errors import SignalTooShortError
from .signals import MultiChannelSignal

# Preprocessing constants: EEG beta band, EMG activity band, mains notch band,
# envelope smoothing cutoff. All filters are order-4 Butterworth.
EEG_BAND_HZ = (15.0, 35.0)
EMG_BAND_HZ = (20.0, 450.0)
NOTCH_BAND_HZ = (48.0, 52.0)
ENVELOPE_CUTOFF_HZ = 10.0
FILTER_ORDER = 4


@dataclass(frozen=True)
class FilterDesign:
    kind: str  # bandpass | bandstop | lowpass
    order: int
    corners_hz: tuple[float, ...]
    rate_hz: float


@dataclass(frozen=True)
class BiquadCascade:
    """Second-order sections, scipy layout: rows [b0 b1 b2 a0 a1 a2], a0 == 1."""

    sos: np.ndarray
    design: FilterDesign

    @property
    def n_sections(self) -> int:
        return self.sos.shape[0]

    def pole_radii(self) -> np.ndarray:
        """Largest pole magnitude of each section."""
        radii = []
        for sec in self.sos:
            poles = np.roots([1.0, sec[4], sec[5]])
            radii.append(np.max(np.abs(poles)) if len(poles) else 0.0)
        return np.array(radii)


def design_butterworth(
    kind: str, order: int, corners_hz, rate_hz: float
) -> BiquadCascade:
    """Butterworth cascade via bilinear transform with frequency pre-warping.

    ``order`` is the analog prototype order and must be even so the cascade
    consists of whole biquads.
    """
    if kind not in ("bandpass", "bandstop", "lowpass"):
        raise ValueError(f"unknown filter kind {kind!r}")
    if order % 2 != 0 or order not in (2, 4, 6, 8):
        raise ValueError(f"order must be one of 2, 4, 6, 8; got {order}")
    corners = tuple(float(c) for c in np.atleast_1d(corners_hz))
    nyq = rate_hz / 2.0
    if any(c <= 0 or c >= nyq for c in corners):
        raise ValueError(f"corners {corners} must lie strictly inside (0, {nyq}) Hz")
    if kind == "lowpass":
        if len(corners) != 1:
            raise ValueError("lowpass takes exactly one corner")
        wn = corners[0]
    else:
        if len(corners) != 2 or corners[0] >= corners[1]:
            raise ValueError("band filters need two increasing corners")
        wn = corners
    sos = sps.butter(order, wn, btype=kind, fs=rate_hz, output="sos")
    cascade = BiquadCascade(sos=sos, design=FilterDesign(kind, order, corners, rate_hz))
    if np.any(cascade.pole_radii() >= 1.0 - 1e-6):
        raise ValueError(f"unstable design: {cascade.design}")
    return cascade


def car(sig: MultiChannelSignal) -> MultiChannelSignal:
    """Common average reference: subtract the cross-channel mean per sample."""
    out = sig.data - sig.data.mean(axis=0, keepdims=True)
    return replace(sig, data=out)


def zero_phase_pad_len(cascade: BiquadCascade) -> int:
    # 3x the realized filter length (2 * prototype order taps per direction).
    return 3 * (2 * cascade.design.order)


def filter_array_zero_phase(cascade: BiquadCascade, data: np.ndarray) -> np.ndarray:
    """Forward-backward filtering of [channels, samples] with reflective padding."""
    pad = zero_phase_pad_len(cascade)
    if data.shape[-1] <= pad:
        raise SignalTooShortError(
            f"{data.shape[-1]} samples, need more than {pad} for edge padding"
        )
    padded = np.pad(data, [(0, 0)] * (data.ndim - 1) + [(pad, pad)], mode="reflect")
    y = sps.sosfilt(cascade.sos, padded, axis=-1)
    y = sps.sosfilt(cascade.sos, y[..., ::-1], axis=-1)[..., ::-1]
    return np.ascontiguousarray(y[..., pad:-pad])


def filter_zero_phase(
    cascade: BiquadCascade, sig: MultiChannelSignal
) -> MultiChannelSignal:
    """Zero-phase (forward-backward) filtering; length preserved."""
    if sig.rate_hz != cascade.design.rate_hz:
        raise ValueError(
            f"signal at {sig.rate_hz} Hz, cascade designed for {cascade.design.rate_hz}"
        )
    return replace(sig, data=filter_array_zero_phase(cascade, sig.data))


class StreamingFilter:
    """Causal single-pass cascade filter with persistent per-channel state.

    Concatenated chunk outputs are sample-exact equal to filtering the whole
    signal in one call, for any chunking.
    """

    def __init__(self, cascade: BiquadCascade, n_channels: int):
        self.cascade = cascade
        self.n_channels = n_channels
        self._zi = np.zeros((cascade.n_sections, n_channels, 2))

    def process(self, chunk: np.ndarray) -> np.ndarray:
        chunk = np.asarray(chunk, dtype=np.float64)
        if chunk.ndim != 2 or chunk.shape[0] != self.n_channels:
            raise ValueError(
                f"chunk shape {chunk.shape} does not match {self.n_channels} channels"
            )
        if chunk.shape[1] == 0:
            return chunk.copy()
        out, self._zi = sps.sosfilt(self.cascade.sos, chunk, axis=-1, zi=self._zi)
        return out

    def reset(self):
        self._zi[:] = 0.0


def emg_envelope(sig: MultiChannelSignal) -> MultiChannelSignal:
    """Envelope: full-wave rectification, 10 Hz low-pass, clamp at zero."""
    lp = design_butterworth("lowpass", FILTER_ORDER, ENVELOPE_CUTOFF_HZ, sig.rate_hz)
    env = filter_array_zero_phase(lp, np.abs(sig.data))
    return replace(sig, data=np.maximum(env, 0.0))


class StreamingEnvelope:
    """Causal envelope for the online loop: rectify, low-pass, clamp."""

    def __init__(self, rate_hz: float, n_channels: int):
        lp = design_butterworth("lowpass", FILTER_ORDER, ENVELOPE_CUTOFF_HZ, rate_hz)
        self._filt = StreamingFilter(lp, n_channels)

    def process(self, chunk: np.ndarray) -> np.ndarray:
        return np.maximum(self._filt.process(np.abs(chunk)), 0.0)


def eeg_bandpass(rate_hz: float) -> BiquadCascade:
    return design_butterworth("bandpass", FILTER_ORDER, EEG_BAND_HZ, rate_hz)


def emg_bandpass(rate_hz: float) -> BiquadCascade:
    return design_butterworth("bandpass", FILTER_ORDER, EMG_BAND_HZ, rate_hz)


def mains_bandstop(rate_hz: float) -> BiquadCascade:
    return design_butterworth("bandstop", FILTER_ORDER, NOTCH_BAND_HZ, rate_hz)


def preprocess_eeg(sig: MultiChannelSignal) -> MultiChannelSignal:
    """CAR then 15-35 Hz band-pass (zero-phase)."""
    return filter_zero_phase(eeg_bandpass(sig.rate_hz), car(sig))


def preprocess_emg(sig: MultiChannelSignal) -> MultiChannelSignal:
    """20-450 Hz band-pass then 48-52 Hz band-stop (zero-phase).

    Requires a 1000 Hz signal: the 450 Hz corner needs a 500 Hz Nyquist.
    """
    if sig.rate_hz != 1000.0:
        raise ValueError(f"EMG preprocessing requires 1000 Hz, got {sig.rate_hz}")
    out = filter_zero_phase(emg_bandpass(sig.rate_hz), sig)
    return filter_zero_phase(mains_bandstop(sig.rate_hz), out)
