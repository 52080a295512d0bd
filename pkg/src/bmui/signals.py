"""Core signal carriers and multi-rate temporal alignment."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidSessionError, UnsupportedDownsampleError

ALIGNED_RATE_HZ = 1000.0


@dataclass(frozen=True)
class MultiChannelSignal:
    """Uniformly sampled multi-channel series.

    ``data`` is [n_channels, n_samples]; EEG/EMG values are microvolts,
    force is newtons.
    """

    rate_hz: float
    channel_names: tuple[str, ...]
    data: np.ndarray

    def __post_init__(self):
        if self.rate_hz <= 0:
            raise ValueError(f"rate_hz must be positive, got {self.rate_hz}")
        data = np.asarray(self.data, dtype=np.float64)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        if data.ndim != 2:
            raise ValueError("data must be a 2-D [channels, samples] array")
        if data.shape[0] != len(self.channel_names):
            raise ValueError(
                f"{data.shape[0]} rows but {len(self.channel_names)} channel names"
            )
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError("need at least one channel and one sample")
        if not np.all(np.isfinite(data)):
            raise ValueError("signal contains non-finite values")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return (self.n_samples - 1) / self.rate_hz

    def slice(self, start: int, end: int) -> "MultiChannelSignal":
        return replace(self, data=self.data[:, start:end].copy())


@dataclass(frozen=True)
class RawSession:
    """One recording session at native rates (EEG 500 Hz, EMG 1000 Hz, force 6.6 Hz)."""

    subject_id: str
    eeg: MultiChannelSignal
    emg: MultiChannelSignal
    force: MultiChannelSignal
    movement_labels: tuple[tuple[int, str], ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(
            self,
            "movement_labels",
            tuple((int(i), str(s)) for i, s in self.movement_labels),
        )
        # All modalities must span the same wall-clock duration, within one
        # force sample period (the coarsest clock).
        tol = 1.0 / self.force.rate_hz
        durations = [self.eeg.duration_s, self.emg.duration_s, self.force.duration_s]
        if max(durations) - min(durations) > tol:
            raise InvalidSessionError(
                f"modality durations differ by more than one force period: {durations}"
            )


@dataclass(frozen=True)
class AlignedSession:
    """EEG+EMG+force resampled to a common 1000 Hz grid, equal lengths."""

    subject_id: str
    eeg: MultiChannelSignal
    emg: MultiChannelSignal
    force: MultiChannelSignal
    movement_labels: tuple[tuple[int, str], ...] = field(default_factory=tuple)

    rate_hz: float = ALIGNED_RATE_HZ

    def __post_init__(self):
        object.__setattr__(
            self,
            "movement_labels",
            tuple((int(i), str(s)) for i, s in self.movement_labels),
        )
        lengths = {self.eeg.n_samples, self.emg.n_samples, self.force.n_samples}
        if len(lengths) != 1:
            raise InvalidSessionError(f"aligned modalities differ in length: {lengths}")
        for sig in (self.eeg, self.emg, self.force):
            if sig.rate_hz != self.rate_hz:
                raise InvalidSessionError(
                    f"aligned modality at {sig.rate_hz} Hz, expected {self.rate_hz}"
                )

    @property
    def n_samples(self) -> int:
        return self.eeg.n_samples


def resample(sig: MultiChannelSignal, target_rate_hz: float) -> MultiChannelSignal:
    """Linear-interpolation upsampling onto a uniform grid at ``target_rate_hz``.

    Output length is floor((n_in - 1) * target/source) + 1; the first sample
    is preserved exactly and total duration is kept within one output period.
    """
    if target_rate_hz <= 0:
        raise ValueError(f"target rate must be positive, got {target_rate_hz}")
    if target_rate_hz < sig.rate_hz:
        raise UnsupportedDownsampleError(
            f"target {target_rate_hz} Hz below source {sig.rate_hz} Hz"
        )
    if target_rate_hz == sig.rate_hz:
        return sig

    n_in = sig.n_samples
    n_out = int(np.floor((n_in - 1) * target_rate_hz / sig.rate_hz)) + 1
    t_src = np.arange(n_in) / sig.rate_hz
    t_dst = np.arange(n_out) / target_rate_hz
    out = np.empty((sig.n_channels, n_out))
    for ch in range(sig.n_channels):
        out[ch] = np.interp(t_dst, t_src, sig.data[ch])
    return MultiChannelSignal(target_rate_hz, sig.channel_names, out)


def align(raw: RawSession) -> AlignedSession:
    """Upsample all modalities to 1000 Hz and truncate to the common length."""
    parts = []
    for sig in (raw.eeg, raw.emg, raw.force):
        parts.append(resample(sig, ALIGNED_RATE_HZ))
    n = min(p.n_samples for p in parts)
    eeg, emg, force = (p.slice(0, n) for p in parts)
    return AlignedSession(
        subject_id=raw.subject_id,
        eeg=eeg,
        emg=emg,
        force=force,
        movement_labels=raw.movement_labels,
    )
