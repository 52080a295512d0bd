"""Session persistence, force-threshold segmentation, and window extraction."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CorruptSessionError, UnsupportedVersionError
from .signals import AlignedSession, MultiChannelSignal, RawSession

FORMAT_VERSION = "bmui-session/1"

# Modalities in on-disk order: (attribute, file name, units)
_MODALITIES = (("eeg", "eeg.csv", "uV"), ("emg", "emg.csv", "uV"), ("force", "force.csv", "N"))


@dataclass(frozen=True)
class ActiveInterval:
    """Half-open [start_sample, end_sample) span of force exertion at 1000 Hz."""

    start_sample: int
    end_sample: int
    trial_label: str = ""

    def __post_init__(self):
        if self.end_sample <= self.start_sample:
            raise ValueError(f"empty interval [{self.start_sample}, {self.end_sample})")

    @property
    def n_samples(self) -> int:
        return self.end_sample - self.start_sample


@dataclass(frozen=True)
class SegmentationPolicy:
    """Threshold policy for active-period detection; constants are tunable."""

    fraction: float = 0.2  # enter threshold as a fraction of the session max
    exit_fraction: float = 0.5  # exit at exit_fraction * enter threshold
    min_duration_ms: float = 300.0


@dataclass(frozen=True)
class Trial:
    """One active-period slice of an aligned (and possibly preprocessed) session."""

    eeg: MultiChannelSignal
    emg: MultiChannelSignal
    force: MultiChannelSignal
    label: str
    trial_id: int
    start_sample: int

    @property
    def n_samples(self) -> int:
        return self.eeg.n_samples


@dataclass(frozen=True)
class WindowPair:
    """One supervised example: EEG window -> envelope target at the window end."""

    x: np.ndarray  # [n_eeg_ch, window_samples]
    y: np.ndarray  # [n_emg_ch]
    trial_id: int
    trial_label: str
    t_end: int  # sample index of the last window sample, session clock


def _format_float(v: float) -> str:
    return f"{v:.9g}"


def _write_csv(path: Path, sig: MultiChannelSignal):
    with path.open("w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(sig.channel_names) + "\n")
        for t in range(sig.n_samples):
            f.write(",".join(_format_float(v) for v in sig.data[:, t]) + "\n")


def _read_csv(path: Path, channel_names, rate_hz: float) -> MultiChannelSignal:
    if not path.exists():
        raise CorruptSessionError(f"missing data file {path.name}")
    with path.open("r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        if header != list(channel_names):
            raise CorruptSessionError(
                f"{path.name}: header {header} != manifest channels {list(channel_names)}"
            )
        rows = []
        for line_no, line in enumerate(f, start=2):
            parts = line.strip().split(",")
            if len(parts) != len(channel_names):
                raise CorruptSessionError(
                    f"{path.name}:{line_no}: {len(parts)} columns, expected {len(channel_names)}"
                )
            rows.append([float(p) for p in parts])
    if not rows:
        raise CorruptSessionError(f"{path.name}: no samples")
    return MultiChannelSignal(rate_hz, tuple(channel_names), np.array(rows).T)


def save_session(session, directory) -> Path:
    """Write manifest + one delimited-text file per modality; returns the dir.

    Accepts any session carrying eeg/emg/force signals and movement labels
    (raw or aligned/preprocessed).
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": FORMAT_VERSION,
        "subject_id": session.subject_id,
        "modalities": [],
        "movement_labels": [[i, s] for i, s in session.movement_labels],
    }
    for attr, fname, units in _MODALITIES:
        sig: MultiChannelSignal = getattr(session, attr)
        manifest["modalities"].append(
            {
                "name": attr,
                "rate_hz": sig.rate_hz,
                "channel_names": list(sig.channel_names),
                "units": units,
                "file": fname,
            }
        )
        _write_csv(directory / fname, sig)
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
    return directory


def load_session(directory) -> RawSession:
    """Load a session directory written by :func:`save_session`."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise CorruptSessionError(f"manifest.json unreadable: {e}") from e
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"format_version {version!r}, expected {FORMAT_VERSION!r}")
    by_name = {m["name"]: m for m in manifest.get("modalities", [])}
    signals = {}
    for attr, _fname, _units in _MODALITIES:
        if attr not in by_name:
            raise CorruptSessionError(f"manifest missing modality {attr!r}")
        m = by_name[attr]
        signals[attr] = _read_csv(
            directory / m["file"], m["channel_names"], float(m["rate_hz"])
        )
    return RawSession(
        subject_id=manifest.get("subject_id", ""),
        eeg=signals["eeg"],
        emg=signals["emg"],
        force=signals["force"],
        movement_labels=tuple((int(i), str(s)) for i, s in manifest.get("movement_labels", [])),
    )


def detect_active_periods(
    force: MultiChannelSignal, policy: SegmentationPolicy = SegmentationPolicy()
) -> list[ActiveInterval]:
    """Hysteresis thresholding of the summed force magnitude at 1000 Hz.

    Enter at ``fraction * session max``, exit at half the enter threshold;
    intervals shorter than ``min_duration_ms`` are dropped.
    """
    if force.rate_hz != 1000.0:
        raise ValueError(f"force must be aligned to 1000 Hz, got {force.rate_hz}")
    magnitude = np.abs(force.data).sum(axis=0)
    peak = magnitude.max()
    if peak <= 0:
        return []
    enter = policy.fraction * peak
    leave = policy.exit_fraction * enter
    min_samples = int(round(policy.min_duration_ms))  # 1 sample per ms at 1000 Hz

    intervals: list[ActiveInterval] = []
    inside = False
    start = 0
    for t, v in enumerate(magnitude):
        if not inside and v >= enter:
            inside = True
            start = t
        elif inside and v < leave:
            inside = False
            if t - start >= min_samples:
                intervals.append(ActiveInterval(start, t))
    if inside and len(magnitude) - start >= min_samples:
        intervals.append(ActiveInterval(start, len(magnitude)))
    return intervals


def segment_session(
    aligned: AlignedSession, intervals: list[ActiveInterval]
) -> list[Trial]:
    """Slice all modalities identically, one trial per interval, labels by order."""
    labels = {i: s for i, s in aligned.movement_labels}
    trials = []
    for k, iv in enumerate(intervals):
        if iv.start_sample < 0 or iv.end_sample > aligned.n_samples:
            raise ValueError(
                f"interval [{iv.start_sample}, {iv.end_sample}) outside session of "
                f"{aligned.n_samples} samples"
            )
        label = iv.trial_label or labels.get(k, "")
        trials.append(
            Trial(
                eeg=aligned.eeg.slice(iv.start_sample, iv.end_sample),
                emg=aligned.emg.slice(iv.start_sample, iv.end_sample),
                force=aligned.force.slice(iv.start_sample, iv.end_sample),
                label=label,
                trial_id=k,
                start_sample=iv.start_sample,
            )
        )
    return trials


def make_windows(
    trials: list[Trial], window_ms: int = 200, stride_ms: int = 50
) -> list[WindowPair]:
    """Sliding-window extraction; windows never cross trial boundaries.

    Expects preprocessed trials: ``trial.eeg`` filtered EEG, ``trial.emg``
    envelope. The target is the envelope vector at the window's last sample.
    Trials shorter than one window are skipped with a warning.
    """
    w = int(window_ms)  # samples == ms at 1000 Hz
    s = int(stride_ms)
    windows: list[WindowPair] = []
    skipped = 0
    for trial in trials:
        n = trial.n_samples
        if n < w:
            skipped += 1
            continue
        count = (n - w) // s + 1
        for k in range(count):
            start = k * s
            end = start + w
            windows.append(
                WindowPair(
                    x=trial.eeg.data[:, start:end].copy(),
                    y=trial.emg.data[:, end - 1].copy(),
                    trial_id=trial.trial_id,
                    trial_label=trial.label,
                    t_end=trial.start_sample + end - 1,
                )
            )
    if skipped:
        warnings.warn(f"skipped {skipped} trial(s) shorter than {w} samples", stacklevel=2)
    return windows
