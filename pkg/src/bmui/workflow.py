"""High-level offline workflow: preprocess, segment, window, calibrate.

Glues the signal, dsp, session, neural, and control layers together for the
CLI and the test harnesses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dsp
from .control import Calibration, calibrate
from .errors import InsufficientDataError
from .neural.regressor import EnvelopeRegressor
from .sessions import (
    ActiveInterval,
    SegmentationPolicy,
    Trial,
    WindowPair,
    detect_active_periods,
    make_windows,
    segment_session,
)
from .signals import AlignedSession, RawSession, align

REST_LABEL = "rest"
REST_MARGIN_SAMPLES = 300  # keep clear of trial edges when harvesting rest data

DEFAULT_WINDOW_MS = 200
DEFAULT_STRIDE_MS = 50


def process_session(raw: RawSession) -> AlignedSession:
    """Align to 1000 Hz, then EEG -> CAR+band-pass and EMG -> envelope.

    The returned session carries preprocessed EEG in ``eeg`` and the EMG
    envelope in ``emg``; force is passed through for segmentation.
    """
    aligned = align(raw)
    eeg = dsp.preprocess_eeg(aligned.eeg)
    env = dsp.emg_envelope(dsp.preprocess_emg(aligned.emg))
    return AlignedSession(
        subject_id=aligned.subject_id,
        eeg=eeg,
        emg=env,
        force=aligned.force,
        movement_labels=aligned.movement_labels,
    )


def rest_intervals(
    active: list[ActiveInterval], n_samples: int, min_len: int = 1000
) -> list[ActiveInterval]:
    """Gaps between active periods, trimmed by a safety margin."""
    gaps = []
    prev_end = 0
    bounds = [(iv.start_sample, iv.end_sample) for iv in active] + [(n_samples, n_samples)]
    for start, end in bounds:
        lo = prev_end + REST_MARGIN_SAMPLES
        hi = start - REST_MARGIN_SAMPLES
        if hi - lo >= min_len:
            gaps.append(ActiveInterval(lo, hi, REST_LABEL))
        prev_end = end
    return gaps


def extract_windows(
    processed: AlignedSession,
    policy: SegmentationPolicy = SegmentationPolicy(),
    window_ms: int = DEFAULT_WINDOW_MS,
    stride_ms: int = DEFAULT_STRIDE_MS,
) -> tuple[list[WindowPair], list[Trial], list[ActiveInterval]]:
    """Active-period windows from a processed session."""
    intervals = detect_active_periods(processed.force, policy)
    trials = segment_session(processed, intervals)
    windows = make_windows(trials, window_ms=window_ms, stride_ms=stride_ms)
    return windows, trials, intervals


def predict_envelope_series(
    model: EnvelopeRegressor,
    trial: Trial,
    window_ms: int = DEFAULT_WINDOW_MS,
    stride_ms: int = DEFAULT_STRIDE_MS,
) -> np.ndarray:
    """Predicted envelope per window position, [n_emg_ch, n_windows]."""
    windows = make_windows([trial], window_ms=window_ms, stride_ms=stride_ms)
    if not windows:
        return np.zeros((model.hp.n_emg_ch, 0))
    x = np.stack([w.x for w in windows])
    return model.predict(x).T


def direction_of(label: str) -> str:
    return label.split("-")[0] if label else REST_LABEL


def build_direction_sequences(
    model: EnvelopeRegressor,
    trials: list[Trial],
    seq_len: int = 10,
    seq_stride: int = 2,
    window_ms: int = DEFAULT_WINDOW_MS,
    stride_ms: int = DEFAULT_STRIDE_MS,
) -> tuple[np.ndarray, list[str]]:
    """Sliding sequences of predicted envelopes with direction labels."""
    sequences = []
    labels = []
    for trial in trials:
        series = predict_envelope_series(model, trial, window_ms, stride_ms)
        direction = direction_of(trial.label)
        for k in range(seq_len, series.shape[1] + 1, seq_stride):
            sequences.append(series[:, k - seq_len : k])
            labels.append(direction)
    if not sequences:
        raise InsufficientDataError("no trials long enough for a sequence")
    return np.stack(sequences), labels


def make_calibration(
    model: EnvelopeRegressor,
    active_trials: list[Trial],
    rest_trials: list[Trial],
    scc_per_channel,
    window_ms: int = DEFAULT_WINDOW_MS,
    stride_ms: int = DEFAULT_STRIDE_MS,
) -> Calibration:
    """Calibrate the proportional map from predicted envelopes.

    Effort envelopes come from high-effort trials (all active trials if no
    effort tags are present), rest envelopes from between-trial gaps.
    """
    effort = [t for t in active_trials if t.label.endswith("high")] or active_trials
    effort_env = np.concatenate(
        [predict_envelope_series(model, t, window_ms, stride_ms) for t in effort], axis=1
    )
    rest_env = np.concatenate(
        [predict_envelope_series(model, t, window_ms, stride_ms) for t in rest_trials],
        axis=1,
    )
    return calibrate(rest_env, effort_env, scc_per_channel)


def trials_for_classifier(
    processed: AlignedSession, policy: SegmentationPolicy = SegmentationPolicy()
) -> tuple[list[Trial], list[Trial]]:
    """Active trials plus rest pseudo-trials from the gaps between them."""
    intervals = detect_active_periods(processed.force, policy)
    active = segment_session(processed, intervals)
    gaps = rest_intervals(intervals, processed.n_samples)
    rest = [
        Trial(
            eeg=processed.eeg.slice(iv.start_sample, iv.end_sample),
            emg=processed.emg.slice(iv.start_sample, iv.end_sample),
            force=processed.force.slice(iv.start_sample, iv.end_sample),
            label=REST_LABEL,
            trial_id=10_000 + k,
            start_sample=iv.start_sample,
        )
        for k, iv in enumerate(gaps)
    ]
    return active, rest
