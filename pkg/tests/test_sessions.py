import json

import numpy as np
import pytest

from bmui import sessions
from bmui.errors import CorruptSessionError, UnsupportedVersionError
from bmui.sessions import (
    ActiveInterval,
    SegmentationPolicy,
    Trial,
    detect_active_periods,
    load_session,
    make_windows,
    save_session,
    segment_session,
)
from bmui.signals import AlignedSession, MultiChannelSignal, RawSession, align


def make_raw(duration_s=2.0, seed=0):
    rng = np.random.default_rng(seed)
    n_eeg = int(duration_s * 500) + 1
    n_emg = int(duration_s * 1000) + 1
    n_force = int(duration_s * 6.6) + 1
    return RawSession(
        subject_id="s01",
        eeg=MultiChannelSignal(
            500.0, tuple(f"eeg{i}" for i in range(16)), rng.normal(size=(16, n_eeg))
        ),
        emg=MultiChannelSignal(
            1000.0, tuple(f"emg{i}" for i in range(12)), rng.normal(size=(12, n_emg))
        ),
        force=MultiChannelSignal(
            6.6, ("force_flex", "force_extend"), rng.normal(size=(2, n_force))
        ),
        movement_labels=((0, "flex-low"), (1, "extend-high")),
    )


def force_sig(magnitude):
    magnitude = np.asarray(magnitude, dtype=float)
    return MultiChannelSignal(1000.0, ("f0",), magnitude[None, :])


class TestPersistence:
    def test_round_trip(self, tmp_path):
        raw = make_raw(seed=3)
        save_session(raw, tmp_path / "sess")
        back = load_session(tmp_path / "sess")
        assert back.subject_id == raw.subject_id
        assert back.movement_labels == raw.movement_labels
        for name in ("eeg", "emg", "force"):
            a, b = getattr(raw, name), getattr(back, name)
            assert a.channel_names == b.channel_names
            assert a.rate_hz == b.rate_hz
            np.testing.assert_allclose(b.data, a.data, rtol=1e-8, atol=1e-10)

    def test_manifest_contents(self, tmp_path):
        save_session(make_raw(), tmp_path / "sess")
        manifest = json.loads((tmp_path / "sess" / "manifest.json").read_text())
        assert manifest["format_version"] == sessions.FORMAT_VERSION
        assert manifest["subject_id"] == "s01"

    def test_rejects_unknown_version(self, tmp_path):
        save_session(make_raw(), tmp_path / "sess")
        path = tmp_path / "sess" / "manifest.json"
        manifest = json.loads(path.read_text())
        manifest["format_version"] = "bmui-session/99"
        path.write_text(json.dumps(manifest))
        with pytest.raises(UnsupportedVersionError):
            load_session(tmp_path / "sess")

    def test_rejects_header_mismatch(self, tmp_path):
        save_session(make_raw(), tmp_path / "sess")
        csv = tmp_path / "sess" / "emg.csv"
        lines = csv.read_text().splitlines()
        lines[0] = lines[0].replace("emg0", "bogus")
        csv.write_text("\n".join(lines) + "\n")
        with pytest.raises(CorruptSessionError):
            load_session(tmp_path / "sess")

    def test_rejects_missing_file(self, tmp_path):
        save_session(make_raw(), tmp_path / "sess")
        (tmp_path / "sess" / "force.csv").unlink()
        with pytest.raises(CorruptSessionError):
            load_session(tmp_path / "sess")

    def test_rejects_truncated_rows(self, tmp_path):
        save_session(make_raw(), tmp_path / "sess")
        csv = tmp_path / "sess" / "eeg.csv"
        lines = csv.read_text().splitlines()
        csv.write_text("\n".join(lines[:1] + [lines[1].rsplit(",", 1)[0]]) + "\n")
        with pytest.raises(CorruptSessionError):
            load_session(tmp_path / "sess")


class TestDetection:
    def test_all_zero_force_gives_no_intervals(self):
        assert detect_active_periods(force_sig(np.zeros(5000))) == []

    def test_single_plateau(self):
        m = np.zeros(5000)
        m[1000:2000] = 10.0
        (iv,) = detect_active_periods(force_sig(m))
        assert iv.start_sample == 1000
        assert 2000 <= iv.end_sample <= 2001

    def test_two_bumps(self):
        m = np.zeros(8000)
        m[1000:2000] = 10.0
        m[4000:5500] = 6.0
        ivs = detect_active_periods(force_sig(m))
        assert len(ivs) == 2
        assert ivs[0].start_sample == 1000
        assert ivs[1].start_sample == 4000

    def test_short_blip_dropped(self):
        m = np.zeros(5000)
        m[1000:1100] = 10.0  # 100 ms < min_duration_ms
        assert detect_active_periods(force_sig(m)) == []

    def test_hysteresis_ignores_dip_above_exit(self):
        # dip to 15% of peak: below enter (20%) but above exit (10%),
        # so the interval must not split
        m = np.zeros(6000)
        m[1000:3000] = 10.0
        m[1900:2100] = 1.5
        ivs = detect_active_periods(force_sig(m))
        assert len(ivs) == 1
        assert ivs[0].end_sample >= 3000

    def test_active_at_end_is_closed(self):
        m = np.zeros(3000)
        m[2000:] = 5.0
        (iv,) = detect_active_periods(force_sig(m))
        assert iv.end_sample == 3000

    def test_requires_aligned_rate(self):
        bad = MultiChannelSignal(6.6, ("f",), np.ones((1, 10)))
        with pytest.raises(ValueError):
            detect_active_periods(bad)

    def test_custom_policy_min_duration(self):
        m = np.zeros(5000)
        m[1000:1100] = 10.0
        policy = SegmentationPolicy(min_duration_ms=50)
        assert len(detect_active_periods(force_sig(m), policy)) == 1


def aligned_fixture(n=3000, seed=0):
    rng = np.random.default_rng(seed)
    return AlignedSession(
        subject_id="s01",
        eeg=MultiChannelSignal(1000.0, ("e0", "e1"), rng.normal(size=(2, n))),
        emg=MultiChannelSignal(1000.0, ("m0",), rng.normal(size=(1, n))),
        force=MultiChannelSignal(1000.0, ("f0",), rng.normal(size=(1, n))),
        movement_labels=((0, "flex-low"), (1, "extend-high")),
    )


class TestSegmentation:
    def test_labels_follow_interval_order(self):
        trials = segment_session(
            aligned_fixture(), [ActiveInterval(100, 900), ActiveInterval(1500, 2500)]
        )
        assert [t.label for t in trials] == ["flex-low", "extend-high"]
        assert [t.trial_id for t in trials] == [0, 1]

    def test_slices_all_modalities_identically(self):
        a = aligned_fixture(seed=4)
        (trial,) = segment_session(a, [ActiveInterval(200, 700)])
        assert trial.n_samples == 500
        np.testing.assert_array_equal(trial.eeg.data, a.eeg.data[:, 200:700])
        np.testing.assert_array_equal(trial.emg.data, a.emg.data[:, 200:700])
        np.testing.assert_array_equal(trial.force.data, a.force.data[:, 200:700])
        assert trial.start_sample == 200

    def test_interval_outside_session_rejected(self):
        with pytest.raises(ValueError):
            segment_session(aligned_fixture(n=1000), [ActiveInterval(500, 1500)])

    def test_explicit_interval_label_wins(self):
        (trial,) = segment_session(
            aligned_fixture(), [ActiveInterval(0, 500, trial_label="extend-low")]
        )
        assert trial.label == "extend-low"


def make_trial(n, trial_id=0, label="flex-high", seed=0):
    rng = np.random.default_rng(seed)
    return Trial(
        eeg=MultiChannelSignal(1000.0, ("e0", "e1"), rng.normal(size=(2, n))),
        emg=MultiChannelSignal(1000.0, ("m0", "m1"), rng.normal(size=(2, n))),
        force=MultiChannelSignal(1000.0, ("f0",), rng.normal(size=(1, n))),
        label=label,
        trial_id=trial_id,
        start_sample=0,
    )


class TestWindows:
    def test_count_for_one_second_trial(self):
        windows = make_windows([make_trial(1000)])
        assert len(windows) == 17  # (1000 - 200) // 50 + 1

    def test_count_arithmetic_random_lengths(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            n = int(rng.integers(200, 3000))
            windows = make_windows([make_trial(n)])
            assert len(windows) == (n - 200) // 50 + 1

    def test_window_shapes_and_target(self):
        trial = make_trial(400, seed=2)
        windows = make_windows([trial])
        w = windows[1]
        assert w.x.shape == (2, 200)
        np.testing.assert_array_equal(w.x, trial.eeg.data[:, 50:250])
        np.testing.assert_array_equal(w.y, trial.emg.data[:, 249])
        assert w.t_end == 249

    def test_short_trial_skipped_with_warning(self):
        with pytest.warns(UserWarning):
            windows = make_windows([make_trial(100), make_trial(1000, trial_id=1)])
        assert len(windows) == 17
        assert all(w.trial_id == 1 for w in windows)

    def test_windows_never_cross_trials(self):
        windows = make_windows([make_trial(300, trial_id=0), make_trial(300, trial_id=1)])
        assert sorted({w.trial_id for w in windows}) == [0, 1]
        assert len(windows) == 2 * ((300 - 200) // 50 + 1)

    def test_custom_window_and_stride(self):
        windows = make_windows([make_trial(1000)], window_ms=100, stride_ms=100)
        assert len(windows) == 10
        assert windows[0].x.shape == (2, 100)


class TestEndToEndAlignmentSegmentation:
    def test_aligned_session_segments(self):
        raw = make_raw(duration_s=3.0, seed=5)
        aligned = align(raw)
        # plant an active force burst post hoc to drive detection
        force = np.zeros_like(aligned.force.data)
        force[0, 500:1500] = 8.0
        aligned = AlignedSession(
            subject_id=aligned.subject_id,
            eeg=aligned.eeg,
            emg=aligned.emg,
            force=MultiChannelSignal(1000.0, aligned.force.channel_names, force),
            movement_labels=aligned.movement_labels,
        )
        intervals = detect_active_periods(aligned.force)
        trials = segment_session(aligned, intervals)
        assert len(trials) == 1
        assert trials[0].label == "flex-low"
        assert 990 <= trials[0].n_samples <= 1010
