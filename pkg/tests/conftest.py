"""Shared fixtures: one fully trained seed-42 pipeline reused across tests.

Training is the expensive part of the suite, so the session-scoped fixtures
below run it once and hand the artifacts (models, report, calibration) to the
unit, integration, and acceptance tests alike.
"""

import time

import numpy as np
import pytest

from bmui.neural import TrainConfig, evaluate_regressor, train_classifier, train_regressor
from bmui.sessions import WindowPair
from bmui.synth import SynthConfig, synthesize_session
from bmui import workflow

TRAIN_SEED = 42
N_TRIALS = 40
REGRESSOR_EPOCHS = 30
CLASSIFIER_EPOCHS = 40


@pytest.fixture(scope="session")
def synth_session():
    return synthesize_session(SynthConfig(seed=TRAIN_SEED, n_trials=N_TRIALS))


@pytest.fixture(scope="session")
def trained(synth_session):
    """Full offline pipeline on the seed-42 session, with wall-clock timings."""
    timings = {}
    t0 = time.monotonic()
    processed = workflow.process_session(synth_session.raw)
    windows, trials, intervals = workflow.extract_windows(processed)
    timings["preprocess_s"] = time.monotonic() - t0

    t0 = time.monotonic()
    cfg = TrainConfig(epochs=REGRESSOR_EPOCHS, seed=0)
    regressor, history = train_regressor(windows, cfg)
    report = evaluate_regressor(regressor, _test_split(windows, cfg))
    timings["train_s"] = time.monotonic() - t0

    t0 = time.monotonic()
    active, rest = workflow.trials_for_classifier(processed)
    sequences, labels = workflow.build_direction_sequences(regressor, active + rest)
    classifier, _ = train_classifier(
        sequences, labels, TrainConfig(epochs=CLASSIFIER_EPOCHS, seed=0)
    )
    calibration = workflow.make_calibration(regressor, active, rest, report.per_channel_scc)
    timings["classifier_s"] = time.monotonic() - t0

    return {
        "session": synth_session,
        "processed": processed,
        "windows": windows,
        "trials": trials,
        "intervals": intervals,
        "regressor": regressor,
        "history": history,
        "report": report,
        "classifier": classifier,
        "sequences": sequences,
        "labels": labels,
        "calibration": calibration,
        "train_config": cfg,
        "timings": timings,
    }


def _test_split(windows, cfg):
    from bmui.neural import split_by_trial

    _, _, test_w = split_by_trial(windows, cfg.split_fractions, cfg.seed)
    return test_w


@pytest.fixture(scope="session")
def shuffled_control(trained):
    """Same architecture and budget, targets shuffled across windows."""
    rng = np.random.default_rng(123)
    windows = trained["windows"]
    perm = rng.permutation(len(windows))
    shuffled = [
        WindowPair(
            x=w.x, y=windows[j].y, trial_id=w.trial_id,
            trial_label=w.trial_label, t_end=w.t_end,
        )
        for w, j in zip(windows, perm)
    ]
    cfg = trained["train_config"]
    model, _ = train_regressor(shuffled, cfg)
    # Standard permutation control: the whole pipeline, evaluation included,
    # runs on the permuted pairing, so the score reflects what the model can
    # achieve once the input/target correspondence is destroyed.
    return evaluate_regressor(model, _test_split(shuffled, cfg))
