"""Command-line entry points for the whole pipeline."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import synth, workflow
from .errors import BmuiError
from .neural import (
    TrainConfig,
    evaluate_regressor,
    grad_check,
    load_model,
    save_model,
    split_by_trial,
    train_classifier,
    train_regressor,
)
from .sessions import load_session, save_session

GRADCHECK_TOLERANCE = 1e-4
GRADCHECK_SEEDS = 5


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bmui", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a seeded synthetic session")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--trials", type=int, default=40)
    p.add_argument("--trial-s", type=float, default=3.0)
    p.add_argument("--rest-s", type=float, default=2.0)
    p.add_argument("--emg-channels", type=int, default=12)
    p.add_argument("--out", required=True, help="session directory to write")

    p = sub.add_parser("preprocess", help="align and preprocess a session")
    p.add_argument("--session", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train the envelope regressor")
    p.add_argument("--session", required=True)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--window-ms", type=int, default=workflow.DEFAULT_WINDOW_MS)
    p.add_argument("--stride-ms", type=int, default=workflow.DEFAULT_STRIDE_MS)
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train-cls", help="train the direction classifier")
    p.add_argument("--session", required=True)
    p.add_argument("--regressor", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--calibration-out", help="also write a calibration file")
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("eval", help="evaluate a regressor on held-out trials")
    p.add_argument("--session", required=True)
    p.add_argument("--regressor", required=True)
    p.add_argument("--out", help="report file to write")
    p.add_argument("--seed", type=int, default=0, help="split seed used at training")

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--seeds", type=int, default=GRADCHECK_SEEDS)

    p = sub.add_parser("serve", help="run the online pipeline + WebSocket server")
    p.add_argument("--source", required=True, help="replay:<dir> or synthetic:<seed>")
    p.add_argument("--regressor", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--calibration", required=True)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--fast", action="store_true", help="run unpaced (for tests)")
    p.add_argument("--ui-dir", help="static UI bundle to serve at /")
    return parser


def _cmd_synth(args) -> int:
    cfg = synth.SynthConfig(
        seed=args.seed,
        n_trials=args.trials,
        trial_duration_s=args.trial_s,
        rest_duration_s=args.rest_s,
        n_emg_ch=args.emg_channels,
    )
    out = synth.save_synthetic_session(synth.synthesize_session(cfg), args.out)
    print(f"wrote session to {out}")
    return 0


def _cmd_preprocess(args) -> int:
    processed = workflow.process_session(load_session(args.session))
    out = save_session(processed, args.out)
    print(f"wrote preprocessed session ({processed.n_samples} samples) to {out}")
    return 0


def _cmd_train(args) -> int:
    processed = workflow.process_session(load_session(args.session))
    windows, _, _ = workflow.extract_windows(
        processed, window_ms=args.window_ms, stride_ms=args.stride_ms
    )
    cfg = TrainConfig(epochs=args.epochs, seed=args.seed)
    model, history = train_regressor(windows, cfg)
    save_model(model, args.out)
    best = min(h["val_loss"] for h in history)
    print(f"trained on {len(windows)} windows, best val loss {best:.5f}; wrote {args.out}")
    return 0


def _cmd_train_cls(args) -> int:
    processed = workflow.process_session(load_session(args.session))
    regressor = load_model(args.regressor)
    active, rest = workflow.trials_for_classifier(processed)
    sequences, labels = workflow.build_direction_sequences(regressor, active + rest)
    cfg = TrainConfig(epochs=args.epochs, seed=args.seed)
    classifier, history = train_classifier(sequences, labels, cfg)
    save_model(classifier, args.out)
    print(f"trained classifier on {len(labels)} sequences; wrote {args.out}")
    if args.calibration_out:
        windows, _, _ = workflow.extract_windows(processed)
        _, val_w, _ = split_by_trial(windows, cfg.split_fractions, args.seed)
        report = evaluate_regressor(regressor, val_w)
        calib = workflow.make_calibration(
            regressor, active, rest, report.per_channel_scc
        )
        Path(args.calibration_out).write_text(
            json.dumps(calib.to_dict(), indent=2) + "\n", encoding="utf-8"
        )
        print(f"wrote calibration (channel {calib.channel_index}) to {args.calibration_out}")
    return 0


def _cmd_eval(args) -> int:
    processed = workflow.process_session(load_session(args.session))
    regressor = load_model(args.regressor)
    windows, _, _ = workflow.extract_windows(processed)
    cfg = TrainConfig(seed=args.seed)
    _, _, test_w = split_by_trial(windows, cfg.split_fractions, args.seed)
    report = evaluate_regressor(regressor, test_w)
    print(report.render_table())
    if args.out:
        report.save(args.out)
        print(f"wrote report to {args.out}")
    return 0


def _cmd_gradcheck(args) -> int:
    worst = 0.0
    for kind in ("regressor", "classifier"):
        for seed in range(args.seeds):
            err = grad_check(kind, seed)
            worst = max(worst, err)
            print(f"{kind} seed {seed}: max relative error {err:.3e}")
    if worst > GRADCHECK_TOLERANCE:
        print(f"FAIL: worst error {worst:.3e} > {GRADCHECK_TOLERANCE:.0e}")
        return 2
    print(f"OK: worst error {worst:.3e} <= {GRADCHECK_TOLERANCE:.0e}")
    return 0


def _cmd_serve(args) -> int:
    from .rt.pipeline import PipelineConfig, default_port
    from .rt.server import serve

    cfg = PipelineConfig(
        source=args.source,
        regressor_path=args.regressor,
        classifier_path=args.classifier,
        calibration_path=args.calibration,
        port=args.port if args.port is not None else default_port(),
        fast=args.fast,
    )
    serve(cfg, ui_dir=Path(args.ui_dir) if args.ui_dir else None)
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "preprocess": _cmd_preprocess,
    "train": _cmd_train,
    "train-cls": _cmd_train_cls,
    "eval": _cmd_eval,
    "gradcheck": _cmd_gradcheck,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 1
    try:
        return _COMMANDS[args.command](args)
    except (BmuiError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
