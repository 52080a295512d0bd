"""Evaluation statistics: Spearman correlation, one-sample t-test, reports."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import special

from .errors import (
    DegenerateSampleError,
    InsufficientDataError,
    UndefinedCorrelationError,
)


def ranks(x) -> np.ndarray:
    """1-based ranks; ties get the average of their covered rank positions."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    r = np.empty(len(x))
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        r[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return r


def spearman(x, y) -> float:
    """Pearson correlation of average ranks; monotone-agreement in [-1, 1]."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 3:
        raise InsufficientDataError(f"need at least 3 samples, got {len(x)}")
    rx = ranks(x)
    ry = ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = np.sqrt((rx**2).sum() * (ry**2).sum())
    if denom == 0:
        raise UndefinedCorrelationError("zero rank variance (all values tied)")
    return float(np.clip((rx * ry).sum() / denom, -1.0, 1.0))


def student_t_sf(t: float, df: int) -> float:
    """P(T_df > t) via the regularized incomplete beta function."""
    x = df / (df + t * t)
    p = 0.5 * float(special.betainc(df / 2.0, 0.5, x))
    return p if t >= 0 else 1.0 - p


def one_sample_t_test(values, mu0: float = 0.0) -> tuple[float, float]:
    """One-sided one-sample t-test against mu0; returns (t, P(T > t))."""
    v = np.asarray(values, dtype=np.float64)
    if len(v) < 2:
        raise InsufficientDataError(f"need at least 2 values, got {len(v)}")
    sd = v.std(ddof=1)
    if sd == 0:
        raise DegenerateSampleError("zero sample standard deviation")
    t = (v.mean() - mu0) / (sd / np.sqrt(len(v)))
    return float(t), student_t_sf(float(t), len(v) - 1)


@dataclass(frozen=True)
class EvalReport:
    per_channel_scc: tuple[float, ...]
    mean_scc: float
    best_channel_index: int
    best_channel_scc: float
    t_statistic: float
    p_value_one_sided: float
    n_trials: int

    def to_dict(self) -> dict:
        return {
            "per_channel_scc": list(self.per_channel_scc),
            "mean_scc": self.mean_scc,
            "best_channel_index": self.best_channel_index,
            "best_channel_scc": self.best_channel_scc,
            "t_statistic": self.t_statistic,
            "p_value_one_sided": self.p_value_one_sided,
            "n_trials": self.n_trials,
        }

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    def render_table(self) -> str:
        lines = [
            f"{'channel':>8} {'scc':>9}",
            "-" * 18,
        ]
        for i, scc in enumerate(self.per_channel_scc):
            mark = " *" if i == self.best_channel_index else ""
            lines.append(f"{i:>8} {scc:>9.4f}{mark}")
        lines += [
            "-" * 18,
            f"mean scc        {self.mean_scc:.4f}",
            f"best channel    {self.best_channel_index} ({self.best_channel_scc:.4f})",
            f"t({self.n_trials - 1}) = {self.t_statistic:.4f}, one-sided p = "
            f"{self.p_value_one_sided:.4g}",
        ]
        return "\n".join(lines)


def build_report(
    per_channel_pred: np.ndarray,
    per_channel_true: np.ndarray,
    per_trial_best_channel: list[tuple[np.ndarray, np.ndarray]],
) -> EvalReport:
    """Assemble an EvalReport from concatenated per-channel series.

    ``per_channel_pred``/``true`` are [n_channels, n_points]; the per-trial
    pairs are (pred, true) series of the best channel, one per trial, for the
    t-test population.
    """
    if per_channel_pred.shape[1] < 3:
        raise InsufficientDataError("empty test set")
    sccs = []
    for p, t in zip(per_channel_pred, per_channel_true):
        try:
            sccs.append(spearman(p, t))
        except UndefinedCorrelationError:
            sccs.append(0.0)
        except InsufficientDataError:
            sccs.append(0.0)
    best = int(np.argmax(sccs))
    trial_sccs = []
    for p, t in per_trial_best_channel:
        try:
            trial_sccs.append(spearman(p, t))
        except (UndefinedCorrelationError, InsufficientDataError):
            continue
    if len(trial_sccs) >= 2:
        t_stat, p_val = one_sample_t_test(trial_sccs)
    else:
        t_stat, p_val = float("nan"), float("nan")
    return EvalReport(
        per_channel_scc=tuple(sccs),
        mean_scc=float(np.mean(sccs)),
        best_channel_index=best,
        best_channel_scc=float(sccs[best]),
        t_statistic=t_stat,
        p_value_one_sided=p_val,
        n_trials=len(trial_sccs),
    )
