"""Correlation evaluation, window ablation and label-grouped summaries."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import betainc

from .engine import SequenceDynamics
from .errors import ComputeError
from .model import SequenceRecord, TedConfig

DEFAULT_WINDOW_SWEEP = (3, 5, 10, 20, 40, 60, 75)


def pearson(x, y) -> float:
    """Sample Pearson correlation coefficient."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size:
        raise ComputeError(f"series length mismatch: {x.size} vs {y.size}")
    if x.size < 3:
        raise ComputeError(f"need at least 3 points, got {x.size}")
    xm = x - x.mean()
    ym = y - y.mean()
    sx = float(np.dot(xm, xm))
    sy = float(np.dot(ym, ym))
    if sx == 0.0 or sy == 0.0:
        raise ComputeError("correlation undefined for a constant series")
    prod = sx * sy
    if prod > 0.0 and math.isfinite(prod):
        denom = math.sqrt(prod)
    else:
        # the product of two tiny (or huge) sums under/overflows double range
        denom = math.sqrt(sx) * math.sqrt(sy)
    r = float(np.dot(xm, ym)) / denom
    return max(-1.0, min(1.0, r))


def pcc_p_value(r: float, n: int) -> float:
    """Two-sided p-value for a sample correlation r with n observations.

    Uses the t statistic r*sqrt((n-2)/(1-r^2)) against Student's t with n-2
    degrees of freedom; the tail probability comes from the regularized
    incomplete beta function.
    """
    if n < 3:
        raise ComputeError(f"p-value needs n >= 3, got {n}")
    if not -1.0 <= r <= 1.0:
        raise ComputeError(f"correlation {r} outside [-1, 1]")
    if abs(r) == 1.0:
        return 0.0
    if r == 0.0:
        return 1.0
    df = n - 2
    t2 = r * r * df / (1.0 - r * r)
    # P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2)
    return float(betainc(df / 2.0, 0.5, df / (df + t2)))


@dataclass(frozen=True)
class SubjectCorrelation:
    subject_id: str
    pcc: float
    p_value: float
    n_frames: int

    def to_dict(self) -> dict:
        return {
            "subject_id": self.subject_id,
            "pcc": self.pcc,
            "p_value": self.p_value,
            "n_frames": self.n_frames,
        }


def evaluate_subject(subject_id: str, ted, pspi) -> SubjectCorrelation:
    """Correlate a subject's concatenated score series against its PSPI series."""
    ted = np.asarray(ted, dtype=float)
    pspi = np.asarray(pspi, dtype=float)
    r = pearson(ted, pspi)
    return SubjectCorrelation(
        subject_id=subject_id,
        pcc=r,
        p_value=pcc_p_value(r, ted.size),
        n_frames=int(ted.size),
    )


def _subject_series(
    records: Sequence[SequenceRecord],
    dynamics: dict[tuple[str, str], SequenceDynamics],
    window: int,
    orientation: str,
) -> dict[str, tuple[list[float], list[float]]]:
    """Per subject: aligned (ted, pspi) frame series in (sequence, frame) order.

    Frames whose tracking failed are excluded from the correlation.
    """
    series: dict[str, tuple[list[float], list[float]]] = {}
    for rec in sorted(records, key=lambda r: r.key):
        if rec.pspi is None:
            raise ComputeError(f"sequence {rec.key} has no PSPI labels")
        dyn = dynamics[rec.key]
        ted = dyn.ted_scores(window, orientation)
        ts, ps = series.setdefault(rec.subject_id, ([], []))
        for i, ok in enumerate(dyn.tracking_ok):
            if ok:
                ts.append(float(ted[i]))
                ps.append(rec.pspi[i])
    return series


def evaluate_dataset(
    records: Sequence[SequenceRecord], cfg: TedConfig
) -> list[SubjectCorrelation]:
    dynamics = {rec.key: SequenceDynamics(rec, cfg) for rec in records}
    series = _subject_series(records, dynamics, cfg.window, cfg.window_orientation)
    return [
        evaluate_subject(subject, ted, pspi)
        for subject, (ted, pspi) in sorted(series.items())
    ]


@dataclass(frozen=True)
class WindowResult:
    window: int
    subjects: tuple[SubjectCorrelation, ...]
    mean_pcc: float
    median_pcc: float
    q1_pcc: float
    q3_pcc: float

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "mean_pcc": self.mean_pcc,
            "median_pcc": self.median_pcc,
            "q1_pcc": self.q1_pcc,
            "q3_pcc": self.q3_pcc,
            "subjects": [s.to_dict() for s in self.subjects],
        }


@dataclass(frozen=True)
class AblationReport:
    windows: tuple[WindowResult, ...]

    @property
    def best_window(self) -> int:
        return max(self.windows, key=lambda w: (w.mean_pcc, -w.window)).window

    def to_dict(self) -> dict:
        return {
            "best_window": self.best_window,
            "windows": [w.to_dict() for w in self.windows],
        }

    def to_text(self) -> str:
        lines = [f"{'w':>4} {'mean':>8} {'median':>8} {'q1':>8} {'q3':>8}"]
        for w in self.windows:
            lines.append(
                f"{w.window:>4} {w.mean_pcc:>8.4f} {w.median_pcc:>8.4f} "
                f"{w.q1_pcc:>8.4f} {w.q3_pcc:>8.4f}"
            )
        lines.append(f"best window: {self.best_window}")
        return "\n".join(lines)


def window_ablation(
    records: Sequence[SequenceRecord],
    cfg: TedConfig,
    windows: Sequence[int] = DEFAULT_WINDOW_SWEEP,
) -> AblationReport:
    """Re-score the dataset at each window and correlate per subject."""
    if not windows:
        raise ComputeError("window sweep set is empty")
    dynamics = {rec.key: SequenceDynamics(rec, cfg) for rec in records}
    results = []
    for window in sorted(set(windows)):
        series = _subject_series(records, dynamics, window, cfg.window_orientation)
        subjects = tuple(
            evaluate_subject(subject, ted, pspi)
            for subject, (ted, pspi) in sorted(series.items())
        )
        pccs = np.array([s.pcc for s in subjects])
        results.append(
            WindowResult(
                window=window,
                subjects=subjects,
                mean_pcc=float(pccs.mean()),
                median_pcc=float(np.percentile(pccs, 50)),
                q1_pcc=float(np.percentile(pccs, 25)),
                q3_pcc=float(np.percentile(pccs, 75)),
            )
        )
    return AblationReport(windows=tuple(results))


@dataclass(frozen=True)
class GroupStats:
    label: int
    gender: str
    count: int
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    mean: float
    std: float

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "gender": self.gender,
            "count": self.count,
            "min": self.minimum,
            "q1": self.q1,
            "median": self.median,
            "q3": self.q3,
            "max": self.maximum,
            "mean": self.mean,
            "std": self.std,
        }


@dataclass(frozen=True)
class SummaryReport:
    scale: str
    transform: str
    groups: tuple[GroupStats, ...]

    def to_dict(self) -> dict:
        return {
            "scale": self.scale,
            "transform": self.transform,
            "groups": [g.to_dict() for g in self.groups],
        }

    def to_text(self) -> str:
        header = (
            f"{self.scale:>5} {'gender':>11} {'count':>7} {'min':>9} {'q1':>9} "
            f"{'median':>9} {'q3':>9} {'max':>9} {'mean':>9} {'std':>9}"
        )
        lines = [header]
        for g in self.groups:
            lines.append(
                f"{g.label:>5} {g.gender:>11} {g.count:>7} {g.minimum:>9.4f} "
                f"{g.q1:>9.4f} {g.median:>9.4f} {g.q3:>9.4f} {g.maximum:>9.4f} "
                f"{g.mean:>9.4f} {g.std:>9.4f}"
            )
        return "\n".join(lines)

    def write_plot_data(self, path) -> None:
        """CSV series (label, gender, quartiles) for external plotting."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["scale", "label", "gender", "count", "min", "q1", "median", "q3", "max"]
            )
            for g in self.groups:
                writer.writerow(
                    [self.scale, g.label, g.gender, g.count]
                    + [format(v, ".17g") for v in (g.minimum, g.q1, g.median, g.q3, g.maximum)]
                )


def _stats(label: int, gender: str, values: list[float]) -> GroupStats:
    arr = np.array(values)
    return GroupStats(
        label=label,
        gender=gender,
        count=arr.size,
        minimum=float(arr.min()),
        q1=float(np.percentile(arr, 25)),
        median=float(np.percentile(arr, 50)),
        q3=float(np.percentile(arr, 75)),
        maximum=float(arr.max()),
        mean=float(arr.mean()),
        std=float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
    )


def summarize(
    records: Sequence[SequenceRecord],
    ted_series: dict[tuple[str, str], Sequence[float]],
    scale: str = "VAS",
    transform: str = "log",
) -> SummaryReport:
    """Group per-frame scores by sequence-level label value and gender."""
    scale = scale.upper()
    if scale not in ("VAS", "OPI"):
        raise ComputeError(f"unsupported grouping scale {scale!r}")
    if transform not in ("log", "none"):
        raise ComputeError(f"unsupported transform {transform!r}")

    grouped: dict[tuple[int, str], list[float]] = {}
    for rec in sorted(records, key=lambda r: r.key):
        label = rec.labels.get(scale) if rec.labels is not None else None
        if label is None:
            raise ComputeError(f"sequence {rec.key} has no {scale} label")
        values = [float(v) for v in ted_series[rec.key]]
        if transform == "log":
            if min(values) <= 0.0:
                raise ComputeError(
                    f"sequence {rec.key} has a non-positive score; "
                    "use the raw transform"
                )
            values = [math.log(v) for v in values]
        grouped.setdefault((label, rec.gender), []).extend(values)

    groups = tuple(
        _stats(label, gender, values)
        for (label, gender), values in sorted(grouped.items())
    )
    return SummaryReport(scale=scale, transform=transform, groups=groups)
