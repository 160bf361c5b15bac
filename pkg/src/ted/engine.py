"""Per-frame expressiveness scoring.

The score of frame i combines a static action-unit term S with windowed
dynamics: Score_i = S_i * (1 + M_L * M_Ho * M_Hr * M_Gl * M_Gr * M_I), where
each M is the moving average of signed relative-change products for one
feature stream. Frame 1 is the reference frame and scores S_1.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ComputeError
from .model import (
    FEATURE_SETS,
    AuProfile,
    FrameFeatures,
    ScoredFrame,
    SequenceRecord,
    TedConfig,
)


def static_score(au_levels: Sequence[float], profile: AuProfile) -> float:
    """Sum of e^level over the profile's action units (exponential weighting)."""
    if len(au_levels) != len(profile.au_ids):
        raise ComputeError(
            f"expected {len(profile.au_ids)} levels for profile "
            f"{profile.name!r}, got {len(au_levels)}"
        )
    for level in au_levels:
        if not 0.0 <= level <= 5.0:
            raise ComputeError(f"AU level {level} outside [0, 5]")
    return sum(math.exp(v) for v in au_levels)


def _as_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ComputeError(f"{name} must be a 1-d vector")
    return arr


def _exact_var(arr: np.ndarray) -> float:
    # a constant vector has variance exactly 0; the float computation can
    # miss by an ulp of the mean, which would poison the guarded ratio below
    if arr.max() == arr.min():
        return 0.0
    return float(arr.var(ddof=1))


def relative_change(f_prev, f_next) -> float:
    """Variance-ratio change between consecutive feature vectors.

    Returns var(f_next - f_prev) / (var(f_prev) + var(f_next)) with unbiased
    sample variance over vector components, and 0 when both input variances
    vanish. Always nonnegative.
    """
    a = _as_vector(f_prev, "f_prev")
    b = _as_vector(f_next, "f_next")
    if a.size != b.size:
        raise ComputeError(f"vector length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise ComputeError("relative change needs vectors of length >= 2")
    denom = _exact_var(a) + _exact_var(b)
    if denom == 0.0:
        return 0.0
    return float(_exact_var(b - a) / denom)


def direction_sign(f_prev, f_next) -> int:
    """+1 if the summed element-wise displacement is >= 0, else -1."""
    a = _as_vector(f_prev, "f_prev")
    b = _as_vector(f_next, "f_next")
    if a.size != b.size:
        raise ComputeError(f"vector length mismatch: {a.size} vs {b.size}")
    return 1 if float((b - a).sum()) >= 0.0 else -1


class DynamicsState:
    """Streaming per-stream window over signed change products.

    Keeps the last `window` product values per feature set; the mean of the
    buffered values is the moving-average dynamics M. During warm-up the mean
    runs over however many values have arrived.
    """

    def __init__(self, window: int):
        if window < 1:
            raise ComputeError(f"window must be >= 1, got {window}")
        self.window = window
        self._buffers: dict[str, deque[float]] = {
            fs: deque(maxlen=window) for fs in FEATURE_SETS
        }

    def push_product(self, feature_set: str, product: float) -> float:
        if not math.isfinite(product):
            raise ComputeError(f"non-finite product for {feature_set}")
        buf = self._buffers[feature_set]
        buf.append(product)
        return sum(buf) / len(buf)


def _feature_matrix(frames: Sequence[FrameFeatures], fs: str, profile: AuProfile) -> np.ndarray:
    if fs == "L":
        pts = np.asarray([f.landmarks for f in frames], dtype=float)
        if pts.ndim != 3:
            raise ComputeError(
                "landmark streams must be non-empty and constant-length"
            )
        # all x coordinates, then all y coordinates
        return np.concatenate([pts[:, :, 0], pts[:, :, 1]], axis=1)
    if fs == "Ho":
        return np.asarray([f.head_translation for f in frames], dtype=float)
    if fs == "Hr":
        return np.asarray([f.head_rotation for f in frames], dtype=float)
    if fs == "Gl":
        return np.asarray([f.gaze_left for f in frames], dtype=float)
    if fs == "Gr":
        return np.asarray([f.gaze_right for f in frames], dtype=float)
    if fs == "I":
        return np.asarray(
            [[f.au_level(au) for au in profile.au_ids] for f in frames], dtype=float
        )
    raise ComputeError(f"unknown feature set {fs!r}")


def _trailing_means(products: np.ndarray, window: int) -> np.ndarray:
    """M per frame (length len(products)+1, index 0 is the reference frame)."""
    m = products.size
    out = np.zeros(m + 1)
    if m == 0:
        return out
    k = min(window, m)
    out[1 : k + 1] = np.cumsum(products[:k]) / np.arange(1, k + 1)
    if m > window:
        sums = sliding_window_view(products, window).sum(axis=1)
        out[window + 1 :] = sums[1:] / window
    return out


def _forward_means(products: np.ndarray, window: int) -> np.ndarray:
    """Forward-window variant: M at frame i averages the next `window` products."""
    m = products.size
    out = np.zeros(m + 1)
    if m == 0:
        return out
    full = m - window + 1
    if full > 0:
        out[1 : full + 1] = sliding_window_view(products, window).sum(axis=1) / window
    start = max(full, 0)
    tail = products[start:]
    out[start + 1 :] = np.cumsum(tail[::-1])[::-1] / np.arange(tail.size, 0, -1)
    return out


class SequenceDynamics:
    """Window-independent intermediates for one sequence.

    Precomputing the static scores and per-stream change products once lets a
    window sweep reuse them; only the moving averages depend on the window.
    """

    def __init__(self, seq: SequenceRecord, cfg: TedConfig):
        frames = seq.frames
        if not frames:
            raise ComputeError(f"sequence {seq.key} has no frames")
        self.key = seq.key
        self.frame_indices = [f.frame_index for f in frames]
        self.tracking_ok = [f.tracking_ok for f in frames]
        self.enabled = sorted(cfg.feature_sets, key=FEATURE_SETS.index)
        n = len(frames)

        levels = _feature_matrix(frames, "I", cfg.profile)
        bad = (levels < 0.0) | (levels > 5.0) | ~np.isfinite(levels)
        if bad.any():
            frame = frames[int(np.argwhere(bad)[0][0])].frame_index
            raise ComputeError(f"AU level outside [0, 5] at frame {frame}")
        self.static = np.exp(levels).sum(axis=1)

        # Failed-tracking frames reuse the last valid frame's features for
        # dynamics so tracker garbage cannot spike the change measure.
        eff = np.empty(n, dtype=int)
        last_ok = 0
        for i, frame in enumerate(frames):
            if frame.tracking_ok:
                last_ok = i
            eff[i] = last_ok if not frame.tracking_ok else i

        self.relative: dict[str, np.ndarray] = {}
        self.direction: dict[str, np.ndarray] = {}
        self.products: dict[str, np.ndarray] = {}
        for fs in self.enabled:
            mat = _feature_matrix(frames, fs, cfg.profile)[eff]
            if mat.shape[1] < 2:
                raise ComputeError(
                    f"feature set {fs} has {mat.shape[1]} component(s); "
                    "relative change needs at least 2"
                )
            if not np.isfinite(mat).all():
                frame = frames[int(np.argwhere(~np.isfinite(mat))[0][0])].frame_index
                raise ComputeError(f"non-finite {fs} feature at frame {frame}")
            var = mat.var(axis=1, ddof=1)
            var[mat.max(axis=1) == mat.min(axis=1)] = 0.0
            diff = np.diff(mat, axis=0)
            dvar = diff.var(axis=1, ddof=1)
            dvar[diff.max(axis=1) == diff.min(axis=1)] = 0.0
            denom = var[:-1] + var[1:]
            with np.errstate(invalid="ignore", divide="ignore"):
                cr = np.where(denom == 0.0, 0.0, dvar / denom)
            ds = np.where(diff.sum(axis=1) >= 0.0, 1.0, -1.0)
            self.relative[fs] = cr
            self.direction[fs] = ds
            self.products[fs] = ds * cr

    def dynamics_means(self, window: int, orientation: str) -> dict[str, np.ndarray]:
        roll = _trailing_means if orientation == "trailing" else _forward_means
        return {fs: roll(self.products[fs], window) for fs in self.enabled}

    def ted_scores(self, window: int, orientation: str) -> np.ndarray:
        means = self.dynamics_means(window, orientation)
        prod = np.ones(len(self.static))
        for fs in self.enabled:
            prod *= means[fs]
        prod[0] = 0.0  # reference frame has no dynamics
        return self.static * (1.0 + prod)


def score_sequence(seq: SequenceRecord, cfg: TedConfig) -> list[ScoredFrame]:
    """Score every frame of one sequence; output length equals input length."""
    dyn = SequenceDynamics(seq, cfg)
    means = dyn.dynamics_means(cfg.window, cfg.window_orientation)
    prod = np.ones(len(dyn.static))
    for fs in dyn.enabled:
        prod *= means[fs]
    prod[0] = 0.0
    ted = dyn.static * (1.0 + prod)

    scored = []
    for i, frame_index in enumerate(dyn.frame_indices):
        dynamics = {fs: 0.0 for fs in FEATURE_SETS}
        rel = {fs: 0.0 for fs in FEATURE_SETS}
        sign = {fs: 1 for fs in FEATURE_SETS}
        for fs in dyn.enabled:
            dynamics[fs] = float(means[fs][i])
            if i > 0:
                rel[fs] = float(dyn.relative[fs][i - 1])
                sign[fs] = int(dyn.direction[fs][i - 1])
        if i == 0:
            dynamics = {fs: 0.0 for fs in FEATURE_SETS}
        scored.append(
            ScoredFrame(
                frame_index=frame_index,
                static_score=float(dyn.static[i]),
                dynamics=dynamics,
                relative_change=rel,
                direction=sign,
                ted_score=float(ted[i]),
                tracking_ok=dyn.tracking_ok[i],
            )
        )
    return scored


def score_dataset(
    records: Sequence[SequenceRecord], cfg: TedConfig, jobs: int = 1
) -> tuple[dict[tuple[str, str], list[ScoredFrame]], list[tuple[tuple[str, str], str]]]:
    """Score each sequence independently; per-sequence failures are collected."""

    def worker(rec: SequenceRecord):
        try:
            return rec.key, score_sequence(rec, cfg), None
        except ComputeError as exc:
            return rec.key, None, str(exc)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(worker, records))
    else:
        outcomes = [worker(rec) for rec in records]

    results: dict[tuple[str, str], list[ScoredFrame]] = {}
    failures: list[tuple[tuple[str, str], str]] = []
    for key, scored, error in sorted(outcomes, key=lambda o: o[0]):
        if error is None:
            results[key] = scored
        else:
            failures.append((key, error))
    return results, failures


_CSV_COLUMNS = (
    "subject",
    "sequence",
    "frame",
    "S",
    "M_L",
    "M_Ho",
    "M_Hr",
    "M_Gl",
    "M_Gr",
    "M_I",
    "ted_score",
    "tracking_ok",
)


def _fmt(x: float) -> str:
    return format(x, ".17g")


def write_scores_csv(results: dict[tuple[str, str], list[ScoredFrame]], path) -> None:
    """Deterministic scored-output CSV, ordered by (subject, sequence, frame)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_COLUMNS)
        for (subject, sequence) in sorted(results):
            for sf in results[(subject, sequence)]:
                writer.writerow(
                    [
                        subject,
                        sequence,
                        sf.frame_index,
                        _fmt(sf.static_score),
                        *[_fmt(sf.dynamics[fs]) for fs in FEATURE_SETS],
                        _fmt(sf.ted_score),
                        int(sf.tracking_ok),
                    ]
                )


def read_scores_csv(path) -> dict[tuple[str, str], list[ScoredFrame]]:
    results: dict[tuple[str, str], list[ScoredFrame]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            sf = ScoredFrame(
                frame_index=int(row["frame"]),
                static_score=float(row["S"]),
                dynamics={fs: float(row[f"M_{fs}"]) for fs in FEATURE_SETS},
                relative_change={fs: 0.0 for fs in FEATURE_SETS},
                direction={fs: 1 for fs in FEATURE_SETS},
                ted_score=float(row["ted_score"]),
                tracking_ok=bool(int(row["tracking_ok"])),
            )
            results.setdefault((row["subject"], row["sequence"]), []).append(sf)
    return results
