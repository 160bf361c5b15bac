"""Synthetic dataset generators for tests, demos and benchmarks.

Sequences carry short expressiveness bursts (about half a second at 20 fps)
with a planted frame-level pain signal, so scored output should correlate
with the planted signal and reward mid-size dynamics windows.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .ingestion import manifest_to_json
from .model import (
    AuIntensity,
    DatasetManifest,
    FrameFeatures,
    ManifestEntry,
    PAIN_PROFILE,
    SequenceLabels,
    SequenceRecord,
)


def burst_envelope(
    n_frames: int,
    rng: np.random.Generator,
    n_bursts: tuple[int, int] = (3, 7),
    attack: int = 3,
    decay: float = 5.0,
) -> np.ndarray:
    """Sum of sharp-attack, exponential-decay bursts, clipped to [0, 1]."""
    env = np.zeros(n_frames)
    t = np.arange(n_frames, dtype=float)
    for _ in range(int(rng.integers(n_bursts[0], n_bursts[1] + 1))):
        center = float(rng.uniform(10, n_frames - 10))
        amp = float(rng.uniform(0.4, 1.0))
        rise = np.clip((t - (center - attack)) / attack, 0.0, 1.0)
        fall = np.where(t > center, np.exp(-(t - center) / decay), 1.0)
        env += amp * rise * fall
    return np.clip(env, 0.0, 1.0)


def _motion_stream(
    rng: np.random.Generator,
    env: np.ndarray,
    dim: int,
    sigma_small: float = 0.7,
    sigma_big: float = 2.3,
    turbulence: float = 0.8,
    drift_ratio: float = 3.0,
) -> np.ndarray:
    """Feature stream with burst-synchronized vigorous, upward-drifting motion.

    Outside bursts the stream jitters mildly with no preferred direction;
    inside bursts the per-frame motion magnitude is large but turbulent
    (frame-to-frame variability), and a shared positive drift makes the
    summed displacement reliably positive whatever the dimensionality.
    """
    n = env.size
    turb = np.exp(rng.normal(0.0, turbulence, n))
    sigma = sigma_small + sigma_big * env * turb
    base = rng.normal(0.0, 1.0, dim)
    noise = rng.normal(0.0, 1.0, (n, dim)) * sigma[:, None]
    ramp = np.cumsum(env * sigma * drift_ratio * np.sqrt(2.0 / dim))
    return base[None, :] + noise + ramp[:, None]


def make_correlated_dataset(
    n_subjects: int = 25,
    n_sequences: int = 8,
    n_frames: int = 300,
    seed: int = 20260823,
    n_landmarks: int = 17,
    au_scale: float = 2.5,
    au_noise: float = 0.3,
    pspi_window: int = 10,
) -> list[SequenceRecord]:
    """Dataset whose planted pain signal tracks the burst envelope.

    The planted pain intensity is a short trailing average of the burst
    envelope (half a second at 20 fps), so dynamics windows near that span
    recover it best; AU levels follow the same averaged signal with noise.
    """
    rng = np.random.default_rng(seed)
    records = []
    kernel = np.ones(pspi_window) / pspi_window
    for s in range(n_subjects):
        subject = f"S{s + 1:03d}"
        gender = "female" if s % 2 == 0 else "male"
        au_weights = rng.uniform(0.5, 1.0, len(PAIN_PROFILE.au_ids))
        # distinct resting levels keep the AU stream's neutral jitter small
        au_base = 0.15 * np.arange(len(PAIN_PROFILE.au_ids))
        for q in range(n_sequences):
            env = burst_envelope(n_frames, rng)
            env_recent = np.convolve(env, kernel)[:n_frames]
            pspi = np.clip(16.0 * env_recent, 0.0, 16.0)
            levels = np.clip(
                au_base[None, :]
                + au_weights[None, :] * env_recent[:, None] * au_scale
                + rng.normal(0.0, au_noise, (n_frames, len(au_weights))),
                0.0,
                5.0,
            )
            streams = {
                "L": _motion_stream(rng, env, 2 * n_landmarks, turbulence=1.0),
                "Ho": _motion_stream(rng, env, 3, turbulence=1.0),
                "Hr": _motion_stream(rng, env, 3, turbulence=1.0),
                "Gl": _motion_stream(rng, env, 3, turbulence=1.0),
                "Gr": _motion_stream(rng, env, 3, turbulence=1.0),
            }
            frames = []
            for t in range(n_frames):
                lm = streams["L"][t]
                frames.append(
                    FrameFeatures(
                        frame_index=t + 1,
                        landmarks=tuple(
                            (float(lm[i]), float(lm[n_landmarks + i]))
                            for i in range(n_landmarks)
                        ),
                        head_translation=tuple(streams["Ho"][t]),
                        head_rotation=tuple(streams["Hr"][t]),
                        gaze_left=tuple(streams["Gl"][t]),
                        gaze_right=tuple(streams["Gr"][t]),
                        au_intensities={
                            au: AuIntensity(au, float(levels[t, j]))
                            for j, au in enumerate(PAIN_PROFILE.au_ids)
                        },
                    )
                )
            peak = float(env.max())
            labels = SequenceLabels(
                vas=min(10, int(round(peak * 10))),
                opi=min(5, int(round(peak * 5))),
            )
            records.append(
                SequenceRecord(
                    subject_id=subject,
                    sequence_id=f"{q + 1:02d}",
                    frames=frames,
                    pspi=[float(v) for v in pspi],
                    labels=labels,
                    gender=gender,
                )
            )
    return records


def make_separable_dataset(
    n_subjects: int = 8,
    n_sequences: int = 2,
    n_frames: int = 120,
    seed: int = 7,
    n_landmarks: int = 5,
) -> list[SequenceRecord]:
    """Pain frames are separable on AU4 (level >= 3) with noisy other AUs."""
    rng = np.random.default_rng(seed)
    records = []
    other_aus = [au for au in PAIN_PROFILE.au_ids if au != 4]
    for s in range(n_subjects):
        subject = f"P{s + 1:03d}"
        for q in range(n_sequences):
            pain = rng.random(n_frames) < 0.35
            au4 = np.where(
                pain, rng.uniform(3.1, 5.0, n_frames), rng.uniform(0.0, 2.4, n_frames)
            )
            pspi = np.where(pain, rng.uniform(1.0, 12.0, n_frames), 0.0)
            frames = []
            for t in range(n_frames):
                aus = {4: AuIntensity(4, float(au4[t]))}
                for au in other_aus:
                    aus[au] = AuIntensity(au, float(rng.uniform(0.0, 2.0)))
                lm = rng.normal(0.0, 1.0, (n_landmarks, 2))
                frames.append(
                    FrameFeatures(
                        frame_index=t + 1,
                        landmarks=tuple((float(x), float(y)) for x, y in lm),
                        head_translation=tuple(rng.normal(0.0, 1.0, 3)),
                        head_rotation=tuple(rng.normal(0.0, 0.1, 3)),
                        gaze_left=tuple(rng.normal(0.0, 0.2, 3)),
                        gaze_right=tuple(rng.normal(0.0, 0.2, 3)),
                        au_intensities=aus,
                    )
                )
            records.append(
                SequenceRecord(
                    subject_id=subject,
                    sequence_id=f"{q + 1:02d}",
                    frames=frames,
                    pspi=[float(v) for v in pspi],
                    labels=SequenceLabels(vas=5, opi=3),
                    gender="female" if s % 2 == 0 else "male",
                )
            )
    return records


def write_dataset(records: Sequence[SequenceRecord], out_dir) -> Path:
    """Write records as feature CSVs, PSPI and manual-AU files plus a manifest.

    Returns the manifest path. Manual AU files hold the rounded intensity of
    each pain-profile AU so both AU source modes are exercisable.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for rec in records:
        stem = f"{rec.subject_id}_{rec.sequence_id}"
        n_landmarks = len(rec.frames[0].landmarks)
        au_ids = sorted({au for f in rec.frames for au in f.au_intensities})

        feature_file = f"{stem}_features.csv"
        with open(out_dir / feature_file, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            header = ["frame", "success"]
            header += [f"x_{i}" for i in range(n_landmarks)]
            header += [f"y_{i}" for i in range(n_landmarks)]
            header += ["pose_Tx", "pose_Ty", "pose_Tz", "pose_Rx", "pose_Ry", "pose_Rz"]
            header += ["gaze_0_x", "gaze_0_y", "gaze_0_z"]
            header += ["gaze_1_x", "gaze_1_y", "gaze_1_z"]
            header += [f"AU{au:02d}_r" for au in au_ids]
            writer.writerow(header)
            for frame in rec.frames:
                row = [frame.frame_index, int(frame.tracking_ok)]
                row += [format(p[0], ".17g") for p in frame.landmarks]
                row += [format(p[1], ".17g") for p in frame.landmarks]
                for vec in (
                    frame.head_translation,
                    frame.head_rotation,
                    frame.gaze_left,
                    frame.gaze_right,
                ):
                    row += [format(v, ".17g") for v in vec]
                row += [format(frame.au_level(au), ".17g") for au in au_ids]
                writer.writerow(row)

        manual_file = f"{stem}_manual_aus.csv"
        with open(out_dir / manual_file, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["frame", "au", "level"])
            for frame in rec.frames:
                for au in au_ids:
                    writer.writerow(
                        [frame.frame_index, au, int(round(frame.au_level(au)))]
                    )

        pspi_file = None
        if rec.pspi is not None:
            pspi_file = f"{stem}_pspi.csv"
            with open(out_dir / pspi_file, "w", encoding="utf-8") as fh:
                fh.write("pspi\n")
                for value in rec.pspi:
                    fh.write(format(value, ".17g") + "\n")

        entries.append(
            ManifestEntry(
                subject_id=rec.subject_id,
                sequence_id=rec.sequence_id,
                feature_file_path=feature_file,
                pspi_file_path=pspi_file,
                manual_au_file_path=manual_file,
                labels=rec.labels,
                gender=rec.gender,
            )
        )

    manifest_path = out_dir / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(
            manifest_to_json(DatasetManifest(entries)), fh, indent=2, sort_keys=True
        )
        fh.write("\n")
    return manifest_path
