"""Parsers for feature CSVs, manual AU codings, PSPI files and manifests.

The feature CSV layout defaults to the common facial-behavior-toolkit 2.x
export convention (frame, success, x_0..x_67, y_0..y_67, pose_T*/pose_R*,
gaze_0_*/gaze_1_*, AUxx_r) and is overridable via a JSON schema mapping.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .errors import ManifestError, ParseError, SchemaError
from .model import (
    AuIntensity,
    AuProfile,
    DatasetManifest,
    FrameFeatures,
    GENDERS,
    ManifestEntry,
    SequenceLabels,
    SequenceRecord,
    validate_sequence,
)

_AU_COLUMN = re.compile(r"^AU(\d+)_r$")
_LETTER_LEVELS = {"A": 1.0, "B": 2.0, "C": 3.0, "D": 4.0, "E": 5.0}

# AUs whose intensity maps directly onto PSPI, plus binary eye closure.
_PSPI_AUS = (4, 6, 7, 9, 10, 43)


@dataclass(frozen=True)
class FeatureCsvSchema:
    """Column bindings for one feature CSV layout."""

    frame: str = "frame"
    success: str = "success"
    landmark_x: tuple[str, ...] = ()
    landmark_y: tuple[str, ...] = ()
    pose_translation: tuple[str, str, str] = ("pose_Tx", "pose_Ty", "pose_Tz")
    pose_rotation: tuple[str, str, str] = ("pose_Rx", "pose_Ry", "pose_Rz")
    gaze_left: tuple[str, str, str] = ("gaze_0_x", "gaze_0_y", "gaze_0_z")
    gaze_right: tuple[str, str, str] = ("gaze_1_x", "gaze_1_y", "gaze_1_z")
    au_intensity: Mapping[int, str] = field(default_factory=dict)

    def bound_columns(self) -> list[str]:
        cols = [self.frame, self.success]
        cols += list(self.landmark_x) + list(self.landmark_y)
        cols += list(self.pose_translation) + list(self.pose_rotation)
        cols += list(self.gaze_left) + list(self.gaze_right)
        cols += [self.au_intensity[au] for au in sorted(self.au_intensity)]
        return cols

    @classmethod
    def default(cls, n_landmarks: int = 68, au_ids: Sequence[int] = ()) -> "FeatureCsvSchema":
        return cls(
            landmark_x=tuple(f"x_{i}" for i in range(n_landmarks)),
            landmark_y=tuple(f"y_{i}" for i in range(n_landmarks)),
            au_intensity={au: f"AU{au:02d}_r" for au in au_ids},
        )

    @classmethod
    def infer(cls, header: Sequence[str]) -> "FeatureCsvSchema":
        """Build a schema from a header following the default convention."""
        cols = [c.strip() for c in header]
        n_landmarks = sum(1 for c in cols if re.fullmatch(r"x_\d+", c))
        au_ids = sorted(
            int(m.group(1)) for c in cols if (m := _AU_COLUMN.match(c))
        )
        return cls.default(n_landmarks=n_landmarks, au_ids=au_ids)

    @classmethod
    def from_json(cls, path) -> "FeatureCsvSchema":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        try:
            return cls(
                frame=raw["frame"],
                success=raw["success"],
                landmark_x=tuple(raw["landmark_x"]),
                landmark_y=tuple(raw["landmark_y"]),
                pose_translation=tuple(raw["pose_translation"]),
                pose_rotation=tuple(raw["pose_rotation"]),
                gaze_left=tuple(raw["gaze_left"]),
                gaze_right=tuple(raw["gaze_right"]),
                au_intensity={int(k): v for k, v in raw["au_intensity"].items()},
            )
        except KeyError as exc:
            raise SchemaError(f"schema file {path} missing key {exc}") from None


def _cell(row: Mapping[str, str], column: str, line: int, path) -> float:
    raw = row[column].strip()
    try:
        return float(raw)
    except ValueError:
        raise ParseError(
            f"{path}: non-numeric value {raw!r} in column {column!r}, line {line}"
        ) from None


def parse_feature_csv(path, schema: Optional[FeatureCsvSchema] = None) -> list[FrameFeatures]:
    """Parse one tracker-export CSV into per-frame features, in file order."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [c.strip() for c in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if schema is None:
            schema = FeatureCsvSchema.infer(header)
        for column in schema.bound_columns():
            count = header.count(column)
            if count == 0:
                raise SchemaError(f"{path}: missing bound column {column!r}")
            if count > 1:
                raise SchemaError(f"{path}: column {column!r} appears {count} times")
        index = {name: i for i, name in enumerate(header)}

        frames: list[FrameFeatures] = []
        for line, cells in enumerate(reader, start=2):
            row = {name: cells[i] for name, i in index.items()}

            def num(column: str) -> float:
                return _cell(row, column, line, path)

            def vec3(columns) -> tuple[float, float, float]:
                return (num(columns[0]), num(columns[1]), num(columns[2]))

            landmarks = tuple(
                (num(xc), num(yc))
                for xc, yc in zip(schema.landmark_x, schema.landmark_y)
            )
            aus = {
                au: AuIntensity(au, min(5.0, max(0.0, num(col))))
                for au, col in schema.au_intensity.items()
            }
            frames.append(
                FrameFeatures(
                    frame_index=int(num(schema.frame)),
                    landmarks=landmarks,
                    head_translation=vec3(schema.pose_translation),
                    head_rotation=vec3(schema.pose_rotation),
                    gaze_left=vec3(schema.gaze_left),
                    gaze_right=vec3(schema.gaze_right),
                    au_intensities=aus,
                    tracking_ok=num(schema.success) != 0.0,
                )
            )
    if not frames:
        raise ParseError(f"{path}: no data rows")
    return frames


def parse_manual_au_file(path) -> dict[int, dict[int, AuIntensity]]:
    """Parse frame,au,level rows; letter grades A-E map to 1-5."""
    table: dict[int, dict[int, AuIntensity]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError(f"{path}: empty file")
        for column in ("frame", "au", "level"):
            if column not in reader.fieldnames:
                raise SchemaError(f"{path}: missing column {column!r}")
        for line, row in enumerate(reader, start=2):
            try:
                frame = int(row["frame"])
                au_id = int(row["au"])
            except (TypeError, ValueError):
                raise ParseError(f"{path}: bad frame/au on line {line}") from None
            raw = (row["level"] or "").strip().upper()
            if raw in _LETTER_LEVELS:
                level = _LETTER_LEVELS[raw]
            else:
                try:
                    level = float(raw)
                except ValueError:
                    raise ParseError(
                        f"{path}: unknown intensity {row['level']!r} on line {line}"
                    ) from None
                if level not in (0.0, 1.0, 2.0, 3.0, 4.0, 5.0):
                    raise ParseError(
                        f"{path}: manual level {raw} not in 0-5 (line {line})"
                    )
            per_frame = table.setdefault(frame, {})
            if au_id in per_frame:
                raise ParseError(
                    f"{path}: duplicate entry for frame {frame}, AU {au_id}"
                )
            per_frame[au_id] = AuIntensity(au_id, level)
    return table


def merge_au_source(
    frames: Sequence[FrameFeatures],
    manual: Mapping[int, Mapping[int, AuIntensity]],
    mode: str,
    profile: AuProfile,
) -> list[FrameFeatures]:
    """Substitute manually coded intensities for the profile AUs (manual mode)."""
    if mode == "predicted":
        return list(frames)
    if mode != "manual":
        raise ParseError(f"unknown AU source {mode!r}")
    merged = []
    for frame in frames:
        if frame.frame_index not in manual:
            raise ParseError(
                f"manual coding does not cover frame {frame.frame_index}"
            )
        coded = manual[frame.frame_index]
        aus = dict(frame.au_intensities)
        for au in profile.au_ids:
            aus[au] = coded.get(au, AuIntensity(au, 0.0))
        merged.append(
            FrameFeatures(
                frame_index=frame.frame_index,
                landmarks=frame.landmarks,
                head_translation=frame.head_translation,
                head_rotation=frame.head_rotation,
                gaze_left=frame.gaze_left,
                gaze_right=frame.gaze_right,
                au_intensities=aus,
                tracking_ok=frame.tracking_ok,
            )
        )
    return merged


def parse_pspi_file(path) -> list[float]:
    """One pain-intensity value per line (or a single-column CSV with header)."""
    values: list[float] = []
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh]
    lines = [ln for ln in lines if ln]
    if lines and lines[0].lower() == "pspi":
        lines = lines[1:]
    if not lines:
        raise ParseError(f"{path}: empty file")
    for number, raw in enumerate(lines, start=1):
        try:
            value = float(raw)
        except ValueError:
            raise ParseError(f"{path}: non-numeric value {raw!r} on line {number}") from None
        if not 0.0 <= value <= 16.0:
            raise ParseError(
                f"{path}: value {value} outside [0, 16] on line {number}"
            )
        values.append(value)
    return values


def compute_pspi(frame: FrameFeatures) -> float:
    """Prkachin-Solomon pain intensity from a frame's AU intensities."""
    for au in _PSPI_AUS:
        if au not in frame.au_intensities:
            raise ParseError(f"frame {frame.frame_index}: missing AU {au} for PSPI")
    au43 = 1.0 if frame.au_level(43) > 0 else 0.0
    return (
        frame.au_level(4)
        + max(frame.au_level(6), frame.au_level(7))
        + max(frame.au_level(9), frame.au_level(10))
        + au43
    )


def load_manifest(path) -> DatasetManifest:
    """Load the JSON dataset manifest; file paths stay relative to it."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict) or "entries" not in raw:
        raise ManifestError(f"manifest {path} has no 'entries' list")

    entries = []
    for i, item in enumerate(raw["entries"]):
        try:
            labels = None
            if item.get("labels") is not None:
                labels = SequenceLabels(
                    **{k: item["labels"].get(k) for k in ("vas", "sen", "aff", "opi")}
                )
            gender = item.get("gender", "unspecified")
            if gender not in GENDERS:
                raise ManifestError(
                    f"manifest entry {i}: unknown gender {gender!r}"
                )
            entries.append(
                ManifestEntry(
                    subject_id=str(item["subject_id"]),
                    sequence_id=str(item["sequence_id"]),
                    feature_file_path=item["feature_file"],
                    pspi_file_path=item.get("pspi_file"),
                    manual_au_file_path=item.get("manual_au_file"),
                    labels=labels,
                    gender=gender,
                )
            )
        except KeyError as exc:
            raise ManifestError(f"manifest entry {i} missing field {exc}") from None
    try:
        manifest = DatasetManifest(entries)
    except Exception as exc:
        raise ManifestError(str(exc)) from None
    manifest.base_dir = path.parent  # type: ignore[attr-defined]
    return manifest


def manifest_to_json(manifest: DatasetManifest) -> dict:
    entries = []
    for e in manifest.entries:
        item: dict = {
            "subject_id": e.subject_id,
            "sequence_id": e.sequence_id,
            "feature_file": e.feature_file_path,
        }
        if e.pspi_file_path:
            item["pspi_file"] = e.pspi_file_path
        if e.manual_au_file_path:
            item["manual_au_file"] = e.manual_au_file_path
        if e.labels is not None:
            item["labels"] = {
                k: getattr(e.labels, k)
                for k in ("vas", "sen", "aff", "opi")
                if getattr(e.labels, k) is not None
            }
        if e.gender != "unspecified":
            item["gender"] = e.gender
        entries.append(item)
    return {"entries": entries}


def load_dataset(
    manifest: DatasetManifest,
    schema: Optional[FeatureCsvSchema] = None,
    au_source: str = "predicted",
    profile: Optional[AuProfile] = None,
) -> tuple[list[SequenceRecord], list[str]]:
    """Materialize all manifest entries; soft problems come back as findings."""
    base = Path(getattr(manifest, "base_dir", "."))
    records: list[SequenceRecord] = []
    findings: list[str] = []
    for entry in manifest.entries:
        feature_path = base / entry.feature_file_path
        if not feature_path.exists():
            raise ManifestError(f"missing feature file: {feature_path}")
        frames = parse_feature_csv(feature_path, schema)
        if au_source == "manual":
            if entry.manual_au_file_path is None:
                raise ManifestError(
                    f"{entry.subject_id}/{entry.sequence_id}: manual AU source "
                    "requested but no manual_au_file in manifest"
                )
            if profile is None:
                raise ManifestError("manual AU source requires a profile")
            manual = parse_manual_au_file(base / entry.manual_au_file_path)
            frames = merge_au_source(frames, manual, "manual", profile)
        pspi = None
        if entry.pspi_file_path is not None:
            pspi_path = base / entry.pspi_file_path
            if not pspi_path.exists():
                raise ManifestError(f"missing PSPI file: {pspi_path}")
            pspi = parse_pspi_file(pspi_path)
        record = SequenceRecord(
            subject_id=entry.subject_id,
            sequence_id=entry.sequence_id,
            frames=frames,
            pspi=pspi,
            labels=entry.labels,
            gender=entry.gender,
        )
        for finding in validate_sequence(record):
            findings.append(f"{entry.subject_id}/{entry.sequence_id} {finding}")
        records.append(record)
    return records, findings
