"""Classifier expectation and interpretation against expressiveness scores.

Trains the pain/neutral forest on manually coded AU intensities, validates it
leave-one-subject-out with per-subject F1, partitions predictions into the
four outcome scenarios, and checks the agreement expectation: classifier
confidence should rise and fall with the expressiveness score.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .analytics import pearson
from .errors import ComputeError, ParseError
from .forest import ForestHyperparams, RandomForest
from .model import AuProfile, PAIN_PROFILE, SequenceRecord

FrameKey = tuple[str, str, int]

SCENARIOS = ("TP", "TN", "type1", "type2")

CONFIDENCE_THRESHOLD = 0.5


@dataclass(frozen=True)
class Prediction:
    key: FrameKey
    confidence_pain: float
    label_pain: Optional[bool] = None

    @property
    def predicted_pain(self) -> bool:
        return self.confidence_pain >= CONFIDENCE_THRESHOLD

    @property
    def scenario(self) -> str:
        if self.label_pain is None:
            raise ComputeError(f"prediction {self.key} has no ground truth")
        if self.label_pain:
            return "TP" if self.predicted_pain else "type2"
        return "type1" if self.predicted_pain else "TN"


@dataclass
class FrameTable:
    """Feature matrix of profile AU intensities plus pain labels per frame."""

    keys: list[FrameKey]
    X: np.ndarray
    y: np.ndarray  # 1 = pain
    subjects: list[str]


def build_frame_table(
    records: Sequence[SequenceRecord],
    profile: AuProfile = PAIN_PROFILE,
    pspi_threshold: float = 0.0,
) -> FrameTable:
    """Label each frame pain iff its PSPI exceeds the threshold."""
    keys: list[FrameKey] = []
    rows: list[list[float]] = []
    labels: list[int] = []
    subjects: list[str] = []
    for rec in sorted(records, key=lambda r: r.key):
        if rec.pspi is None:
            raise ComputeError(f"sequence {rec.key} has no PSPI labels")
        for frame, pspi in zip(rec.frames, rec.pspi):
            keys.append((rec.subject_id, rec.sequence_id, frame.frame_index))
            rows.append([frame.au_level(au) for au in profile.au_ids])
            labels.append(1 if pspi > pspi_threshold else 0)
            subjects.append(rec.subject_id)
    if not keys:
        raise ComputeError("no labeled frames")
    return FrameTable(
        keys=keys,
        X=np.asarray(rows, dtype=float),
        y=np.asarray(labels, dtype=int),
        subjects=subjects,
    )


def f1_pain(labels: np.ndarray, predicted: np.ndarray) -> float:
    """F1 for the positive class; 0 when there are no true or predicted pains."""
    tp = int(((labels == 1) & (predicted == 1)).sum())
    fp = int(((labels == 0) & (predicted == 1)).sum())
    fn = int(((labels == 1) & (predicted == 0)).sum())
    if 2 * tp + fp + fn == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


@dataclass
class LosoResult:
    per_subject_f1: dict[str, float]
    mean_f1: float
    predictions: list[Prediction]
    findings: list[str] = field(default_factory=list)


def loso_validate(
    table: FrameTable,
    hyperparams: Optional[ForestHyperparams] = None,
    seed: int = 0,
) -> LosoResult:
    """Hold out each subject in turn, training on all others."""
    subjects = sorted(set(table.subjects))
    if len(subjects) < 2:
        raise ComputeError("leave-one-subject-out needs at least 2 subjects")
    subject_arr = np.array(table.subjects)
    per_subject_f1: dict[str, float] = {}
    predictions: list[Prediction] = []
    findings: list[str] = []
    for subject in subjects:
        held = subject_arr == subject
        if not held.any():
            findings.append(f"subject {subject} has no frames; skipped")
            continue
        forest = RandomForest(hyperparams=hyperparams, seed=seed)
        forest.fit(table.X[~held], table.y[~held])
        conf = forest.predict_confidences(table.X[held])
        labels = table.y[held]
        predicted = (conf >= CONFIDENCE_THRESHOLD).astype(int)
        per_subject_f1[subject] = f1_pain(labels, predicted)
        for i, idx in enumerate(np.nonzero(held)[0]):
            predictions.append(
                Prediction(
                    key=table.keys[idx],
                    confidence_pain=float(conf[i]),
                    label_pain=bool(labels[i]),
                )
            )
    mean_f1 = sum(per_subject_f1.values()) / len(per_subject_f1)
    predictions.sort(key=lambda p: p.key)
    return LosoResult(
        per_subject_f1=per_subject_f1,
        mean_f1=mean_f1,
        predictions=predictions,
        findings=findings,
    )


def scenario_partition(
    predictions: Sequence[Prediction],
) -> dict[str, list[Prediction]]:
    """Exhaustive, disjoint split into TP / TN / type1 / type2."""
    buckets: dict[str, list[Prediction]] = {s: [] for s in SCENARIOS}
    for pred in predictions:
        buckets[pred.scenario].append(pred)
    return buckets


@dataclass(frozen=True)
class AgreementThresholds:
    """Reference points for flagging score/confidence disagreement.

    A frame is flagged when its expressiveness score is at or above
    `ted_high` while confidence is at or below `conf_low`, or when the score
    is at or below `ted_low` while confidence is at or above `conf_high`.
    """

    ted_high: float = 100.0
    conf_low: float = 0.1
    ted_low: float = 10.0
    conf_high: float = 0.9


@dataclass(frozen=True)
class DisagreementFlag:
    key: FrameKey
    ted_score: float
    confidence_pain: float
    scenario: str
    reason: str

    def to_dict(self) -> dict:
        return {
            "subject": self.key[0],
            "sequence": self.key[1],
            "frame": self.key[2],
            "ted_score": self.ted_score,
            "confidence_pain": self.confidence_pain,
            "scenario": self.scenario,
            "reason": self.reason,
        }


@dataclass
class AgreementResult:
    scenario_correlation: dict[str, float]
    flags: list[DisagreementFlag]
    findings: list[str]


def agreement_analysis(
    predictions: Sequence[Prediction],
    ted_by_key: Mapping[FrameKey, float],
    thresholds: Optional[AgreementThresholds] = None,
) -> AgreementResult:
    """Correlate score with confidence per scenario and flag disagreements."""
    thresholds = thresholds or AgreementThresholds()
    for pred in predictions:
        if pred.key not in ted_by_key:
            raise ComputeError(f"prediction {pred.key} has no expressiveness score")

    buckets = scenario_partition(predictions)
    correlations: dict[str, float] = {}
    findings: list[str] = []
    for scenario in SCENARIOS:
        preds = buckets[scenario]
        if not preds:
            findings.append(f"scenario {scenario} is empty; omitted")
            continue
        ted = [ted_by_key[p.key] for p in preds]
        conf = [p.confidence_pain for p in preds]
        try:
            correlations[scenario] = pearson(ted, conf)
        except ComputeError as exc:
            findings.append(f"scenario {scenario}: {exc}")

    flags: list[DisagreementFlag] = []
    for pred in sorted(predictions, key=lambda p: p.key):
        ted = ted_by_key[pred.key]
        reason = None
        if ted >= thresholds.ted_high and pred.confidence_pain <= thresholds.conf_low:
            reason = "high score, low confidence"
        elif ted <= thresholds.ted_low and pred.confidence_pain >= thresholds.conf_high:
            reason = "low score, high confidence"
        if reason is not None:
            flags.append(
                DisagreementFlag(
                    key=pred.key,
                    ted_score=ted,
                    confidence_pain=pred.confidence_pain,
                    scenario=pred.scenario,
                    reason=reason,
                )
            )
    return AgreementResult(
        scenario_correlation=correlations, flags=flags, findings=findings
    )


@dataclass
class InterpretReport:
    per_subject_f1: dict[str, float]
    mean_f1: float
    scenario_counts: dict[str, int]
    scenario_correlation: dict[str, float]
    flags: list[DisagreementFlag]
    findings: list[str]

    def to_dict(self) -> dict:
        return {
            "per_subject_f1": dict(sorted(self.per_subject_f1.items())),
            "mean_f1": self.mean_f1,
            "scenario_counts": self.scenario_counts,
            "scenario_correlation": self.scenario_correlation,
            "flags": [f.to_dict() for f in self.flags],
            "findings": list(self.findings),
        }


def interpret_dataset(
    table: FrameTable,
    ted_by_key: Mapping[FrameKey, float],
    hyperparams: Optional[ForestHyperparams] = None,
    seed: int = 0,
    thresholds: Optional[AgreementThresholds] = None,
    external_predictions: Optional[Sequence[Prediction]] = None,
) -> tuple[InterpretReport, list[Prediction]]:
    """Full interpretation pipeline: LOSO (or imported predictions) + agreement."""
    if external_predictions is not None:
        label_by_key = {k: bool(v) for k, v in zip(table.keys, table.y)}
        predictions = []
        for pred in external_predictions:
            if pred.key not in label_by_key:
                raise ComputeError(f"external prediction {pred.key} not in dataset")
            predictions.append(
                Prediction(
                    key=pred.key,
                    confidence_pain=pred.confidence_pain,
                    label_pain=label_by_key[pred.key],
                )
            )
        per_subject_f1: dict[str, float] = {}
        mean_f1 = float("nan")
        findings = ["external predictions: no LOSO F1 computed"]
    else:
        loso = loso_validate(table, hyperparams=hyperparams, seed=seed)
        predictions = loso.predictions
        per_subject_f1 = loso.per_subject_f1
        mean_f1 = loso.mean_f1
        findings = list(loso.findings)

    agreement = agreement_analysis(predictions, ted_by_key, thresholds)
    buckets = scenario_partition(predictions)
    report = InterpretReport(
        per_subject_f1=per_subject_f1,
        mean_f1=mean_f1,
        scenario_counts={s: len(buckets[s]) for s in SCENARIOS},
        scenario_correlation=agreement.scenario_correlation,
        flags=agreement.flags,
        findings=findings + agreement.findings,
    )
    return report, predictions


def write_predictions_csv(predictions: Sequence[Prediction], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject", "sequence", "frame", "confidence_pain", "predicted"])
        for pred in sorted(predictions, key=lambda p: p.key):
            writer.writerow(
                [
                    pred.key[0],
                    pred.key[1],
                    pred.key[2],
                    format(pred.confidence_pain, ".17g"),
                    "pain" if pred.predicted_pain else "neutral",
                ]
            )


def read_predictions_csv(path) -> list[Prediction]:
    predictions = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"subject", "sequence", "frame", "confidence_pain"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ParseError(f"{path}: predictions CSV needs columns {sorted(required)}")
        for line, row in enumerate(reader, start=2):
            try:
                confidence = float(row["confidence_pain"])
            except ValueError:
                raise ParseError(f"{path}: bad confidence on line {line}") from None
            if not 0.0 <= confidence <= 1.0:
                raise ParseError(f"{path}: confidence outside [0, 1] on line {line}")
            predictions.append(
                Prediction(
                    key=(row["subject"], row["sequence"], int(row["frame"])),
                    confidence_pain=confidence,
                )
            )
    return predictions
