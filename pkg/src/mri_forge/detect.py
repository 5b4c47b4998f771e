"""Face-to-video verdict aggregation, the metrics battery, and the
two-parameter grid search.

A video is called fake when strictly more than ``fake_fraction`` of its
faces score strictly above ``fake_frame_threshold``. The fraction of
above-threshold faces doubles as the video-level score fed to the ROC
curve; the verdict rule by itself defines no video score, so the choice
is stamped into every report header.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

VIDEO_SCORE_NOTE = (
    "video_score = fraction of faces with p_fake above the operating "
    "threshold (the monotone statistic behind the verdict rule)"
)

# grid-searched operating points, keyed by the pipeline they were tuned for
PRESET_PARAMS = {
    "plain-frames": (0.80, 0.30),
    "mri": (0.70, 0.30),
}

DEFAULT_GRID = [round(0.05 * i, 2) for i in range(1, 20)]


@dataclass(frozen=True)
class FaceScore:
    """Fakeness probability for one detected face."""

    video_id: str
    frame_idx: int
    face_idx: int
    p_fake: float

    def __post_init__(self):
        if not 0.0 <= self.p_fake <= 1.0:
            raise ValueError(f"p_fake must lie in [0, 1], got {self.p_fake}")


@dataclass(frozen=True)
class AggregationParams:
    fake_frame_threshold: float
    fake_fraction: float

    def __post_init__(self):
        if not 0.0 <= self.fake_frame_threshold <= 1.0:
            raise ValueError("fake_frame_threshold must lie in [0, 1]")
        if not 0.0 <= self.fake_fraction <= 1.0:
            raise ValueError("fake_fraction must lie in [0, 1]")

    @classmethod
    def preset(cls, name: str) -> "AggregationParams":
        if name not in PRESET_PARAMS:
            raise ValueError(
                f"unknown preset {name!r}; have {sorted(PRESET_PARAMS)}"
            )
        return cls(*PRESET_PARAMS[name])


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with fake as the positive class."""

    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricsReport:
    """The standard detection metric set; None marks undefined ratios."""

    tpr: float | None
    fnr: float | None
    fpr: float | None
    tnr: float | None
    accuracy: float | None
    balanced_accuracy: float | None
    f1: float | None
    precision: float | None
    specificity: float | None
    auc_roc: float | None

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


def load_scores(path) -> list:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"scores file not found: {path}")
    scores = []
    seen = set()
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        key = (rec["video_id"], int(rec["frame_idx"]), int(rec["face_idx"]))
        if key in seen:
            raise ValueError(f"duplicate face score for {key} in {path}")
        seen.add(key)
        scores.append(
            FaceScore(rec["video_id"], int(rec["frame_idx"]), int(rec["face_idx"]), float(rec["p_fake"]))
        )
    if not scores:
        raise ValueError(f"scores file is empty: {path}")
    return scores


def load_labels(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"labels file not found: {path}")
    labels = {}
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        if rec["label"] not in ("real", "fake"):
            raise ValueError(f"bad label {rec['label']!r} for {rec['video_id']}")
        labels[rec["video_id"]] = rec["label"]
    if not labels:
        raise ValueError(f"labels file is empty: {path}")
    return labels


def group_by_video(scores) -> dict:
    grouped: dict = {}
    for s in scores:
        grouped.setdefault(s.video_id, []).append(s)
    return grouped


def aggregate_video(scores, params: AggregationParams):
    """Verdict and score for one video's face scores.

    Both comparisons are strict: a face counts when p_fake > threshold,
    the video is fake when counted/total > fraction.
    """
    if not scores:
        raise ValueError("cannot aggregate an empty score list; video undetermined")
    hits = sum(1 for s in scores if s.p_fake > params.fake_frame_threshold)
    score = hits / len(scores)
    verdict = "fake" if score > params.fake_fraction else "real"
    return verdict, score


def confusion(verdicts, labels) -> ConfusionMatrix:
    """Standard counts from aligned verdict/label lists; fake is positive."""
    if len(verdicts) != len(labels):
        raise ValueError(f"length mismatch: {len(verdicts)} verdicts vs {len(labels)} labels")
    tp = fp = tn = fn = 0
    for v, l in zip(verdicts, labels):
        if l == "fake":
            if v == "fake":
                tp += 1
            else:
                fn += 1
        else:
            if v == "fake":
                fp += 1
            else:
                tn += 1
    return ConfusionMatrix(tp, fp, tn, fn)


def roc_auc(scores, labels) -> float:
    """P(random positive outscores random negative), half credit for ties.

    Computed by midranks; the trapezoidal ROC integral gives the same
    number and is used as the cross-check in tests.
    """
    scores = np.asarray(scores, dtype=np.float64)
    is_pos = np.asarray([l == "fake" if isinstance(l, str) else bool(l) for l in labels])
    if len(scores) != len(is_pos):
        raise ValueError("scores and labels differ in length")
    n_pos = int(is_pos.sum())
    n_neg = len(is_pos) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError(
            f"AUC needs both classes, got {n_pos} positive and {n_neg} negative"
        )
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j < len(scores) and sorted_scores[j] == sorted_scores[i]:
            j += 1
        # midrank for the tie group, 1-based
        ranks[order[i:j]] = (i + j + 1) / 2.0
        i = j
    pos_rank_sum = float(ranks[is_pos].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def metrics(cm: ConfusionMatrix, video_scores=None, labels=None) -> MetricsReport:
    """Table of detection metrics; zero-denominator ratios come back None."""
    tpr = _ratio(cm.tp, cm.tp + cm.fn)
    tnr = _ratio(cm.tn, cm.tn + cm.fp)
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    accuracy = _ratio(cm.tp + cm.tn, cm.total)
    balanced = (tpr + tnr) / 2.0 if tpr is not None and tnr is not None else None
    f1 = None
    if precision is not None and tpr is not None and precision + tpr > 0:
        f1 = 2.0 * precision * tpr / (precision + tpr)
    auc = None
    if video_scores is not None and labels is not None:
        if len(video_scores) != cm.total:
            raise ValueError(
                f"score list length {len(video_scores)} does not match "
                f"confusion total {cm.total}"
            )
        auc = roc_auc(video_scores, labels)
    return MetricsReport(
        tpr=tpr,
        fnr=1.0 - tpr if tpr is not None else None,
        fpr=1.0 - tnr if tnr is not None else None,
        tnr=tnr,
        accuracy=accuracy,
        balanced_accuracy=balanced,
        f1=f1,
        precision=precision,
        specificity=tnr,
        auc_roc=auc,
    )


def evaluate(grouped_scores: dict, labels: dict, params: AggregationParams):
    """Aggregate every video and compute the metric battery.

    Returns (verdicts by video, confusion matrix, metrics report).
    Videos without scores are dropped, videos without labels are an error.
    """
    verdicts = {}
    vscores = {}
    for vid in sorted(grouped_scores):
        if vid not in labels:
            raise ValueError(f"no label for video {vid}")
        verdict, score = aggregate_video(grouped_scores[vid], params)
        verdicts[vid] = verdict
        vscores[vid] = score
    if not verdicts:
        raise ValueError("no videos to evaluate")
    ordered = sorted(verdicts)
    cm = confusion([verdicts[v] for v in ordered], [labels[v] for v in ordered])
    report = metrics(cm, [vscores[v] for v in ordered], [labels[v] for v in ordered])
    return verdicts, cm, report


def grid_search(
    grouped_scores: dict,
    labels: dict,
    thresholds=None,
    fractions=None,
):
    """Exhaustive search maximizing balanced accuracy.

    Ties break toward the lower threshold, then the lower fraction, so
    the result is deterministic. Returns (best params, grid table); the
    table carries one row per cell for audit.
    """
    thresholds = list(thresholds) if thresholds is not None else list(DEFAULT_GRID)
    fractions = list(fractions) if fractions is not None else list(DEFAULT_GRID)
    if not thresholds or not fractions:
        raise ValueError("grids must be non-empty")
    table = []
    best = None
    best_key = None
    for thr in sorted(thresholds):
        for frac in sorted(fractions):
            params = AggregationParams(thr, frac)
            _, cm, report = evaluate(grouped_scores, labels, params)
            objective = report.balanced_accuracy
            if objective is None:
                raise ValueError("grid search needs both classes present")
            table.append(
                {
                    "fake_frame_threshold": thr,
                    "fake_fraction": frac,
                    "tp": cm.tp,
                    "fp": cm.fp,
                    "tn": cm.tn,
                    "fn": cm.fn,
                    "accuracy": report.accuracy,
                    "balanced_accuracy": objective,
                }
            )
            key = (-objective, thr, frac)
            if best_key is None or key < best_key:
                best_key = key
                best = params
    return best, table
