"""Linear probability model separating boundary from non-boundary silences.

Training, scoring, labelling against annotations, programme-level
leave-one-out cross-validation and JSON persistence.
"""

from __future__ import annotations

import bisect
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from adsilence.ad_grouping import GroupingParams, group_boundaries, regions_to_frame_labels
from adsilence.energy_analysis import ETA_DB, SilenceEvent
from adsilence.errors import DegenerateLabels, InsufficientData, ModelFormatError
from adsilence.evaluation import (
    AnnotationTrack,
    ConfusionCounts,
    EvaluationReport,
    confusion_counts,
    mcc,
)
from adsilence.silence_features import FEATURE_NAMES, HALF_WIDTH, STAT_CONVENTIONS, FeatureVector

BETA = 0.25
LABEL_TOLERANCE = 12
FORMAT_VERSION = 1
N_FEATURES = len(FEATURE_NAMES)
MIN_EXAMPLES = N_FEATURES + 2
GRAM_RCOND = 1e-10


@dataclass(frozen=True)
class RegressionModel:
    weights: tuple[float, ...]
    intercept: float
    beta: float = BETA
    eta: float = ETA_DB
    half_width_frames: int = HALF_WIDTH
    stat_conventions: str = STAT_CONVENTIONS
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "intercept", float(self.intercept))
        if len(w) != N_FEATURES:
            raise ModelFormatError(f"expected {N_FEATURES} weights, got {len(w)}")
        if not all(math.isfinite(v) for v in (*w, self.intercept)):
            raise ModelFormatError("weights and intercept must be finite")
        if not 0.0 < self.beta < 1.0:
            raise ModelFormatError(f"beta must lie in (0, 1), got {self.beta}")
        if not self.eta < 0.0:
            raise ModelFormatError(f"eta must be negative, got {self.eta}")
        if self.half_width_frames <= 0:
            raise ModelFormatError("half_width_frames must be positive")


@dataclass(frozen=True)
class LabelledExample:
    features: FeatureVector
    label: float
    programme_id: str
    anchor_frame: int

    def __post_init__(self):
        if self.label not in (0.0, 1.0):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


def design_matrix(examples: Sequence[LabelledExample]) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``[1, features...]`` and the 0/1 target vector."""
    X = np.ones((len(examples), N_FEATURES + 1))
    for i, ex in enumerate(examples):
        X[i, 1:] = ex.features.as_array()
    y = np.array([ex.label for ex in examples], dtype=np.float64)
    return X, y


def solve_least_squares(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Normal-equation solution, minimum-norm pseudo-inverse when the Gram matrix is singular."""
    gram = X.T @ X
    s = np.linalg.svd(gram, compute_uv=False)
    if s[0] > 0 and s[-1] / s[0] > GRAM_RCOND:
        return np.linalg.solve(gram, X.T @ y)
    return np.linalg.pinv(X, rcond=GRAM_RCOND) @ y


def fit_arrays(features, targets, **meta) -> RegressionModel:
    """Least-squares fit of arbitrary real ``targets`` on an ``(n, 7)`` feature array."""
    F = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if F.ndim != 2 or F.shape[1] != N_FEATURES or F.shape[0] != y.shape[0]:
        raise ValueError(f"expected ({y.shape[0]}, {N_FEATURES}) features, got {F.shape}")
    if F.shape[0] < MIN_EXAMPLES:
        raise InsufficientData(f"need at least {MIN_EXAMPLES} examples to fit, got {F.shape[0]}")
    X = np.column_stack((np.ones(F.shape[0]), F))
    coef = solve_least_squares(X, y)
    return RegressionModel(tuple(coef[1:]), float(coef[0]), **meta)


def fit_ols(examples: Sequence[LabelledExample], *, beta: float = BETA, eta: float = ETA_DB,
            half_width_frames: int = HALF_WIDTH) -> RegressionModel:
    """Least-squares fit of the 0/1 labels on the seven features plus an intercept.

    Identical labels issue a :class:`DegenerateLabels` warning and return the
    constant model.
    """
    n = len(examples)
    if n < MIN_EXAMPLES:
        raise InsufficientData(f"need at least {MIN_EXAMPLES} examples to fit, got {n}")
    X, y = design_matrix(examples)
    meta = dict(beta=beta, eta=eta, half_width_frames=half_width_frames)
    if np.all(y == y[0]):
        warnings.warn(
            f"all {n} training labels equal {y[0]:g}; model is constant",
            DegenerateLabels,
            stacklevel=2,
        )
        return RegressionModel((0.0,) * N_FEATURES, float(y[0]), **meta)
    return fit_arrays(X[:, 1:], y, **meta)


def residual_norm(model: RegressionModel, examples: Sequence[LabelledExample]) -> float:
    X, y = design_matrix(examples)
    coef = np.concatenate(([model.intercept], model.weights))
    return float(np.linalg.norm(y - X @ coef))


def predict(model: RegressionModel, features: FeatureVector) -> float:
    return model.intercept + float(np.dot(model.weights, features.as_array()))


def classify_silences(model: RegressionModel, events) -> list[SilenceEvent]:
    """Events whose score is strictly greater than ``model.beta``, in input order."""
    return [ev for ev, fv in events if predict(model, fv) > model.beta]


def label_events(events: Sequence[SilenceEvent], annotations: AnnotationTrack,
                 tolerance_frames: int = LABEL_TOLERANCE, programme_id: str = "",
                 features: Sequence[FeatureVector] | None = None) -> list[LabelledExample]:
    """Label an event 1 when a commercial boundary lies within its span widened by the tolerance.

    ``features`` defaults to all-zero vectors, which is only useful when the
    caller inspects the labels alone.
    """
    bounds = annotations.commercial_boundaries
    if features is None:
        features = [FeatureVector(0, 0, 0, 0, 0, 0, 0)] * len(events)
    if len(features) != len(events):
        raise ValueError("features and events differ in length")
    out = []
    for ev, fv in zip(events, features):
        lo = ev.start_frame - tolerance_frames
        hi = ev.end_frame + tolerance_frames
        k = bisect.bisect_left(bounds, lo)
        hit = k < len(bounds) and bounds[k] <= hi
        out.append(LabelledExample(fv, 1.0 if hit else 0.0, programme_id, ev.anchor_frame))
    return out


@dataclass
class Programme:
    """One recording's analysed silences and ground truth."""

    programme_id: str
    events: list[SilenceEvent]
    features: list[FeatureVector]
    annotations: AnnotationTrack


@dataclass
class CrossValReport:
    folds: list[tuple[str, ConfusionCounts, float]] = field(default_factory=list)
    pooled: ConfusionCounts = field(default_factory=ConfusionCounts)
    pooled_mcc: float = 0.0
    models: dict[str, RegressionModel] = field(default_factory=dict)

    def as_evaluation(self) -> EvaluationReport:
        report = EvaluationReport()
        for pid, counts, _ in self.folds:
            report.add(pid, counts)
        return report


def detect_regions(model: RegressionModel, events, features, total_frames: int,
                   params: GroupingParams = GroupingParams()):
    accepted = classify_silences(model, zip(events, features))
    return group_boundaries([ev.anchor_frame for ev in accepted], params, total_frames)


def cross_validate(corpus: Sequence[Programme], beta: float = BETA, *,
                   params: GroupingParams = GroupingParams(),
                   tolerance_frames: int = LABEL_TOLERANCE,
                   eta: float = ETA_DB, half_width_frames: int = HALF_WIDTH,
                   fit: Callable[..., RegressionModel] = fit_ols) -> CrossValReport:
    """Leave-one-programme-out evaluation of the full detection chain.

    Entries sharing a ``programme_id`` form a single fold. ``fit`` is injectable
    so tests can observe which examples each fold trains on.
    """
    order: list[str] = []
    by_id: dict[str, list[Programme]] = {}
    for prog in corpus:
        if prog.programme_id not in by_id:
            order.append(prog.programme_id)
            by_id[prog.programme_id] = []
        by_id[prog.programme_id].append(prog)
    if len(order) < 2:
        raise InsufficientData(f"cross-validation needs at least 2 programmes, got {len(order)}")

    examples = {
        pid: [ex for p in progs
              for ex in label_events(p.events, p.annotations, tolerance_frames, pid, p.features)]
        for pid, progs in by_id.items()
    }
    report = CrossValReport()
    for held_out in order:
        train = [ex for pid in order if pid != held_out for ex in examples[pid]]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateLabels)
            model = fit(train, beta=beta, eta=eta, half_width_frames=half_width_frames)
        counts = ConfusionCounts()
        for p in by_id[held_out]:
            total = p.annotations.total_frames
            regions = detect_regions(model, p.events, p.features, total, params)
            counts = counts + confusion_counts(
                regions_to_frame_labels(regions, total), p.annotations.frame_labels()
            )
        report.folds.append((held_out, counts, mcc(counts)))
        report.models[held_out] = model
        report.pooled = report.pooled + counts
    report.pooled_mcc = mcc(report.pooled)
    return report


_MODEL_FIELDS = ("format_version", "weights", "intercept", "beta", "eta",
                 "half_width_frames", "stat_conventions")


def model_to_dict(model: RegressionModel) -> dict:
    return {
        "format_version": model.format_version,
        "weights": list(model.weights),
        "feature_order": list(FEATURE_NAMES),
        "intercept": model.intercept,
        "beta": model.beta,
        "eta": model.eta,
        "half_width_frames": model.half_width_frames,
        "stat_conventions": model.stat_conventions,
    }


def save_model(model: RegressionModel, path) -> None:
    # json writes floats with repr(), which round-trips exactly
    text = json.dumps(model_to_dict(model), indent=2, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _number(doc: dict, key: str) -> float:
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ModelFormatError(f"field {key!r} must be a finite number, got {v!r}")
    return float(v)


def load_model(path) -> RegressionModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: cannot read model: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFormatError(f"{path}: model must be a JSON object")
    missing = [k for k in _MODEL_FIELDS if k not in doc]
    if missing:
        raise ModelFormatError(f"{path}: missing field(s) {', '.join(missing)}")
    if doc["format_version"] != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported format_version {doc['format_version']!r}")
    if doc["stat_conventions"] != STAT_CONVENTIONS:
        raise ModelFormatError(
            f"{path}: model uses statistics {doc['stat_conventions']!r}, expected {STAT_CONVENTIONS!r}"
        )
    weights = doc["weights"]
    if not isinstance(weights, list) or len(weights) != N_FEATURES:
        raise ModelFormatError(f"{path}: weights must be an array of {N_FEATURES} numbers")
    half_width = doc["half_width_frames"]
    if isinstance(half_width, bool) or not isinstance(half_width, int):
        raise ModelFormatError(f"{path}: half_width_frames must be an integer")
    return RegressionModel(
        weights=tuple(_number({"w": w}, "w") for w in weights),
        intercept=_number(doc, "intercept"),
        beta=_number(doc, "beta"),
        eta=_number(doc, "eta"),
        half_width_frames=half_width,
        stat_conventions=doc["stat_conventions"],
        format_version=FORMAT_VERSION,
    )
