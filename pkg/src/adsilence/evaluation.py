"""Ground-truth annotations, frame-level confusion counts and metrics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from adsilence.errors import (
    AnnotationFormatError,
    AnnotationInconsistent,
    LengthMismatch,
)

ANNOTATION_HEADER = ("level", "start_frame", "end_frame")
REPORT_COLUMNS = ("programme_id", "tp", "tn", "fp", "fn", "mcc", "precision", "recall", "f1")
POOLED_ID = "pooled"


@dataclass(frozen=True)
class AnnotationTrack:
    """Two-level ground truth.

    ``ad_blocks`` are inclusive frame intervals (level 1); ``commercial_boundaries``
    are the frames separating individual commercials, block edges included (level 2).
    """

    ad_blocks: tuple[tuple[int, int], ...]
    commercial_boundaries: tuple[int, ...]
    total_frames: int

    def __post_init__(self):
        blocks = tuple((int(s), int(e)) for s, e in self.ad_blocks)
        bounds = tuple(int(b) for b in self.commercial_boundaries)
        object.__setattr__(self, "ad_blocks", blocks)
        object.__setattr__(self, "commercial_boundaries", bounds)
        _check_track(blocks, bounds, self.total_frames)

    def frame_labels(self) -> np.ndarray:
        labels = np.zeros(self.total_frames, dtype=np.int8)
        for s, e in self.ad_blocks:
            labels[s:e + 1] = 1
        return labels


def _check_track(blocks, bounds, total_frames) -> None:
    if total_frames <= 0:
        raise AnnotationInconsistent(f"total_frames must be positive, got {total_frames}")
    prev_end = -1
    for s, e in blocks:
        if s > e:
            raise AnnotationInconsistent(f"block ({s}, {e}) ends before it starts")
        if s < 0 or e >= total_frames:
            raise AnnotationInconsistent(f"block ({s}, {e}) outside [0, {total_frames})")
        if s <= prev_end:
            raise AnnotationInconsistent(f"block ({s}, {e}) overlaps or precedes the previous block")
        prev_end = e
    if list(bounds) != sorted(bounds):
        raise AnnotationInconsistent("commercial boundaries are not sorted")
    for b in bounds:
        if not any(s <= b <= e for s, e in blocks):
            raise AnnotationInconsistent(f"boundary at frame {b} lies outside every ad block")


def parse_annotations(path, total_frames: int) -> AnnotationTrack:
    """Read an annotation CSV with rows ``level,start_frame,end_frame``.

    ``level`` is ``block`` or ``boundary``; boundary rows repeat the frame in both
    columns. Rows may appear in any order.
    """
    path = Path(path)
    blocks: list[tuple[int, int]] = []
    bounds: list[int] = []
    try:
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.reader(row for row in f if row.strip() and not row.startswith("#"))
            header = next(reader, None)
            if header is None or tuple(h.strip() for h in header) != ANNOTATION_HEADER:
                raise AnnotationFormatError(
                    f"{path}: expected header {','.join(ANNOTATION_HEADER)}, got {header}"
                )
            for lineno, row in enumerate(reader, start=2):
                if len(row) != 3:
                    raise AnnotationFormatError(f"{path}:{lineno}: expected 3 columns")
                level = row[0].strip()
                try:
                    start, end = int(row[1]), int(row[2])
                except ValueError:
                    raise AnnotationFormatError(f"{path}:{lineno}: non-integer frame index") from None
                if level == "block":
                    blocks.append((start, end))
                elif level == "boundary":
                    if start != end:
                        raise AnnotationFormatError(
                            f"{path}:{lineno}: boundary rows need start_frame == end_frame"
                        )
                    bounds.append(start)
                else:
                    raise AnnotationFormatError(f"{path}:{lineno}: unknown level {level!r}")
    except (OSError, UnicodeDecodeError) as exc:
        raise AnnotationFormatError(f"{path}: {exc}") from exc
    return AnnotationTrack(tuple(sorted(blocks)), tuple(sorted(bounds)), total_frames)


def write_annotations(path, track: AnnotationTrack) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(ANNOTATION_HEADER)
        for s, e in track.ad_blocks:
            w.writerow(("block", s, e))
        for b in track.commercial_boundaries:
            w.writerow(("boundary", b, b))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn
        )

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def confusion_counts(pred, truth) -> ConfusionCounts:
    """Per-frame tally with advertising as the positive class."""
    p = np.asarray(pred).astype(bool)
    t = np.asarray(truth).astype(bool)
    if p.shape != t.shape:
        raise LengthMismatch(f"prediction has {p.size} frames, truth has {t.size}")
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    fn = int(np.count_nonzero(~p & t))
    return ConfusionCounts(tp=tp, tn=p.size - tp - fp - fn, fp=fp, fn=fn)


def mcc(counts: ConfusionCounts) -> float:
    """Matthews correlation coefficient; 0 when any marginal is empty."""
    tp, tn, fp, fn = (int(v) for v in (counts.tp, counts.tn, counts.fp, counts.fn))
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        return 0.0
    # Python ints: the products cannot overflow
    value = (tp * tn - fp * fn) / math.sqrt(denom)
    return max(-1.0, min(1.0, value))


def precision_recall_f1(counts: ConfusionCounts) -> tuple[float, float, float]:
    tp, fp, fn = counts.tp, counts.fp, counts.fn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


@dataclass
class EvaluationReport:
    """Per-programme counts plus their pooled sum, in insertion order."""

    rows: list[tuple[str, ConfusionCounts]] = field(default_factory=list)

    def add(self, programme_id: str, counts: ConfusionCounts) -> None:
        self.rows.append((programme_id, counts))

    @property
    def pooled(self) -> ConfusionCounts:
        total = ConfusionCounts()
        for _, c in self.rows:
            total = total + c
        return total

    @property
    def pooled_mcc(self) -> float:
        return mcc(self.pooled)

    def table(self) -> list[dict]:
        out = []
        for pid, c in [*self.rows, (POOLED_ID, self.pooled)]:
            p, r, f1 = precision_recall_f1(c)
            out.append(
                dict(programme_id=pid, tp=c.tp, tn=c.tn, fp=c.fp, fn=c.fn,
                     mcc=mcc(c), precision=p, recall=r, f1=f1)
            )
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.DictWriter(f, fieldnames=REPORT_COLUMNS, lineterminator="\n")
            w.writeheader()
            for row in self.table():
                w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in row.items()})

    def format_text(self) -> str:
        lines = [
            f"{'programme':<16}{'tp':>10}{'tn':>10}{'fp':>8}{'fn':>8}"
            f"{'MCC':>8}{'prec':>8}{'recall':>8}{'F1':>8}"
        ]
        table = self.table()
        for i, row in enumerate(table):
            if i == len(table) - 1:
                lines.append("-" * len(lines[0]))
            lines.append(
                f"{row['programme_id']:<16}{row['tp']:>10}{row['tn']:>10}{row['fp']:>8}{row['fn']:>8}"
                f"{row['mcc']:>8.3f}{row['precision']:>8.3f}{row['recall']:>8.3f}{row['f1']:>8.3f}"
            )
        return "\n".join(lines) + "\n"
