"""Long-term grouping of accepted boundary silences into advertising regions."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from adsilence.errors import AnnotationFormatError, RegionOutOfBounds

WINDOW_FRAMES = 3750  # 150 s at 25 fps
MIN_REGION_FRAMES = 1500  # 60 s
MIN_SILENCES = 2

REGION_HEADER = ("start_frame", "end_frame", "silence_count")


@dataclass(frozen=True)
class GroupingParams:
    window_frames: int = WINDOW_FRAMES
    min_region_frames: int = MIN_REGION_FRAMES
    min_silences: int = MIN_SILENCES
    # shift both edges forward, reproducing "marked when the silence exits the window"
    edge_offset_frames: int = 0

    def __post_init__(self):
        if self.window_frames <= 0:
            raise ValueError("window_frames must be positive")
        if self.min_region_frames <= 0:
            raise ValueError("min_region_frames must be positive")
        if self.min_silences < 2:
            raise ValueError("min_silences must be at least 2")
        if self.edge_offset_frames < 0:
            raise ValueError("edge_offset_frames must be non-negative")


@dataclass(frozen=True)
class AdRegion:
    start_frame: int
    end_frame: int  # inclusive
    silence_count: int

    @property
    def n_frames(self) -> int:
        return self.end_frame - self.start_frame + 1


def _chains(anchors: np.ndarray, window_frames: int) -> list[np.ndarray]:
    if anchors.size == 0:
        return []
    splits = np.flatnonzero(np.diff(anchors) > window_frames) + 1
    return np.split(anchors, splits)


def group_boundaries(anchors, params: GroupingParams = GroupingParams(), total_frames: int | None = None) -> list[AdRegion]:
    """Chain anchors whose gaps are at most ``window_frames`` and keep the long chains.

    A chain becomes a region ``[first, last]`` when it holds at least
    ``min_silences`` anchors and spans at least ``min_region_frames`` frames.
    """
    a = np.asarray(anchors, dtype=np.int64)
    if a.size and np.any(np.diff(a) < 0):
        raise ValueError("anchors must be sorted ascending")
    if total_frames is not None and a.size and (a[0] < 0 or a[-1] >= total_frames):
        raise RegionOutOfBounds(f"anchors outside [0, {total_frames})")
    regions = []
    for chain in _chains(a, params.window_frames):
        first, last = int(chain[0]), int(chain[-1])
        if chain.size < params.min_silences or last - first + 1 < params.min_region_frames:
            continue
        start = first + params.edge_offset_frames
        end = last + params.edge_offset_frames
        if total_frames is not None:
            start = min(start, total_frames - 1)
            end = min(end, total_frames - 1)
        regions.append(AdRegion(start, end, int(chain.size)))
    return regions


def regions_to_frame_labels(regions, total_frames: int) -> np.ndarray:
    labels = np.zeros(total_frames, dtype=np.int8)
    prev_end = -1
    for r in regions:
        if r.start_frame < 0 or r.end_frame >= total_frames or r.start_frame > r.end_frame:
            raise RegionOutOfBounds(
                f"region [{r.start_frame}, {r.end_frame}] outside [0, {total_frames})"
            )
        if r.start_frame <= prev_end:
            raise RegionOutOfBounds("regions must be sorted and disjoint")
        prev_end = r.end_frame
        labels[r.start_frame:r.end_frame + 1] = 1
    return labels


def labels_to_regions(labels) -> list[tuple[int, int]]:
    """Inclusive ``(start, end)`` runs of ones in a 0/1 frame sequence."""
    x = np.concatenate(([0], np.asarray(labels, dtype=np.int8) != 0, [0])).astype(np.int8)
    d = np.diff(x)
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1) - 1
    return [(int(s), int(e)) for s, e in zip(starts, ends)]


def write_regions(path, regions, params: GroupingParams) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write("# " + ",".join(f"{k}={v}" for k, v in asdict(params).items()) + "\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(REGION_HEADER)
        for r in regions:
            w.writerow((r.start_frame, r.end_frame, r.silence_count))


def read_regions(path) -> list[AdRegion]:
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as f:
            rows = [line for line in f if line.strip() and not line.startswith("#")]
    except (OSError, UnicodeDecodeError) as exc:
        raise AnnotationFormatError(f"{path}: {exc}") from exc
    reader = csv.reader(rows)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != REGION_HEADER:
        raise AnnotationFormatError(f"{path}: expected header {','.join(REGION_HEADER)}")
    try:
        return [AdRegion(int(s), int(e), int(c)) for s, e, c in reader]
    except ValueError as exc:
        raise AnnotationFormatError(f"{path}: {exc}") from exc
