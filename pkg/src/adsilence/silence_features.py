"""Seven-statistic description of the energy context around a silence."""

from __future__ import annotations

from dataclasses import astuple, dataclass, fields

import numpy as np

from adsilence.energy_analysis import EnergyTrack
from adsilence.errors import AnchorOutOfBounds, EmptyWindow

HALF_WIDTH = 150
MOMENT_EPS = 1e-12

# recorded in model files so a model is only applied with matching statistics
STAT_CONVENTIONS = "population-moments;excess-kurtosis;quantile-linear-n-1;degenerate-zero;v1"

FEATURE_NAMES = ("max", "mean", "min", "iqr", "std", "skewness", "kurtosis")


@dataclass(frozen=True)
class FeatureVector:
    max_db: float
    mean_db: float
    min_db: float
    iqr_db: float
    std_db: float
    skewness: float
    kurtosis_excess: float

    def as_array(self) -> np.ndarray:
        """Values in canonical order (max, mean, min, iqr, std, skewness, kurtosis)."""
        return np.array(astuple(self), dtype=np.float64)

    @classmethod
    def from_array(cls, values) -> "FeatureVector":
        values = [float(v) for v in values]
        if len(values) != len(fields(cls)):
            raise ValueError(f"expected {len(fields(cls))} values, got {len(values)}")
        return cls(*values)


@dataclass(frozen=True)
class ContextWindow:
    values_db: np.ndarray
    anchor_frame: int
    half_width_frames: int = HALF_WIDTH


def context_window(track: EnergyTrack, anchor: int, half_width: int = HALF_WIDTH) -> ContextWindow:
    """Energies of frames ``anchor - half_width .. anchor + half_width``, clipped to the track."""
    n = len(track)
    if not 0 <= anchor < n:
        raise AnchorOutOfBounds(f"anchor {anchor} outside track of {n} frames")
    lo = max(0, anchor - half_width)
    hi = min(n - 1, anchor + half_width)
    return ContextWindow(np.asarray(track.energies_db[lo:hi + 1]), anchor, half_width)


def extract_features(window: ContextWindow | np.ndarray) -> FeatureVector:
    """Max, mean, min, IQR, population std, skewness and excess kurtosis.

    Quartiles interpolate linearly at position ``p * (n - 1)``. When the
    variance is below 1e-12 the shape statistics are defined as 0.
    """
    values = window.values_db if isinstance(window, ContextWindow) else window
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise EmptyWindow("context window is empty")
    mean = float(np.mean(x))
    d = x - mean
    m2 = float(np.mean(d * d))
    if m2 < MOMENT_EPS:
        skew = 0.0
        kurt = 0.0
    else:
        m3 = float(np.mean(d**3))
        m4 = float(np.mean(d**4))
        skew = m3 / m2**1.5
        kurt = m4 / (m2 * m2) - 3.0
    q1, q3 = np.quantile(x, [0.25, 0.75], method="linear")
    # clamp: mean can leave [min, max] by an ulp on constant input
    mean = min(max(mean, float(x.min())), float(x.max()))
    return FeatureVector(
        max_db=float(x.max()),
        mean_db=mean,
        min_db=float(x.min()),
        iqr_db=float(q3 - q1),
        std_db=m2**0.5,
        skewness=skew,
        kurtosis_excess=kurt,
    )


def event_features(track: EnergyTrack, anchors, half_width: int = HALF_WIDTH) -> list[FeatureVector]:
    return [extract_features(context_window(track, int(a), half_width)) for a in anchors]
