"""End-to-end glue: audio -> energy -> silences -> features -> regions."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from adsilence.ad_grouping import AdRegion, GroupingParams
from adsilence.audio_ingest import EXPECTED_RATE, FRAME_LEN, AudioSignal, downmix_to_mono, frame_signal
from adsilence.boundary_regression import RegressionModel, classify_silences, detect_regions, predict
from adsilence.energy_analysis import ETA_DB, EnergyTrack, SilenceEvent, detect_silences, energy_track
from adsilence.silence_features import HALF_WIDTH, FeatureVector, event_features

log = logging.getLogger(__name__)


@dataclass
class Analysis:
    track: EnergyTrack
    events: list[SilenceEvent]
    features: list[FeatureVector]

    @property
    def total_frames(self) -> int:
        return len(self.track)


def analyse(signal: AudioSignal, eta: float = ETA_DB, half_width: int = HALF_WIDTH,
            frame_len: int = FRAME_LEN) -> Analysis:
    if signal.sample_rate_hz != EXPECTED_RATE:
        log.warning(
            "sample rate %d Hz: frames stay at %d samples (%.3f per second), "
            "so frame-count constants no longer match their intended durations",
            signal.sample_rate_hz, frame_len, signal.sample_rate_hz / frame_len,
        )
    track = energy_track(frame_signal(downmix_to_mono(signal), frame_len))
    events = detect_silences(track, eta)
    feats = event_features(track, [ev.anchor_frame for ev in events], half_width)
    return Analysis(track, events, feats)


def detect(analysis: Analysis, model: RegressionModel,
           params: GroupingParams = GroupingParams()) -> list[AdRegion]:
    return detect_regions(model, analysis.events, analysis.features, analysis.total_frames, params)


def scores(analysis: Analysis, model: RegressionModel) -> list[float]:
    return [predict(model, fv) for fv in analysis.features]


def classify_accepted(analysis: Analysis, model: RegressionModel) -> list[SilenceEvent]:
    return classify_silences(model, zip(analysis.events, analysis.features))
