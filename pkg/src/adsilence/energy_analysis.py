"""Per-frame dB energy and silence event detection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from adsilence.audio_ingest import FRAME_LEN, FrameSequence
from adsilence.errors import EmptySignal

FLOOR_DB = -120.0
ETA_DB = -60.0

# mean square below which 10*log10 would fall under the floor
_FLOOR_MS = 10.0 ** (FLOOR_DB / 10.0)


@dataclass(frozen=True)
class EnergyTrack:
    energies_db: np.ndarray
    frame_len_samples: int = FRAME_LEN
    floor_db: float = FLOOR_DB

    def __len__(self) -> int:
        return self.energies_db.shape[0]


@dataclass(frozen=True)
class SilenceEvent:
    start_frame: int
    end_frame: int  # inclusive
    anchor_frame: int
    min_energy_db: float

    @property
    def n_frames(self) -> int:
        return self.end_frame - self.start_frame + 1


def _ms_to_db(mean_square: np.ndarray | float) -> np.ndarray:
    ms = np.maximum(mean_square, _FLOOR_MS)
    # clamp again for rounding at the floor
    return np.maximum(20.0 * np.log10(np.sqrt(ms)), FLOOR_DB)


def frame_energy_db(frame) -> float:
    """20*log10 of the frame RMS, clamped below at -120 dB."""
    x = np.asarray(frame, dtype=np.float64)
    if x.size == 0:
        raise EmptySignal("cannot measure the energy of an empty frame")
    return float(_ms_to_db(np.mean(x * x)))


def energy_track(frames: FrameSequence, block_frames: int = 4096) -> EnergyTrack:
    """Energy of every frame, computed in float64 over blocks of frames."""
    data = frames.frames
    n = data.shape[0]
    if n == 0:
        raise EmptySignal("no frames to analyse")
    out = np.empty(n, dtype=np.float64)
    for lo in range(0, n, block_frames):
        block = np.asarray(data[lo:lo + block_frames], dtype=np.float64)
        out[lo:lo + block_frames] = np.mean(block * block, axis=1)
    return EnergyTrack(_ms_to_db(out), frame_len_samples=frames.frame_len_samples)


def detect_silence_frames(track: EnergyTrack, eta: float = ETA_DB) -> np.ndarray:
    """Ascending indices of frames with energy <= eta (inclusive)."""
    return np.flatnonzero(np.asarray(track.energies_db) <= eta)


def merge_silence_events(indices, track: EnergyTrack) -> list[SilenceEvent]:
    """Collapse runs of consecutive indices into events anchored at their minimum."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        return []
    e = np.asarray(track.energies_db)
    breaks = np.flatnonzero(np.diff(idx) != 1) + 1
    events = []
    for run in np.split(idx, breaks):
        energies = e[run]
        k = int(np.argmin(energies))  # first occurrence on ties
        events.append(
            SilenceEvent(
                start_frame=int(run[0]),
                end_frame=int(run[-1]),
                anchor_frame=int(run[k]),
                min_energy_db=float(energies[k]),
            )
        )
    return events


def detect_silences(track: EnergyTrack, eta: float = ETA_DB) -> list[SilenceEvent]:
    return merge_silence_events(detect_silence_frames(track, eta), track)
