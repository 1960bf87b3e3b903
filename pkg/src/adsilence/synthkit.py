"""Deterministic synthetic broadcast audio with exact ground truth.

Programme material is band-limited noise with a fluctuating level and
occasional shallow pauses; ad blocks are louder commercials separated by short
deep silences. Only energy statistics matter to the detector, so shaped noise
is enough to exercise every stage.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import signal as sps

from adsilence.audio_ingest import EXPECTED_RATE, FRAME_LEN, AudioSignal
from adsilence.energy_analysis import ETA_DB
from adsilence.errors import ConfigInvalid
from adsilence.evaluation import AnnotationTrack

GAP_RANGE_S = (0.2, 1.0)
MAX_GAP_DEPTH_DB = -65.0
DEPTH_MARGIN_DB = 5.0
LOWPASS_HZ = 8000.0


@dataclass(frozen=True)
class ProgrammeSegment:
    duration_s: float
    energy_db: tuple[float, float] = (-34.0, -22.0)
    pause_rate_hz: float = 0.05  # expected pauses per second
    pause_depth_db: float = -45.0
    pause_s: tuple[float, float] = (0.2, 0.8)


@dataclass(frozen=True)
class AdBlockSpec:
    n_commercials: int
    commercial_s: tuple[float, float] = (15.0, 30.0)
    gap_s: tuple[float, float] = (0.2, 1.0)
    gap_depth_db: float = -80.0
    energy_db: tuple[float, float] = (-20.0, -12.0)


@dataclass(frozen=True)
class SynthConfig:
    """Layout is programme_segments[0], ad_blocks[0], programme_segments[1], ...

    ``ad_blocks`` must number ``len(programme_segments)`` or one fewer.
    Setting ``confusers`` permits programme pauses below ``eta``.
    """

    seed: int
    programme_segments: tuple[ProgrammeSegment, ...]
    ad_blocks: tuple[AdBlockSpec, ...] = ()
    sample_rate_hz: int = EXPECTED_RATE
    confusers: bool = False
    eta: float = ETA_DB

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "SynthConfig":
        try:
            progs = tuple(
                ProgrammeSegment(**{k: tuple(v) if isinstance(v, list) else v for k, v in p.items()})
                for p in doc["programme_segments"]
            )
            ads = tuple(
                AdBlockSpec(**{k: tuple(v) if isinstance(v, list) else v for k, v in a.items()})
                for a in doc.get("ad_blocks", ())
            )
            rest = {k: v for k, v in doc.items() if k not in ("programme_segments", "ad_blocks")}
            return cls(programme_segments=progs, ad_blocks=ads, **rest)
        except (KeyError, TypeError) as exc:
            raise ConfigInvalid(f"bad synth config: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _check_range(name, rng, lo=None, hi=None):
    a, b = rng
    if not a <= b:
        raise ConfigInvalid(f"{name}: range {rng} is reversed")
    if lo is not None and a < lo:
        raise ConfigInvalid(f"{name}: {a} below {lo}")
    if hi is not None and b > hi:
        raise ConfigInvalid(f"{name}: {b} above {hi}")


def validate_config(cfg: SynthConfig) -> None:
    if cfg.sample_rate_hz <= 0:
        raise ConfigInvalid("sample_rate_hz must be positive")
    if not cfg.programme_segments:
        raise ConfigInvalid("at least one programme segment is required")
    if len(cfg.ad_blocks) not in (len(cfg.programme_segments) - 1, len(cfg.programme_segments)):
        raise ConfigInvalid("ad_blocks must number len(programme_segments) or one fewer")
    for i, p in enumerate(cfg.programme_segments):
        name = f"programme_segments[{i}]"
        if p.duration_s <= 0:
            raise ConfigInvalid(f"{name}: duration must be positive")
        _check_range(f"{name}.energy_db", p.energy_db, hi=0.0)
        _check_range(f"{name}.pause_s", p.pause_s, lo=1e-3)
        if p.pause_rate_hz < 0:
            raise ConfigInvalid(f"{name}: negative pause rate")
        if not cfg.confusers and p.pause_depth_db < cfg.eta + DEPTH_MARGIN_DB:
            raise ConfigInvalid(
                f"{name}: pause depth {p.pause_depth_db} dB is within {DEPTH_MARGIN_DB} dB of "
                f"eta={cfg.eta}; set confusers=True to inject sub-threshold pauses"
            )
    for i, a in enumerate(cfg.ad_blocks):
        name = f"ad_blocks[{i}]"
        if a.n_commercials < 1:
            raise ConfigInvalid(f"{name}: needs at least one commercial")
        _check_range(f"{name}.commercial_s", a.commercial_s, lo=1.0)
        _check_range(f"{name}.gap_s", a.gap_s, *GAP_RANGE_S)
        _check_range(f"{name}.energy_db", a.energy_db, hi=0.0)
        if a.gap_depth_db > min(MAX_GAP_DEPTH_DB, cfg.eta - DEPTH_MARGIN_DB):
            raise ConfigInvalid(
                f"{name}: gap depth {a.gap_depth_db} dB must be <= {MAX_GAP_DEPTH_DB} dB "
                f"and {DEPTH_MARGIN_DB} dB below eta"
            )


class _Timeline:
    """Accumulates constant-level pieces as (n_samples, level_db)."""

    def __init__(self, rate):
        self.rate = rate
        self.lengths: list[int] = []
        self.levels: list[float] = []
        self.pos = 0

    def samples(self, seconds: float) -> int:
        return max(1, int(round(seconds * self.rate)))

    def add(self, n: int, level_db: float) -> tuple[int, int]:
        start = self.pos
        self.lengths.append(n)
        self.levels.append(level_db)
        self.pos += n
        return start, self.pos

    def gains(self) -> np.ndarray:
        g = 10.0 ** (np.asarray(self.levels) / 20.0)
        return np.repeat(g, self.lengths)


def _programme(tl: _Timeline, seg: ProgrammeSegment, rng: np.random.Generator) -> None:
    total = tl.samples(seg.duration_s)
    end = tl.pos + total
    # pause onsets form a Poisson process at pause_rate_hz
    while tl.pos < end:
        run = tl.samples(rng.uniform(0.1, 0.5))
        if seg.pause_rate_hz > 0 and rng.random() < seg.pause_rate_hz * run / tl.rate:
            pause = tl.samples(rng.uniform(*seg.pause_s))
            tl.add(min(pause, end - tl.pos), seg.pause_depth_db)
            continue
        tl.add(min(run, end - tl.pos), rng.uniform(*seg.energy_db))


def _ad_block(tl: _Timeline, spec: AdBlockSpec, rng: np.random.Generator) -> tuple[list[int], int, int]:
    centres = []

    def gap():
        s, e = tl.add(tl.samples(rng.uniform(*spec.gap_s)), spec.gap_depth_db)
        centres.append((s + e) // 2)
        return s, e

    block_start, _ = gap()
    for _ in range(spec.n_commercials):
        end = tl.pos + tl.samples(rng.uniform(*spec.commercial_s))
        base = rng.uniform(*spec.energy_db)
        while tl.pos < end:
            n = min(tl.samples(rng.uniform(0.3, 0.8)), end - tl.pos)
            tl.add(n, min(0.0, base + rng.uniform(-2.0, 2.0)))
        _, block_end = gap()
    return centres, block_start, block_end


def band_limited_noise(n: int, rate: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-RMS Gaussian noise low-passed at 8 kHz (or 0.4 x rate when lower)."""
    cutoff = min(LOWPASS_HZ, 0.4 * rate)
    sos = sps.butter(4, cutoff, btype="low", fs=rate, output="sos")
    noise = sps.sosfilt(sos, rng.standard_normal(n))
    noise /= np.sqrt(np.mean(noise * noise))
    return noise


def generate(config: SynthConfig) -> tuple[AudioSignal, AnnotationTrack]:
    """Render ``config`` to mono audio and its two-level annotation.

    The same config (seed included) always yields bit-identical output.
    """
    validate_config(config)
    rng = np.random.default_rng(config.seed)
    tl = _Timeline(config.sample_rate_hz)
    blocks = []
    centres: list[int] = []
    for i, seg in enumerate(config.programme_segments):
        _programme(tl, seg, rng)
        if i < len(config.ad_blocks):
            c, s, e = _ad_block(tl, config.ad_blocks[i], rng)
            centres.extend(c)
            blocks.append((s, e))

    x = band_limited_noise(tl.pos, config.sample_rate_hz, rng)
    x *= tl.gains()
    np.clip(x, -1.0, 1.0, out=x)

    total_frames = tl.pos // FRAME_LEN
    ad_blocks = []
    bounds = []
    for s, e in blocks:
        fs, fe = s // FRAME_LEN, (e - 1) // FRAME_LEN
        fe = min(fe, total_frames - 1)
        if fs > fe:
            continue
        ad_blocks.append((fs, fe))
        bounds.extend(c // FRAME_LEN for c in centres if s <= c < e and c // FRAME_LEN <= fe)
    track = AnnotationTrack(tuple(ad_blocks), tuple(sorted(bounds)), total_frames)
    return AudioSignal(x, sample_rate_hz=config.sample_rate_hz), track


def broadcast_config(seed: int, *, n_blocks: int | None = None, confusers: bool = False,
                     programme_s: tuple[float, float] = (180.0, 240.0),
                     commercials: tuple[int, int] = (4, 8),
                     commercial_s: tuple[float, float] = (15.0, 30.0),
                     gap_depth_db: float = -80.0,
                     pause_depth_db: float | None = None,
                     pause_rate_hz: float = 0.05) -> SynthConfig:
    """A programme of alternating content and 2-3 ad blocks, laid out from ``seed``.

    With ``confusers`` the programme pauses default to -66 dB so some of them
    are detected as silences and must be rejected by the regression.
    """
    rng = np.random.default_rng([seed, 0x5EED])
    if n_blocks is None:
        n_blocks = int(rng.integers(2, 4))
    if pause_depth_db is None:
        pause_depth_db = -66.0 if confusers else -45.0
    progs = tuple(
        ProgrammeSegment(
            duration_s=float(rng.uniform(*programme_s)),
            pause_rate_hz=pause_rate_hz,
            pause_depth_db=pause_depth_db,
        )
        for _ in range(n_blocks + 1)
    )
    ads = tuple(
        AdBlockSpec(
            n_commercials=int(rng.integers(commercials[0], commercials[1] + 1)),
            commercial_s=commercial_s,
            gap_depth_db=gap_depth_db,
        )
        for _ in range(n_blocks)
    )
    return SynthConfig(seed=seed, programme_segments=progs, ad_blocks=ads, confusers=confusers)
