"""WAV decoding, mono downmix and fixed-length framing."""

from __future__ import annotations

import struct
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from adsilence.errors import CorruptFile, EmptySignal, UnsupportedFormat

FRAME_LEN = 1920
EXPECTED_RATE = 48000

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_EXTENSIBLE = 0xFFFE
SUPPORTED_BITS = (16, 24, 32)


@dataclass(frozen=True)
class AudioSignal:
    """Decoded PCM audio, interleaved when ``channel_count > 1``.

    Samples are normalized to [-1, 1]. The array is made read-only on
    construction so a signal can be shared between threads.
    """

    samples: np.ndarray
    sample_rate_hz: int
    channel_count: int = 1

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if not np.issubdtype(samples.dtype, np.floating):
            samples = samples.astype(np.float64)
        if samples.ndim != 1:
            raise ValueError("samples must be a 1-D (interleaved) array")
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if self.channel_count <= 0:
            raise ValueError(f"channel count must be positive, got {self.channel_count}")
        if samples.size % self.channel_count:
            raise ValueError("sample count is not a multiple of channel_count")
        if samples.flags.writeable:
            samples = samples.view()
            samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    @property
    def n_instants(self) -> int:
        return self.samples.size // self.channel_count

    @property
    def duration_s(self) -> float:
        return self.n_instants / self.sample_rate_hz


@dataclass(frozen=True)
class FrameSequence:
    """Contiguous, non-overlapping frames stored as a ``(n_frames, frame_len)`` view."""

    frames: np.ndarray
    frame_len_samples: int = FRAME_LEN
    sample_rate_hz: int = EXPECTED_RATE

    @property
    def frames_per_second(self) -> float:
        return self.sample_rate_hz / self.frame_len_samples

    def __len__(self) -> int:
        return self.frames.shape[0]

    def __getitem__(self, i):
        return self.frames[i]


def _read_chunks(data: bytes, path) -> dict[bytes, memoryview]:
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise UnsupportedFormat(f"{path}: not a RIFF/WAVE file")
    chunks: dict[bytes, memoryview] = {}
    view = memoryview(data)
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body_start = pos + 8
        body_end = body_start + size
        if body_end > len(data):
            raise CorruptFile(
                f"{path}: chunk {cid!r} declares {size} bytes, "
                f"only {len(data) - body_start} present"
            )
        chunks.setdefault(cid, view[body_start:body_end])
        # chunks are word aligned
        pos = body_end + (size & 1)
    return chunks


def _parse_fmt(fmt: bytes, path) -> tuple[int, int, int, int]:
    if len(fmt) < 16:
        raise CorruptFile(f"{path}: fmt chunk too short ({len(fmt)} bytes)")
    tag, channels, rate, _byte_rate, block_align, bits = struct.unpack_from("<HHIIHH", fmt)
    if tag == WAVE_FORMAT_EXTENSIBLE:
        if len(fmt) < 40:
            raise CorruptFile(f"{path}: extensible fmt chunk too short")
        tag = struct.unpack_from("<H", fmt, 24)[0]
    if tag != WAVE_FORMAT_PCM:
        raise UnsupportedFormat(f"{path}: codec tag 0x{tag:04x} is not integer PCM")
    if bits not in SUPPORTED_BITS:
        raise UnsupportedFormat(f"{path}: {bits}-bit samples not supported")
    if channels not in (1, 2):
        raise UnsupportedFormat(f"{path}: {channels} channels not supported")
    if rate <= 0:
        raise CorruptFile(f"{path}: sample rate {rate}")
    if block_align != channels * bits // 8:
        raise CorruptFile(f"{path}: block align {block_align} inconsistent with format")
    return channels, rate, bits, block_align


def pcm_to_float(raw, bits: int) -> np.ndarray:
    """Convert little-endian integer PCM bytes to floats scaled by 1/2**(bits-1).

    16- and 24-bit input becomes float32 (every value is exactly representable);
    32-bit input becomes float64 for the same reason.
    """
    width = bits // 8
    n = len(raw) // width
    if bits == 16:
        out = np.frombuffer(raw, dtype="<i2", count=n).astype(np.float32)
        out *= np.float32(2.0**-15)
        return out
    if bits == 24:
        b = np.frombuffer(raw, dtype=np.uint8, count=n * 3).reshape(n, 3)
        padded = np.zeros((n, 4), dtype=np.uint8)
        padded[:, 1:] = b
        ints = padded.view("<i4").reshape(n)
        ints >>= 8
        out = ints.astype(np.float32)
        del padded, ints
        out *= np.float32(2.0**-23)
        return out
    if bits == 32:
        out = np.frombuffer(raw, dtype="<i4", count=n).astype(np.float64)
        out *= 2.0**-31
        return out
    raise UnsupportedFormat(f"{bits}-bit samples not supported")


def decode_wav(path) -> AudioSignal:
    """Decode a PCM WAV file (16/24/32-bit, mono or stereo).

    Raises:
        UnsupportedFormat: non-PCM codec, bit depth outside {16, 24, 32},
            more than two channels.
        CorruptFile: truncated or inconsistent chunks.
    """
    path = Path(path)
    data = path.read_bytes()
    chunks = _read_chunks(data, path)
    if b"fmt " not in chunks:
        raise CorruptFile(f"{path}: missing fmt chunk")
    if b"data" not in chunks:
        raise CorruptFile(f"{path}: missing data chunk")
    channels, rate, bits, block_align = _parse_fmt(chunks[b"fmt "], path)
    raw = chunks[b"data"]
    if len(raw) % block_align:
        raise CorruptFile(f"{path}: data chunk ends mid-sample")
    return AudioSignal(pcm_to_float(raw, bits), sample_rate_hz=rate, channel_count=channels)


def write_wav(path, signal: AudioSignal, bits: int = 24) -> None:
    """Write ``signal`` as little-endian integer PCM, clipping to full scale."""
    if bits not in SUPPORTED_BITS:
        raise UnsupportedFormat(f"{bits}-bit samples not supported")
    scale = 2.0 ** (bits - 1)
    ints = np.clip(np.rint(np.asarray(signal.samples, dtype=np.float64) * scale), -scale, scale - 1)
    if bits == 16:
        raw = ints.astype("<i2").tobytes()
    elif bits == 24:
        raw = ints.astype("<i4").view(np.uint8).reshape(-1, 4)[:, :3].tobytes()
    else:
        raw = ints.astype("<i4").tobytes()
    with wave.open(str(path), "wb") as w:
        w.setnchannels(signal.channel_count)
        w.setsampwidth(bits // 8)
        w.setframerate(signal.sample_rate_hz)
        w.writeframes(raw)


def downmix_to_mono(signal: AudioSignal) -> AudioSignal:
    """Equal-weight mean of the channels at each instant."""
    if signal.channel_count == 1:
        return signal
    if signal.channel_count != 2:
        raise UnsupportedFormat(f"cannot downmix {signal.channel_count} channels")
    dtype = signal.samples.dtype
    pairs = signal.samples.reshape(-1, 2)
    mono = np.empty(pairs.shape[0], dtype=dtype)
    # accumulate in float64 in blocks to bound the temporary size
    step = 1 << 20
    for lo in range(0, pairs.shape[0], step):
        block = pairs[lo:lo + step].astype(np.float64)
        mono[lo:lo + step] = (block[:, 0] + block[:, 1]) * 0.5
    return AudioSignal(mono, sample_rate_hz=signal.sample_rate_hz, channel_count=1)


def frame_signal(signal: AudioSignal, frame_len: int = FRAME_LEN) -> FrameSequence:
    """Split a mono signal into ``len // frame_len`` frames, dropping the tail."""
    if signal.channel_count != 1:
        raise UnsupportedFormat("frame_signal expects a mono signal; downmix first")
    if frame_len <= 0:
        raise ValueError(f"frame_len must be positive, got {frame_len}")
    n_frames = signal.samples.size // frame_len
    if n_frames == 0:
        raise EmptySignal(
            f"{signal.samples.size} samples is shorter than one {frame_len}-sample frame"
        )
    frames = signal.samples[: n_frames * frame_len].reshape(n_frames, frame_len)
    return FrameSequence(frames, frame_len_samples=frame_len, sample_rate_hz=signal.sample_rate_hz)
