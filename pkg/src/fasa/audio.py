"""Sample-accurate slicing of 16 kHz mono PCM WAV files.

The only accepted input format is what the downstream consumers expect:
16-bit little-endian PCM, one channel, 16000 Hz. Anything else is the
user's job to convert first (e.g. ``ffmpeg -i in.ext -ar 16000 -ac 1
-sample_fmt s16 out.wav``).
"""

from __future__ import annotations

import io
import math
import wave
from pathlib import Path

from .errors import OutOfRange, UnsupportedFormat

SAMPLE_RATE = 16000
SAMPLE_WIDTH = 2
CHANNELS = 1


def _open_checked(path: str | Path) -> wave.Wave_read:
    try:
        reader = wave.open(str(path), "rb")
    except (wave.Error, EOFError) as exc:
        raise UnsupportedFormat(f"{path}: not a PCM WAV file ({exc})") from exc
    if reader.getnchannels() != CHANNELS:
        reader.close()
        raise UnsupportedFormat(f"{path}: expected mono, got {reader.getnchannels()} channels")
    if reader.getsampwidth() != SAMPLE_WIDTH:
        reader.close()
        raise UnsupportedFormat(f"{path}: expected 16-bit samples")
    if reader.getframerate() != SAMPLE_RATE:
        reader.close()
        raise UnsupportedFormat(f"{path}: expected {SAMPLE_RATE} Hz, got {reader.getframerate()}")
    return reader


def _sample_index(seconds: float) -> int:
    # half away from zero; times are non-negative here
    return math.floor(seconds * SAMPLE_RATE + 0.5)


def duration_s(path: str | Path) -> float:
    with _open_checked(path) as reader:
        return reader.getnframes() / SAMPLE_RATE


def write_wav(path: str | Path, payload: bytes) -> None:
    """Write raw 16-bit mono PCM sample bytes as a WAV file."""
    with wave.open(str(path), "wb") as writer:
        writer.setnchannels(CHANNELS)
        writer.setsampwidth(SAMPLE_WIDTH)
        writer.setframerate(SAMPLE_RATE)
        writer.writeframes(payload)


def cut_segment(source: str | Path, start_s: float, end_s: float) -> bytes:
    """Extract [start_s, end_s) as a standalone WAV, returned as bytes.

    Timestamps round half-away-from-zero to sample indices; the start
    sample is included, the end sample excluded, so adjacent cuts share
    no samples. The payload is copied verbatim: no resampling, no
    dithering.
    """
    if start_s < 0 or end_s <= start_s:
        raise OutOfRange(f"bad span [{start_s}, {end_s})")
    with _open_checked(source) as reader:
        nframes = reader.getnframes()
        s0 = _sample_index(start_s)
        s1 = _sample_index(end_s)
        if s1 > nframes or s0 >= s1:
            raise OutOfRange(
                f"span [{start_s}, {end_s}) maps to samples [{s0}, {s1}) "
                f"but source has {nframes}")
        reader.setpos(s0)
        payload = reader.readframes(s1 - s0)

    buf = io.BytesIO()
    with wave.open(buf, "wb") as writer:
        writer.setnchannels(CHANNELS)
        writer.setsampwidth(SAMPLE_WIDTH)
        writer.setframerate(SAMPLE_RATE)
        writer.writeframes(payload)
    return buf.getvalue()


def wav_payload(data: bytes) -> bytes:
    """Raw PCM payload of an in-memory WAV file."""
    with wave.open(io.BytesIO(data), "rb") as reader:
        return reader.readframes(reader.getnframes())
