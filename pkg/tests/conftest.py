import struct
import wave
from pathlib import Path

import pytest


def write_test_wav(path: Path, n_samples: int, seed: int = 0,
                   rate: int = 16000, channels: int = 1, width: int = 2) -> bytes:
    """Deterministic pseudo-random PCM content; returns the payload."""
    state = seed * 2654435761 % 2**32 or 1
    values = []
    for _ in range(n_samples):
        state = (1103515245 * state + 12345) % 2**31
        values.append(state % 65536 - 32768)
    payload = struct.pack(f"<{n_samples * channels}h",
                          *(values * channels if channels > 1 else values))
    with wave.open(str(path), "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(width)
        w.setframerate(rate)
        w.writeframes(payload)
    return payload


@pytest.fixture
def make_wav(tmp_path):
    def _make(name="test.wav", seconds=2.0, seed=0, **kwargs):
        path = tmp_path / name
        payload = write_test_wav(path, int(seconds * 16000), seed=seed, **kwargs)
        return path, payload
    return _make
