"""Exception types shared across the toolkit."""

from __future__ import annotations


class FasaError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(FasaError):
    """An input document violates its schema (missing field, bad value, bad order)."""


class IdCollision(FasaError):
    """Two items in one document share an id."""


class MalformedTier(FasaError):
    """A speaker tier line lacks the required ':' separator."""


class SpawnError(FasaError):
    """An external command could not be started."""


class NonZeroExit(FasaError):
    """An external command exited with a non-zero status."""

    def __init__(self, code: int, stderr_excerpt: str = ""):
        super().__init__(f"command exited with status {code}: {stderr_excerpt}")
        self.code = code
        self.stderr_excerpt = stderr_excerpt


class UnsupportedFormat(FasaError):
    """Audio file is not 16 kHz / 16-bit / mono PCM WAV."""


class OutOfRange(FasaError):
    """Requested audio span falls outside the source file."""


class DuplicateId(FasaError):
    """A manifest contains two records with the same id."""


class UnknownId(FasaError):
    """A referenced item id does not exist."""


class DuplicateDecision(FasaError):
    """Two decisions target the same verify item."""


class AlreadyDecided(FasaError):
    """A decided verify item received a conflicting decision."""


class MissingManualText(FasaError):
    """A manual decision arrived without transcription text."""


class MissingGold(FasaError):
    """An emitted utterance has no gold annotation."""
