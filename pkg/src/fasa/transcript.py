"""Parsing and cleaning of provided transcriptions.

Raw transcript files arrive either as plain text or as CHAT-style
transcripts with speaker tiers and inline annotation codes. Both are
reduced to the same canonical form: a flat sequence of lowercase word
tokens, each carrying the byte range of the raw text it came from.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import MalformedTier

PLAIN = "plain"
CHAT = "chat"

# CHAT bracket codes never nest; anything between square brackets on one
# line is annotation, not speech.
_BRACKET_CODE = re.compile(r"\[[^\][\n]*\]")


@dataclass(frozen=True)
class RawTranscript:
    """A transcript file as read from disk, before any cleaning."""

    text: str
    format_hint: str = PLAIN
    source_path: str | None = None

    def __post_init__(self) -> None:
        if self.format_hint not in (PLAIN, CHAT):
            raise ValueError(f"unknown format_hint: {self.format_hint!r}")


@dataclass(frozen=True)
class ProvidedTranscript:
    """The cleaned word sequence, with per-word provenance.

    ``spans[i]`` is the half-open byte range of ``raw_text`` (UTF-8) that
    word ``i`` was extracted from; re-cleaning those bytes yields exactly
    ``words[i]``.
    """

    words: tuple[str, ...]
    spans: tuple[tuple[int, int], ...]
    raw_text: str

    def __len__(self) -> int:
        return len(self.words)


def _char_to_byte_offsets(text: str) -> list[int]:
    """Byte offset of each character of ``text`` in its UTF-8 encoding."""
    if text.isascii():
        return list(range(len(text) + 1))
    offsets = [0] * (len(text) + 1)
    pos = 0
    for i, ch in enumerate(text):
        offsets[i] = pos
        pos += len(ch.encode("utf-8"))
    offsets[len(text)] = pos
    return offsets


def _tokenize(text: str, keep_apostrophes: bool) -> list[tuple[str, int, int]]:
    """Split ``text`` into normalized tokens with character spans.

    Characters outside [letters, digits, apostrophe, whitespace] act as
    separators. Apostrophes survive only inside a token; a leading or
    trailing run of apostrophes is trimmed off.
    """
    out: list[tuple[str, int, int]] = []
    start = -1
    n = len(text)

    def flush(end: int) -> None:
        nonlocal start
        if start < 0:
            return
        a, b = start, end
        while a < b and text[a] == "'":
            a += 1
        while b > a and text[b - 1] == "'":
            b -= 1
        if b > a:
            out.append((text[a:b].lower(), a, b))
        start = -1

    for i in range(n):
        c = text[i]
        if c.isalnum() or (keep_apostrophes and c == "'"):
            if start < 0:
                start = i
        else:
            flush(i)
    flush(n)
    return out


def _build(raw: RawTranscript, tokens: list[tuple[str, int, int]]) -> ProvidedTranscript:
    offsets = _char_to_byte_offsets(raw.text)
    words = tuple(tok for tok, _, _ in tokens)
    spans = tuple((offsets[a], offsets[b]) for _, a, b in tokens)
    return ProvidedTranscript(words=words, spans=spans, raw_text=raw.text)


def clean_plain(raw: RawTranscript, keep_apostrophes: bool = True) -> ProvidedTranscript:
    """Clean a plain-text transcript into the canonical word sequence.

    Every character that is not a letter, digit, apostrophe or whitespace
    separates tokens; tokens are lowercased; empty tokens are dropped.
    With ``keep_apostrophes=False`` apostrophes separate tokens too.
    """
    return _build(raw, _tokenize(raw.text, keep_apostrophes))


def normalize_words(text: str, keep_apostrophes: bool = True) -> tuple[str, ...]:
    """Word sequence of ``text`` under the plain cleaning rule."""
    return tuple(tok for tok, _, _ in _tokenize(text, keep_apostrophes))


def clean_chat(raw: RawTranscript, keep_apostrophes: bool = True) -> ProvidedTranscript:
    """Clean a CHAT-style transcript, keeping speaker tiers only.

    Speaker tiers (lines starting with ``*``) contribute words after the
    ``*XXX:`` prefix; header (``@``) and dependent (``%``) tiers are
    dropped, as are ``[...]`` annotation codes. Angle-bracket groups keep
    their inner words. Continuation lines (leading whitespace) belong to
    the tier above them. Raises MalformedTier when a ``*`` line has no
    colon.
    """
    text = raw.text
    masked = list(text)

    def blank(a: int, b: int) -> None:
        for i in range(a, b):
            if masked[i] != "\n":
                masked[i] = " "

    keep_continuation = False
    pos = 0
    for line_no, line in enumerate(text.split("\n"), start=1):
        end = pos + len(line)
        if line.startswith("*"):
            colon = line.find(":")
            if colon < 0:
                raise MalformedTier(f"line {line_no}: speaker tier without ':' separator")
            blank(pos, pos + colon + 1)
            keep_continuation = True
        elif line[:1] in ("%", "@"):
            blank(pos, end)
            keep_continuation = False
        elif line[:1].isspace() or line == "":
            # continuation of the tier above; dropped unless that tier is kept
            if not keep_continuation:
                blank(pos, end)
        else:
            blank(pos, end)
            keep_continuation = False
        pos = end + 1

    stripped = "".join(masked)
    stripped = _BRACKET_CODE.sub(lambda m: " " * len(m.group(0)), stripped)
    stripped = stripped.replace("<", " ").replace(">", " ")

    return _build(raw, _tokenize(stripped, keep_apostrophes))


def clean(raw: RawTranscript, keep_apostrophes: bool = True) -> ProvidedTranscript:
    """Dispatch on the transcript's declared format."""
    if raw.format_hint == CHAT:
        return clean_chat(raw, keep_apostrophes)
    return clean_plain(raw, keep_apostrophes)
