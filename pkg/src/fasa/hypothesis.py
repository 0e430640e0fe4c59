"""ASR hypotheses: the interchange document, external commands, and a
deterministic mock recognizer for tests.

The pipeline never runs speech recognition itself. Predictions arrive
either as a JSON interchange document or from an external command that
writes one to stdout, so the aligner carries no model dependency.
"""

from __future__ import annotations

import json
import random
import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import IdCollision, NonZeroExit, SchemaError, SpawnError
from .transcript import normalize_words

DEFAULT_MAX_SEGMENT_S = 30.0
DEFAULT_OVERLAP_TOL_S = 0.1


@dataclass(frozen=True)
class Utterance:
    """One ASR-delimited audio span with its predicted words."""

    id: str
    audio_path: str
    start_s: float
    end_s: float
    pred_words: tuple[str, ...]
    pred_text_raw: str
    word_times: tuple[tuple[str, float, float], ...] | None = None

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class HypothesisSet:
    utterances: tuple[Utterance, ...]
    asr_id: str

    def __len__(self) -> int:
        return len(self.utterances)


@dataclass(frozen=True)
class NoiseSpec:
    """Corruption rates for the mock recognizer, all in [0, 1]."""

    sub_rate: float = 0.0
    ins_rate: float = 0.0
    del_rate: float = 0.0
    vocabulary: tuple[str, ...] = ("uh", "um", "er", "ah", "hm")

    def __post_init__(self) -> None:
        for name in ("sub_rate", "ins_rate", "del_rate"):
            rate = getattr(self, name)
            if not (0.0 <= rate <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {rate}")
        if (self.sub_rate > 0 or self.ins_rate > 0) and not self.vocabulary:
            raise ValueError("substitutions/insertions need a non-empty vocabulary")


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise SchemaError(msg)


def _number(value: object, what: str) -> float:
    _require(isinstance(value, (int, float)) and not isinstance(value, bool),
             f"{what} must be a number, got {value!r}")
    return float(value)


def parse_hypothesis_doc(doc: object,
                         max_segment_s: float = DEFAULT_MAX_SEGMENT_S,
                         overlap_tol_s: float = DEFAULT_OVERLAP_TOL_S) -> HypothesisSet:
    """Validate an interchange document and build a HypothesisSet.

    Checks ids for uniqueness, times for sanity, the per-audio ordering
    of segments, and the 30 s segment cap expected by downstream models.
    """
    _require(isinstance(doc, dict), "document must be a JSON object")
    asr_id = doc.get("asr_id")
    _require(isinstance(asr_id, str) and asr_id != "", "missing or empty 'asr_id'")
    segments = doc.get("segments")
    _require(isinstance(segments, list), "'segments' must be an array")

    utterances: list[Utterance] = []
    seen: set[str] = set()
    last_per_audio: dict[str, tuple[float, str]] = {}
    for k, seg in enumerate(segments):
        where = f"segments[{k}]"
        _require(isinstance(seg, dict), f"{where} must be an object")
        for key in ("id", "audio", "start_s", "end_s", "text"):
            _require(key in seg, f"{where} missing '{key}'")
        sid = seg["id"]
        _require(isinstance(sid, str) and sid != "", f"{where}: id must be a non-empty string")
        if sid in seen:
            raise IdCollision(f"duplicate segment id {sid!r}")
        seen.add(sid)
        audio = seg["audio"]
        _require(isinstance(audio, str), f"{where}: audio must be a string")
        start = _number(seg["start_s"], f"{where}.start_s")
        end = _number(seg["end_s"], f"{where}.end_s")
        _require(start >= 0, f"{where}: start_s is negative")
        _require(end > start, f"{where}: end_s must exceed start_s")
        _require(end - start <= max_segment_s,
                 f"{where}: segment longer than {max_segment_s} s")
        text = seg["text"]
        _require(isinstance(text, str), f"{where}: text must be a string")

        prev = last_per_audio.get(audio)
        if prev is not None:
            prev_end, prev_id = prev
            _require(start >= prev_end - overlap_tol_s,
                     f"{where}: segment {sid!r} overlaps {prev_id!r} by more than "
                     f"{overlap_tol_s} s")
        last_per_audio[audio] = (end, sid)

        word_times = None
        if "words" in seg and seg["words"] is not None:
            raw_words = seg["words"]
            _require(isinstance(raw_words, list), f"{where}: words must be an array")
            times = []
            for wk, w in enumerate(raw_words):
                _require(isinstance(w, dict) and "w" in w,
                         f"{where}.words[{wk}] must be an object with 'w'")
                times.append((str(w["w"]),
                              _number(w.get("start_s", start), f"{where}.words[{wk}].start_s"),
                              _number(w.get("end_s", end), f"{where}.words[{wk}].end_s")))
            word_times = tuple(times)

        utterances.append(Utterance(
            id=sid, audio_path=audio, start_s=start, end_s=end,
            pred_words=normalize_words(text), pred_text_raw=text,
            word_times=word_times,
        ))

    # per-audio start order must be monotonic; sorting silently would
    # mask a broken producer
    by_audio_pos: dict[str, float] = {}
    for u in utterances:
        prev_start = by_audio_pos.get(u.audio_path)
        _require(prev_start is None or u.start_s >= prev_start,
                 f"segments for {u.audio_path!r} are not sorted by start_s "
                 f"(at id {u.id!r})")
        by_audio_pos[u.audio_path] = u.start_s
    return HypothesisSet(utterances=tuple(utterances), asr_id=asr_id)


def hypotheses_to_doc(hs: HypothesisSet) -> dict:
    """Interchange-format document for a HypothesisSet."""
    segments = []
    for u in hs.utterances:
        seg: dict = {
            "id": u.id, "audio": u.audio_path,
            "start_s": u.start_s, "end_s": u.end_s,
            "text": u.pred_text_raw,
        }
        if u.word_times is not None:
            seg["words"] = [{"w": w, "start_s": s, "end_s": e}
                            for w, s, e in u.word_times]
        segments.append(seg)
    return {"asr_id": hs.asr_id, "segments": segments}


def load_hypotheses(path: str | Path,
                    max_segment_s: float = DEFAULT_MAX_SEGMENT_S,
                    overlap_tol_s: float = DEFAULT_OVERLAP_TOL_S) -> HypothesisSet:
    """Read and validate an interchange JSON file."""
    raw = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    return parse_hypothesis_doc(doc, max_segment_s, overlap_tol_s)


def emit_hypotheses(hs: HypothesisSet, path: str | Path) -> None:
    doc = hypotheses_to_doc(hs)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def run_external_asr(audio_path: str | Path, command_template: str,
                     max_segment_s: float = DEFAULT_MAX_SEGMENT_S,
                     overlap_tol_s: float = DEFAULT_OVERLAP_TOL_S) -> HypothesisSet:
    """Run an external recognizer and parse its stdout.

    The template must contain ``{audio}``, which is substituted after
    shell-style splitting so paths with spaces stay one argument. The
    command must write one interchange document to stdout and exit 0.
    """
    if "{audio}" not in command_template:
        raise ValueError("command template must contain the {audio} placeholder")
    argv = [arg.replace("{audio}", str(audio_path))
            for arg in shlex.split(command_template)]
    try:
        proc = subprocess.run(argv, capture_output=True, text=True)
    except OSError as exc:
        raise SpawnError(f"cannot run {argv[0]!r}: {exc}") from exc
    if proc.returncode != 0:
        raise NonZeroExit(proc.returncode, proc.stderr[:500])
    try:
        doc = json.loads(proc.stdout)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"ASR command emitted invalid JSON: {exc}") from exc
    return parse_hypothesis_doc(doc, max_segment_s, overlap_tol_s)


def mock_asr(truth: Sequence[tuple[Sequence[str], float, float]],
             noise: NoiseSpec, seed: int,
             audio_path: str = "", asr_id: str = "mock",
             id_prefix: str = "u") -> HypothesisSet:
    """Deterministically corrupt known segments into fake predictions.

    A pure function of (truth, noise, seed): each word may be deleted,
    substituted with a vocabulary word, or followed by an insertion, at
    the given rates.
    """
    rng = random.Random(seed)
    utterances = []
    for k, (words, start, end) in enumerate(truth):
        out: list[str] = []
        for word in words:
            if rng.random() < noise.del_rate:
                continue
            if rng.random() < noise.sub_rate:
                out.append(rng.choice(noise.vocabulary))
            else:
                out.append(word)
            if rng.random() < noise.ins_rate:
                out.append(rng.choice(noise.vocabulary))
        text = " ".join(out)
        utterances.append(Utterance(
            id=f"{id_prefix}{k:04d}", audio_path=audio_path,
            start_s=float(start), end_s=float(end),
            pred_words=normalize_words(text), pred_text_raw=text,
        ))
    return HypothesisSet(utterances=tuple(utterances), asr_id=asr_id)
