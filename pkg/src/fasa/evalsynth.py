"""Synthetic corpora with known ground truth, plus quality metrics.

The generator lays deterministic tone segments into one long WAV and
builds the matching transcript, then damages the transcript the same
ways real scraped corpora are damaged: missing prefixes, untranscribed
segments, shuffled ordering, and inline annotation junk. Because the
truth is known, the emitted dataset can be scored exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from random import Random
from typing import Mapping

import numpy as np

from .align import dis
from .audio import SAMPLE_RATE, write_wav
from .dataset import Manifest
from .errors import MissingGold, SchemaError
from .hypothesis import HypothesisSet, NoiseSpec, emit_hypotheses, mock_asr

# content vocabulary; alignment only cares about token identity
VOCAB = (
    "the a an and then but so because when while after before it this that "
    "he she they we you i was were is are am go goes went going come came "
    "run ran jump jumped play played look looked see saw said says tell told "
    "want wanted like liked make made take took give gave get got put find "
    "found think thought know knew eat ate drink drank sleep slept fall fell "
    "big small little old new good bad happy sad fast slow red blue green "
    "yellow black white dog cat frog bird fish horse cow pig duck rabbit "
    "bear lion monkey elephant mouse ball book tree house car boat train "
    "water milk bread apple banana cookie cake mom dad baby boy girl friend "
    "teacher doctor day night morning home school park store farm zoo one "
    "two three four five six seven eight nine ten first last next again "
    "here there up down in out on off under over with without very really "
    "now soon later today yesterday tomorrow always never maybe yes no"
).split()

# replacement tokens for simulated recognition errors; disjoint from VOCAB
NOISE_VOCAB = tuple(f"zx{i:02d}" for i in range(40))

# transcript annotation junk; pure punctuation so cleaning removes it
_ANNOTATION_NOISE = (",", ".", "!", "?", ";", "...", "[*]", "[/]", "(.)", "+...")

_DISORDERS = ("none", "articulation", "phonological", "apraxia", "stutter")


@dataclass(frozen=True)
class CorruptionSpec:
    """How the provided transcript deviates from the spoken truth."""

    prefix_drop_frac: float = 0.0
    block_shuffle: bool = False
    annotation_noise_rate: float = 0.0
    untranscribed_frac: float = 0.0

    def __post_init__(self) -> None:
        for name in ("prefix_drop_frac", "annotation_noise_rate", "untranscribed_frac"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {v}")


@dataclass(frozen=True)
class SynthSpec:
    n_segments: int = 100
    words_min: int = 3
    words_max: int = 9
    segment_s_min: float = 0.6
    segment_s_max: float = 1.8
    gap_s: float = 0.2
    vocab_size: int = 120
    id_prefix: str = "u"
    corruption: CorruptionSpec = field(default_factory=CorruptionSpec)
    noise: NoiseSpec = field(default_factory=lambda: NoiseSpec(vocabulary=NOISE_VOCAB))

    def __post_init__(self) -> None:
        if self.n_segments < 1:
            raise ValueError("n_segments must be positive")
        if not (1 <= self.words_min <= self.words_max):
            raise ValueError("need 1 <= words_min <= words_max")
        if not (0 < self.segment_s_min <= self.segment_s_max):
            raise ValueError("need 0 < segment_s_min <= segment_s_max")
        if not (2 <= self.vocab_size <= len(VOCAB)):
            raise ValueError(f"vocab_size must be in [2, {len(VOCAB)}]")


@dataclass(frozen=True)
class TruthSegment:
    id: str
    words: tuple[str, ...]
    start_s: float
    end_s: float


@dataclass(frozen=True)
class SynthCorpus:
    truth_segments: tuple[TruthSegment, ...]
    full_transcript: tuple[str, ...]
    raw_transcript_text: str
    transcribed_ids: frozenset[str]
    corruption: CorruptionSpec
    seed: int
    speaker_meta: dict


GoldAnnotation = Mapping[str, tuple[str, ...]]


def _count(frac: float, n: int) -> int:
    # Fraction(str(...)) so 0.2 of 10 is exactly 2
    return int(Fraction(str(frac)) * n)


def generate(spec: SynthSpec, seed: int) -> tuple[SynthCorpus, HypothesisSet, dict]:
    """Build a corpus, its mock ASR hypotheses, and the gold annotation.

    Deterministic in (spec, seed). Segment ids are shared between truth,
    hypotheses, and gold.
    """
    rng = Random(seed)
    vocab = VOCAB[: spec.vocab_size]

    segments: list[TruthSegment] = []
    cursor = spec.gap_s
    for k in range(spec.n_segments):
        n_words = rng.randint(spec.words_min, spec.words_max)
        words = tuple(rng.choice(vocab) for _ in range(n_words))
        dur = rng.uniform(spec.segment_s_min, spec.segment_s_max)
        start = round(cursor, 3)
        end = round(cursor + dur, 3)
        segments.append(TruthSegment(id=f"{spec.id_prefix}{k:04d}", words=words,
                                     start_s=start, end_s=end))
        cursor = end + spec.gap_s

    cor = spec.corruption
    n = spec.n_segments
    dropped = set(range(_count(cor.prefix_drop_frac, n)))
    remaining = [k for k in range(n) if k not in dropped]
    n_untranscribed = min(_count(cor.untranscribed_frac, n), len(remaining))
    if n_untranscribed:
        dropped.update(rng.sample(remaining, n_untranscribed))

    blocks = [(k, segments[k].words) for k in range(n) if k not in dropped]
    if cor.block_shuffle:
        rng.shuffle(blocks)
    full_transcript = tuple(w for _, words in blocks for w in words)

    pieces: list[str] = []
    for word in full_transcript:
        pieces.append(word)
        if cor.annotation_noise_rate and rng.random() < cor.annotation_noise_rate:
            pieces.append(rng.choice(_ANNOTATION_NOISE))
    raw_text = " ".join(pieces)

    speaker = {
        "speaker_id": f"spk{rng.randint(0, 999):03d}",
        "age_months": rng.randint(48, 108),
        "gender": rng.choice(("f", "m")),
        "disorder": rng.choice(_DISORDERS),
    }

    corpus = SynthCorpus(
        truth_segments=tuple(segments),
        full_transcript=full_transcript,
        raw_transcript_text=raw_text,
        transcribed_ids=frozenset(segments[k].id for k in range(n) if k not in dropped),
        corruption=cor, seed=seed, speaker_meta=speaker,
    )
    hypotheses = mock_asr(
        [(s.words, s.start_s, s.end_s) for s in segments],
        spec.noise, seed=seed + 1000003, asr_id=f"mock-{seed}",
        id_prefix=spec.id_prefix,
    )
    gold = {s.id: s.words for s in segments}
    return corpus, hypotheses, gold


def synthesize_audio(corpus: SynthCorpus) -> bytes:
    """16-bit PCM payload: one tone per segment, silence in the gaps."""
    total_s = corpus.truth_segments[-1].end_s + 0.2 if corpus.truth_segments else 0.2
    samples = np.zeros(int(round(total_s * SAMPLE_RATE)), dtype=np.int16)
    for k, seg in enumerate(corpus.truth_segments):
        s0 = int(round(seg.start_s * SAMPLE_RATE))
        s1 = min(int(round(seg.end_s * SAMPLE_RATE)), len(samples))
        freq = 180.0 + 7.0 * (k % 40)
        t = np.arange(s1 - s0, dtype=np.float64) / SAMPLE_RATE
        tone = 0.25 * np.sin(2.0 * math.pi * freq * t)
        samples[s0:s1] = np.round(tone * 32767.0).astype(np.int16)
    return samples.tobytes()


def write_corpus(corpus: SynthCorpus, hypotheses: HypothesisSet, gold: dict,
                 out_dir: str | Path, name: str = "synth") -> dict[str, Path]:
    """Write wav, transcript, hypotheses, gold, and speaker sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    wav_path = out / f"{name}.wav"
    write_wav(wav_path, synthesize_audio(corpus))

    (out / f"{name}.txt").write_text(corpus.raw_transcript_text + "\n", encoding="utf-8")
    (out / f"{name}.meta.json").write_text(
        json.dumps(corpus.speaker_meta, indent=1) + "\n", encoding="utf-8")

    # reference the wav by bare name so the corpus is relocatable and
    # byte-identical wherever it is written
    fixed = HypothesisSet(
        utterances=tuple(replace(u, audio_path=wav_path.name)
                         for u in hypotheses.utterances),
        asr_id=hypotheses.asr_id)
    hyp_path = out / "hypotheses.json"
    emit_hypotheses(fixed, hyp_path)

    gold_path = out / "gold.jsonl"
    save_gold(gold, gold_path)
    return {"wav": wav_path, "transcript": out / f"{name}.txt",
            "hypotheses": hyp_path, "gold": gold_path}


def save_gold(gold: GoldAnnotation, path: str | Path) -> None:
    lines = [json.dumps({"id": uid, "words": list(words)}, ensure_ascii=False)
             for uid, words in gold.items()]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def load_gold(path: str | Path) -> dict[str, tuple[str, ...]]:
    gold: dict[str, tuple[str, ...]] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if "id" not in row or "words" not in row:
            raise SchemaError(f"{path}:{lineno}: gold line needs 'id' and 'words'")
        gold[row["id"]] = tuple(row["words"])
    return gold


def au_error(emitted: Manifest, gold: GoldAnnotation) -> tuple[int, int, float]:
    """Aligned-utterance errors: an emitted record is wrong when its
    transcript differs from the gold word sequence at all.

    Returns (aligned_count, error_count, error_rate); the rate is 0 for
    an empty manifest.
    """
    aligned = len(emitted.records)
    errors = 0
    for rec in emitted.records:
        if rec.id not in gold:
            raise MissingGold(f"no gold annotation for {rec.id!r}")
        if tuple(rec.transcript) != tuple(gold[rec.id]):
            errors += 1
    return aligned, errors, (errors / aligned if aligned else 0.0)


def aw_error(emitted: Manifest, gold: GoldAnnotation) -> tuple[int, int, float]:
    """Aligned-word errors: per-record word-level edit distance to gold,
    summed, over the total number of emitted transcript words."""
    total_words = 0
    errors = 0
    for rec in emitted.records:
        if rec.id not in gold:
            raise MissingGold(f"no gold annotation for {rec.id!r}")
        total_words += len(rec.transcript)
        errors += dis(tuple(gold[rec.id]), tuple(rec.transcript))
    return total_words, errors, (errors / total_words if total_words else 0.0)
