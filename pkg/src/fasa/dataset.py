"""Dataset manifests and the merge of reviewer decisions.

A manifest is one JSONL file (one record per line, so any prefix of the
file is itself a valid manifest) plus a small sidecar with the tool
version, the ASR id, and the thresholds the run used.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping

from . import __version__
from .align import Thresholds
from .errors import (DuplicateDecision, DuplicateId, MissingManualText,
                     SchemaError, UnknownId)
from .review import (ACCEPT_GT, ACCEPT_PRED, ACTIONS, MANUAL, REJECT,
                     VerifyDecision, VerifyItem)
from .transcript import normalize_words

AUTO = "auto"
USER_SELECTED = "user_selected"
USER_MANUAL = "user_manual"
_SOURCES = (AUTO, USER_SELECTED, USER_MANUAL)

_RECORD_KEYS = ("id", "audio", "source_audio", "start_s", "end_s",
                "transcript", "source")


@dataclass(frozen=True)
class SegmentRecord:
    id: str
    audio_path: str
    source_audio: str
    start_s: float
    end_s: float
    transcript: tuple[str, ...]
    source: str = AUTO
    speaker_meta: dict | None = None

    def __post_init__(self) -> None:
        if self.end_s <= self.start_s:
            raise ValueError(f"record {self.id}: end_s must exceed start_s")
        if not self.transcript:
            raise ValueError(f"record {self.id}: empty transcript")
        if self.source not in _SOURCES:
            raise ValueError(f"record {self.id}: unknown source {self.source!r}")


@dataclass(frozen=True)
class Manifest:
    records: tuple[SegmentRecord, ...]
    tool_version: str
    thresholds_used: Thresholds
    asr_id: str


def _sidecar_path(manifest_path: Path) -> Path:
    return manifest_path.with_suffix(".meta.json")


def _record_to_json(rec: SegmentRecord) -> dict:
    row: dict = {
        "id": rec.id,
        "audio": rec.audio_path,
        "source_audio": rec.source_audio,
        "start_s": rec.start_s,
        "end_s": rec.end_s,
        "transcript": list(rec.transcript),
        "source": rec.source,
    }
    if rec.speaker_meta is not None:
        row["speaker"] = rec.speaker_meta
    return row


def emit_manifest(manifest: Manifest, path: str | Path,
                  check_audio: bool = True) -> None:
    """Write the JSONL manifest and its ``.meta.json`` sidecar.

    Record ids must be unique and, unless ``check_audio`` is off, every
    referenced segment file must exist (relative paths resolve against
    the manifest's directory).
    """
    path = Path(path)
    seen: set[str] = set()
    for rec in manifest.records:
        if rec.id in seen:
            raise DuplicateId(f"manifest has two records with id {rec.id!r}")
        seen.add(rec.id)
        if check_audio:
            audio = Path(rec.audio_path)
            if not audio.is_absolute():
                audio = path.parent / audio
            if not audio.exists():
                raise FileNotFoundError(
                    f"record {rec.id}: segment file {audio} does not exist")

    lines = [json.dumps(_record_to_json(rec), ensure_ascii=False)
             for rec in manifest.records]
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")

    th = manifest.thresholds_used
    sidecar = {
        "tool_version": manifest.tool_version,
        "asr_id": manifest.asr_id,
        "thresholds": {
            "sigma_a": th.sigma_a,
            "sigma_i": th.sigma_i,
            "pgc_rel": th.pgc_rel,
            "len_ratio_rho": th.len_ratio_rho,
        },
    }
    _sidecar_path(path).write_text(json.dumps(sidecar, indent=1) + "\n",
                                   encoding="utf-8")


def load_manifest(path: str | Path) -> Manifest:
    """Read a manifest back; inverse of :func:`emit_manifest`."""
    path = Path(path)
    records = []
    seen: set[str] = set()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        for key in _RECORD_KEYS:
            if key not in row:
                raise SchemaError(f"{path}:{lineno}: missing '{key}'")
        if row["id"] in seen:
            raise DuplicateId(f"{path}:{lineno}: duplicate record id {row['id']!r}")
        seen.add(row["id"])
        records.append(SegmentRecord(
            id=row["id"], audio_path=row["audio"], source_audio=row["source_audio"],
            start_s=float(row["start_s"]), end_s=float(row["end_s"]),
            transcript=tuple(row["transcript"]), source=row["source"],
            speaker_meta=row.get("speaker"),
        ))

    sidecar_file = _sidecar_path(path)
    tool_version, asr_id, thresholds = __version__, "unknown", Thresholds()
    if sidecar_file.exists():
        meta = json.loads(sidecar_file.read_text(encoding="utf-8"))
        tool_version = meta.get("tool_version", tool_version)
        asr_id = meta.get("asr_id", asr_id)
        if "thresholds" in meta:
            thresholds = Thresholds(**meta["thresholds"])
    return Manifest(records=tuple(records), tool_version=tool_version,
                    thresholds_used=thresholds, asr_id=asr_id)


def merge_decisions(auto_aligned: Manifest,
                    decisions: Iterable[VerifyDecision],
                    verify_items: Mapping[str, VerifyItem],
                    segment_path_for: Callable[[VerifyItem], str]) -> Manifest:
    """Fold reviewer decisions into the final dataset.

    Accepted items are appended after the auto records, in queue order
    (so the result does not depend on the order reviewers worked in);
    rejected items are dropped; auto records are never touched.
    ``segment_path_for`` supplies the emitted audio path for an accepted
    item, cutting the segment if needed.
    """
    chosen: dict[str, VerifyDecision] = {}
    for d in decisions:
        if d.item_id not in verify_items:
            raise UnknownId(f"decision references unknown item {d.item_id!r}")
        if d.item_id in chosen:
            raise DuplicateDecision(f"two decisions for item {d.item_id!r}")
        if d.action not in ACTIONS:
            raise SchemaError(f"unknown action {d.action!r}")
        if d.action == MANUAL and not (d.manual_text or "").strip():
            raise MissingManualText(f"manual decision for {d.item_id!r} has no text")
        chosen[d.item_id] = d

    appended = []
    for item_id, item in verify_items.items():
        d = chosen.get(item_id)
        if d is None or d.action == REJECT:
            continue
        if d.action == ACCEPT_GT:
            transcript, source = item.gt, USER_SELECTED
        elif d.action == ACCEPT_PRED:
            transcript, source = item.pred, USER_SELECTED
        else:
            transcript, source = normalize_words(d.manual_text or ""), USER_MANUAL
            if not transcript:
                raise MissingManualText(
                    f"manual text for {item_id!r} cleans to no words")
        appended.append(SegmentRecord(
            id=item.id, audio_path=segment_path_for(item),
            source_audio=item.source_audio,
            start_s=item.start_s, end_s=item.end_s,
            transcript=tuple(transcript), source=source,
            speaker_meta=item.speaker,
        ))

    return Manifest(records=auto_aligned.records + tuple(appended),
                    tool_version=auto_aligned.tool_version,
                    thresholds_used=auto_aligned.thresholds_used,
                    asr_id=auto_aligned.asr_id)
