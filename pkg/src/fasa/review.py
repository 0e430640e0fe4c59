"""Data model for the human verification queue.

Borderline alignments wait in a JSONL queue file; reviewer decisions
accumulate in an append-only JSONL log. Both files are line-wise
independent so a truncated tail never corrupts earlier entries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import SchemaError

PENDING = "pending"
DECIDED = "decided"

ACCEPT_GT = "accept_gt"
ACCEPT_PRED = "accept_pred"
MANUAL = "manual"
REJECT = "reject"
ACTIONS = (ACCEPT_GT, ACCEPT_PRED, MANUAL, REJECT)


@dataclass(frozen=True)
class VerifyDecision:
    item_id: str
    action: str
    manual_text: str | None = None
    decided_at: str = ""

    def same_choice(self, other: "VerifyDecision") -> bool:
        """True when both decisions pick the same outcome (timestamps aside)."""
        return (self.item_id == other.item_id and self.action == other.action
                and (self.manual_text or "") == (other.manual_text or ""))


@dataclass(frozen=True)
class VerifyItem:
    id: str
    source_audio: str
    start_s: float
    end_s: float
    gt: tuple[str, ...]
    pred: tuple[str, ...]
    wer: float
    speaker: dict | None = None
    status: str = PENDING
    decision: VerifyDecision | None = None

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def decided(self, decision: VerifyDecision) -> "VerifyItem":
        return replace(self, status=DECIDED, decision=decision)


def item_to_json(item: VerifyItem) -> dict:
    row: dict = {
        "id": item.id,
        "source_audio": item.source_audio,
        "start_s": item.start_s,
        "end_s": item.end_s,
        "gt": list(item.gt),
        "pred": list(item.pred),
        "wer": item.wer,
    }
    if item.speaker is not None:
        row["speaker"] = item.speaker
    return row


def write_queue(items: list[VerifyItem], path: str | Path) -> None:
    lines = [json.dumps(item_to_json(it), ensure_ascii=False) for it in items]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def load_queue(path: str | Path) -> list[VerifyItem]:
    items = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        for key in ("id", "source_audio", "start_s", "end_s", "gt", "pred", "wer"):
            if key not in row:
                raise SchemaError(f"{path}:{lineno}: missing '{key}'")
        items.append(VerifyItem(
            id=row["id"], source_audio=row["source_audio"],
            start_s=float(row["start_s"]), end_s=float(row["end_s"]),
            gt=tuple(row["gt"]), pred=tuple(row["pred"]), wer=float(row["wer"]),
            speaker=row.get("speaker"),
        ))
    return items


def decision_to_json(d: VerifyDecision) -> dict:
    row = {"item_id": d.item_id, "action": d.action, "decided_at": d.decided_at}
    if d.manual_text is not None:
        row["manual_text"] = d.manual_text
    return row


def parse_decision(row: dict, where: str = "decision") -> VerifyDecision:
    for key in ("item_id", "action"):
        if key not in row:
            raise SchemaError(f"{where}: missing '{key}'")
    if row["action"] not in ACTIONS:
        raise SchemaError(f"{where}: unknown action {row['action']!r}")
    return VerifyDecision(
        item_id=str(row["item_id"]), action=row["action"],
        manual_text=row.get("manual_text"),
        decided_at=str(row.get("decided_at", "")),
    )


def load_decision_log(path: str | Path) -> list[VerifyDecision]:
    p = Path(path)
    if not p.exists():
        return []
    decisions = []
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        decisions.append(parse_decision(row, f"{path}:{lineno}"))
    return decisions
