"""HTTP service for human review of the verification queue.

The queue itself is read-only; all state lives in an append-only
decision log that is replayed at startup, so a crash after an
acknowledged decision never loses it. One lock serializes writes;
reads are lock-free snapshots.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import os
import re
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlsplit

from .audio import cut_segment
from .dataset import Manifest, emit_manifest, load_manifest, merge_decisions
from .errors import (AlreadyDecided, FasaError, MissingManualText, SchemaError,
                     UnknownId)
from .review import (ACTIONS, DECIDED, MANUAL, PENDING, VerifyDecision,
                     VerifyItem, decision_to_json, load_decision_log,
                     load_queue, parse_decision)

log = logging.getLogger(__name__)

DEFAULT_PAGE_SIZE = 20

_SAFE_ID = re.compile(r"[^A-Za-z0-9._-]")


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def safe_filename(item_id: str) -> str:
    return _SAFE_ID.sub("_", item_id)


class VerifyStore:
    """Event-sourced queue state: items plus a durable decision log."""

    def __init__(self, items: list[VerifyItem], log_path: str | Path):
        self._order = {it.id: pos for pos, it in enumerate(items)}
        self._items = {it.id: it for it in items}
        self._log_path = Path(log_path)
        self._lock = threading.Lock()
        for d in load_decision_log(self._log_path):
            self._items[d.item_id] = self._check(d, logged=True).decided(d)

    def _check(self, d: VerifyDecision, logged: bool = False) -> VerifyItem:
        item = self._items.get(d.item_id)
        if item is None:
            raise UnknownId(f"no verify item {d.item_id!r}")
        if d.action not in ACTIONS:
            raise SchemaError(f"unknown action {d.action!r}")
        if d.action == MANUAL and not (d.manual_text or "").strip():
            raise MissingManualText(f"manual decision for {d.item_id!r} needs text")
        if item.status == DECIDED and not logged:
            assert item.decision is not None
            if item.decision.same_choice(d):
                return item
            raise AlreadyDecided(
                f"item {d.item_id!r} already decided as {item.decision.action!r}")
        return item

    def decide(self, d: VerifyDecision) -> VerifyItem:
        """Apply one decision; idempotent for a repeated identical one.

        The log line is flushed and fsynced before the new state is
        visible, so an acknowledged decision survives a crash.
        """
        with self._lock:
            item = self._check(d)
            if item.status == DECIDED:  # identical repeat
                return item
            if not d.decided_at:
                d = replace(d, decided_at=_now_iso())
            with open(self._log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(decision_to_json(d), ensure_ascii=False) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            item = item.decided(d)
            self._items[d.item_id] = item
            return item

    def get(self, item_id: str) -> VerifyItem:
        item = self._items.get(item_id)
        if item is None:
            raise UnknownId(f"no verify item {item_id!r}")
        return item

    def list_items(self, status: str | None = PENDING) -> list[VerifyItem]:
        """Items ordered worst WER first; queue position breaks ties."""
        items = [it for it in self._items.values()
                 if status in (None, "all") or it.status == status]
        items.sort(key=lambda it: (-it.wer, self._order[it.id]))
        return items

    def counts(self) -> dict[str, int]:
        pending = sum(1 for it in self._items.values() if it.status == PENDING)
        return {"pending": pending, "decided": len(self._items) - pending}

    def decisions(self) -> list[VerifyDecision]:
        return [it.decision for it in self._items.values()
                if it.decision is not None]

    def items_in_queue_order(self) -> dict[str, VerifyItem]:
        ordered = sorted(self._items.values(), key=lambda it: self._order[it.id])
        return {it.id: it for it in ordered}


@dataclass
class ServiceConfig:
    queue_path: Path
    log_path: Path
    auto_manifest_path: Path
    export_path: Path
    segments_dir: Path
    ui_dir: Path | None = None


def export_final(store: VerifyStore, cfg: ServiceConfig) -> Manifest:
    """Merge the decision log into the auto manifest and write the result.

    Segments for accepted items are cut on demand; paths in the emitted
    manifest are relative to its directory.
    """
    auto = load_manifest(cfg.auto_manifest_path)
    export_dir = cfg.export_path.parent

    def segment_path_for(item: VerifyItem) -> str:
        cfg.segments_dir.mkdir(parents=True, exist_ok=True)
        dest = cfg.segments_dir / f"{safe_filename(item.id)}.wav"
        if not dest.exists():
            dest.write_bytes(cut_segment(item.source_audio, item.start_s, item.end_s))
        return os.path.relpath(dest, export_dir)

    merged = merge_decisions(auto, store.decisions(),
                             store.items_in_queue_order(), segment_path_for)
    emit_manifest(merged, cfg.export_path)
    return merged


def _item_json(item: VerifyItem) -> dict:
    row = {
        "id": item.id,
        "gt": list(item.gt),
        "pred": list(item.pred),
        "wer": item.wer,
        "start_s": item.start_s,
        "end_s": item.end_s,
        "duration_s": round(item.duration_s, 3),
        "status": item.status,
    }
    if item.decision is not None:
        row["decision"] = decision_to_json(item.decision)
    return row


def build_handler(store: VerifyStore, cfg: ServiceConfig) -> type[BaseHTTPRequestHandler]:
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt: str, *args: object) -> None:
            log.debug("http: %s", fmt % args)

        def _send_json(self, status: int, payload: dict) -> None:
            body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _send_error(self, status: int, message: str) -> None:
            self._send_json(status, {"error": message})

        def _send_bytes(self, body: bytes, content_type: str) -> None:
            self.send_response(HTTPStatus.OK)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self) -> None:
            url = urlsplit(self.path)
            try:
                if url.path == "/api/items":
                    self._handle_list(parse_qs(url.query))
                elif url.path.startswith("/api/items/"):
                    item = store.get(url.path.removeprefix("/api/items/"))
                    self._send_json(HTTPStatus.OK, _item_json(item))
                elif url.path.startswith("/api/audio/"):
                    item = store.get(url.path.removeprefix("/api/audio/"))
                    data = cut_segment(item.source_audio, item.start_s, item.end_s)
                    self._send_bytes(data, "audio/wav")
                else:
                    self._handle_static(url.path)
            except UnknownId as exc:
                self._send_error(HTTPStatus.NOT_FOUND, str(exc))
            except FasaError as exc:
                self._send_error(HTTPStatus.BAD_REQUEST, str(exc))

        def _handle_list(self, query: dict[str, list[str]]) -> None:
            status = query.get("status", [PENDING])[0]
            if status not in (PENDING, DECIDED, "all"):
                self._send_error(HTTPStatus.BAD_REQUEST, f"bad status {status!r}")
                return
            page = max(int(query.get("page", ["1"])[0]), 1)
            page_size = max(int(query.get("page_size", [str(DEFAULT_PAGE_SIZE)])[0]), 1)
            items = store.list_items(status)
            pages = max((len(items) + page_size - 1) // page_size, 1)
            window = items[(page - 1) * page_size : page * page_size]
            self._send_json(HTTPStatus.OK, {
                "items": [_item_json(it) for it in window],
                "page": page, "pages": pages, "total": len(items),
                "counts": store.counts(),
            })

        def _handle_static(self, path: str) -> None:
            if cfg.ui_dir is None:
                self._send_error(HTTPStatus.NOT_FOUND, "no UI assets configured")
                return
            rel = path.lstrip("/") or "index.html"
            target = (cfg.ui_dir / rel).resolve()
            if not str(target).startswith(str(cfg.ui_dir.resolve())) or not target.is_file():
                self._send_error(HTTPStatus.NOT_FOUND, f"no such asset {path!r}")
                return
            ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
            self._send_bytes(target.read_bytes(), ctype)

        def do_POST(self) -> None:
            url = urlsplit(self.path)
            length = int(self.headers.get("Content-Length", "0"))
            raw = self.rfile.read(length) if length else b""
            try:
                if url.path == "/api/decisions":
                    self._handle_decision(raw)
                elif url.path == "/api/export":
                    merged = export_final(store, cfg)
                    self._send_json(HTTPStatus.OK, {
                        "records": len(merged.records),
                        "path": str(cfg.export_path),
                    })
                else:
                    self._send_error(HTTPStatus.NOT_FOUND, f"no such endpoint {url.path}")
            except UnknownId as exc:
                self._send_error(HTTPStatus.NOT_FOUND, str(exc))
            except AlreadyDecided as exc:
                self._send_error(HTTPStatus.CONFLICT, str(exc))
            except (MissingManualText, SchemaError, ValueError) as exc:
                self._send_error(HTTPStatus.BAD_REQUEST, str(exc))

        def _handle_decision(self, raw: bytes) -> None:
            try:
                body = json.loads(raw.decode("utf-8"))
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                raise SchemaError(f"decision body is not valid JSON: {exc}") from exc
            item = store.decide(parse_decision(body))
            self._send_json(HTTPStatus.OK, _item_json(item))

    return Handler


def make_server(store: VerifyStore, cfg: ServiceConfig,
                bind: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    handler = build_handler(store, cfg)
    return ThreadingHTTPServer((bind, port), handler)


def load_store(queue_path: str | Path, log_path: str | Path) -> VerifyStore:
    return VerifyStore(load_queue(queue_path), log_path)
