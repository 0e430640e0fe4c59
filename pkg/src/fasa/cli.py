"""Command-line entry points: align, verify, eval, synth.

Exit codes: 0 success, 2 configuration error, 3 corpus/input error,
4 missing gold annotation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .align import Thresholds, align_all, dis, pgc_filter
from .audio import cut_segment
from .dataset import Manifest, SegmentRecord, emit_manifest, load_manifest
from .errors import FasaError, MissingGold
from .evalsynth import (CorruptionSpec, SynthSpec, au_error, aw_error,
                        generate, load_gold, write_corpus)
from .hypothesis import (HypothesisSet, NoiseSpec, Utterance, load_hypotheses,
                         run_external_asr)
from .review import VerifyItem, write_queue
from .transcript import CHAT, PLAIN, RawTranscript, clean
from .verifysvc import (ServiceConfig, export_final, load_store, make_server,
                        safe_filename)

log = logging.getLogger("fasa")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CORPUS = 3
EXIT_GOLD = 4

ALIGN_MANIFEST = "data_align.manifest.jsonl"
VERIFY_QUEUE = "data_verify.jsonl"
FINAL_MANIFEST = "data_final.manifest.jsonl"
DECISION_LOG = "decisions.jsonl"
RUN_REPORT = "run_report.json"


class ConfigError(Exception):
    pass


class CorpusError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    corpus_dir: Path
    out_dir: Path
    thresholds: Thresholds
    clean_mode: str = PLAIN
    asr_hyp: Path | None = None
    asr_cmd: str | None = None
    pgc_hyp: Path | None = None
    pgc_cmd: str | None = None
    pgc_abs: int | None = None
    workers: int = 1
    strict: bool = False

    def __post_init__(self) -> None:
        if (self.asr_hyp is None) == (self.asr_cmd is None):
            raise ConfigError("exactly one of --asr-hyp / --asr-cmd is required")
        if self.pgc_hyp is not None and self.pgc_cmd is not None:
            raise ConfigError("--pgc-hyp and --pgc-cmd are mutually exclusive")
        if self.corpus_dir.resolve() == self.out_dir.resolve():
            raise ConfigError("--out must differ from --corpus")
        if self.clean_mode not in (PLAIN, CHAT):
            raise ConfigError(f"unknown clean mode {self.clean_mode!r}")
        if self.workers < 1:
            raise ConfigError("--workers must be positive")


def _parse_config_file(path: Path) -> dict[str, str]:
    """key=value per line; '#' starts a comment; keys match flag names."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip().strip("\"'")
    return values


_TRUE = ("1", "true", "yes", "on")
_FALSE = ("0", "false", "no", "off")


def _as_bool(value: str, key: str) -> bool:
    if value.lower() in _TRUE:
        return True
    if value.lower() in _FALSE:
        return False
    raise ConfigError(f"config key {key}: expected a boolean, got {value!r}")


class _Resolver:
    """Merge precedence: command-line flag > config file > default."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config: dict[str, str] = {}
        if getattr(args, "config", None):
            path = Path(args.config)
            if not path.exists():
                raise ConfigError(f"config file {path} does not exist")
            self.config = _parse_config_file(path)

    def get(self, key: str, default=None, convert=str):
        value = getattr(self.args, key, None)
        if value is None and key in self.config:
            raw = self.config[key]
            if convert is bool:
                return _as_bool(raw, key)
            try:
                value = convert(raw)
            except ValueError as exc:
                raise ConfigError(f"config key {key}: {exc}") from exc
        if value is None:
            return default
        if convert is not bool and convert is not str and isinstance(value, str):
            value = convert(value)
        return value


def _thresholds(res: _Resolver) -> Thresholds:
    try:
        return Thresholds(
            sigma_a=res.get("sigma_a", 0.15, float),
            sigma_i=res.get("sigma_i", 0.5, float),
            pgc_rel=res.get("pgc_rel", 0.2, float),
            len_ratio_rho=res.get("rho", 1.0, float),
            paper_strict_windows=res.get("paper_strict_windows", False, bool),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# align


@dataclass
class _FileResult:
    stem: str
    records: list[SegmentRecord] = field(default_factory=list)
    verify_items: list[VerifyItem] = field(default_factory=list)
    utterances: int = 0
    discarded: int = 0
    pgc_dropped: int = 0
    asr_id: str = ""
    error: str | None = None


def _speaker_meta(wav: Path) -> dict | None:
    sidecar = wav.with_suffix(".meta.json")
    if not sidecar.exists():
        return None
    meta = json.loads(sidecar.read_text(encoding="utf-8"))
    return meta if isinstance(meta, dict) else None


def _hypotheses_for(wav: Path, cfg: RunConfig,
                    shared: HypothesisSet | None) -> HypothesisSet:
    if cfg.asr_cmd is not None:
        return run_external_asr(wav, cfg.asr_cmd)
    assert shared is not None
    mine = tuple(u for u in shared.utterances
                 if Path(u.audio_path).name == wav.name)
    return HypothesisSet(utterances=mine, asr_id=shared.asr_id)


def _second_round(records: list[SegmentRecord], cfg: RunConfig,
                  out_dir: Path, shared_pgc: HypothesisSet | None) -> HypothesisSet | None:
    """Second-round predictions for PGC, keyed by utterance id."""
    if cfg.pgc_hyp is not None:
        return shared_pgc
    if cfg.pgc_cmd is None:
        return None
    utts = []
    for rec in records:
        seg_path = out_dir / rec.audio_path
        hs = run_external_asr(seg_path, cfg.pgc_cmd)
        words = tuple(w for u in hs.utterances for w in u.pred_words)
        utts.append(Utterance(id=rec.id, audio_path=str(seg_path),
                              start_s=0.0, end_s=max(rec.end_s - rec.start_s, 1e-6),
                              pred_words=words, pred_text_raw=" ".join(words)))
    return HypothesisSet(utterances=tuple(utts), asr_id="pgc")


def _process_file(wav: Path, cfg: RunConfig, shared: HypothesisSet | None,
                  shared_pgc: HypothesisSet | None) -> _FileResult:
    result = _FileResult(stem=wav.stem)
    ext = ".cha" if cfg.clean_mode == CHAT else ".txt"
    transcript_file = wav.with_suffix(ext)
    if not transcript_file.exists():
        result.error = f"no transcript {transcript_file.name} next to {wav.name}"
        return result

    raw = RawTranscript(text=transcript_file.read_text(encoding="utf-8"),
                        format_hint=cfg.clean_mode, source_path=str(transcript_file))
    transcript = clean(raw)
    hs = _hypotheses_for(wav, cfg, shared)
    result.asr_id = hs.asr_id
    result.utterances = len(hs)

    data_align, data_verify = align_all(hs, transcript, cfg.thresholds)
    result.discarded = len(hs) - len(data_align) - len(data_verify)

    seg_dir = cfg.out_dir / "segments" / wav.stem
    if data_align:
        seg_dir.mkdir(parents=True, exist_ok=True)
    speaker = _speaker_meta(wav)
    source_audio = str(wav.resolve())

    for u, gt in data_align:
        fname = f"{safe_filename(u.id)}.wav"
        (seg_dir / fname).write_bytes(cut_segment(wav, u.start_s, u.end_s))
        result.records.append(SegmentRecord(
            id=u.id, audio_path=f"segments/{wav.stem}/{fname}",
            source_audio=source_audio, start_s=u.start_s, end_s=u.end_s,
            transcript=gt, speaker_meta=speaker))

    second = _second_round(result.records, cfg, cfg.out_dir, shared_pgc)
    if second is not None:
        kept = pgc_filter([(u, gt) for u, gt in data_align], second,
                          cfg.thresholds, absolute=cfg.pgc_abs)
        kept_ids = {u.id for u, _ in kept}
        survivors = []
        for rec in result.records:
            if rec.id in kept_ids:
                survivors.append(rec)
            else:
                (cfg.out_dir / rec.audio_path).unlink(missing_ok=True)
                result.pgc_dropped += 1
        result.records = survivors

    for u, gt, pred in data_verify:
        result.verify_items.append(VerifyItem(
            id=u.id, source_audio=source_audio, start_s=u.start_s, end_s=u.end_s,
            gt=gt, pred=pred, wer=dis(gt, pred) / len(gt), speaker=speaker))
    return result


def cmd_align(args: argparse.Namespace) -> int:
    res = _Resolver(args)
    try:
        cfg = RunConfig(
            corpus_dir=Path(res.get("corpus", convert=Path) or _missing("--corpus")),
            out_dir=Path(res.get("out", convert=Path) or _missing("--out")),
            thresholds=_thresholds(res),
            clean_mode=res.get("clean_mode", PLAIN),
            asr_hyp=res.get("asr_hyp", None, Path),
            asr_cmd=res.get("asr_cmd", None),
            pgc_hyp=None if res.get("no_pgc", False, bool) else res.get("pgc_hyp", None, Path),
            pgc_cmd=None if res.get("no_pgc", False, bool) else res.get("pgc_cmd", None),
            pgc_abs=res.get("pgc_abs", None, int),
            workers=res.get("workers", 1, int),
            strict=res.get("strict", False, bool),
        )
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG

    if not cfg.corpus_dir.is_dir():
        log.error("corpus directory %s does not exist", cfg.corpus_dir)
        return EXIT_CORPUS
    wavs = sorted(cfg.corpus_dir.glob("*.wav"))
    if not wavs:
        log.error("no .wav files in %s", cfg.corpus_dir)
        return EXIT_CORPUS

    t0 = time.monotonic()
    try:
        shared = load_hypotheses(cfg.asr_hyp) if cfg.asr_hyp else None
        shared_pgc = load_hypotheses(cfg.pgc_hyp) if cfg.pgc_hyp else None
    except (FasaError, OSError) as exc:
        log.error("cannot load hypotheses: %s", exc)
        return EXIT_CORPUS

    cfg.out_dir.mkdir(parents=True, exist_ok=True)

    def run(wav: Path) -> _FileResult:
        try:
            return _process_file(wav, cfg, shared, shared_pgc)
        except (FasaError, OSError, ValueError) as exc:
            failed = _FileResult(stem=wav.stem)
            failed.error = f"{type(exc).__name__}: {exc}"
            return failed

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run, wavs))
    else:
        results = [run(wav) for wav in wavs]

    failures = [r for r in results if r.error]
    for r in failures:
        log.error("%s: %s", r.stem, r.error)
    if failures and cfg.strict:
        return EXIT_CORPUS

    records: list[SegmentRecord] = []
    verify_items: list[VerifyItem] = []
    for r in results:
        records.extend(r.records)
        verify_items.extend(r.verify_items)
    asr_ids = {r.asr_id for r in results if r.asr_id}
    asr_id = asr_ids.pop() if len(asr_ids) == 1 else "mixed"

    manifest = Manifest(records=tuple(records), tool_version=__version__,
                        thresholds_used=cfg.thresholds, asr_id=asr_id)
    emit_manifest(manifest, cfg.out_dir / ALIGN_MANIFEST)
    write_queue(verify_items, cfg.out_dir / VERIFY_QUEUE)

    report = {
        "tool_version": __version__,
        "corpus": str(cfg.corpus_dir),
        "files": len(wavs),
        "files_failed": len(failures),
        "utterances": sum(r.utterances for r in results),
        "aligned": len(records),
        "verify": len(verify_items),
        "discarded": sum(r.discarded for r in results),
        "pgc_dropped": sum(r.pgc_dropped for r in results),
        "per_file": {r.stem: {
            "utterances": r.utterances, "aligned": len(r.records),
            "verify": len(r.verify_items), "discarded": r.discarded,
            "pgc_dropped": r.pgc_dropped, "error": r.error,
        } for r in results},
        "wall_time_s": round(time.monotonic() - t0, 3),
    }
    (cfg.out_dir / RUN_REPORT).write_text(json.dumps(report, indent=1) + "\n",
                                          encoding="utf-8")
    log.info("aligned %d, verify %d, discarded %d (of %d utterances) in %.2fs",
             report["aligned"], report["verify"], report["discarded"],
             report["utterances"], report["wall_time_s"])
    return EXIT_OK


def _missing(flag: str):
    raise ConfigError(f"{flag} is required")


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args: argparse.Namespace) -> int:
    res = _Resolver(args)
    try:
        out_dir = res.get("out", convert=Path) or _missing("--out")
        bind = res.get("bind", "127.0.0.1")
        port = res.get("port", 8765, int)
        export_on_exit = res.get("export_on_exit", False, bool)
        ui_dir = res.get("ui_dir", None, Path)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG

    out_dir = Path(out_dir)
    queue_path = out_dir / VERIFY_QUEUE
    if not queue_path.exists():
        log.error("verify queue %s does not exist (run `fasa align` first)", queue_path)
        return EXIT_CORPUS

    cfg = ServiceConfig(
        queue_path=queue_path,
        log_path=out_dir / DECISION_LOG,
        auto_manifest_path=out_dir / ALIGN_MANIFEST,
        export_path=out_dir / FINAL_MANIFEST,
        segments_dir=out_dir / "segments" / "verified",
        ui_dir=Path(ui_dir) if ui_dir else None,
    )
    store = load_store(cfg.queue_path, cfg.log_path)
    server = make_server(store, cfg, bind=bind, port=port)
    host, actual_port = server.server_address[:2]
    print(f"verify service listening on http://{host}:{actual_port}/", flush=True)
    counts = store.counts()
    print(f"{counts['pending']} pending, {counts['decided']} decided", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        if export_on_exit:
            merged = export_final(store, cfg)
            print(f"exported {len(merged.records)} records to {cfg.export_path}",
                  flush=True)
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval


def cmd_eval(args: argparse.Namespace) -> int:
    manifest_path = Path(args.manifest)
    gold_path = Path(args.gold)
    for p in (manifest_path, gold_path):
        if not p.exists():
            log.error("%s does not exist", p)
            return EXIT_CORPUS
    try:
        manifest = load_manifest(manifest_path)
        gold = load_gold(gold_path)
        au = au_error(manifest, gold)
        aw = aw_error(manifest, gold)
    except MissingGold as exc:
        log.error("%s", exc)
        return EXIT_GOLD
    except FasaError as exc:
        log.error("%s", exc)
        return EXIT_CORPUS

    if args.json:
        print(json.dumps({
            "au": {"aligned": au[0], "errors": au[1], "rate": au[2]},
            "aw": {"words": aw[0], "errors": aw[1], "rate": aw[2]},
        }, indent=1))
    else:
        print(f"aligned utterances: {au[0]:6d}   errors: {au[1]} ({au[2] * 100:.2f}%)")
        print(f"aligned words:      {aw[0]:6d}   errors: {aw[1]} ({aw[2] * 100:.2f}%)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth


def cmd_synth(args: argparse.Namespace) -> int:
    res = _Resolver(args)
    try:
        out_dir = res.get("out", convert=Path) or _missing("--out")
        seed = res.get("seed", 0, int)
        spec_kwargs: dict = {}
        if args.spec:
            spec_kwargs = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        corruption = dict(spec_kwargs.pop("corruption", {}))
        noise = dict(spec_kwargs.pop("noise", {}))
        for key, flag in (("prefix_drop_frac", "prefix_drop"),
                          ("annotation_noise_rate", "annotation_noise"),
                          ("untranscribed_frac", "untranscribed")):
            v = res.get(flag, None, float)
            if v is not None:
                corruption[key] = v
        if res.get("block_shuffle", None, bool) is not None:
            corruption["block_shuffle"] = res.get("block_shuffle", False, bool)
        for key in ("sub_rate", "ins_rate", "del_rate"):
            v = res.get(key, None, float)
            if v is not None:
                noise[key] = v
        for key in ("n_segments", "words_min", "words_max", "vocab_size"):
            v = res.get(key, None, int)
            if v is not None:
                spec_kwargs[key] = v
        if "vocabulary" in noise:
            noise["vocabulary"] = tuple(noise["vocabulary"])
        spec = SynthSpec(corruption=CorruptionSpec(**corruption),
                         noise=NoiseSpec(**noise), **spec_kwargs)
    except (ConfigError, ValueError, TypeError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_CORPUS

    corpus, hypotheses, gold = generate(spec, seed)
    paths = write_corpus(corpus, hypotheses, gold, Path(out_dir))
    n_words = len(corpus.full_transcript)
    print(f"wrote {len(corpus.truth_segments)} segments "
          f"({n_words} transcript words) under {out_dir}")
    for kind, path in paths.items():
        print(f"  {kind}: {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file; flags win")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fasa",
        description="Build time-stamped (audio, transcript) datasets from "
                    "long audio and noisy transcriptions.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_align = sub.add_parser("align", help="run the alignment pipeline")
    _add_common(p_align)
    p_align.add_argument("--corpus", help="directory of <name>.wav + <name>.txt/.cha")
    p_align.add_argument("--out", help="output directory")
    p_align.add_argument("--sigma-a", type=float, dest="sigma_a")
    p_align.add_argument("--sigma-i", type=float, dest="sigma_i")
    p_align.add_argument("--pgc-rel", type=float, dest="pgc_rel")
    p_align.add_argument("--rho", type=float)
    p_align.add_argument("--paper-strict-windows", action="store_true",
                         default=None, dest="paper_strict_windows")
    p_align.add_argument("--clean-mode", choices=(PLAIN, CHAT), dest="clean_mode")
    p_align.add_argument("--asr-hyp", dest="asr_hyp", help="hypotheses JSON file")
    p_align.add_argument("--asr-cmd", dest="asr_cmd",
                         help="external ASR command with {audio} placeholder")
    p_align.add_argument("--pgc-hyp", dest="pgc_hyp")
    p_align.add_argument("--pgc-cmd", dest="pgc_cmd")
    p_align.add_argument("--pgc-abs", type=int, dest="pgc_abs",
                         help="absolute word-count PGC threshold")
    p_align.add_argument("--no-pgc", action="store_true", default=None, dest="no_pgc")
    p_align.add_argument("--workers", type=int)
    p_align.add_argument("--strict", action="store_true", default=None)
    p_align.set_defaults(func=cmd_align)

    p_verify = sub.add_parser("verify", help="serve the review queue")
    _add_common(p_verify)
    p_verify.add_argument("--out", help="align output directory")
    p_verify.add_argument("--port", type=int)
    p_verify.add_argument("--bind")
    p_verify.add_argument("--export-on-exit", action="store_true",
                          default=None, dest="export_on_exit")
    p_verify.add_argument("--ui-dir", dest="ui_dir", help="static UI assets")
    p_verify.set_defaults(func=cmd_verify)

    p_eval = sub.add_parser("eval", help="score a manifest against gold")
    p_eval.add_argument("manifest")
    p_eval.add_argument("gold")
    p_eval.add_argument("--json", action="store_true")
    p_eval.set_defaults(func=cmd_eval)

    p_synth = sub.add_parser("synth", help="generate a synthetic corpus")
    _add_common(p_synth)
    p_synth.add_argument("--out")
    p_synth.add_argument("--seed", type=int)
    p_synth.add_argument("--spec", help="JSON file with generator settings")
    p_synth.add_argument("--segments", type=int, dest="n_segments")
    p_synth.add_argument("--words-min", type=int, dest="words_min")
    p_synth.add_argument("--words-max", type=int, dest="words_max")
    p_synth.add_argument("--vocab-size", type=int, dest="vocab_size")
    p_synth.add_argument("--prefix-drop", type=float, dest="prefix_drop")
    p_synth.add_argument("--block-shuffle", action="store_true",
                         default=None, dest="block_shuffle")
    p_synth.add_argument("--annotation-noise", type=float, dest="annotation_noise")
    p_synth.add_argument("--untranscribed", type=float, dest="untranscribed")
    p_synth.add_argument("--sub-rate", type=float, dest="sub_rate")
    p_synth.add_argument("--ins-rate", type=float, dest="ins_rate")
    p_synth.add_argument("--del-rate", type=float, dest="del_rate")
    p_synth.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except CorpusError as exc:
        log.error("%s", exc)
        return EXIT_CORPUS


if __name__ == "__main__":
    sys.exit(main())
