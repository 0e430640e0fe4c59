"""Acceptance suite: one test per criterion, each printing a PASS line
with the measured numbers (run with ``pytest -s`` to see them)."""

import json
import os
import random
import signal
import subprocess
import sys
import time
import urllib.error
import urllib.request
from fractions import Fraction
from pathlib import Path

import pytest

from fasa.align import (ALIGN, DISCARD, VERIFY, Thresholds, align_all,
                        best_match, best_match_fast, dis)
from fasa.audio import cut_segment, wav_payload
from fasa.cli import main
from fasa.dataset import Manifest, SegmentRecord, load_manifest
from fasa.evalsynth import (NOISE_VOCAB, SynthSpec, au_error, aw_error,
                            generate, load_gold)
from fasa.hypothesis import HypothesisSet, NoiseSpec, Utterance
from fasa.review import load_queue
from conftest import write_test_wav

DEFAULTS = Thresholds()


def ok(name: str, detail: str) -> None:
    print(f"\n[ACCEPTANCE] {name}: PASS ({detail})")


def _records(specs):
    """specs: list of (id, transcript_words)."""
    return tuple(
        SegmentRecord(id=i, audio_path=f"{i}.wav", source_audio="s.wav",
                      start_s=float(k), end_s=float(k) + 1.0, transcript=words)
        for k, (i, words) in enumerate(specs))


def test_metric_arithmetic_reproduces_published_rates():
    t0 = time.perf_counter()

    # 81 aligned utterances, 1 wrong; 903 words, 2 word errors
    good = [(f"g{k}", tuple(f"w{j}" for j in range(11))) for k in range(80)]
    bad_words = tuple(f"w{j}" for j in range(23))
    specs = good + [("bad", bad_words)]
    manifest = Manifest(records=_records(specs), tool_version="t",
                        thresholds_used=DEFAULTS, asr_id="a")
    gold = {i: words for i, words in specs}
    gold["bad"] = bad_words[:5] + ("x1", "x2") + bad_words[7:]
    au = au_error(manifest, gold)
    aw = aw_error(manifest, gold)
    assert (au[0], au[1]) == (81, 1)
    assert (aw[0], aw[1]) == (903, 2)
    assert abs(au[2] * 100 - 1.23) <= 0.01
    assert abs(aw[2] * 100 - 0.22) <= 0.01

    # 17 aligned, 16 wrong; 1524 words, 1523 word errors
    lengths = [95] * 15 + [98]
    specs2 = [("fine", ("solo",))] + [
        (f"b{k}", tuple(f"w{j}" for j in range(n))) for k, n in enumerate(lengths)]
    manifest2 = Manifest(records=_records(specs2), tool_version="t",
                         thresholds_used=DEFAULTS, asr_id="a")
    gold2 = {"fine": ("solo",)}
    for i, words in specs2[1:]:
        gold2[i] = tuple(f"z{j}" for j in range(len(words)))
    au2 = au_error(manifest2, gold2)
    aw2 = aw_error(manifest2, gold2)
    assert (au2[0], au2[1]) == (17, 16)
    assert (aw2[0], aw2[1]) == (1524, 1523)
    assert abs(au2[2] * 100 - 94.12) <= 0.01
    assert abs(aw2[2] * 100 - 99.93) <= 0.01

    dt = time.perf_counter() - t0
    assert dt < 1.0
    ok("metric arithmetic", f"1.23%/0.22% and 94.12%/99.93% reproduced in {dt:.3f}s")


def test_oracle_equivalence_1000_instances():
    rng = random.Random(20250809)
    vocab = [f"w{i}" for i in range(50)]
    t0 = time.perf_counter()
    divergences = 0
    for trial in range(1000):
        m = rng.randint(1, 200)
        L = rng.randint(1, 20)
        T = tuple(rng.choice(vocab) for _ in range(m))
        pred = tuple(rng.choice(vocab) for _ in range(L))
        slow = best_match(pred, T, DEFAULTS)
        fast = best_match_fast(pred, T, DEFAULTS)
        if slow != fast:
            divergences += 1
            print("DIVERGENCE at trial", trial, slow, fast)
    dt = time.perf_counter() - t0
    assert divergences == 0
    assert dt < 60.0
    ok("oracle equivalence", f"1000 instances, 0 divergences, {dt:.1f}s")


def test_edit_distance_properties_10000_pairs():
    rng = random.Random(99)
    vocab = ["a", "b", "c", "d", "e"]
    t0 = time.perf_counter()
    for _ in range(10000):
        x = [rng.choice(vocab) for _ in range(rng.randint(0, 10))]
        y = [rng.choice(vocab) for _ in range(rng.randint(0, 10))]
        z = [rng.choice(vocab) for _ in range(rng.randint(0, 10))]
        dxy, dyx = dis(x, y), dis(y, x)
        assert dxy == dyx
        assert dis(x, x) == 0
        assert abs(len(x) - len(y)) <= dxy <= max(len(x), len(y))
        assert dxy <= dis(x, z) + dis(z, y)
    dt = time.perf_counter() - t0
    assert dt < 30.0
    ok("edit distance properties", f"10000 triples, axioms and bounds hold, {dt:.1f}s")


def test_end_to_end_clean_corpus(tmp_path):
    corpus, out = tmp_path / "corpus", tmp_path / "out"
    assert main(["synth", "--out", str(corpus), "--seed", "7",
                 "--segments", "100"]) == 0
    assert main(["align", "--corpus", str(corpus), "--out", str(out),
                 "--asr-hyp", str(corpus / "hypotheses.json")]) == 0
    manifest = load_manifest(out / "data_align.manifest.jsonl")
    gold = load_gold(corpus / "gold.jsonl")
    assert len(manifest.records) == 100
    assert (out / "data_verify.jsonl").read_text() == ""
    au = au_error(manifest, gold)
    aw = aw_error(manifest, gold)
    assert au[1] == 0 and au[2] == 0.0
    assert aw[1] == 0 and aw[2] == 0.0
    ok("end-to-end clean corpus",
       f"100/100 aligned, AU error {au[2]:.2%}, AW error {aw[2]:.2%}")


def test_misordered_incomplete_transcript_scenario(tmp_path):
    """Missing leading transcriptions plus shuffled blocks plus 5% word
    substitutions; calibrated generator: 200 segments of 30..45 words,
    seed 4. Achieved rates are recorded into the run report."""
    corpus, out = tmp_path / "corpus", tmp_path / "out"
    assert main(["synth", "--out", str(corpus), "--seed", "4",
                 "--segments", "200", "--words-min", "30", "--words-max", "45",
                 "--vocab-size", "120", "--prefix-drop", "0.2",
                 "--block-shuffle", "--sub-rate", "0.05"]) == 0
    assert main(["align", "--corpus", str(corpus), "--out", str(out),
                 "--asr-hyp", str(corpus / "hypotheses.json")]) == 0

    manifest = load_manifest(out / "data_align.manifest.jsonl")
    queue = load_queue(out / "data_verify.jsonl")
    gold = load_gold(corpus / "gold.jsonl")
    dropped = {f"u{k:04d}" for k in range(40)}  # prefix_drop 0.2 of 200
    survivors = set(gold) - dropped

    by_id = {r.id: r.transcript for r in manifest.records}
    queue_ids = {it.id for it in queue}
    ok_count = sum(1 for s in survivors if by_id.get(s) == gold[s])
    discarded = sum(1 for d in dropped if d not in by_id and d not in queue_ids)
    falsely_aligned = sorted(d for d in dropped if d in by_id)

    survive_rate = ok_count / len(survivors)
    discard_rate = discarded / len(dropped)
    report_path = out / "run_report.json"
    report = json.loads(report_path.read_text())
    report["scenario_rates"] = {
        "survivors_aligned_exact": round(survive_rate, 4),
        "prefix_dropped_discarded": round(discard_rate, 4),
        "falsely_aligned": len(falsely_aligned),
    }
    report_path.write_text(json.dumps(report, indent=1) + "\n")

    assert falsely_aligned == [], f"dropped segments aligned: {falsely_aligned}"
    assert survive_rate >= 0.95, f"survive-ok rate {survive_rate:.4f} < 0.95"
    assert discard_rate >= 0.90, f"discard rate {discard_rate:.4f} < 0.90"
    ok("misordered/incomplete transcript scenario",
       f"survive-ok {survive_rate:.1%}, dropped-discarded {discard_rate:.0%}, "
       f"0 falsely aligned")


def test_threshold_partition_invariant():
    rng = random.Random(4242)
    vocab = [f"w{i}" for i in range(30)]
    checked = 0
    for _ in range(400):
        m = rng.randint(1, 60)
        L = rng.randint(1, 12)
        T = tuple(rng.choice(vocab) for _ in range(m))
        pred = tuple(rng.choice(vocab) for _ in range(L))
        decision = best_match_fast(pred, T, DEFAULTS)
        if decision.match is None:
            assert decision.kind == DISCARD
            continue
        w = decision.match.wer
        buckets = [w < DEFAULTS.sigma_a,
                   DEFAULTS.sigma_a <= w < DEFAULTS.sigma_i,
                   w >= DEFAULTS.sigma_i]
        assert sum(buckets) == 1
        expected = [ALIGN, VERIFY, DISCARD][buckets.index(True)]
        assert decision.kind == expected
        assert w == Fraction(decision.match.d_min, decision.match.best_len)
        checked += 1

    # bucket counts over a full run add up to the utterance count
    spec = SynthSpec(n_segments=60, noise=NoiseSpec(sub_rate=0.25,
                                                    vocabulary=NOISE_VOCAB))
    corpus, hs, _ = generate(spec, 17)
    aligned, verify = align_all(hs, corpus.full_transcript, DEFAULTS)
    assert len(aligned) + len(verify) <= len(hs)
    ok("threshold partition", f"{checked} random matches all in exactly one bucket")


def test_pgc_removes_misaligned_records():
    t0 = time.perf_counter()
    from fasa.align import pgc_filter

    def utt(i, n):
        return Utterance(id=i, audio_path="a.wav", start_s=0.0, end_s=1.0,
                         pred_words=tuple(f"p{j}" for j in range(n)),
                         pred_text_raw="")

    aligned = [(utt(f"bad{k}", 10), tuple(f"g{j}" for j in range(10)))
               for k in range(10)]
    aligned += [(utt(f"ok{k}", 10), tuple(f"g{j}" for j in range(10)))
                for k in range(10)]
    second = HypothesisSet(utterances=tuple(
        [utt(f"bad{k}", 4) for k in range(10)] +      # 60% off: drop
        [utt(f"ok{k}", 9) for k in range(5)] +        # 10% off: keep
        [utt(f"ok{k}", 12) for k in range(5, 10)]),   # 20% off: keep (not >)
        asr_id="second")
    kept = pgc_filter(aligned, second, DEFAULTS)
    kept_ids = {u.id for u, _ in kept}
    assert kept_ids == {f"ok{k}" for k in range(10)}
    dt = time.perf_counter() - t0
    assert dt < 5.0
    ok("post-generation checking", f"10/10 misaligned dropped, 0/10 good dropped, {dt:.2f}s")


def test_audio_slicing_partitions(tmp_path):
    t0 = time.perf_counter()
    src = tmp_path / "src.wav"
    payload = write_test_wav(src, 32000, seed=5)
    rng = random.Random(7)
    done = 0
    while done < 100:
        k = rng.randint(2, 6)
        bounds = sorted(rng.uniform(0.0, 2.0) for _ in range(k))
        samples = [round(b * 16000) for b in bounds]
        if len(set(samples)) != len(samples):
            continue
        pieces = b"".join(wav_payload(cut_segment(src, a, b))
                          for a, b in zip(bounds, bounds[1:]))
        s0, s1 = samples[0], samples[-1]
        assert pieces == payload[2 * s0: 2 * s1]
        done += 1
    dt = time.perf_counter() - t0
    assert dt < 30.0
    ok("audio slicing", f"100 partitions bit-identical to source, {dt:.1f}s")


def test_alignment_determinism_across_workers(tmp_path):
    from fasa.evalsynth import write_corpus
    corpus = tmp_path / "corpus"
    for k, name in enumerate(("s1", "s2", "s3")):
        spec = SynthSpec(n_segments=15, id_prefix=f"{name}-",
                         noise=NoiseSpec(sub_rate=0.2, vocabulary=NOISE_VOCAB))
        c, hs, gold = generate(spec, seed=60 + k)
        write_corpus(c, hs, gold, corpus, name=name)
        (corpus / "hypotheses.json").rename(corpus / f"hyp_{name}.json")
    docs = [json.loads((corpus / f"hyp_{n}.json").read_text())
            for n in ("s1", "s2", "s3")]
    (corpus / "hypotheses.json").write_text(json.dumps(
        {"asr_id": "mock", "segments": [s for d in docs for s in d["segments"]]}))

    outputs = []
    for workers in ("1", "8"):
        out = tmp_path / f"run_w{workers}"
        assert main(["align", "--corpus", str(corpus), "--out", str(out),
                     "--asr-hyp", str(corpus / "hypotheses.json"),
                     "--workers", workers]) == 0
        outputs.append(out)
    names = ("data_align.manifest.jsonl", "data_align.manifest.meta.json",
             "data_verify.jsonl")
    for name in names:
        assert (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes()
    ok("determinism", "workers=1 and workers=8 manifests byte-identical")


def test_performance_budget():
    spec = SynthSpec(n_segments=500, words_min=17, words_max=23, vocab_size=150,
                     noise=NoiseSpec(sub_rate=0.03, vocabulary=NOISE_VOCAB))
    corpus, hs, _ = generate(spec, 42)
    m = len(corpus.full_transcript)
    assert m >= 9500 and len(hs) == 500
    assert max(len(u.pred_words) for u in hs.utterances) <= 25
    t0 = time.perf_counter()
    aligned, verify = align_all(hs, corpus.full_transcript, DEFAULTS, workers=1)
    dt = time.perf_counter() - t0
    assert dt < 60.0
    ok("performance budget",
       f"m={m}, 500 utterances aligned single-threaded in {dt:.1f}s "
       f"({len(aligned)} aligned)")


class TestVerifyService:
    def _api(self, port, path, body=None):
        url = f"http://127.0.0.1:{port}{path}"
        if body is None:
            req = url
        else:
            req = urllib.request.Request(
                url, data=json.dumps(body).encode(), method="POST",
                headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=10) as resp:
                return resp.status, json.loads(resp.read())
        except urllib.error.HTTPError as err:
            return err.code, json.loads(err.read())

    def _start(self, out):
        proc = subprocess.Popen(
            [sys.executable, "-m", "fasa.cli", "verify", "--out", str(out),
             "--port", "0"],
            stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True)
        line = proc.stdout.readline()
        assert "listening" in line, line
        port = int(line.rsplit(":", 1)[1].strip().rstrip("/"))
        return proc, port

    def test_full_lifecycle_and_crash_recovery(self, tmp_path):
        corpus, out = tmp_path / "corpus", tmp_path / "out"
        assert main(["synth", "--out", str(corpus), "--seed", "5",
                     "--segments", "30", "--sub-rate", "0.12",
                     "--prefix-drop", "0.1", "--block-shuffle"]) == 0
        assert main(["align", "--corpus", str(corpus), "--out", str(out),
                     "--asr-hyp", str(corpus / "hypotheses.json")]) == 0
        queue = load_queue(out / "data_verify.jsonl")
        assert len(queue) >= 3, "scenario needs a non-trivial review queue"

        proc, port = self._start(out)
        try:
            status, listing = self._api(port, "/api/items?status=pending")
            assert status == 200
            wers = [it["wer"] for it in listing["items"]]
            assert wers == sorted(wers, reverse=True)
            ids = [it["id"] for it in listing["items"]]

            with urllib.request.urlopen(
                    f"http://127.0.0.1:{port}/api/audio/{ids[0]}", timeout=10) as resp:
                assert resp.read()[:4] == b"RIFF"

            assert self._api(port, "/api/decisions",
                             {"item_id": ids[0], "action": "accept_gt"})[0] == 200
            assert self._api(port, "/api/decisions",
                             {"item_id": ids[1], "action": "manual",
                              "manual_text": "Fixed words!"})[0] == 200

            # hard kill mid-session: acknowledged decisions must survive
            os.kill(proc.pid, signal.SIGKILL)
            proc.wait(timeout=10)
        finally:
            if proc.poll() is None:
                proc.kill()

        proc2, port2 = self._start(out)
        try:
            status, doc = self._api(port2, "/api/items?status=all&page_size=100")
            by_id = {it["id"]: it for it in doc["items"]}
            assert by_id[ids[0]]["status"] == "decided"
            assert by_id[ids[0]]["decision"]["action"] == "accept_gt"
            assert by_id[ids[1]]["decision"]["action"] == "manual"
            assert doc["counts"]["decided"] == 2

            # identical repeat after restart is still a no-op
            assert self._api(port2, "/api/decisions",
                             {"item_id": ids[0], "action": "accept_gt"})[0] == 200
            assert self._api(port2, "/api/decisions",
                             {"item_id": ids[0], "action": "reject"})[0] == 409

            for item_id in ids[2:]:
                self._api(port2, "/api/decisions",
                          {"item_id": item_id, "action": "reject"})
            status, summary = self._api(port2, "/api/export", {})
            assert status == 200
        finally:
            proc2.terminate()
            proc2.wait(timeout=10)

        final = load_manifest(out / "data_final.manifest.jsonl")
        auto = load_manifest(out / "data_align.manifest.jsonl")
        assert len(final.records) == len(auto.records) + 2
        added = {r.id: r for r in final.records[len(auto.records):]}
        assert added[ids[1]].transcript == ("fixed", "words")
        assert added[ids[1]].source == "user_manual"
        for rec in final.records:
            assert (out / rec.audio_path).exists()
        ok("verify service",
           f"lifecycle + crash recovery: {len(queue)} queued, 2 decisions "
           f"survived SIGKILL, export appended 2 records")
