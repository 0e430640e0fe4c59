"""Word-level edit distance, WER, and the sliding-window best-match search.

Each ASR utterance is matched against every contiguous window of the
provided transcript; the window with the smallest word-level edit
distance becomes the utterance's transcript candidate, and its WER
against the prediction decides whether the pair is auto-accepted,
queued for human review, or discarded.

Two implementations of the search are kept on purpose. ``best_match``
is the literal nested-loop enumeration and serves as the oracle;
``best_match_fast`` vectorizes the same computation over all window
anchors and must agree with the oracle bit for bit.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .hypothesis import HypothesisSet, Utterance
from .transcript import ProvidedTranscript

log = logging.getLogger(__name__)

ALIGN = "align"
VERIFY = "verify"
DISCARD = "discard"

# sentinel larger than any real distance but safe to add against int32
_BIG = 2**30


@dataclass(frozen=True)
class Thresholds:
    """Decision thresholds for the aligner.

    ``sigma_a`` and ``sigma_i`` partition matches by WER into accept,
    verify, and discard. ``len_ratio_rho`` caps candidate window length
    at ceil(rho * prediction_length); ``paper_strict_windows`` restores
    the narrower window range 2..prediction_length instead.
    """

    sigma_a: float = 0.15
    sigma_i: float = 0.5
    pgc_rel: float = 0.2
    len_ratio_rho: float = 1.0
    paper_strict_windows: bool = False

    def __post_init__(self) -> None:
        if not (0 <= self.sigma_a < self.sigma_i <= 1):
            raise ValueError(
                f"need 0 <= sigma_a < sigma_i <= 1, got {self.sigma_a}, {self.sigma_i}"
            )
        if not (0 < self.pgc_rel <= 1):
            raise ValueError(f"pgc_rel must be in (0, 1], got {self.pgc_rel}")
        if self.len_ratio_rho <= 0:
            raise ValueError(f"len_ratio_rho must be positive, got {self.len_ratio_rho}")


@dataclass(frozen=True)
class MatchResult:
    """Best window found for one prediction: 1-based start, length,
    word-level distance, and exact WER over that window."""

    best_start: int
    best_len: int
    d_min: int
    wer: Fraction


@dataclass(frozen=True)
class AlignmentDecision:
    kind: str  # ALIGN, VERIFY or DISCARD
    gt: tuple[str, ...] | None = None
    pred: tuple[str, ...] | None = None
    match: MatchResult | None = None


def dis(x: Sequence[str], y: Sequence[str]) -> int:
    """Word-level Levenshtein distance with unit costs."""
    if not x:
        return len(y)
    if not y:
        return len(x)
    prev = list(range(len(y) + 1))
    for i, xw in enumerate(x, 1):
        cur = [i]
        append = cur.append
        left = i  # cur[j-1]
        diag = prev[0]  # prev[j-1]
        for j, yw in enumerate(y, 1):
            up = prev[j]
            v = diag if xw == yw else diag + 1
            if up + 1 < v:
                v = up + 1
            if left + 1 < v:
                v = left + 1
            append(v)
            diag = up
            left = v
        prev = cur
    return prev[-1]


def wer(reference: Sequence[str], hypothesis: Sequence[str]) -> Fraction | float:
    """Word error rate of ``hypothesis`` against ``reference``.

    Exact rational for non-empty references. Both sequences empty gives
    0; an empty reference with a non-empty hypothesis gives +inf so the
    pair can never pass an inclusion threshold.
    """
    if not reference:
        return Fraction(0) if not hypothesis else math.inf
    return Fraction(dis(reference, hypothesis), len(reference))


def _window_bounds(pred_len: int, th: Thresholds) -> tuple[int, int]:
    """(w_min, w_cap) of admissible window lengths for a prediction."""
    if th.paper_strict_windows:
        return 2, pred_len
    # Fraction(str(rho)) keeps e.g. rho=0.1 exact so the cap never picks
    # up a stray float ulp
    cap = math.ceil(Fraction(str(th.len_ratio_rho)) * pred_len)
    return 1, cap


def _classify(d_min: int, best_start: int, best_len: int, words: tuple[str, ...],
              pred: tuple[str, ...], th: Thresholds) -> AlignmentDecision:
    w = Fraction(d_min, best_len)
    match = MatchResult(best_start=best_start, best_len=best_len, d_min=d_min, wer=w)
    gt = words[best_start - 1 : best_start - 1 + best_len]
    if w < th.sigma_a:
        return AlignmentDecision(kind=ALIGN, gt=gt, match=match)
    if w < th.sigma_i:
        return AlignmentDecision(kind=VERIFY, gt=gt, pred=tuple(pred), match=match)
    return AlignmentDecision(kind=DISCARD, match=match)


_NO_WINDOW = AlignmentDecision(kind=DISCARD)


def _transcript_words(T: ProvidedTranscript | Sequence[str]) -> tuple[str, ...]:
    if isinstance(T, ProvidedTranscript):
        return T.words
    return tuple(T)


def best_match(pred: Sequence[str], T: ProvidedTranscript | Sequence[str],
               th: Thresholds) -> AlignmentDecision:
    """Reference implementation: literal enumeration of every window.

    Windows are scanned with ascending start, then ascending length, and
    a window wins only with a strictly smaller distance, so the first
    window reaching the global minimum is kept.
    """
    words = _transcript_words(T)
    pred = tuple(pred)
    L, m = len(pred), len(words)
    if L == 0 or m == 0:
        return _NO_WINDOW
    w_min, w_cap = _window_bounds(L, th)
    best: tuple[int, int, int] | None = None
    for a in range(1, m + 1):
        w_max = min(w_cap, m - a + 1)
        for w in range(w_min, w_max + 1):
            d = dis(pred, words[a - 1 : a - 1 + w])
            if best is None or d < best[0]:
                best = (d, a, w)
    if best is None:
        return _NO_WINDOW
    d_min, a, w = best
    return _classify(d_min, a, w, words, pred, th)


class TranscriptIndex:
    """Token ids and an inverted word index for one transcript, shared
    across the utterances aligned against it."""

    def __init__(self, T: ProvidedTranscript | Sequence[str]):
        self.words = _transcript_words(T)
        self.vocab: dict[str, int] = {}
        ids = np.empty(len(self.words), dtype=np.int64)
        for i, tok in enumerate(self.words):
            ids[i] = self.vocab.setdefault(tok, len(self.vocab))
        self.ids = ids

    def encode(self, pred: Sequence[str]) -> np.ndarray:
        """Map prediction tokens to transcript ids; out-of-vocabulary
        tokens become -1 and can never match."""
        get = self.vocab.get
        return np.fromiter((get(tok, -1) for tok in pred), dtype=np.int64,
                           count=len(pred))


def _candidate_anchors(index: TranscriptIndex, pred_ids: np.ndarray,
                       w_limit: int) -> np.ndarray:
    """Boolean mask of 0-based anchors whose window can contain at least
    one prediction token. All other anchors have an analytically known
    distance profile, so the DP may skip them."""
    m = len(index.ids)
    present = pred_ids[pred_ids >= 0]
    mask = np.zeros(m + 1, dtype=np.int32)
    if len(present):
        hits = np.flatnonzero(np.isin(index.ids, present))
        starts = np.maximum(hits - w_limit + 1, 0)
        np.add.at(mask, starts, 1)
        np.add.at(mask, hits + 1, -1)
    return np.cumsum(mask[:-1]) > 0


def _dp_dtype(max_value: int) -> type:
    if max_value <= 120:
        return np.int8
    if max_value <= 32000:
        return np.int16
    return np.int32


def _final_row_distances(t_ids: np.ndarray, anchors: np.ndarray | None,
                         pred_ids: np.ndarray, w_limit: int) -> np.ndarray:
    """Distances dis(pred, T[a .. a+j)) for every anchor a (0-based) and
    window length j, returned as a (w_limit+1, n_anchor) array.

    One DP per anchor would fill a table of pred against the anchor's
    longest window and read every window length off the final row; here
    all anchors advance through that DP in lockstep, one row per
    prediction word. The in-row dependency (insertions) collapses into a
    prefix minimum of A[j] - j, which vectorizes. Rows are anchors-major
    so every operation, including the word-match lookup E[j] =
    (T[a+j-1] == word), runs on contiguous memory. ``anchors=None``
    means every anchor 0..m-1.
    """
    m = len(t_ids)
    L = len(pred_ids)
    padded = np.full(m + w_limit, -2, dtype=np.int64)
    padded[:m] = t_ids
    n_anchor = m if anchors is None else len(anchors)
    dtype = _dp_dtype(L + w_limit + 1)
    j_col = np.arange(w_limit + 1, dtype=dtype)[:, None]
    V = np.broadcast_to(j_col, (w_limit + 1, n_anchor)).copy()
    A = np.empty_like(V)
    for i in range(1, L + 1):
        equal = padded == pred_ids[i - 1]
        windows = sliding_window_view(equal, m)[:w_limit]
        E = windows if anchors is None else windows[:, anchors]
        # A[j] = min(V[j-1] + cost, V[j] + 1) - j   [cost = 1 - E[j-1]]
        np.subtract(V[:-1], E, out=A[1:])
        np.minimum(A[1:], V[1:], out=A[1:])
        np.subtract(A[1:], j_col[1:] - 1, out=A[1:])
        A[0] = i  # dis(pred[:i], empty window), minus j=0
        np.minimum.accumulate(A, axis=0, out=A)
        np.add(A, j_col, out=V)
    return V


def _masked_row_min(D: np.ndarray, anchors: np.ndarray, m: int, w_min: int,
                    w_limit: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-anchor minimum distance and first window length achieving it,
    ignoring window lengths that run past the transcript."""
    valid_len = np.minimum(m - anchors, w_limit)
    lengths = np.arange(w_limit + 1, dtype=np.int64)
    invalid = (lengths[:, None] > valid_len[None, :]) | (lengths[:, None] < w_min)
    D = np.where(invalid, _BIG, D.astype(np.int32, copy=False))
    return D.min(axis=0), D.argmin(axis=0)


def best_match_fast(pred: Sequence[str], T: ProvidedTranscript | Sequence[str],
                    th: Thresholds, index: TranscriptIndex | None = None
                    ) -> AlignmentDecision:
    """Vectorized search, identical output to :func:`best_match`.

    Anchors whose windows share no token with the prediction are pruned:
    their best distance is max(w_min, len(pred)) at the shortest window,
    which is folded back in when picking the global first-found minimum.
    """
    words = _transcript_words(T)
    pred = tuple(pred)
    L, m = len(pred), len(words)
    if L == 0 or m == 0:
        return _NO_WINDOW
    w_min, w_cap = _window_bounds(L, th)
    w_limit = min(w_cap, m)
    if w_limit < w_min or m < w_min:
        return _NO_WINDOW
    if index is None:
        index = TranscriptIndex(words)
    pred_ids = index.encode(pred)

    cand_mask = _candidate_anchors(index, pred_ids, w_limit)
    # anchors with no admissible window at all contribute nothing
    cand_mask &= np.arange(m) <= m - w_min
    n_cand = int(cand_mask.sum())

    use_pruning = 0 < n_cand <= m // 2
    anchors = np.flatnonzero(cand_mask) if use_pruning else np.arange(m)
    if n_cand == 0:
        anchors = np.empty(0, dtype=np.int64)

    best_d = _BIG
    best_anchor = -1
    best_w = 0
    if len(anchors):
        D = _final_row_distances(index.ids, anchors, pred_ids, w_limit)
        row_min, row_arg = _masked_row_min(D, anchors, m, w_min, w_limit)
        pos = int(np.argmin(row_min))
        if row_min[pos] < _BIG:
            best_d = int(row_min[pos])
            best_anchor = int(anchors[pos])
            best_w = int(row_arg[pos])

    if use_pruning or n_cand == 0:
        # analytic result for pruned anchors: no token matches, so the
        # distance is max(w, L), minimized by the shortest window
        nc_d = max(w_min, L)
        nc = np.flatnonzero(~cand_mask & (np.arange(m) <= m - w_min))
        if len(nc) and nc_d <= best_d:
            first_nc = int(nc[0])
            if nc_d < best_d or first_nc < best_anchor:
                best_d, best_anchor, best_w = nc_d, first_nc, w_min

    if best_anchor < 0:
        return _NO_WINDOW
    return _classify(best_d, best_anchor + 1, best_w, words, pred, th)


def align_all(hs: HypothesisSet, T: ProvidedTranscript | Sequence[str],
              th: Thresholds, workers: int = 1
              ) -> tuple[list[tuple[Utterance, tuple[str, ...]]],
                         list[tuple[Utterance, tuple[str, ...], tuple[str, ...]]]]:
    """Classify every utterance independently against one transcript.

    Returns (DATA_align, DATA_verify); discarded utterances appear in
    neither. Windows may be reused across utterances. Output order
    follows input order whatever the worker count.
    """
    index = TranscriptIndex(T)

    def decide(u: Utterance) -> AlignmentDecision:
        return best_match_fast(u.pred_words, T, th, index=index)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            decisions = list(pool.map(decide, hs.utterances))
    else:
        decisions = [decide(u) for u in hs.utterances]

    data_align = []
    data_verify = []
    for u, dec in zip(hs.utterances, decisions):
        if dec.kind == ALIGN:
            data_align.append((u, dec.gt))
        elif dec.kind == VERIFY:
            data_verify.append((u, dec.gt, dec.pred))
    return data_align, data_verify


def pgc_filter(aligned: Iterable[tuple[Utterance, tuple[str, ...]]],
               second_round: HypothesisSet, th: Thresholds,
               absolute: int | None = None
               ) -> list[tuple[Utterance, tuple[str, ...]]]:
    """Post-generation check: drop aligned pairs whose second-round
    prediction length strays too far from the accepted transcript length.

    Relative word-count difference against ``th.pgc_rel`` by default;
    pass ``absolute`` to compare the raw word-count difference instead.
    Pairs without a second-round prediction are kept with a warning.
    """
    by_id = {u.id: u for u in second_round.utterances}
    kept = []
    for u, gt in aligned:
        second = by_id.get(u.id)
        if second is None:
            log.warning("pgc: no second-round prediction for %s, keeping", u.id)
            kept.append((u, gt))
            continue
        diff = abs(len(second.pred_words) - len(gt))
        if absolute is not None:
            drop = diff > absolute
        else:
            drop = diff / max(len(gt), 1) > th.pgc_rel
        if not drop:
            kept.append((u, gt))
    return kept
