"""LM-friendliness evaluation over dual-track token sequences.

A predictor supplies teacher-forced log-probability rows: row ``t`` is the
distribution of token ``t`` given the earlier tokens of the same track
(``log_probs``), or, for the accompaniment, given the earlier accompaniment
tokens and the whole vocal track (``conditional_log_probs``).
"""
from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import logsumexp

from ._binio import VERSION, Reader, le_bytes
from .errors import DataError, FormatError
from .simvq import Route
from .tokens import DualTrackSequence

DEFAULT_KS = (1, 5, 10, 50)
PREFIX_SECONDS = 2.0
REFERENCE_VOCAB = 1024
_CHUNK = 512


class Predictor(Protocol):
    vocab_size: int

    def log_probs(self, seq: DualTrackSequence, route: Route, start: int, stop: int) -> np.ndarray:
        ...

    def conditional_log_probs(self, seq: DualTrackSequence, start: int, stop: int) -> np.ndarray:
        ...


class UniformPredictor:
    def __init__(self, vocab_size: int):
        self.vocab_size = vocab_size

    def log_probs(self, seq, route, start, stop):
        return np.full((stop - start, self.vocab_size), -math.log(self.vocab_size))

    def conditional_log_probs(self, seq, start, stop):
        return self.log_probs(seq, Route.ACCOMP, start, stop)


class CountLm:
    """Add-alpha smoothed bigram model per route; ignores the other track.

    Row ``K`` of each count table holds transitions out of the start state.
    """

    def __init__(self, vocab_size: int, alpha: float, counts: dict):
        self.vocab_size = vocab_size
        self.alpha = alpha
        self.counts = counts
        self._totals = {r: np.asarray(c.sum(axis=1)).ravel() for r, c in counts.items()}

    def conditional_prob(self, route: Route, prev: int | None, nxt: int) -> float:
        row = self.vocab_size if prev is None else prev
        c = self.counts[Route(route)]
        return (c[row, nxt] + self.alpha) / (self._totals[Route(route)][row] + self.alpha * self.vocab_size)

    def log_probs(self, seq, route, start, stop):
        route = Route(route)
        if route not in self.counts:
            raise DataError(f"no counts trained for route {route.label}")
        toks = seq[route].indices
        prev = np.concatenate(([self.vocab_size], toks[:-1]))[start:stop]
        rows = self.counts[route][prev].toarray() + self.alpha
        denom = self._totals[route][prev] + self.alpha * self.vocab_size
        return np.log(rows) - np.log(denom)[:, None]

    def conditional_log_probs(self, seq, start, stop):
        return self.log_probs(seq, Route.ACCOMP, start, stop)


def train_count_lm(corpus: Sequence[DualTrackSequence], route: Route | None = None, alpha: float = 1.0) -> CountLm:
    """Bigram counts over ``corpus`` for one route, or both when ``route`` is None."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    corpus = list(corpus)
    if not corpus:
        raise DataError("empty corpus")
    K = corpus[0].vocal.vocab_size
    routes = list(Route) if route is None else [Route(route)]
    counts = {}
    for r in routes:
        prev, nxt = [], []
        for seq in corpus:
            tr = seq[r]
            if tr.vocab_size != K:
                raise DataError("corpus mixes vocabulary sizes")
            prev.append(np.concatenate(([K], tr.indices[:-1])) if len(tr) else np.empty(0, np.int64))
            nxt.append(tr.indices)
        p, n = np.concatenate(prev), np.concatenate(nxt)
        counts[r] = sp.csr_matrix((np.ones(p.size), (p, n)), shape=(K + 1, K))
    return CountLm(K, alpha, counts)


class ExternalPredictor:
    """Log-probability rows produced elsewhere, keyed by sequence name.

    ``tables[name]`` maps ``"vocal"``, ``"accomp"`` and optionally ``"cond"``
    to ``T x K`` arrays.
    """

    def __init__(self, vocab_size: int, tables: dict):
        self.vocab_size = vocab_size
        self.tables = tables

    def _rows(self, seq, kind, start, stop):
        try:
            return self.tables[seq.name][kind][start:stop]
        except KeyError:
            raise DataError(f"no external {kind} rows for sequence {seq.name!r}") from None

    def log_probs(self, seq, route, start, stop):
        return self._rows(seq, Route(route).label, start, stop)

    def conditional_log_probs(self, seq, start, stop):
        return self._rows(seq, "cond", start, stop)


def _check_rows(lp: np.ndarray, K: int, tol: float = 1e-6) -> None:
    if lp.ndim != 2 or lp.shape[1] != K:
        raise DataError(f"predictor returned shape {lp.shape}, expected (n, {K})")
    err = np.abs(np.exp(lp).sum(axis=1) - 1)
    if err.size and err.max() > tol:
        raise DataError(f"predictor distribution not normalised (max error {err.max():.3g})")


def _target_ranks(lp: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """0-based rank of each target under descending probability, ties to the lower index."""
    tgt = lp[np.arange(targets.size), targets][:, None]
    idx = np.arange(lp.shape[1])[None, :]
    better = (lp > tgt) | ((lp == tgt) & (idx < targets[:, None]))
    return better.sum(axis=1)


@dataclass
class _Tally:
    nll: float = 0.0
    n: int = 0
    ranks: list = field(default_factory=list)

    def add(self, lp, targets):
        self.nll += -float(lp[np.arange(targets.size), targets].sum())
        self.n += targets.size
        self.ranks.append(_target_ranks(lp, targets))


def _score(predictor, seq, route, start, conditional=False) -> _Tally:
    tally = _Tally()
    toks = seq[route].indices
    T = toks.size
    for s in range(start, T, _CHUNK):
        e = min(T, s + _CHUNK)
        if conditional:
            lp = np.asarray(predictor.conditional_log_probs(seq, s, e), dtype=np.float64)
        else:
            lp = np.asarray(predictor.log_probs(seq, route, s, e), dtype=np.float64)
        _check_rows(lp, predictor.vocab_size)
        if lp.shape[0] != e - s:
            raise DataError(f"predictor returned {lp.shape[0]} rows for {e - s} positions")
        tally.add(lp, toks[s:e])
    return tally


def _check_corpus(sequences):
    sequences = list(sequences)
    if not sequences:
        raise DataError("empty corpus")
    for seq in sequences:
        if len(seq) == 0:
            raise DataError("empty sequence in corpus")
    return sequences


def avg_cross_entropy(predictor, sequences, route: Route) -> float:
    """Mean over sequences of the per-token negative log-likelihood (nats)."""
    sequences = _check_corpus(sequences)
    return float(np.mean([(t := _score(predictor, s, Route(route), 0)).nll / t.n for s in sequences]))


def _topk_from_ranks(ranks: np.ndarray, ks, K) -> dict:
    out = {}
    for k in ks:
        if not 1 <= k < K:
            raise ValueError(f"k must be in [1, {K}), got {k}")
        out[k] = float(np.mean(ranks < k))
    return out


def topk_accuracy(predictor, sequences, route: Route, ks=DEFAULT_KS) -> dict:
    """Fraction of positions whose target is among the ``k`` most probable tokens."""
    sequences = _check_corpus(sequences)
    ranks = np.concatenate([r for s in sequences for r in _score(predictor, s, Route(route), 0).ranks])
    return _topk_from_ranks(ranks, ks, predictor.vocab_size)


def ppl_at_1024(H: float, S: int) -> float:
    """Perplexity rescaled to a 1024-way vocabulary: ``exp(H) * 1024 / S``."""
    if S < 2:
        raise ValueError("vocabulary size must be >= 2")
    if H < 0:
        raise ValueError("cross-entropy must be >= 0")
    return math.exp(H) * REFERENCE_VOCAB / S


def entropy_from_ppl(ppl: float, S: int) -> float:
    """Inverse of :func:`ppl_at_1024`."""
    return math.log(ppl * S / REFERENCE_VOCAB)


def overall_ppl(per_route_H, S: int) -> float:
    """Normalised perplexity of per-head losses averaged across parallel heads.

    Equal to the geometric mean of the per-head normalised perplexities.
    """
    hs = list(per_route_H)
    if not hs:
        raise ValueError("need at least one per-route cross-entropy")
    return ppl_at_1024(float(np.mean(hs)), S)


def default_tau(rate: float, seconds: float = PREFIX_SECONDS) -> int:
    return int(round(seconds * rate))


def conditional_eval(predictor, seq: DualTrackSequence, tau: int | None = None) -> float:
    """Mean NLL of accompaniment tokens after a ``tau``-frame prefix, given all vocals."""
    T = len(seq)
    if tau is None:
        tau = default_tau(seq.accomp.rate)
    if not 0 <= tau < T:
        raise DataError(f"prefix tau={tau} must be < sequence length {T}")
    t = _score(predictor, seq, Route.ACCOMP, tau, conditional=True)
    return t.nll / t.n


@dataclass
class RouteScores:
    H: float
    ppl: float
    topk: dict


@dataclass
class EvalReport:
    S: int
    routes: dict
    overall_H: float
    overall_ppl: float
    conditional: RouteScores | None = None

    COLUMNS = ("route", "H_nats", "ppl_at_1024", "top1", "top5", "top10", "top50")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)

        def row(name, H, ppl, topk):
            cells = [topk.get(k, "") for k in DEFAULT_KS]
            w.writerow([name, repr(H), repr(ppl), *[c if c == "" else repr(c) for c in cells]])

        for r, sc in self.routes.items():
            row(r.label, sc.H, sc.ppl, sc.topk)
        row("overall", self.overall_H, self.overall_ppl, {})
        if self.conditional is not None:
            c = self.conditional
            row("vocal_cond", c.H, c.ppl, c.topk)
        return buf.getvalue()


def evaluate(predictor, sequences, ks=DEFAULT_KS, tau: int | None = None, conditional: bool = True) -> EvalReport:
    """Full report: per-route and overall PPL@1024, top-k, and vocal-conditioned scores."""
    sequences = _check_corpus(sequences)
    K = predictor.vocab_size
    ks = [k for k in ks if k < K]
    routes = {}
    for r in Route:
        tallies = [_score(predictor, s, r, 0) for s in sequences]
        H = float(np.mean([t.nll / t.n for t in tallies]))
        ranks = np.concatenate([x for t in tallies for x in t.ranks])
        routes[r] = RouteScores(H, ppl_at_1024(H, K), _topk_from_ranks(ranks, ks, K))
    mean_H = float(np.mean([sc.H for sc in routes.values()]))
    report = EvalReport(K, routes, mean_H, overall_ppl([sc.H for sc in routes.values()], K))
    if conditional:
        tallies = []
        for s in sequences:
            tau_s = default_tau(s.accomp.rate) if tau is None else tau
            if not 0 <= tau_s < len(s):
                raise DataError(f"prefix tau={tau_s} must be < sequence length {len(s)}")
            tallies.append(_score(predictor, s, Route.ACCOMP, tau_s, conditional=True))
        H = float(np.mean([t.nll / t.n for t in tallies]))
        ranks = np.concatenate([x for t in tallies for x in t.ranks])
        report.conditional = RouteScores(H, ppl_at_1024(H, K), _topk_from_ranks(ranks, ks, K))
    return report


# --- DTLP: externally produced log-probability rows ------------------------
# magic, version u16, kind u8 (0 vocal, 1 accomp, 2 vocal-conditioned accomp),
# K u32, T u32, then T x K little-endian f32.

LP_MAGIC = b"DTLP"
LP_KINDS = ("vocal", "accomp", "cond")


@dataclass(frozen=True)
class LogProbTable:
    kind: str
    rows: np.ndarray

    def __post_init__(self):
        if self.kind not in LP_KINDS:
            raise ValueError(f"kind must be one of {LP_KINDS}")
        if np.asarray(self.rows).ndim != 2:
            raise ValueError("rows must be T x K")


def logprobs_to_bytes(tab: LogProbTable) -> bytes:
    T, K = tab.rows.shape
    return LP_MAGIC + struct.pack("<HBII", VERSION, LP_KINDS.index(tab.kind), K, T) + le_bytes(tab.rows, "f4")


def logprobs_from_bytes(buf: bytes) -> LogProbTable:
    r = Reader(buf, LP_MAGIC)
    r.version()
    kind, K, T = r.unpack("BII")
    if kind >= len(LP_KINDS):
        raise FormatError(f"unknown row kind {kind}")
    rows = r.array("f4", T * K).reshape(T, K)
    r.finish()
    return LogProbTable(LP_KINDS[kind], rows)


def normalise_external(rows: np.ndarray, tol: float = 1e-4) -> np.ndarray:
    """Check f32 rows are normalised to single-precision tolerance and renormalise in f64."""
    rows = np.asarray(rows, dtype=np.float64)
    _check_rows(rows, rows.shape[1], tol)
    return rows - logsumexp(rows, axis=1, keepdims=True)


def save_logprobs(path, tab: LogProbTable) -> None:
    Path(path).write_bytes(logprobs_to_bytes(tab))


def load_logprobs(path) -> LogProbTable:
    return logprobs_from_bytes(Path(path).read_bytes())
