"""Token-, type- and post-level metrics, OOV breakdown and paired bootstrap."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

from .corpus import AnnotatedPost, Document
from .porter import stem
from .projection import Span, project

__all__ = [
    "PRF",
    "OOVReport",
    "EvalReport",
    "PostOutcome",
    "Metric",
    "METRICS",
    "levenshtein",
    "match_threshold",
    "types_match",
    "canonical_types",
    "token_prf",
    "type_prf",
    "post_accuracy",
    "oov_decompose",
    "outcomes",
    "evaluate",
    "bootstrap_test",
    "format_table",
]


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    degenerate: bool = False  # no predictions at all; precision reported as 0

    @classmethod
    def from_counts(cls, tp_pred: float, n_pred: float, tp_gold: float, n_gold: float) -> "PRF":
        p = float(tp_pred / n_pred) if n_pred else 0.0
        r = float(tp_gold / n_gold) if n_gold else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        return cls(p, r, f, bool(n_pred == 0))

    def __iter__(self):
        return iter((self.precision, self.recall, self.f1))


# --------------------------------------------------------------------------
# token level

def token_prf(
    preds: Sequence[Iterable[Hashable]],
    golds: Sequence[Iterable[Hashable]],
    eligible: Sequence[Iterable[Hashable]] | None = None,
) -> PRF:
    """Micro-averaged P/R/F1 over per-post sets of labelled items."""
    if len(preds) != len(golds):
        raise ValueError("predictions and gold are not aligned")
    tp = n_pred = n_gold = 0
    for k, (p, g) in enumerate(zip(preds, golds)):
        p, g = set(p), set(g)
        if eligible is not None:
            ok = set(eligible[k])
            p &= ok
            g &= ok
        tp += len(p & g)
        n_pred += len(p)
        n_gold += len(g)
    return PRF.from_counts(tp, n_pred, tp, n_gold)


# --------------------------------------------------------------------------
# type level

def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def match_threshold(length: int) -> int:
    if length <= 4:
        return 0
    if length <= 7:
        return 1
    return 2


def types_match(a: str, b: str) -> bool:
    """Same product type: stems within an edit distance set by the longer stem."""
    sa, sb = stem(a), stem(b)
    return levenshtein(sa, sb) <= match_threshold(max(len(sa), len(sb)))


def canonical_types(strings: Iterable[str]) -> list[str]:
    """Greedy left-to-right collapse of strings that match an earlier one."""
    out: list[str] = []
    for s in strings:
        if not any(types_match(s, t) for t in out):
            out.append(s)
    return out


def _as_ordered(x):
    return sorted(x) if isinstance(x, (set, frozenset)) else list(x)


def _type_counts(pred, gold) -> tuple[int, int, int, int]:
    p = canonical_types(_as_ordered(pred))
    g = canonical_types(_as_ordered(gold))
    tp_pred = sum(any(types_match(x, y) for y in g) for x in p)
    tp_gold = sum(any(types_match(y, x) for x in p) for y in g)
    return tp_pred, len(p), tp_gold, len(g)


def type_prf(
    pred_types: Sequence[Iterable[str]],
    gold_types: Sequence[Iterable[str]],
    macro: bool = False,
) -> PRF:
    """P/R/F1 over per-post product type sets.

    Micro-averaged by default; ``macro`` averages per-post precision (over
    posts with predictions) and recall (over posts with gold types).
    """
    if len(pred_types) != len(gold_types):
        raise ValueError("predictions and gold are not aligned")
    counts = np.array([_type_counts(p, g) for p, g in zip(pred_types, gold_types)],
                      dtype=float).reshape(-1, 4)
    if not macro:
        return PRF.from_counts(*counts.sum(axis=0))
    has_pred, has_gold = counts[:, 1] > 0, counts[:, 3] > 0
    p = float(np.mean(counts[has_pred, 0] / counts[has_pred, 1])) if has_pred.any() else 0.0
    r = float(np.mean(counts[has_gold, 2] / counts[has_gold, 3])) if has_gold.any() else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return PRF(p, r, f, not has_pred.any())


def _first_correct(first: str | None, gold: Iterable[str]) -> bool:
    return first is not None and any(types_match(first, g) for g in gold)


def post_accuracy(first_preds: Sequence[str | None], gold_types: Sequence[Iterable[str]]) -> float:
    """Share of posts with gold products whose first predicted type is correct."""
    if len(first_preds) != len(gold_types):
        raise ValueError("predictions and gold are not aligned")
    scored = [(f, list(g)) for f, g in zip(first_preds, gold_types)]
    scored = [(f, g) for f, g in scored if g]
    if not scored:
        raise ValueError("no post has gold products")
    return sum(_first_correct(f, g) for f, g in scored) / len(scored)


# --------------------------------------------------------------------------
# OOV

@dataclass(frozen=True)
class OOVReport:
    oov_rate: float | None
    recall_seen: float | None
    recall_oov: float | None
    n_seen: int
    n_oov: int


def oov_decompose(
    train_posts: Iterable[AnnotatedPost],
    eval_posts: Sequence[AnnotatedPost],
    predictions: Sequence[Iterable[int | Span]],
) -> OOVReport:
    """Split eval gold product tokens by whether their stem is a training
    product type, and report recall on each part."""
    vocab = {stem(p.doc.tokens[i].text) for p in train_posts for i in p.gold_indices}
    hits = {True: 0, False: 0}
    total = {True: 0, False: 0}
    for post, pred in zip(eval_posts, predictions):
        heads = {c.head if isinstance(c, Span) else c for c in pred}
        for i in post.gold_indices:
            seen = stem(post.doc.tokens[i].text) in vocab
            total[seen] += 1
            hits[seen] += i in heads
    n = total[True] + total[False]
    return OOVReport(
        total[False] / n if n else None,
        hits[True] / total[True] if total[True] else None,
        hits[False] / total[False] if total[False] else None,
        total[True],
        total[False],
    )


# --------------------------------------------------------------------------
# corpus-level evaluation

@dataclass(frozen=True)
class PostOutcome:
    """Per-post sufficient statistics for every metric family."""

    token_tp: int
    token_pred: int
    token_gold: int
    type_tp_pred: int
    type_pred: int
    type_tp_gold: int
    type_gold: int
    post_correct: int
    post_scored: int

    def vector(self) -> np.ndarray:
        return np.array(list(asdict(self).values()), dtype=float)


def _key(c: int | Span) -> int:
    return c.head if isinstance(c, Span) else c


def _first(pred: Iterable[int | Span]) -> int | Span | None:
    pred = list(pred)
    if not pred:
        return None
    return min(pred, key=lambda c: (c.start, c.head) if isinstance(c, Span) else (c, c))


def _surface(doc: Document, c: int | Span) -> str:
    return doc.tokens[_key(c)].text


def outcomes(
    posts: Sequence[AnnotatedPost],
    predictions: Sequence[Iterable[int | Span]],
    firsts: Sequence[int | Span | None] | None = None,
    level: str = "token",
) -> list[PostOutcome]:
    """Score each post. At ``level="np"`` predicted and gold tokens are
    matched through their NP projections (head-anchored); the type string of
    a span is its head's surface form. ``firsts`` defaults to the earliest
    prediction of each post."""
    if level not in ("token", "np"):
        raise ValueError(f"unknown level {level!r}")
    if len(posts) != len(predictions):
        raise ValueError("predictions and posts are not aligned")
    out = []
    for k, (post, pred) in enumerate(zip(posts, predictions)):
        doc = post.doc
        pred = [c for c in pred if doc.scope_mask[_key(c)]]
        if level == "np":
            pred = [c if isinstance(c, Span) else project(doc, c) for c in pred]
            gold = [project(doc, i) for i in sorted(post.gold_indices)]
        else:
            gold = sorted(post.gold_indices)
        pk, gk = {_key(c) for c in pred}, {_key(c) for c in gold}
        pred_sorted = sorted(pred, key=lambda c: (c.start, c.head) if isinstance(c, Span) else (c, c))
        ptypes = [_surface(doc, c) for c in pred_sorted]
        gtypes = [_surface(doc, c) for c in gold]
        tp_p, n_p, tp_g, n_g = _type_counts(ptypes, gtypes)
        first = firsts[k] if firsts is not None else _first(pred)
        if first is not None and not doc.scope_mask[_key(first)]:
            first = None
        ftype = _surface(doc, first) if first is not None else None
        scored = int(bool(gtypes))
        correct = int(scored and _first_correct(ftype, gtypes))
        out.append(PostOutcome(len(pk & gk), len(pk), len(gk), tp_p, n_p, tp_g, n_g, correct, scored))
    return out


@dataclass(frozen=True)
class Metric:
    name: str
    score: Callable[[np.ndarray], float]


def _token_f1(s):
    return PRF.from_counts(s[0], s[1], s[0], s[2]).f1


def _type_f1(s):
    return PRF.from_counts(s[3], s[4], s[5], s[6]).f1


def _post_acc(s):
    return s[7] / s[8] if s[8] else 0.0


METRICS = {
    "token_f1": Metric("token_f1", _token_f1),
    "type_f1": Metric("type_f1", _type_f1),
    "post_accuracy": Metric("post_accuracy", _post_acc),
}


@dataclass(frozen=True)
class EvalReport:
    token_prf: PRF
    type_prf: PRF
    post_accuracy: float | None
    n_posts_scored: int
    oov: OOVReport | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(
    posts: Sequence[AnnotatedPost],
    predictions: Sequence[Iterable[int | Span]],
    firsts: Sequence[int | Span | None] | None = None,
    level: str = "token",
    train_posts: Sequence[AnnotatedPost] | None = None,
) -> EvalReport:
    outs = outcomes(posts, predictions, firsts, level)
    s = np.sum([o.vector() for o in outs], axis=0) if outs else np.zeros(9)
    oov = oov_decompose(train_posts, posts, predictions) if train_posts is not None else None
    return EvalReport(
        PRF.from_counts(s[0], s[1], s[0], s[2]),
        PRF.from_counts(s[3], s[4], s[5], s[6]),
        float(s[7] / s[8]) if s[8] else None,
        int(s[8]),
        oov,
    )


def bootstrap_test(
    metric: str | Metric,
    outcomes_a: Sequence[PostOutcome],
    outcomes_b: Sequence[PostOutcome],
    n_resamples: int = 10000,
    seed: int = 0,
) -> float:
    """Paired bootstrap over posts.

    Returns the fraction of resamples in which system A does not beat
    system B on ``metric``.
    """
    if isinstance(metric, str):
        metric = METRICS[metric]
    if len(outcomes_a) != len(outcomes_b):
        raise ValueError("systems were scored on different posts")
    n = len(outcomes_a)
    if n < 2:
        raise ValueError("bootstrap needs at least two posts")
    a = np.array([o.vector() for o in outcomes_a])
    b = np.array([o.vector() for o in outcomes_b])
    rng = np.random.default_rng(seed)
    fails = 0
    chunk = 1000
    for start in range(0, n_resamples, chunk):
        m = min(chunk, n_resamples - start)
        idx = rng.integers(0, n, size=(m, n))
        weights = np.zeros((m, n))
        np.add.at(weights, (np.repeat(np.arange(m), n), idx.ravel()), 1.0)
        sa, sb = weights @ a, weights @ b
        delta = np.array([metric.score(x) - metric.score(y) for x, y in zip(sa, sb)])
        fails += int((delta <= 0).sum())
    return fails / n_resamples


def _pct(x: float | None) -> str:
    return "    -" if x is None else f"{100 * x:5.1f}"


def format_table(rows: Sequence[tuple[str, EvalReport]], unit: str = "Tokens") -> str:
    """Fixed-column table: unit P/R/F1 | product-type P/R/F1 | post accuracy."""
    width = max([len(name) for name, _ in rows] + [6])
    head1 = f"{'':<{width}} | {unit:^17} | {'Products':^17} | {'Posts':^5}"
    head2 = f"{'':<{width}} | {'P':>5} {'R':>5} {'F1':>5} | {'P':>5} {'R':>5} {'F1':>5} | {'Acc.':>5}"
    lines = [head1, head2, "-" * len(head2)]
    for name, r in rows:
        lines.append(
            f"{name:<{width}} | {_pct(r.token_prf.precision)} {_pct(r.token_prf.recall)} "
            f"{_pct(r.token_prf.f1)} | {_pct(r.type_prf.precision)} {_pct(r.type_prf.recall)} "
            f"{_pct(r.type_prf.f1)} | {_pct(r.post_accuracy)}"
        )
    return "\n".join(lines)
