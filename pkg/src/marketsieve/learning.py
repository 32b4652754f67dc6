"""Product extractors: lexical baselines, a binary SVM over token or NP
candidates and a post-level latent SVM, all trained by primal subgradient
descent with AdaGrad and l1 regularisation.
"""

from __future__ import annotations

import itertools
import json
from collections import Counter
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .adaptation import ClusterHierarchy, Gazetteer
from .corpus import AnnotatedPost, Document
from .features import FeatureConfig, Featurizer, Vocabulary
from .porter import stem
from .projection import MissingSyntaxError, Span, is_nominal, is_verbal, project

__all__ = [
    "TrainConfig",
    "AdaGradL1",
    "LinearModel",
    "MODES",
    "candidates",
    "train_binary",
    "train_post_latent",
    "predict_binary",
    "predict_post",
    "predict_freq",
    "predict_dict",
    "predict_first_np",
    "build_dictionary",
    "tune",
    "MODEL_HEADER",
]

MODES = ("token", "np", "post-token", "post-np")
MODEL_HEADER = "marketsieve-model v1"

STOPWORDS = frozenset(
    """a an the and or but if of to in on at for with by from as is are was were be
    been being am i me my you your he she it its we our they them their this that these
    those there here what which who whom how when where why not no yes do does did done
    have has had will would can could should shall may might must so than then too very
    just also any some all each every more most other such only own same about into over
    after before up down out off again further once pm u ur im""".split()
)


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 5
    l1_strength: float = 1e-5
    adagrad_eta: float = 0.1
    adagrad_delta: float = 1e-6
    cost_fp: float = 1.0
    cost_fn: float = 1.0
    singleton_weight: float = 3.0
    target_domain_weight: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if self.l1_strength < 0:
            raise ValueError("l1_strength must be >= 0")
        for name in ("adagrad_eta", "adagrad_delta", "cost_fp", "cost_fn", "target_domain_weight"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.singleton_weight < 1:
            raise ValueError("singleton_weight must be >= 1")


class AdaGradL1:
    """Diagonal AdaGrad with an l1 proximal step, applied lazily.

    A coordinate untouched for k steps only receives k truncations with its
    (unchanged) step size, so the catch-up on access is exact.
    """

    def __init__(self, dim: int, eta: float, delta: float, l1: float):
        self.w = np.zeros(dim)
        self.sq = np.zeros(dim)
        self.last = np.zeros(dim, dtype=np.int64)
        self.t = 0
        self.eta, self.delta, self.l1 = eta, delta, l1

    def _rate(self, idx):
        return self.eta / (self.delta + np.sqrt(self.sq[idx]))

    def catch_up(self, idx: np.ndarray) -> None:
        if self.l1 == 0.0 or len(idx) == 0:
            self.last[idx] = self.t
            return
        pending = self.t - self.last[idx]
        w = self.w[idx]
        shrink = pending * self.l1 * self._rate(idx)
        self.w[idx] = np.sign(w) * np.maximum(0.0, np.abs(w) - shrink)
        self.last[idx] = self.t

    def score(self, idx: np.ndarray) -> float:
        self.catch_up(idx)
        return float(self.w[idx].sum())

    def step(self, idx: np.ndarray, grad: np.ndarray) -> None:
        """One subgradient step; ``idx`` must be unique, other coordinates
        only receive their (deferred) l1 truncation."""
        self.catch_up(idx)
        self.t += 1
        self.sq[idx] += grad * grad
        rate = self._rate(idx)
        z = self.w[idx] - rate * grad
        self.w[idx] = np.sign(z) * np.maximum(0.0, np.abs(z) - self.l1 * rate)
        self.last[idx] = self.t

    def finalize(self) -> np.ndarray:
        self.catch_up(np.arange(len(self.w)))
        return self.w


# --------------------------------------------------------------------------
# candidates

def _base_mode(mode: str) -> str:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    return mode.split("-")[-1]


def candidates(doc: Document, mode: str) -> list[int] | list[Span]:
    """Eligible tokens, or NP/verb projections of eligible nominal and
    verbal tokens, in document order."""
    base = _base_mode(mode)
    if base == "token":
        return doc.eligible()
    if not doc.has_syntax:
        raise MissingSyntaxError(f"{doc.post_id or 'document'}: NP mode needs syntax")
    spans = [
        project(doc, i)
        for i in doc.eligible()
        if is_nominal(doc.tokens[i].pos_tag) or is_verbal(doc.tokens[i].pos_tag)
    ]
    return sorted(spans, key=lambda s: (s.start, s.head))


def _head(c: int | Span) -> int:
    return c.head if isinstance(c, Span) else c


@dataclass
class LinearModel:
    weights: np.ndarray
    config: TrainConfig
    mode: str
    featurizer: Featurizer

    def __post_init__(self):
        _base_mode(self.mode)
        if len(self.weights) != len(self.featurizer.vocab):
            raise ValueError("weight dimension does not match vocabulary size")

    @property
    def vocab(self) -> Vocabulary:
        return self.featurizer.vocab

    def domain_for(self, doc: Document, domain: str | None = None) -> str | None:
        if not self.featurizer.config.domain_augment:
            return None
        return domain or doc.forum_id or None

    def scores(self, doc: Document, cands: Sequence[int | Span], domain: str | None = None) -> np.ndarray:
        d = self.domain_for(doc, domain)
        return np.array([self.weights[self.featurizer.vector(doc, c, d)].sum() for c in cands])

    def nonzero(self) -> dict[str, float]:
        return {self.vocab.strings[k]: float(v) for k, v in enumerate(self.weights) if v != 0.0}

    def save(self, path: str | Path) -> None:
        save_model(self, path)

    @classmethod
    def load(cls, path: str | Path) -> "LinearModel":
        return load_model(path)


# --------------------------------------------------------------------------
# training

@dataclass
class _Prepared:
    post: AnnotatedPost
    cands: list
    vecs: list[np.ndarray]
    labels: np.ndarray


def _prepare(posts: Sequence[AnnotatedPost], mode: str, featurizer: Featurizer) -> list[_Prepared]:
    if not posts:
        raise ValueError("empty training corpus")
    if featurizer.vocab.frozen:
        raise ValueError("featurizer vocabulary is already frozen")
    if not featurizer.vocab.word_counts:
        featurizer.vocab.count_words(p.doc for p in posts)
    out = []
    for post in posts:
        cands = candidates(post.doc, mode)
        gold = post.gold_indices
        domain = post.domain if featurizer.config.domain_augment else None
        vecs = [featurizer.vector(post.doc, c, domain, grow=True) for c in cands]
        labels = np.array([1 if _head(c) in gold else -1 for c in cands], dtype=np.int64)
        out.append(_Prepared(post, cands, vecs, labels))
    featurizer.vocab.freeze()
    return out


def _product_type_counts(posts: Iterable[AnnotatedPost]) -> Counter:
    return Counter(stem(p.doc.tokens[i].text) for p in posts for i in p.gold_indices)


def _new_featurizer(feature_config, clusters, gazetteer, featurizer):
    if featurizer is not None:
        return featurizer
    return Featurizer(feature_config or FeatureConfig(), Vocabulary(), clusters, gazetteer)


def train_binary(
    posts: Sequence[AnnotatedPost],
    mode: str = "token",
    config: TrainConfig = TrainConfig(),
    feature_config: FeatureConfig | None = None,
    clusters: ClusterHierarchy | None = None,
    gazetteer: Gazetteer | None = None,
    featurizer: Featurizer | None = None,
) -> LinearModel:
    """Cost-sensitive hinge-loss classifier over every candidate."""
    if _base_mode(mode) != mode:
        raise ValueError(f"train_binary needs mode 'token' or 'np', got {mode!r}")
    fz = _new_featurizer(feature_config, clusters, gazetteer, featurizer)
    prepared = _prepare(posts, mode, fz)
    type_counts = _product_type_counts(posts)

    examples = []
    for pp in prepared:
        for c, vec, y in zip(pp.cands, pp.vecs, pp.labels):
            cost = config.cost_fn if y > 0 else config.cost_fp
            if y > 0 and type_counts[stem(pp.post.doc.tokens[_head(c)].text)] == 1:
                cost *= config.singleton_weight
            examples.append((vec, int(y), cost * pp.post.weight))

    opt = AdaGradL1(len(fz.vocab), config.adagrad_eta, config.adagrad_delta, config.l1_strength)
    rng = np.random.default_rng(config.seed)
    for _ in range(config.iterations):
        for k in rng.permutation(len(examples)):
            vec, y, c = examples[k]
            if y * opt.score(vec) < 1.0:
                opt.step(vec, np.full(len(vec), -c * y, dtype=np.float64))
    return LinearModel(opt.finalize().copy(), config, mode, fz)


def _latent_step(opt: AdaGradL1, pp: _Prepared, weight: float) -> float:
    """One latent-SVM subgradient step on a post; returns its loss."""
    union = np.unique(np.concatenate(pp.vecs))
    opt.catch_up(union)
    s = np.array([opt.w[v].sum() for v in pp.vecs])
    gold = np.flatnonzero(pp.labels > 0)
    y_star = gold[int(np.argmax(s[gold]))]
    aug = s + (pp.labels < 0)
    y_hat = int(np.argmax(aug))
    loss = float(aug[y_hat] - s[y_star])
    if loss <= 0.0:
        return 0.0
    grad: dict[int, float] = {}
    for k in pp.vecs[y_hat]:
        grad[int(k)] = grad.get(int(k), 0.0) + weight
    for k in pp.vecs[y_star]:
        grad[int(k)] = grad.get(int(k), 0.0) - weight
    idx = np.array(sorted(k for k, g in grad.items() if g != 0.0), dtype=np.int64)
    opt.step(idx, np.array([grad[int(k)] for k in idx]))
    return loss


def train_post_latent(
    posts: Sequence[AnnotatedPost],
    mode: str = "post-token",
    config: TrainConfig = TrainConfig(),
    feature_config: FeatureConfig | None = None,
    clusters: ClusterHierarchy | None = None,
    gazetteer: Gazetteer | None = None,
    featurizer: Featurizer | None = None,
) -> LinearModel:
    """Latent SVM choosing one candidate per post; the gold candidate
    credited is the best-scoring one (the latent choice)."""
    if not mode.startswith("post-"):
        mode = "post-" + _base_mode(mode)
    fz = _new_featurizer(feature_config, clusters, gazetteer, featurizer)
    prepared = [pp for pp in _prepare(posts, mode, fz) if (pp.labels > 0).any()]
    if not prepared:
        raise ValueError("no post has a gold product among its candidates")
    type_counts = _product_type_counts(posts)

    opt = AdaGradL1(len(fz.vocab), config.adagrad_eta, config.adagrad_delta, config.l1_strength)
    rng = np.random.default_rng(config.seed)
    for _ in range(config.iterations):
        for k in rng.permutation(len(prepared)):
            pp = prepared[k]
            weight = pp.post.weight
            gold_types = {
                stem(pp.post.doc.tokens[_head(pp.cands[g])].text)
                for g in np.flatnonzero(pp.labels > 0)
            }
            if any(type_counts[t] == 1 for t in gold_types):
                weight *= config.singleton_weight
            _latent_step(opt, pp, weight)
    return LinearModel(opt.finalize().copy(), config, mode, fz)


# --------------------------------------------------------------------------
# prediction

def predict_binary(model: LinearModel, doc: Document, domain: str | None = None) -> set:
    """Candidates with a positive score (token indices or Spans)."""
    if model.mode.startswith("post-"):
        raise ValueError(f"predict_binary needs a binary model, got mode {model.mode!r}")
    cands = candidates(doc, model.mode)
    if not cands:
        return set()
    scores = model.scores(doc, cands, domain)
    return {c for c, s in zip(cands, scores) if s > 0}


def predict_post(model: LinearModel, doc: Document, domain: str | None = None) -> int | Span | None:
    """Highest-scoring candidate; ties go to the earliest one."""
    cands = candidates(doc, model.mode)
    if not cands:
        return None
    scores = model.scores(doc, cands, domain)
    return cands[int(np.argmax(scores))]


def _lexical_candidates(doc: Document) -> list[int]:
    out = []
    for i in doc.eligible():
        t = doc.tokens[i]
        if doc.has_syntax:
            if is_nominal(t.pos_tag) or is_verbal(t.pos_tag):
                out.append(i)
        elif any(c.isalpha() for c in t.text) and t.lower not in STOPWORDS:
            out.append(i)
    return out


def _most_frequent(doc: Document, cands: list[int]) -> set[int]:
    if not cands:
        return set()
    counts = Counter(doc.tokens[i].lower for i in cands)
    first = {}
    for i in cands:
        first.setdefault(doc.tokens[i].lower, i)
    best = max(counts, key=lambda w: (counts[w], -first[w]))
    return {i for i in doc.eligible() if doc.tokens[i].lower == best}


def predict_freq(doc: Document) -> set[int]:
    """All occurrences of the most frequent noun/verb type in the post."""
    return _most_frequent(doc, _lexical_candidates(doc))


def build_dictionary(posts: Iterable[AnnotatedPost]) -> frozenset[str]:
    """Stems of every gold product token."""
    return frozenset(stem(p.doc.tokens[i].text) for p in posts for i in p.gold_indices)


def predict_dict(doc: Document, dictionary: Iterable[str]) -> set[int]:
    """Like :func:`predict_freq`, restricted to dictionary types."""
    stems = {stem(d) for d in dictionary}
    cands = [i for i in _lexical_candidates(doc) if stem(doc.tokens[i].text) in stems]
    return _most_frequent(doc, cands)


def predict_first_np(doc: Document) -> Span | None:
    """Projection of the NP containing the first eligible nominal token."""
    if not doc.has_syntax:
        raise MissingSyntaxError("first-NP baseline needs syntax")
    for i in doc.eligible():
        if is_nominal(doc.tokens[i].pos_tag):
            t = i
            while True:
                p = doc.parent(t)
                if p is None or p < 0 or not is_nominal(doc.tokens[p].pos_tag):
                    break
                if t not in project(doc, p):
                    break
                t = p
            return project(doc, t)
    return None


# --------------------------------------------------------------------------
# tuning

def tune(
    train: Sequence[AnnotatedPost],
    dev: Sequence[AnnotatedPost],
    trainer: Callable[..., LinearModel],
    score: Callable[[LinearModel, Sequence[AnnotatedPost]], float],
    base: TrainConfig = TrainConfig(),
    grid: dict[str, Sequence[float]] | None = None,
    **trainer_kwargs,
) -> tuple[LinearModel, TrainConfig, list[tuple[dict, float]]]:
    """Exhaustive grid search over TrainConfig fields, scored on ``dev``.

    The default grid covers the false-positive/false-negative costs.
    """
    grid = grid or {"cost_fp": (0.25, 0.5, 1.0, 2.0, 4.0), "cost_fn": (0.25, 0.5, 1.0, 2.0, 4.0)}
    keys = sorted(grid)
    best = None
    log = []
    for values in itertools.product(*(grid[k] for k in keys)):
        setting = dict(zip(keys, values))
        cfg = replace(base, **setting)
        model = trainer(train, config=cfg, **trainer_kwargs)
        s = score(model, dev)
        log.append((setting, s))
        if best is None or s > best[2]:
            best = (model, cfg, s)
    return best[0], best[1], log


# --------------------------------------------------------------------------
# model files

def save_model(model: LinearModel, path: str | Path) -> None:
    fz = model.featurizer
    min_count = fz.config.common_word_min_count
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(MODEL_HEADER + "\n")
        f.write(f"mode\t{model.mode}\n")
        f.write(f"train_config\t{json.dumps(asdict(model.config), sort_keys=True)}\n")
        f.write(f"feature_config\t{json.dumps(fz.config.to_dict(), sort_keys=True)}\n")
        common = sorted((w, c) for w, c in fz.vocab.word_counts.items() if c >= min_count)
        f.write(f"[common_words]\t{len(common)}\n")
        for w, c in common:
            f.write(f"{w}\t{c}\n")
        f.write(f"[vocabulary]\t{len(fz.vocab)}\n")
        for s in fz.vocab.strings:
            f.write(s + "\n")
        nz = [(fz.vocab.strings[k], float(v)) for k, v in enumerate(model.weights) if v != 0.0]
        f.write(f"[weights]\t{len(nz)}\n")
        for s, v in nz:
            f.write(f"{s}\t{v!r}\n")
        clusters = fz.clusters.ids.items() if fz.clusters is not None else ()
        f.write(f"[clusters]\t{len(clusters)}\n")
        for word, bits in sorted(clusters):
            f.write(f"{bits}\t{word}\t{fz.clusters.counts.get(word, 0)}\n")
        if fz.gazetteer is not None:
            g = fz.gazetteer
            f.write(f"[gazetteer]\t{len(g)}\t{g.forum}\t{g.min_count}\n")
            for s in sorted(g.entries):
                f.write(s + "\n")
        else:
            f.write("[gazetteer]\t-1\n")


def load_model(path: str | Path) -> LinearModel:
    with open(path, encoding="utf-8") as f:
        lines = f.read().split("\n")
    if not lines or lines[0] != MODEL_HEADER:
        raise ValueError(f"{path}: not a {MODEL_HEADER} file")
    pos = 1

    def field_line(name):
        nonlocal pos
        key, _, value = lines[pos].partition("\t")
        if key != name:
            raise ValueError(f"{path}: line {pos + 1}: expected {name!r}")
        pos += 1
        return value

    def section(name):
        nonlocal pos
        parts = lines[pos].split("\t")
        if parts[0] != f"[{name}]":
            raise ValueError(f"{path}: line {pos + 1}: expected section [{name}]")
        n = int(parts[1])
        body = lines[pos + 1: pos + 1 + max(n, 0)]
        pos += 1 + max(n, 0)
        return n, parts[2:], body

    mode = field_line("mode")
    config = TrainConfig(**json.loads(field_line("train_config")))
    fconfig = FeatureConfig.from_dict(json.loads(field_line("feature_config")))
    _, _, common = section("common_words")
    vocab = Vocabulary(Counter({w: int(c) for w, c in (ln.split("\t") for ln in common)}))
    _, _, strings = section("vocabulary")
    for s in strings:
        vocab.index[s] = len(vocab.strings)
        vocab.strings.append(s)
    vocab.freeze()
    weights = np.zeros(len(vocab))
    _, _, nz = section("weights")
    for ln in nz:
        s, v = ln.rsplit("\t", 1)
        weights[vocab.index[s]] = float(v)
    n, _, crows = section("clusters")
    clusters = None
    if n > 0:
        ids, counts = {}, {}
        for ln in crows:
            bits, word, count = ln.split("\t")
            ids[word], counts[word] = bits, int(count)
        clusters = ClusterHierarchy(tuple(sorted(ids)), counts, ids)
    n, meta, grows = section("gazetteer")
    gazetteer = Gazetteer(frozenset(grows), meta[0], int(meta[1])) if n >= 0 else None
    return LinearModel(weights, config, mode, Featurizer(fconfig, vocab, clusters, gazetteer))
