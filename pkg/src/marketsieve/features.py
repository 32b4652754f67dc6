"""Feature templates for token and noun-phrase candidates.

Feature strings are stable text keys, e.g. ``SELF|W0=bot``,
``PARENT|P-1=DT``, ``HEAD|C3=^bo``, ``SELF|BC4=1101`` or
``darkode##SELF|INGAZ``; model files store weights against them.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .corpus import Document
from .porter import stem
from .projection import Span

if TYPE_CHECKING:
    from .adaptation import ClusterHierarchy, Gazetteer

__all__ = [
    "FeatureConfig",
    "Vocabulary",
    "Featurizer",
    "position_bucket",
    "char_ngrams",
    "base_features",
    "token_feature_strings",
    "np_feature_strings",
    "brown_features",
    "augment_domains",
    "WINDOW",
]

WINDOW = (-1, 0, 1)
MISSING = "MISSING"


@dataclass(frozen=True)
class FeatureConfig:
    common_word_min_count: int = 5
    # inclusive upper edges; anything larger falls in a final open bucket
    position_buckets: tuple[int, ...] = (0, 1, 2, 5, 10)
    char_ngram_n: int = 3
    use_brown: bool = False
    brown_prefixes: tuple[int, ...] = (2, 4, 6)
    use_gazetteer: bool = False
    domain_augment: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        d = dict(d)
        for key in ("position_buckets", "brown_prefixes"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def position_bucket(n: int, edges: Sequence[int] = (0, 1, 2, 5, 10)) -> str:
    """0, 1, 2, 3-5, 6-10, >10 with the default edges."""
    lo = 0
    for hi in edges:
        if n <= hi:
            return str(hi) if lo == hi else f"{lo}-{hi}"
        lo = hi + 1
    return f">{edges[-1]}"


def char_ngrams(word: str, n: int = 3) -> list[str]:
    padded = f"^{word}$"
    if len(padded) <= n:
        return [padded]
    return [padded[k:k + n] for k in range(len(padded) - n + 1)]


class Vocabulary:
    """Feature-string index plus word counts for the common-word template."""

    def __init__(self, word_counts: Counter | None = None):
        self.index: dict[str, int] = {}
        self.strings: list[str] = []
        self.word_counts: Counter = Counter(word_counts or {})
        self.frozen = False

    def __len__(self) -> int:
        return len(self.strings)

    def count_words(self, docs: Iterable[Document]) -> None:
        for doc in docs:
            self.word_counts.update(t.lower for t in doc.tokens)

    def is_common(self, word: str, min_count: int) -> bool:
        return self.word_counts.get(word, 0) >= min_count

    def freeze(self) -> None:
        self.frozen = True

    def lookup(self, features: Iterable[str], grow: bool = False) -> np.ndarray:
        """Sorted unique indices of ``features``; unknown ones are dropped
        unless ``grow`` is set on an unfrozen vocabulary."""
        out = set()
        for f in features:
            k = self.index.get(f)
            if k is None:
                if not grow or self.frozen:
                    continue
                k = len(self.strings)
                self.index[f] = k
                self.strings.append(f)
            out.add(k)
        return np.array(sorted(out), dtype=np.int64)


def brown_features(word: str, hierarchy: "ClusterHierarchy | None",
                   prefixes: Sequence[int] = (2, 4, 6)) -> list[str]:
    bits = hierarchy.get(word) if hierarchy is not None else None
    if bits is None:
        return ["BC|UNK"]
    out, seen = [], set()
    for k in prefixes:
        p = bits[:k]
        if p not in seen:
            seen.add(p)
            out.append(f"BC{k}|{p}")
    return out


def augment_domains(features: Sequence[str], domain: str) -> list[str]:
    if not domain:
        raise ValueError("domain label must be non-empty")
    return list(features) + [f"{domain}##{f}" for f in features]


def base_features(
    doc: Document,
    i: int,
    vocab: Vocabulary,
    config: FeatureConfig = FeatureConfig(),
    clusters: "ClusterHierarchy | None" = None,
    gazetteer: "Gazetteer | None" = None,
) -> list[str]:
    tok = doc.tokens[i]
    sent = doc.sentences[tok.sent_index]
    edges = config.position_buckets
    feats = [
        f"SPOS={position_bucket(tok.sent_index, edges)}",
        f"WPOS={position_bucket(tok.pos_in_sent, edges)}",
    ]
    for off in WINDOW:
        j = tok.pos_in_sent + off
        name = f"{off:+d}" if off else "0"
        if j < 0 or j >= len(sent):
            edge = "BOS" if j < 0 else "EOS"
            feats += [f"W{name}={edge}", f"P{name}={edge}", f"D{name}={edge}"]
            continue
        t = sent[j]
        if vocab.is_common(t.lower, config.common_word_min_count):
            feats.append(f"W{name}={t.lower}")
        feats.append(f"P{name}={t.pos_tag or MISSING}")
        feats.append(f"D{name}={t.deprel or MISSING}")
    feats += [f"C{config.char_ngram_n}={g}" for g in char_ngrams(tok.lower, config.char_ngram_n)]
    if config.use_brown:
        feats += brown_features(tok.lower, clusters, config.brown_prefixes)
    if config.use_gazetteer and gazetteer is not None and stem(tok.text) in gazetteer:
        feats.append("INGAZ")
    return list(dict.fromkeys(feats))


def _parent_group(doc: Document, i: int, base) -> list[str]:
    p = doc.parent(i)
    if p is None:
        return [f"PARENT|{MISSING}"]
    if p < 0:
        return ["PARENT|ROOT"]
    return ["PARENT|" + f for f in base(p)]


def token_feature_strings(doc: Document, i: int, vocab: Vocabulary,
                          config: FeatureConfig = FeatureConfig(),
                          clusters=None, gazetteer=None) -> list[str]:
    """Base features of the token and of its syntactic parent, source-tagged."""
    def base(k):
        return base_features(doc, k, vocab, config, clusters, gazetteer)

    return ["SELF|" + f for f in base(i)] + _parent_group(doc, i, base)


def np_feature_strings(doc: Document, span: Span, vocab: Vocabulary,
                       config: FeatureConfig = FeatureConfig(),
                       clusters=None, gazetteer=None) -> list[str]:
    """Base features on the first, last, head and parent tokens of a span."""
    def base(k):
        return base_features(doc, k, vocab, config, clusters, gazetteer)

    out = []
    for prefix, k in (("FIRST|", span.start), ("LAST|", span.end - 1), ("HEAD|", span.head)):
        out += [prefix + f for f in base(k)]
    return out + _parent_group(doc, span.head, base)


@dataclass
class Featurizer:
    """Bundles the resources a feature extractor needs.

    Swap ``gazetteer`` (``dataclasses.replace``) to use a target-domain list
    at test time.
    """

    config: FeatureConfig = field(default_factory=FeatureConfig)
    vocab: Vocabulary = field(default_factory=Vocabulary)
    clusters: "ClusterHierarchy | None" = None
    gazetteer: "Gazetteer | None" = None

    def strings(self, doc: Document, candidate: int | Span, domain: str | None = None) -> list[str]:
        if isinstance(candidate, Span):
            feats = np_feature_strings(doc, candidate, self.vocab, self.config,
                                       self.clusters, self.gazetteer)
        else:
            feats = token_feature_strings(doc, candidate, self.vocab, self.config,
                                          self.clusters, self.gazetteer)
        if self.config.domain_augment and domain:
            feats = augment_domains(feats, domain)
        return feats

    def vector(self, doc: Document, candidate: int | Span, domain: str | None = None,
               grow: bool = False) -> np.ndarray:
        return self.vocab.lookup(self.strings(doc, candidate, domain), grow=grow)
