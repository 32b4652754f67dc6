"""Majority merging of annotator layers and Fleiss' kappa."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .corpus import AnnotatedPost, AnnotationLayer, Document

__all__ = [
    "AgreementReport",
    "merge_majority",
    "fleiss_kappa",
    "fleiss_kappa_counts",
    "rating_counts",
    "corpus_agreement",
]


def merge_majority(layers: Sequence[AnnotationLayer], annotator_id: str = "majority") -> AnnotationLayer:
    """Keep a token iff strictly more than half of the annotators labelled it.

    The trade tag is the plurality tag among the annotators who labelled the
    token, ``unspecified`` on ties. Flags follow the same strict majority.
    """
    if len(layers) < 2:
        raise ValueError("merge_majority needs at least two layers")
    post_ids = {layer.post_id for layer in layers}
    if len(post_ids) > 1:
        raise ValueError(f"layers come from different documents: {sorted(post_ids)}")
    n = len(layers)
    votes: dict[int, Counter] = {}
    for layer in layers:
        for i, tag in layer.products:
            votes.setdefault(i, Counter())[tag] += 1
    products = []
    for i, tags in votes.items():
        if 2 * sum(tags.values()) <= n:
            continue
        ranked = tags.most_common()
        if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
            products.append((i, "unspecified"))
        else:
            products.append((i, ranked[0][0]))
    flag_votes = Counter(f for layer in layers for f in layer.flags)
    flags = frozenset(f for f, c in flag_votes.items() if 2 * c > n)
    return AnnotationLayer(annotator_id, tuple(products), flags, layers[0].post_id)


def rating_counts(
    layers: Sequence[AnnotationLayer], doc: Document, eligible_only: bool = True
) -> np.ndarray:
    """(items x 2) matrix of (product, not-product) votes per token."""
    items = doc.eligible() if eligible_only else list(range(len(doc)))
    product = np.zeros(len(items), dtype=np.int64)
    pos = {i: k for k, i in enumerate(items)}
    for layer in layers:
        for i in layer.indices:
            if i in pos:
                product[pos[i]] += 1
    return np.column_stack([product, len(layers) - product])


def fleiss_kappa_counts(counts: np.ndarray) -> float | None:
    """Fleiss' kappa from an (items x categories) vote-count matrix.

    Items may have different numbers of raters (each needs at least two).
    Integer counts are reduced in exact rational arithmetic, so the result
    is the correctly rounded value. Returns None when expected agreement is
    1, where kappa is undefined.
    """
    counts = np.asarray(counts)
    if counts.ndim != 2 or counts.shape[0] == 0:
        raise ValueError("need at least one item")
    if not np.array_equal(counts, np.round(counts)) or (counts < 0).any():
        raise ValueError("counts must be non-negative integers")
    counts = counts.astype(np.int64)
    n_i = counts.sum(axis=1)
    if (n_i < 2).any():
        raise ValueError("every item needs at least two ratings")
    agree = (counts * counts).sum(axis=1) - n_i
    p_bar = Fraction(0)
    for n in np.unique(n_i):
        p_bar += Fraction(int(agree[n_i == n].sum()), int(n * (n - 1)))
    p_bar /= len(counts)
    totals = [int(c) for c in counts.sum(axis=0)]
    grand = sum(totals)
    p_e = Fraction(sum(c * c for c in totals), grand * grand)
    if p_e == 1:
        return None
    return float((p_bar - p_e) / (1 - p_e))


def fleiss_kappa(
    layers: Sequence[AnnotationLayer], doc: Document, eligible_only: bool = True
) -> float | None:
    """Token-level Fleiss' kappa with categories product / not-product."""
    if len(layers) < 2:
        raise ValueError("fleiss_kappa needs at least two layers")
    counts = rating_counts(layers, doc, eligible_only)
    if counts.shape[0] == 0:
        raise ValueError("document has no eligible tokens")
    return fleiss_kappa_counts(counts)


@dataclass
class AgreementReport:
    n_tokens: int
    n_annotators: int
    kappa: float | None
    disagreements: dict[str, int] = field(default_factory=dict)


def corpus_agreement(posts: Sequence[AnnotatedPost], eligible_only: bool = True) -> AgreementReport:
    """Pool every token of every multiply-annotated post into one kappa.

    Per-post disagreement counts are the number of items without a
    unanimous vote.
    """
    blocks, disagreements = [], {}
    n_annotators = 0
    for post in posts:
        if len(post.layers) < 2:
            continue
        counts = rating_counts(post.layers, post.doc, eligible_only)
        n_annotators = max(n_annotators, len(post.layers))
        disagreements[post.post_id] = int(((counts[:, 0] > 0) & (counts[:, 1] > 0)).sum())
        blocks.append(counts)
    if not blocks or sum(len(b) for b in blocks) == 0:
        raise ValueError("no multiply-annotated tokens to measure agreement on")
    counts = np.concatenate(blocks)
    return AgreementReport(len(counts), n_annotators, fleiss_kappa_counts(counts), disagreements)
