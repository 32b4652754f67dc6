"""Adaptation resources: Brown clusters, product gazetteers and mixing
labelled target-domain posts into a source training set.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import xlogy

from .corpus import AnnotatedPost
from .porter import stem

__all__ = [
    "ClusterHierarchy",
    "Merge",
    "Gazetteer",
    "stem",
    "brown_cluster",
    "ami",
    "token_stream",
    "write_clusters",
    "read_clusters",
    "build_gazetteer",
    "write_gazetteer",
    "read_gazetteer",
    "mix_corpora",
]


# --------------------------------------------------------------------------
# Brown clustering

@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    parent: int
    n_placed: int  # words already inserted when the merge happened


@dataclass
class ClusterHierarchy:
    """Binary merge tree over the clustered vocabulary.

    Leaf node ``k`` is ``words[k]``; internal nodes are numbered from
    ``len(words)`` in merge order. ``ids`` maps each word to its root-to-leaf
    bit string.
    """

    words: tuple[str, ...]
    counts: dict[str, int]
    ids: dict[str, str]
    merges: list[Merge] = field(default_factory=list)

    def __contains__(self, word: str) -> bool:
        return word in self.ids

    def __len__(self) -> int:
        return len(self.ids)

    def get(self, word: str) -> str | None:
        return self.ids.get(word)

    def leaves(self, node: int) -> set[str]:
        children = {m.parent: (m.left, m.right) for m in self.merges}
        out, stack = set(), [node]
        while stack:
            k = stack.pop()
            if k in children:
                stack.extend(children[k])
            else:
                out.add(self.words[k])
        return out

    def cut(self, k: int) -> list[set[str]]:
        """The ``k`` clusters left after undoing the last ``k - 1`` merges."""
        if not self.merges:
            raise ValueError("hierarchy has no merge log")
        if not 1 <= k <= len(self.merges) + 1:
            raise ValueError(f"cannot cut into {k} clusters")
        top = {self.merges[-1].parent}
        for m in reversed(self.merges[len(self.merges) - (k - 1):]):
            top.discard(m.parent)
            top |= {m.left, m.right}
        return sorted((self.leaves(n) for n in top), key=lambda s: min(s))


def token_stream(posts: Iterable[AnnotatedPost]) -> Iterable[list[str]]:
    """Lowercased sentences of every document, for clustering."""
    for post in posts:
        for sent in post.doc.sentences:
            yield [t.lower for t in sent]


def ami(bigrams: np.ndarray) -> float:
    """Average mutual information of adjacent cluster pairs from a count table."""
    n = bigrams.sum()
    if n == 0:
        return 0.0
    p = bigrams / n
    pl = p.sum(axis=1, keepdims=True)
    pr = p.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p / (pl * pr)), 0.0)
    return float(terms.sum())


def _merge_gains(m: np.ndarray) -> np.ndarray:
    """Change in sum n log n - sum r log r - sum c log c for every pair merge.

    The AMI of a table with total N is (that quantity)/N + log N, and merging
    keeps N fixed, so argmax over this gain is argmax over AMI after merging.
    """
    k = m.shape[0]
    f = xlogy(m, m)
    rows, cols = m.sum(1), m.sum(0)
    fr, fc = xlogy(rows, rows), xlogy(cols, cols)
    row_f, col_f = f.sum(1), f.sum(0)
    diag = np.diag(f)
    fab = f + f.T
    old = (
        row_f[:, None] + row_f[None, :] + col_f[:, None] + col_f[None, :]
        - diag[:, None] - diag[None, :] - fab
        - fr[:, None] - fr[None, :] - fc[:, None] - fc[None, :]
    )
    row_pair = xlogy(s := m[:, None, :] + m[None, :, :], s).sum(2)
    mt = m.T
    col_pair = xlogy(s := mt[:, None, :] + mt[None, :, :], s).sum(2)
    d = np.diag(m)
    # drop j in {a, b} (row merge) and i in {a, b} (column merge)
    ma_a_plus_b_a = d[:, None] + m.T  # M[a,a] + M[b,a]
    ma_b_plus_b_b = m + d[None, :]  # M[a,b] + M[b,b]
    row_pair -= xlogy(ma_a_plus_b_a, ma_a_plus_b_a) + xlogy(ma_b_plus_b_b, ma_b_plus_b_b)
    ma_a_plus_a_b = d[:, None] + m  # M[a,a] + M[a,b]
    mb_a_plus_b_b = m.T + d[None, :]  # M[b,a] + M[b,b]
    col_pair -= xlogy(ma_a_plus_a_b, ma_a_plus_a_b) + xlogy(mb_a_plus_b_b, mb_a_plus_b_b)
    block = d[:, None] + d[None, :] + m + m.T
    rab = rows[:, None] + rows[None, :]
    cab = cols[:, None] + cols[None, :]
    new = row_pair + col_pair + xlogy(block, block) - xlogy(rab, rab) - xlogy(cab, cab)
    gain = new - old
    gain[np.tril_indices(k)] = -np.inf
    return gain


def brown_cluster(
    sentences: Iterable[Sequence[str]],
    num_clusters: int = 50,
    min_word_count: int = 10,
) -> ClusterHierarchy:
    """Agglomerative Brown clustering with an active window of clusters.

    The ``num_clusters`` most frequent types start as singletons; each
    further type (by descending frequency) enters as its own cluster and the
    pair whose merge keeps the most mutual information is merged. Remaining
    clusters are then merged down to a single root. Bigrams are adjacent
    pairs within a sentence; words under ``min_word_count`` are dropped.
    """
    sentences = [list(s) for s in sentences]
    unigrams = Counter(w for s in sentences for w in s)
    vocab = sorted((w for w, c in unigrams.items() if c >= min_word_count),
                   key=lambda w: (-unigrams[w], w))
    if num_clusters < 2:
        raise ValueError("num_clusters must be at least 2")
    if not vocab:
        raise ValueError("no word reaches min_word_count")
    if num_clusters > len(vocab):
        raise ValueError(
            f"num_clusters={num_clusters} exceeds vocabulary size {len(vocab)} after cutoff"
        )
    wid = {w: k for k, w in enumerate(vocab)}
    right: list[Counter] = [Counter() for _ in vocab]
    for s in sentences:
        for a, b in zip(s, s[1:]):
            if a in wid and b in wid:
                right[wid[a]][wid[b]] += 1
    left: list[Counter] = [Counter() for _ in vocab]
    for a, row in enumerate(right):
        for b, c in row.items():
            left[b][a] += c

    v = len(vocab)
    cap = num_clusters + 1
    m = np.zeros((cap, cap))
    slot_node = [-1] * cap
    word_slot = np.full(v, -1, dtype=np.int64)
    active: list[int] = []  # slots in creation order
    free = list(range(cap))
    merges: list[Merge] = []
    next_node = v

    def insert(w: int) -> None:
        slot = free.pop(0)
        word_slot[w] = slot
        m[slot, :] = 0.0
        m[:, slot] = 0.0
        for u, c in right[w].items():
            if word_slot[u] >= 0:
                m[slot, word_slot[u]] += c
        for u, c in left[w].items():
            if word_slot[u] >= 0 and u != w:
                m[word_slot[u], slot] += c
        slot_node[slot] = w
        active.append(slot)

    def merge_best(n_placed: int) -> None:
        nonlocal next_node
        gains = _merge_gains(m[np.ix_(active, active)])
        p, q = np.unravel_index(int(np.argmax(gains)), gains.shape)
        a, b = active[p], active[q]
        m[a, :] += m[b, :]
        m[:, a] += m[:, b]
        m[b, :] = 0.0
        m[:, b] = 0.0
        word_slot[word_slot == b] = a
        merges.append(Merge(slot_node[a], slot_node[b], next_node, n_placed))
        slot_node[a] = next_node
        next_node += 1
        active.remove(b)
        free.append(b)
        free.sort()

    for w in range(num_clusters):
        insert(w)
    for w in range(num_clusters, v):
        insert(w)
        merge_best(w + 1)
    while len(active) > 1:
        merge_best(v)

    return ClusterHierarchy(
        tuple(vocab), {w: unigrams[w] for w in vocab}, _bit_strings(vocab, unigrams, merges), merges
    )


def _bit_strings(vocab: Sequence[str], unigrams: Counter, merges: Sequence[Merge]) -> dict[str, str]:
    v = len(vocab)
    total = {k: unigrams[w] for k, w in enumerate(vocab)}
    smallest = {k: w for k, w in enumerate(vocab)}
    children = {}
    for mg in merges:
        total[mg.parent] = total[mg.left] + total[mg.right]
        smallest[mg.parent] = min(smallest[mg.left], smallest[mg.right])
        pair = sorted((mg.left, mg.right), key=lambda n: (total[n], smallest[n]))
        children[mg.parent] = tuple(pair)
    if not merges:
        return {vocab[0]: ""}
    ids: dict[str, str] = {}
    stack = [(merges[-1].parent, "")]
    while stack:
        node, path = stack.pop()
        if node < v:
            ids[vocab[node]] = path
        else:
            zero, one = children[node]
            stack.append((one, path + "1"))
            stack.append((zero, path + "0"))
    return ids


def write_clusters(h: ClusterHierarchy, path: str | Path) -> None:
    """Write ``bitstring<TAB>word<TAB>count`` lines."""
    rows = sorted(h.ids.items(), key=lambda kv: (kv[1], kv[0]))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for word, bits in rows:
            f.write(f"{bits}\t{word}\t{h.counts.get(word, 0)}\n")


def read_clusters(path: str | Path) -> ClusterHierarchy:
    ids, counts, words = {}, {}, []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected bitstring<TAB>word<TAB>count")
            bits, word, count = parts
            ids[word] = bits
            counts[word] = int(count)
            words.append(word)
    return ClusterHierarchy(tuple(words), counts, ids)


# --------------------------------------------------------------------------
# gazetteers

@dataclass(frozen=True)
class Gazetteer:
    entries: frozenset[str]
    forum: str = ""
    min_count: int = 4

    def __contains__(self, stem_: str) -> bool:
        return stem_ in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(sorted(self.entries))


def build_gazetteer(posts: Iterable[AnnotatedPost], min_count: int = 4, forum: str = "") -> Gazetteer:
    """Stemmed, lowercased gold product tokens seen at least ``min_count`` times."""
    counts: Counter = Counter()
    for post in posts:
        for i in post.gold_indices:
            counts[stem(post.doc.tokens[i].text)] += 1
    return Gazetteer(frozenset(s for s, c in counts.items() if c >= min_count), forum, min_count)


_GAZ_HEADER = "# marketsieve-gazetteer"


def write_gazetteer(g: Gazetteer, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{_GAZ_HEADER} forum={g.forum} min_count={g.min_count}\n")
        for s in sorted(g.entries):
            f.write(s + "\n")


def read_gazetteer(path: str | Path) -> Gazetteer:
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or not lines[0].startswith(_GAZ_HEADER):
        raise ValueError(f"{path}: missing gazetteer header")
    meta = dict(kv.split("=", 1) for kv in lines[0][len(_GAZ_HEADER):].split() if "=" in kv)
    entries = frozenset(line.strip() for line in lines[1:] if line.strip())
    return Gazetteer(entries, meta.get("forum", ""), int(meta.get("min_count", 4)))


# --------------------------------------------------------------------------
# target-domain mixing

def mix_corpora(
    source: Sequence[AnnotatedPost],
    target: Sequence[AnnotatedPost],
    target_domain_weight: float = 5.0,
    augment: bool = False,
) -> list[AnnotatedPost]:
    """Source posts at weight 1 plus target posts at ``target_domain_weight``.

    With ``augment`` every post carries its forum as domain label, which the
    featurizer uses to fire domain-conjoined feature copies.
    """
    seen = {(p.forum_id, p.post_id) for p in source}
    clash = [p.post_id for p in target if (p.forum_id, p.post_id) in seen]
    if clash:
        raise ValueError(f"post ids shared between source and target: {clash[:5]}")
    out = [replace(p, weight=1.0, domain=p.forum_id if augment else None) for p in source]
    out += [
        replace(p, weight=float(target_domain_weight), domain=p.forum_id if augment else None)
        for p in target
    ]
    return out
