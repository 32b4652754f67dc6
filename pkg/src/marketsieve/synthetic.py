"""Small generated forum corpora with dependency parses and gold products.

Used by the tests, the demo scripts and CLI smoke runs when the released
forum data is not at hand.
"""

from __future__ import annotations

import random
from typing import Sequence

from .corpus import AnnotatedPost, AnnotationLayer, RawPost, SyntaxRecord, attach_syntax, tokenize

__all__ = ["synthetic_corpus", "FORUM_PRODUCTS", "render_annotated"]

FORUM_PRODUCTS = {
    "darkode": ("bot", "crypter", "exploit", "botnet", "rat", "kit", "loader", "spam", "rdp", "ransomware"),
    "hackforums": ("account", "method", "ebook", "vouch", "youtube", "views", "likes", "tool", "setup", "config"),
}
_ADJ = ("private", "solid", "cheap", "new", "fud", "stable")
_MOD = ("backconnect", "http", "usa", "android", "premium", "custom")
_PAY = ("paypal", "btc", "bitcoin", "skype", "escrow")

# template tokens are [word, pos, head, deprel, is_product]


def _np(product, adj, mod, head_of_np, rel):
    """Tokens for [adj] [mod] product; modifiers point at the product."""
    toks = []
    for w in ([adj] if adj else []) + ([mod] if mod else []):
        toks.append([w, "JJ" if w == adj else "NN", "np", "amod" if w == adj else "compound", False])
    toks.append([product, "NN", head_of_np, rel, True])
    return toks


def _resolve(toks):
    """Point "np" placeholder heads at the next product token."""
    out = [list(t) for t in toks]
    for k, t in enumerate(out):
        if t[2] == "np":
            t[2] = next(j for j in range(k + 1, len(out)) if out[j][4])
    return out


def _sentence(kind, product, rng, adj=None, mod=None):
    if kind == "selling":
        head = [["selling", "VBG", -1, "root", False]]
        np_ = _np(product, adj, mod, 0, "dobj")
        toks = head + np_ + [[".", ".", 0, "punct", False]]
    elif kind == "looking":
        head = [["looking", "VBG", -1, "root", False], ["for", "IN", None, "case", False],
                ["a", "DT", None, "det", False]]
        np_ = _np(product, adj, mod, 0, "nmod")
        toks = head + np_ + [[".", ".", 0, "punct", False]]
        p = len(toks) - 2
        toks[1][2] = p
        toks[2][2] = p
    elif kind == "works":
        toks = [["my", "PRP$", 1, "nmod:poss", False], [product, "NN", 2, "nsubj", True],
                ["works", "VBZ", -1, "root", False], ["great", "RB", 2, "advmod", False],
                [".", ".", 2, "punct", False]]
    elif kind == "price":
        toks = [["price", "NN", 2, "nsubj", False], ["is", "VBZ", 2, "cop", False],
                ["cheap", "JJ", -1, "root", False], [".", ".", 2, "punct", False]]
    elif kind == "pm":
        toks = [["pm", "VB", -1, "root", False], ["me", "PRP", 0, "dobj", False],
                ["on", "IN", 3, "case", False], [rng.choice(_PAY), "NN", 0, "nmod", False],
                [".", ".", 0, "punct", False]]
    elif kind == "accept":
        toks = [["accepting", "VBG", -1, "root", False], [rng.choice(_PAY), "NN", 0, "dobj", False],
                ["only", "RB", 0, "advmod", False], [".", ".", 0, "punct", False]]
    elif kind == "thanks":
        toks = [["thanks", "NNS", -1, "root", False], ["for", "IN", 3, "case", False],
                ["the", "DT", 3, "det", False], ["time", "NN", 0, "nmod", False]]
    else:
        raise ValueError(kind)
    return _resolve(toks)


def render_annotated(title: list, body: list[list]) -> str:
    """Brace-format text for a generated post (gold products in braces)."""
    def line(toks):
        return " ".join("{" + t[0] + "}" if t[4] else t[0] for t in toks)
    return "\n".join(["TITLE: " + line(title)] + [line(s) for s in body])


def synthetic_corpus(
    n_posts: int,
    forum: str = "darkode",
    seed: int = 0,
    products: Sequence[str] | None = None,
    n_annotators: int = 0,
    annotator_noise: float = 0.1,
    syntax: bool = True,
) -> list[AnnotatedPost]:
    """Generate ``n_posts`` posts whose products come from ``products``.

    With ``n_annotators`` > 0 each post also carries that many noisy
    annotator layers (each gold token dropped, and each distractor noun
    added, with probability ``annotator_noise``).
    """
    rng = random.Random(seed)
    products = tuple(products or FORUM_PRODUCTS.get(forum, FORUM_PRODUCTS["darkode"]))
    posts = []
    for n in range(n_posts):
        product = rng.choice(products)
        adj = rng.choice(_ADJ) if rng.random() < 0.4 else None
        mod = rng.choice(_MOD) if rng.random() < 0.4 else None
        title = _sentence(rng.choice(("selling", "looking")), product, rng, adj, mod)
        body = []
        for _ in range(rng.randint(1, 5)):
            kind = rng.choice(("works", "price", "pm", "accept", "thanks", "selling"))
            p = product if rng.random() < 0.8 else rng.choice(products)
            body.append(_sentence(kind, p, rng))
        raw = RawPost(forum, f"{forum}-{n}", " ".join(t[0] for t in title),
                      tuple(" ".join(t[0] for t in s) for s in body))
        doc = tokenize(raw)
        recs = [[SyntaxRecord(w, pos, head, rel) for w, pos, head, rel, _ in s] for s in [title] + body]
        if syntax:
            doc = attach_syntax(doc, recs)
        flat = [t for s in [title] + body for t in s]
        gold_idx = [i for i, t in enumerate(flat) if t[4]]
        gold = AnnotationLayer("gold", tuple((i, "sell") for i in gold_idx), frozenset(), raw.post_id)
        layers = []
        nouns = [i for i, t in enumerate(flat) if t[1].startswith("NN") and not t[4]]
        for a in range(n_annotators):
            keep = [i for i in gold_idx if rng.random() >= annotator_noise]
            extra = [i for i in nouns if rng.random() < annotator_noise]
            layers.append(AnnotationLayer(f"ann{a}", tuple((i, "sell") for i in sorted(set(keep + extra))),
                                          frozenset(), raw.post_id))
        posts.append(AnnotatedPost(doc, tuple(layers), gold, None, 1.0))
    return posts
