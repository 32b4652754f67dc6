"""Small constructors shared by the test modules."""

from __future__ import annotations

from marketsieve.corpus import AnnotatedPost, AnnotationLayer, RawPost, SyntaxRecord, attach_syntax, tokenize


def parsed(lines, forum="f", post_id="p"):
    """Document from ``lines`` of (word, pos, head, deprel) tuples, one
    sentence per line; heads are 0-based within the sentence, -1 for root."""
    raw = RawPost(forum, post_id, "", tuple(" ".join(t[0] for t in s) for s in lines))
    doc = tokenize(raw)
    syntax = [[SyntaxRecord(*t) for t in s] for s in lines]
    return attach_syntax(doc, syntax)


def annotated(doc, gold, forum_domain=None, weight=1.0):
    layer = AnnotationLayer("gold", tuple((i, "sell") for i in sorted(gold)), frozenset(), doc.post_id)
    return AnnotatedPost(doc, (layer,), layer, forum_domain, weight)


def layer(indices, annotator="a", post_id="p", tag="sell", flags=()):
    return AnnotationLayer(annotator, tuple((i, tag) for i in sorted(indices)), frozenset(flags), post_id)
