from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from marketsieve.corpus import tokenize_text
from marketsieve.projection import MAX_NP_LENGTH, MissingSyntaxError, Span, project, spans_match, subtree

from helpers import parsed


def test_backconnect_bot():
    doc = parsed([[("Backconnect", "NN", 1, "compound"), ("bot", "NN", -1, "root")]])
    assert project(doc, 1) == Span(0, 0, 2, 1)


def test_title_np():
    doc = parsed([[("Looking", "VBG", -1, "root"), ("for", "IN", 5, "case"), ("a", "DT", 5, "det"),
                   ("solid", "JJ", 5, "amod"), ("backconnect", "NN", 5, "compound"), ("bot", "NN", 0, "obl"),
                   (".", ".", 0, "punct")]])
    assert project(doc, 5) == Span(0, 1, 6, 5)
    # a dependent noun projects within its own subtree
    assert project(doc, 4) == Span(0, 4, 5, 4)


def test_noun_without_dependents():
    doc = parsed([[("sell", "VB", -1, "root"), ("bot", "NN", 0, "obj")]])
    assert project(doc, 1) == Span(0, 1, 2, 1)


def test_verbal_and_other_tags_are_single_tokens():
    doc = parsed([[("hack", "VB", -1, "root"), ("big", "JJ", 2, "amod"), ("website", "NN", 0, "obj")]])
    assert project(doc, 0) == Span(0, 0, 1, 0)
    assert project(doc, 1) == Span(0, 1, 2, 1)


def test_nine_token_subtree_trimmed():
    # all eight neighbours depend on the head at position 4; the farthest
    # subtrees go first, the rightmost one on a distance tie: b4 then a1
    sent = [(w, "NN", 4, "dep") for w in ("a1", "a2", "a3", "a4")]
    sent += [("HEAD", "NN", -1, "root")]
    sent += [(w, "NN", 4, "dep") for w in ("b1", "b2", "b3", "b4")]
    doc = parsed([sent])
    assert len(subtree(doc, 4)) == 9
    assert project(doc, 4) == Span(0, 1, 8, 4)


def test_deep_dependent_measured_by_extent():
    # "a" hangs two tokens left through "b"; "c" sits one right: the subtree
    # of b reaches 2 away so it is dropped before c once the cap is 2
    doc = parsed([[("a", "NN", 1, "dep"), ("b", "NN", 2, "dep"), ("H", "NN", -1, "root"), ("c", "NN", 2, "dep")]])
    assert project(doc, 2, max_len=2) == Span(0, 2, 4, 2)
    assert project(doc, 2) == Span(0, 0, 4, 2)


def test_non_contiguous_subtree_is_trimmed():
    doc = parsed([[("bot", "NN", 2, "nsubj"), ("and", "CC", 3, "cc"), ("works", "VBZ", -1, "root"),
                   ("rat", "NN", 0, "conj")]])
    assert project(doc, 0) == Span(0, 0, 1, 0)


def test_missing_syntax():
    with pytest.raises(MissingSyntaxError, match="token-level"):
        project(tokenize_text("a bot"), 1)


def test_spans_match():
    a = Span(0, 0, 3, 2)
    assert spans_match(a, a)
    assert spans_match(a, Span(0, 2, 3, 2))
    assert not spans_match(a, Span(0, 0, 3, 1))
    with pytest.raises(ValueError):
        Span(0, 2, 3, 0)


@st.composite
def random_trees(draw):
    n = draw(st.integers(1, 12))
    order = draw(st.permutations(range(n)))
    heads = [-1] * n
    for t in range(1, n):
        heads[order[t]] = order[draw(st.integers(0, t - 1))]
    tags = [draw(st.sampled_from(["NN", "NNS", "VB", "JJ", "DT"])) for _ in range(n)]
    sent = [(f"w{k}", tags[k], heads[k], "dep") for k in range(n)]
    return parsed([sent])


@settings(max_examples=200, deadline=None)
@given(random_trees())
def test_projection_invariants(doc):
    for i in range(len(doc)):
        span = project(doc, i)
        assert i in span and span.head == i
        assert 1 <= len(span) <= MAX_NP_LENGTH
        if not doc.tokens[i].pos_tag.startswith("N"):
            assert len(span) == 1
        inside = set(range(span.start, span.end))
        # the span is the head plus whole dependent subtrees
        assert inside <= subtree(doc, i)
        for j in inside - {i}:
            if subtree(doc, j) == inside:
                assert project(doc, j) == span
