"""Projecting product tokens to noun-phrase spans from dependency parses."""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import Document

__all__ = ["Span", "MAX_NP_LENGTH", "MissingSyntaxError", "project", "spans_match",
           "subtree", "is_nominal", "is_verbal"]

MAX_NP_LENGTH = 7


class MissingSyntaxError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Span:
    """Token span [start, end) in flat document indices, anchored at ``head``."""

    sent_index: int
    start: int
    end: int
    head: int

    def __post_init__(self):
        if not self.start <= self.head < self.end:
            raise ValueError(f"head {self.head} outside [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start

    def __contains__(self, i: int) -> bool:
        return self.start <= i < self.end


def is_nominal(tag: str | None) -> bool:
    return bool(tag) and tag.startswith("N")


def is_verbal(tag: str | None) -> bool:
    return bool(tag) and tag.startswith("V")


def subtree(doc: Document, i: int) -> set[int]:
    """Token ``i`` plus all its transitive dependents (flat indices)."""
    out = {i}
    stack = [i]
    while stack:
        for c in doc.children(stack.pop()):
            if c not in out:
                out.add(c)
                stack.append(c)
    return out


def _contiguous(idx: set[int]) -> bool:
    return max(idx) - min(idx) + 1 == len(idx)


def project(doc: Document, i: int, max_len: int = MAX_NP_LENGTH) -> Span:
    """Largest dependency-subtree NP around a nominal token, at most ``max_len``.

    Non-nominal tokens (verbs included) project to themselves. When the
    subtree is too long or non-contiguous, the dependent subtree reaching
    farthest from the head is dropped (rightmost on ties) until it fits.
    """
    if not doc.has_syntax:
        raise MissingSyntaxError(
            "NP projection needs syntax; attach a parse or use token-level evaluation"
        )
    if not 0 <= i < len(doc):
        raise IndexError(i)
    sent = doc.tokens[i].sent_index
    if not is_nominal(doc.tokens[i].pos_tag):
        return Span(sent, i, i + 1, i)
    parts = {c: subtree(doc, c) for c in doc.children(i)}
    while True:
        span = {i}.union(*parts.values()) if parts else {i}
        if len(span) <= max_len and _contiguous(span):
            return Span(sent, min(span), max(span) + 1, i)
        far = max(parts, key=lambda c: (max(abs(k - i) for k in parts[c]), c))
        del parts[far]


def spans_match(a: Span, b: Span) -> bool:
    """Head-anchored match: same sentence and same head token."""
    return a.sent_index == b.sent_index and a.head == b.head
