"""Forum posts: tokenization, brace-format annotations, scope rules, syntax
ingestion and the canonical line-delimited corpus format.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Sequence

__all__ = [
    "RawPost",
    "Token",
    "Document",
    "AnnotationLayer",
    "AnnotatedPost",
    "SyntaxRecord",
    "AnnotationError",
    "AnnotationWarning",
    "SyntaxAlignmentError",
    "CorpusFormatError",
    "TRADE_TAGS",
    "FLAG_LETTERS",
    "SCOPE_LINES",
    "CORPUS_HEADER",
    "tokenize",
    "tokenize_text",
    "parse_annotated",
    "compute_scope_mask",
    "attach_syntax",
    "read_conll",
    "read_canonical",
    "write_canonical",
    "dumps_post",
    "loads_post",
]

TRADE_TAGS = ("buy", "sell", "unspecified")
FLAG_LETTERS = frozenset("ADWGL")
SCOPE_LINES = 10
CORPUS_HEADER = "marketsieve-corpus v1"


class AnnotationError(ValueError):
    """Malformed brace annotation; ``line`` is 1-based within the input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}" if line is not None else message)


class AnnotationWarning(UserWarning):
    pass


class SyntaxAlignmentError(ValueError):
    pass


class CorpusFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class RawPost:
    forum_id: str
    post_id: str
    title: str
    body_lines: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "body_lines", tuple(self.body_lines))

    @property
    def lines(self) -> tuple[str, ...]:
        """All lines; the title always occupies line 0 (blank if absent)."""
        return (self.title,) + self.body_lines

    @classmethod
    def from_text(cls, text: str, forum_id: str = "", post_id: str = "") -> "RawPost":
        return cls(forum_id, post_id, "", tuple(text.split("\n")) if text else ())


@dataclass(frozen=True)
class Token:
    text: str
    line_index: int
    sent_index: int
    pos_in_sent: int
    pos_tag: str | None = None
    head: int | None = None  # in-sentence index, -1 for root
    deprel: str | None = None

    @property
    def lower(self) -> str:
        return self.text.lower()


@dataclass(frozen=True)
class Document:
    post: RawPost
    sentences: tuple[tuple[Token, ...], ...]
    scope_mask: tuple[bool, ...]
    vouch_mask: tuple[bool, ...]
    has_syntax: bool = False
    tokens: tuple[Token, ...] = field(init=False, compare=False, repr=False)
    sentence_starts: tuple[int, ...] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        sentences = tuple(tuple(s) for s in self.sentences)
        object.__setattr__(self, "sentences", sentences)
        object.__setattr__(self, "scope_mask", tuple(bool(b) for b in self.scope_mask))
        object.__setattr__(self, "vouch_mask", tuple(bool(b) for b in self.vouch_mask))
        flat = tuple(t for s in sentences for t in s)
        starts, n = [], 0
        for s in sentences:
            starts.append(n)
            n += len(s)
        object.__setattr__(self, "tokens", flat)
        object.__setattr__(self, "sentence_starts", tuple(starts))
        if len(self.scope_mask) != len(flat) or len(self.vouch_mask) != len(flat):
            raise ValueError("mask length does not match token count")
        if any(s and v for s, v in zip(self.scope_mask, self.vouch_mask)):
            raise ValueError("vouch tokens cannot be in scope")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def post_id(self) -> str:
        return self.post.post_id

    @property
    def forum_id(self) -> str:
        return self.post.forum_id

    def flat_index(self, sent_index: int, pos_in_sent: int) -> int:
        return self.sentence_starts[sent_index] + pos_in_sent

    def sentence_of(self, i: int) -> tuple[Token, ...]:
        return self.sentences[self.tokens[i].sent_index]

    def parent(self, i: int) -> int | None:
        """Flat index of the syntactic parent, -1 for root, None without syntax."""
        tok = self.tokens[i]
        if tok.head is None:
            return None
        if tok.head < 0:
            return -1
        return self.flat_index(tok.sent_index, tok.head)

    def children(self, i: int) -> list[int]:
        tok = self.tokens[i]
        start = self.sentence_starts[tok.sent_index]
        return [
            start + k
            for k, t in enumerate(self.sentences[tok.sent_index])
            if t.head == tok.pos_in_sent and k != tok.pos_in_sent
        ]

    def eligible(self) -> list[int]:
        return [i for i, ok in enumerate(self.scope_mask) if ok]


@dataclass(frozen=True)
class AnnotationLayer:
    annotator_id: str
    products: tuple[tuple[int, str], ...] = ()
    flags: frozenset[str] = frozenset()
    post_id: str = ""

    def __post_init__(self):
        products = tuple(sorted((int(i), tag) for i, tag in self.products))
        seen = set()
        for i, tag in products:
            if tag not in TRADE_TAGS:
                raise ValueError(f"unknown trade tag {tag!r}")
            if i in seen:
                raise ValueError(f"token {i} annotated twice")
            seen.add(i)
        bad = set(self.flags) - FLAG_LETTERS
        if bad:
            raise ValueError(f"unknown flags {sorted(bad)}")
        object.__setattr__(self, "products", products)
        object.__setattr__(self, "flags", frozenset(self.flags))

    @property
    def indices(self) -> frozenset[int]:
        return frozenset(i for i, _ in self.products)

    def validate(self, doc: Document) -> None:
        for i in self.indices:
            if not 0 <= i < len(doc):
                raise ValueError(f"token index {i} out of range")
            if not doc.scope_mask[i]:
                raise ValueError(f"token index {i} is outside the annotation scope")


@dataclass(frozen=True)
class AnnotatedPost:
    """A document with its annotator layers and (optionally) merged gold.

    ``domain`` is the label used for feature augmentation (None disables it)
    and ``weight`` scales the post's contribution to training objectives.
    """

    doc: Document
    layers: tuple[AnnotationLayer, ...] = ()
    gold_layer: AnnotationLayer | None = None
    domain: str | None = None
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def gold(self) -> AnnotationLayer | None:
        if self.gold_layer is not None:
            return self.gold_layer
        if len(self.layers) == 1:
            return self.layers[0]
        return None

    @property
    def gold_indices(self) -> frozenset[int]:
        g = self.gold
        return g.indices if g is not None else frozenset()

    @property
    def post_id(self) -> str:
        return self.doc.post_id

    @property
    def forum_id(self) -> str:
        return self.doc.forum_id


# --------------------------------------------------------------------------
# tokenization

_TOKEN_RE = re.compile(
    r"""
      (?:https?://|www\.)\S+?(?=[.,!?;:)\]]*(?:\s|$))
    | [$€£]\d+(?:[.,]\d+)*[kKmM]?
    | \d+(?:[.,]\d+)*[kK]?[$€£]
    | \d+(?:[.,:]\d+)+
    | \w+(?:[-'’]\w+)*
    | ([^\w\s])\1*
    """,
    re.VERBOSE,
)
_SENT_FINAL = re.compile(r"^[.!?]+$")


def _tokenize_line(line: str) -> list[tuple[str, int, int]]:
    return [(m.group(0), m.start(), m.end()) for m in _TOKEN_RE.finditer(line)]


def _split_sentences(line: str, toks: list[tuple[str, int, int]]) -> list[list[int]]:
    # a sentence-final mark ends the sentence when whitespace and a capitalised
    # token follow it
    out: list[list[int]] = [[]]
    for k, (text, start, end) in enumerate(toks):
        out[-1].append(k)
        if k + 1 < len(toks) and _SENT_FINAL.match(text):
            nxt_text, nxt_start, _ = toks[k + 1]
            if nxt_start > end and nxt_text[:1].isupper():
                out.append([])
    return [s for s in out if s]


def _tokenize_spans(raw: RawPost):
    """Yield (sentences, char spans) where spans are (line, start, end)."""
    sentences: list[list[Token]] = []
    spans: list[tuple[int, int, int]] = []
    for li, line in enumerate(raw.lines):
        toks = _tokenize_line(line)
        for sent in _split_sentences(line, toks):
            si = len(sentences)
            sentences.append(
                [Token(toks[k][0], li, si, p) for p, k in enumerate(sent)]
            )
            spans.extend((li, toks[k][1], toks[k][2]) for k in sent)
    return sentences, spans


def tokenize(raw: RawPost) -> Document:
    """Rule-based tokenization; line breaks always end a sentence."""
    sentences, _ = _tokenize_spans(raw)
    n = sum(len(s) for s in sentences)
    doc = Document(raw, tuple(map(tuple, sentences)), (False,) * n, (False,) * n)
    return compute_scope_mask(doc)


def tokenize_text(text: str, forum_id: str = "", post_id: str = "") -> Document:
    return tokenize(RawPost.from_text(text, forum_id, post_id))


# --------------------------------------------------------------------------
# scope

def _vouch_lines(lines: Sequence[str]) -> list[bool]:
    out, depth = [], 0
    for line in lines:
        marker = line.strip().lower()
        if marker == "<blockquote>":
            depth += 1
            out.append(True)
        elif marker == "</blockquote>" and depth > 0:
            depth -= 1
            out.append(True)
        else:
            out.append(depth > 0)
    return out


def _scope_lines(lines: Sequence[str], n_edge: int = SCOPE_LINES) -> list[bool]:
    nonblank = [i for i, line in enumerate(lines) if line.strip()]
    keep = set(nonblank[:n_edge]) | set(nonblank[-n_edge:] if n_edge else ())
    return [i in keep for i in range(len(lines))]


def compute_scope_mask(doc: Document) -> Document:
    """Mark tokens on the first/last 10 non-blank lines, outside vouches, as eligible."""
    lines = doc.post.lines
    vouch = _vouch_lines(lines)
    edge = _scope_lines(lines)
    vmask = tuple(vouch[t.line_index] for t in doc.tokens)
    smask = tuple(edge[t.line_index] and not vouch[t.line_index] for t in doc.tokens)
    return replace(doc, scope_mask=smask, vouch_mask=vmask)


# --------------------------------------------------------------------------
# brace annotations

_LINE_NUMBER = re.compile(r"^\s*\d+(?:[\s:.]|$)[ \t]*")
_FLAG_LINE = re.compile(r"^\s*[ADWGL](?:[\s,]*[ADWGL])*\s*$")
_OPEN_CLOSE = {"{": "}", "[": "]"}


def _strip_line_numbers(lines: list[str], mode: bool | None) -> list[str]:
    nonblank = [line for line in lines if line.strip()]
    if mode is None:
        mode = bool(nonblank) and all(_LINE_NUMBER.match(line) for line in nonblank)
    if not mode:
        return lines
    return [_LINE_NUMBER.sub("", line, count=1) if line.strip() else line for line in lines]


def _scan_braces(line: str, lineno: int):
    """Strip brace markers from one line.

    Returns the stripped line and a list of (start, end, tag) character
    spans in the stripped line.
    """
    out: list[str] = []
    found: list[tuple[int, int, str]] = []
    pos = 0
    n = len(line)
    i = 0
    while i < n:
        ch = line[i]
        if ch in _OPEN_CLOSE and i + 1 < n and not line[i + 1].isspace():
            closer = _OPEN_CLOSE[ch]
            tag = "sell" if ch == "{" else "buy"
            start = i + 1
            if ch == "{" and i + 2 < n and line[i + 1] in "SB" and line[i + 2] == " ":
                tag = "sell" if line[i + 1] == "S" else "buy"
                start = i + 3
            j = start
            while j < n and line[j] != closer and not line[j].isspace():
                if line[j] in _OPEN_CLOSE and j + 1 < n and not line[j + 1].isspace():
                    raise AnnotationError("nested annotation markers", lineno)
                j += 1
            if j >= n or line[j] != closer:
                if closer in line[j:]:
                    raise AnnotationError(
                        "brace must enclose exactly one whitespace-delimited token",
                        lineno,
                    )
                raise AnnotationError(f"unbalanced {ch!r}", lineno)
            if j == start:
                raise AnnotationError("empty annotation", lineno)
            out.append(line[pos:i])
            base = sum(len(s) for s in out)
            out.append(line[start:j])
            found.append((base, base + (j - start), tag))
            pos = i = j + 1
            continue
        if ch in ("}", "]") and i > 0 and not line[i - 1].isspace():
            raise AnnotationError(f"unbalanced {ch!r}", lineno)
        i += 1
    out.append(line[pos:])
    return "".join(out), found


def parse_annotated(
    text: str,
    forum_id: str = "",
    post_id: str = "",
    annotator_id: str = "",
    line_numbers: bool | None = None,
) -> tuple[RawPost, AnnotationLayer]:
    """Parse a post in the brace annotation format.

    ``{x}`` and ``{S x}`` mark sold products, ``[x]`` and ``{B x}`` bought
    ones. A trailing line made only of flag letters is collected into the
    layer's flags. A first line ``TITLE: ...`` becomes the title (a ``BODY:``
    prefix on the next line is dropped). Line-number prefixes are stripped
    when every non-blank line carries one (``line_numbers=None``) or when
    forced. Annotations that fall inside vouches or outside the 10-line
    scope are dropped with an :class:`AnnotationWarning`.
    """
    lines = text.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    if lines and lines[-1] == "" and text.endswith("\n"):
        lines.pop()
    linenos = list(range(1, len(lines) + 1))

    flags: frozenset[str] = frozenset()
    nonblank = [k for k, line in enumerate(lines) if line.strip()]
    if len(nonblank) >= 2:
        last = nonblank[-1]
        candidate = _LINE_NUMBER.sub("", lines[last], count=1)
        for form in (lines[last], candidate):
            if _FLAG_LINE.match(form):
                flags = frozenset(c for c in form if c in FLAG_LETTERS)
                del lines[last], linenos[last]
                break

    lines = _strip_line_numbers(lines, line_numbers)

    title = ""
    if lines and lines[0].lstrip().startswith("TITLE:"):
        title = lines[0].lstrip()[len("TITLE:"):]
        lines, linenos = lines[1:], linenos[1:]
        if lines and lines[0].lstrip().startswith("BODY:"):
            lines[0] = lines[0].lstrip()[len("BODY:"):].lstrip()
        all_lines = [title] + lines
        all_linenos = [linenos[0] - 1 if linenos else 1] + linenos
    else:
        all_lines = [""] + lines
        all_linenos = [0] + linenos

    stripped: list[str] = []
    marks: list[tuple[int, int, int, str, int]] = []
    for li, (line, lineno) in enumerate(zip(all_lines, all_linenos)):
        clean, found = _scan_braces(line, lineno)
        stripped.append(clean)
        marks.extend((li, s, e, tag, lineno) for s, e, tag in found)

    raw = RawPost(forum_id, post_id, stripped[0].strip(), tuple(stripped[1:]))
    if raw.title != stripped[0]:
        # title whitespace trimmed; shift marks on line 0 accordingly
        shift = len(stripped[0]) - len(stripped[0].lstrip())
        marks = [(li, s - shift, e - shift, t, ln) if li == 0 else (li, s, e, t, ln)
                 for li, s, e, t, ln in marks]

    sentences, spans = _tokenize_spans(raw)
    n = len(spans)
    doc = compute_scope_mask(
        Document(raw, tuple(map(tuple, sentences)), (False,) * n, (False,) * n)
    )

    products: dict[int, str] = {}
    for li, s, e, tag, lineno in marks:
        hits = [k for k, (tl, ts, te) in enumerate(spans) if tl == li and ts < e and te > s]
        if not hits:
            continue
        word_hits = [k for k in hits if any(c.isalnum() for c in doc.tokens[k].text)]
        k = (word_hits or hits)[0]
        if doc.vouch_mask[k]:
            warnings.warn(
                f"line {lineno}: annotation inside a vouch ignored", AnnotationWarning,
                stacklevel=2,
            )
            continue
        if not doc.scope_mask[k]:
            warnings.warn(
                f"line {lineno}: annotation outside the first/last {SCOPE_LINES} "
                "lines ignored",
                AnnotationWarning,
                stacklevel=2,
            )
            continue
        products.setdefault(k, tag)

    layer = AnnotationLayer(annotator_id, tuple(products.items()), flags, post_id)
    return raw, layer


# --------------------------------------------------------------------------
# syntax

@dataclass(frozen=True)
class SyntaxRecord:
    form: str
    pos_tag: str
    head: int  # in-sentence index, -1 for root
    deprel: str


_PTB_ESCAPES = {
    "-LRB-": "(", "-RRB-": ")", "-LSB-": "[", "-RSB-": "]",
    "-LCB-": "{", "-RCB-": "}",
}


def read_conll(source: str | Path | Iterable[str]) -> list[list[SyntaxRecord]]:
    """Read sentences from the tab-separated 10-column dependency format.

    Uses FORM, XPOS (UPOS when XPOS is ``_``), HEAD and DEPREL; multiword
    ranges and empty nodes are skipped. Heads become 0-based in-sentence
    indices with -1 for the root.
    """
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as f:
            lines = f.read().splitlines()
    else:
        lines = [line.rstrip("\r\n") for line in source]
    sentences: list[list[SyntaxRecord]] = []
    current: list[SyntaxRecord] = []
    for lineno, line in enumerate(lines, 1):
        if line.startswith("#"):
            continue
        if not line.strip():
            if current:
                sentences.append(current)
                current = []
            continue
        cols = line.split("\t")
        if len(cols) < 8:
            raise SyntaxAlignmentError(f"line {lineno}: expected 10 columns, got {len(cols)}")
        if "-" in cols[0] or "." in cols[0]:
            continue
        pos = cols[4] if cols[4] != "_" else cols[3]
        try:
            head = int(cols[6]) - 1
        except ValueError:
            raise SyntaxAlignmentError(f"line {lineno}: bad HEAD {cols[6]!r}") from None
        current.append(SyntaxRecord(cols[1], pos, head, cols[7]))
    if current:
        sentences.append(current)
    return sentences


def attach_syntax(doc: Document, syntax: Sequence[Sequence[SyntaxRecord]] | None) -> Document:
    """Positionally align per-sentence syntax records with ``doc``."""
    if syntax is None:
        return replace(doc, has_syntax=False)
    if len(syntax) != len(doc.sentences):
        raise SyntaxAlignmentError(
            f"{len(syntax)} syntax sentences for {len(doc.sentences)} document sentences"
        )
    new_sents = []
    for si, (sent, recs) in enumerate(zip(doc.sentences, syntax)):
        if len(sent) != len(recs):
            raise SyntaxAlignmentError(
                f"sentence {si}: {len(recs)} syntax tokens for {len(sent)} tokens"
            )
        new = []
        for k, (tok, rec) in enumerate(zip(sent, recs)):
            if _PTB_ESCAPES.get(rec.form, rec.form) != tok.text:
                raise SyntaxAlignmentError(
                    f"sentence {si}, position {k}: syntax form {rec.form!r} "
                    f"does not match token {tok.text!r}"
                )
            if rec.head == k or not -1 <= rec.head < len(sent):
                raise SyntaxAlignmentError(f"sentence {si}, position {k}: bad head {rec.head}")
            new.append(replace(tok, pos_tag=rec.pos_tag, head=rec.head, deprel=rec.deprel))
        new_sents.append(tuple(new))
    return replace(doc, sentences=tuple(new_sents), has_syntax=True)


# --------------------------------------------------------------------------
# canonical format

_REQUIRED = ("forum", "id", "title", "lines", "sentences", "scope", "vouch", "syntax")


def _layer_to_json(layer: AnnotationLayer) -> dict:
    return {
        "annotator": layer.annotator_id,
        "post": layer.post_id,
        "products": [[i, tag] for i, tag in layer.products],
        "flags": "".join(sorted(layer.flags)),
    }


def _layer_from_json(obj: dict) -> AnnotationLayer:
    return AnnotationLayer(
        obj["annotator"],
        tuple((int(i), tag) for i, tag in obj["products"]),
        frozenset(obj.get("flags", "")),
        obj.get("post", ""),
    )


def dumps_post(post: AnnotatedPost) -> str:
    doc = post.doc
    rec = {
        "forum": doc.post.forum_id,
        "id": doc.post.post_id,
        "title": doc.post.title,
        "lines": list(doc.post.body_lines),
        "sentences": [
            [[t.text, t.line_index, t.pos_tag, t.head, t.deprel] for t in sent]
            for sent in doc.sentences
        ],
        "scope": "".join("1" if b else "0" for b in doc.scope_mask),
        "vouch": "".join("1" if b else "0" for b in doc.vouch_mask),
        "syntax": doc.has_syntax,
        "layers": [_layer_to_json(layer) for layer in post.layers],
        "gold": _layer_to_json(post.gold_layer) if post.gold_layer is not None else None,
        "domain": post.domain,
        "weight": post.weight,
    }
    return json.dumps(rec, ensure_ascii=False, separators=(",", ":"))


def loads_post(line: str, lineno: int | None = None) -> AnnotatedPost:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"invalid JSON: {exc.msg}", lineno) from None
    if not isinstance(rec, dict):
        raise CorpusFormatError("record is not an object", lineno)
    missing = [k for k in _REQUIRED if k not in rec]
    if missing:
        raise CorpusFormatError(f"missing field(s) {', '.join(missing)}", lineno)
    try:
        raw = RawPost(rec["forum"], rec["id"], rec["title"], tuple(rec["lines"]))
        sentences = tuple(
            tuple(
                Token(text, line, si, p, pos, head, dep)
                for p, (text, line, pos, head, dep) in enumerate(sent)
            )
            for si, sent in enumerate(rec["sentences"])
        )
        doc = Document(
            raw,
            sentences,
            tuple(c == "1" for c in rec["scope"]),
            tuple(c == "1" for c in rec["vouch"]),
            bool(rec["syntax"]),
        )
        layers = tuple(_layer_from_json(obj) for obj in rec.get("layers", ()))
        gold = rec.get("gold")
        post = AnnotatedPost(
            doc,
            layers,
            _layer_from_json(gold) if gold is not None else None,
            rec.get("domain"),
            float(rec.get("weight", 1.0)),
        )
    except (TypeError, ValueError, KeyError) as exc:
        raise CorpusFormatError(f"malformed record: {exc}", lineno) from None
    return post


def write_canonical(corpus: Iterable[AnnotatedPost], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(CORPUS_HEADER + "\n")
        for post in corpus:
            f.write(dumps_post(post) + "\n")


def iter_canonical(path: str | Path) -> Iterator[AnnotatedPost]:
    with open(path, encoding="utf-8") as f:
        header = f.readline().rstrip("\n")
        if header != CORPUS_HEADER:
            raise CorpusFormatError(f"expected header {CORPUS_HEADER!r}", 1)
        for lineno, line in enumerate(f, 2):
            if line.strip():
                yield loads_post(line, lineno)


def read_canonical(path: str | Path) -> list[AnnotatedPost]:
    return list(iter_canonical(path))
