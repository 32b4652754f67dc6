"""Parse brace-annotated posts, inspect scope, and measure annotator agreement."""

from __future__ import annotations

import argparse

from marketsieve.agreement import corpus_agreement, merge_majority
from marketsieve.corpus import parse_annotated, tokenize
from marketsieve.synthetic import synthetic_corpus

POST = """TITLE: selling a private backconnect {bot}
fresh {bot} with {panel} included
<blockquote>
best bot ever, bought twice
</blockquote>
[rdp] accepted as payment, pm me"""


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--posts", type=int, default=40)
    ap.add_argument("--annotators", type=int, default=3)
    ap.add_argument("--noise", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    raw, layer = parse_annotated(POST)
    doc = tokenize(raw)
    print("tokens and scope (vouch text is out of scope):")
    for i, tok in enumerate(doc.tokens):
        tag = dict(layer.products).get(i, "")
        print(f"  {i:>2} {tok.text:<12} {'in ' if doc.scope_mask[i] else 'out'} {tag}")

    posts = synthetic_corpus(args.posts, "darkode", args.seed, n_annotators=args.annotators,
                             annotator_noise=args.noise)
    stats = corpus_agreement(posts)
    print(f"\n{args.posts} synthetic posts, {args.annotators} annotators, noise {args.noise}")
    print(f"  Fleiss' kappa over {stats.n_tokens} eligible tokens: {stats.kappa:.3f}")
    merged = merge_majority(posts[0].layers)
    print(f"  majority gold of first post: {[posts[0].doc.tokens[i].text for i in merged.indices]}")


if __name__ == "__main__":
    main()
