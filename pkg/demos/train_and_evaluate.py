"""Train binary and post-level extractors on a noisy synthetic forum and
compare them with the lexical baselines, including a paired bootstrap."""

from __future__ import annotations

import argparse
import random
from dataclasses import replace

from marketsieve.corpus import AnnotationLayer
from marketsieve.evaluation import bootstrap_test, evaluate, format_table, outcomes
from marketsieve.learning import (
    TrainConfig,
    build_dictionary,
    predict_binary,
    predict_dict,
    predict_freq,
    predict_post,
    train_binary,
    train_post_latent,
)
from marketsieve.synthetic import synthetic_corpus


def add_label_noise(posts, rate, seed):
    """Move the gold label of some posts onto a random token."""
    rng = random.Random(seed)
    out = []
    for p in posts:
        if rng.random() < rate:
            i = rng.randrange(len(p.doc.tokens))
            p = replace(p, gold_layer=AnnotationLayer("gold", ((i, "sell"),), frozenset(), p.post_id))
        out.append(p)
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--train", type=int, default=200)
    ap.add_argument("--dev", type=int, default=80)
    ap.add_argument("--noise", type=float, default=0.2)
    ap.add_argument("--iterations", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    train = add_label_noise(synthetic_corpus(args.train, "darkode", args.seed), args.noise, args.seed)
    dev = add_label_noise(synthetic_corpus(args.dev, "darkode", args.seed + 1), args.noise, args.seed + 1)
    cfg = TrainConfig(iterations=args.iterations, seed=args.seed)

    systems = {}
    dictionary = build_dictionary(train)
    systems["Freq"] = ([predict_freq(p.doc) for p in dev], None, "token")
    systems["Dict"] = ([predict_dict(p.doc, dictionary) for p in dev], None, "token")
    binary = train_binary(train, "token", cfg)
    systems["Binary"] = ([predict_binary(binary, p.doc) for p in dev], None, "token")
    np_model = train_binary(train, "np", cfg)
    systems["Binary NP"] = ([predict_binary(np_model, p.doc) for p in dev], None, "np")
    post = train_post_latent(train, "post-token", cfg)
    firsts = [predict_post(post, p.doc) for p in dev]
    systems["Post"] = ([[f] if f is not None else [] for f in firsts], firsts, "token")

    rows = [(name, evaluate(dev, preds, f, level)) for name, (preds, f, level) in systems.items()]
    print(format_table(rows))
    print(f"\nnonzero weights: binary {len(binary.nonzero())}, post {len(post.nonzero())}")

    a = outcomes(dev, systems["Binary"][0])
    b = outcomes(dev, systems["Freq"][0])
    p = bootstrap_test("token_f1", a, b, n_resamples=2000, seed=args.seed)
    print(f"paired bootstrap, Binary over Freq on token F1: p = {p:.4f}")


if __name__ == "__main__":
    main()
