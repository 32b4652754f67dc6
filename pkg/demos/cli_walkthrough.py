"""Run every command-line stage on synthetic forums in a scratch directory."""

from __future__ import annotations

import argparse
import tempfile
from pathlib import Path

from marketsieve.cli import main as cli
from marketsieve.corpus import write_canonical
from marketsieve.synthetic import render_annotated, synthetic_corpus


def run(*argv) -> None:
    argv = [str(a) for a in argv]
    print(f"\n$ marketsieve {' '.join(argv)}")
    code = cli(argv)
    if code:
        raise SystemExit(f"exit status {code}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workdir", help="keep outputs here instead of a temporary directory")
    args = ap.parse_args()
    with tempfile.TemporaryDirectory() as tmp:
        d = Path(args.workdir or tmp)
        d.mkdir(parents=True, exist_ok=True)

        # brace-annotated text files, two annotators for one post
        raw = d / "raw"
        raw.mkdir(exist_ok=True)
        (raw / "p1.alice.txt").write_text("TITLE: selling fresh {bot}\n{bot} comes with {panel}, pm me\n")
        (raw / "p1.bob.txt").write_text("TITLE: selling fresh {bot}\n{bot} comes with panel, pm me\n")
        (raw / "p2.txt").write_text("TITLE: need [rdp]\nwill pay btc\n")
        run("ingest", raw, "--forum", "darkode", "-o", d / "ingested.jsonl")

        write_canonical(synthetic_corpus(120, "darkode", 1, n_annotators=3), d / "dk_train.jsonl")
        write_canonical(synthetic_corpus(40, "darkode", 2), d / "dk_dev.jsonl")
        write_canonical(synthetic_corpus(40, "hackforums", 3), d / "hf_dev.jsonl")
        print("\nexample annotated post:\n" + render_annotated(
            [("selling", "VBG", -1, "root", 0), ("bot", "NN", 0, "dobj", 1)], [[("pm", "NN", -1, "root", 0)]]))

        run("agree", d / "dk_train.jsonl")
        run("train", d / "dk_train.jsonl", "--mode", "np", "-m", d / "np.model")
        run("predict", d / "dk_dev.jsonl", "--model", d / "np.model", "-p", d / "np.pred")
        run("predict", d / "dk_dev.jsonl", "--baseline", "freq", "-p", d / "freq.pred")
        run("eval", d / "dk_dev.jsonl", "-p", d / "np.pred", "--train", d / "dk_train.jsonl", "--name", "Binary")
        run("significance", d / "dk_dev.jsonl", "-a", d / "np.pred", "-b", d / "freq.pred", "--level", "np",
            "--resamples", 1000)
        run("cluster", d / "dk_train.jsonl", d / "hf_dev.jsonl", "--num-clusters", 12, "--min-count", 3,
            "-o", d / "clusters.txt")
        run("gazetteer", d / "dk_train.jsonl", "--forum", "darkode", "-o", d / "gaz.txt")
        data = ["--data", f"darkode.train={d / 'dk_train.jsonl'}", "--data", f"darkode.dev={d / 'dk_dev.jsonl'}",
                "--data", f"hackforums.dev={d / 'hf_dev.jsonl'}"]
        run("xdomain", *data, "--train-forums", "darkode", "--eval-forums", "darkode", "hackforums",
            "--variants", "Dict", "Binary", "Binary+Brown", "Post", "--clusters", d / "clusters.txt")


if __name__ == "__main__":
    main()
