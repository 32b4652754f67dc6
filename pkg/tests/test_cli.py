from __future__ import annotations

import json
import random
from dataclasses import replace

import pytest

from marketsieve import __version__
from marketsieve.cli import main
from marketsieve.corpus import AnnotationLayer, read_canonical, write_canonical
from marketsieve.synthetic import synthetic_corpus


def noisy(posts, seed, rate=0.3):
    """Relabel a share of posts with a random token so scores are not perfect."""
    rng = random.Random(seed)
    out = []
    for p in posts:
        if rng.random() < rate:
            i = rng.randrange(len(p.doc.tokens))
            gold = AnnotationLayer("gold", ((i, "sell"),), frozenset(), p.doc.post_id)
            p = replace(p, gold_layer=gold)
        out.append(p)
    return out


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    write_canonical(noisy(synthetic_corpus(60, "darkode", seed=1), 1), d / "dk_train.jsonl")
    write_canonical(noisy(synthetic_corpus(25, "darkode", seed=2), 2), d / "dk_dev.jsonl")
    write_canonical(noisy(synthetic_corpus(25, "hackforums", seed=3), 3), d / "hf_dev.jsonl")
    write_canonical(noisy(synthetic_corpus(30, "hackforums", seed=4), 4), d / "hf_train.jsonl")
    (d / "exp.cfg").write_text(
        "[DEFAULT]\nseed = 3\niterations = 2\ntrain_forums = darkode\neval_forums = darkode hackforums\n"
        f"[forum.darkode]\ntrain = {d / 'dk_train.jsonl'}\ndev = {d / 'dk_dev.jsonl'}\n"
        f"[forum.hackforums]\ntrain = {d / 'hf_train.jsonl'}\ndev = {d / 'hf_dev.jsonl'}\n"
    )
    return d


def run(*argv):
    return main([str(a) for a in argv])


def records(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


# --------------------------------------------------------------------------
# exit codes

def test_version_and_help(capsys):
    assert run("--version") == 0
    assert __version__ in capsys.readouterr().out
    assert run("train", "--help") == 0


def test_usage_error_is_config_error():
    assert run("train") == 2
    assert run("nonsense") == 2


def test_missing_input_file(tmp_path):
    assert run("train", tmp_path / "none.jsonl", "-m", tmp_path / "m.txt") == 1


def test_malformed_corpus_line(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{not json\n")
    assert run("agree", bad) == 1


def test_bad_config_value(data, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("[train]\niterations = many\n")
    assert run("train", data / "dk_train.jsonl", "-m", tmp_path / "m.txt", "--config", cfg) == 2
    cfg.write_text("[train]\nbogus = 1\n")
    assert run("train", data / "dk_train.jsonl", "-m", tmp_path / "m.txt", "--config", cfg) == 2


def test_predict_needs_a_system(data, tmp_path):
    assert run("predict", data / "dk_dev.jsonl", "-p", tmp_path / "p.jsonl") == 2


# --------------------------------------------------------------------------
# ingest

def test_ingest_majority_and_report(tmp_path, capsys):
    raw = tmp_path / "raw"
    raw.mkdir()
    (raw / "p1.a.txt").write_text("TITLE: selling {bot}\nbest {bot} and {rat} here\n")
    (raw / "p1.b.txt").write_text("TITLE: selling {bot}\nbest {bot} and rat here\n")
    (raw / "p1.c.txt").write_text("TITLE: selling bot\nbest {bot} and {rat} here\n")
    (raw / "p2.txt").write_text("[rdp] wanted\n")
    out = tmp_path / "c.jsonl"
    assert run("ingest", raw, "--forum", "darkode", "-o", out) == 0
    posts = {p.doc.post_id: p for p in read_canonical(out)}
    assert [posts["p1"].doc.tokens[i].text for i in sorted(posts["p1"].gold_indices)] == ["bot", "bot", "rat"]
    assert len(posts["p1"].layers) == 3
    assert [t for _, t in posts["p2"].gold.products] == ["buy"]
    report = capsys.readouterr().out
    assert report.startswith(f"# marketsieve ingest v{__version__} seed=0 config=")


def test_ingest_unbalanced_brace(tmp_path, capsys):
    f = tmp_path / "p1.txt"
    f.write_text("ok line\nselling {bot here\n")
    assert run("ingest", f, "--forum", "x", "-o", tmp_path / "c.jsonl") == 1
    err = capsys.readouterr().err
    assert "p1.txt:2" in err
    assert not (tmp_path / "c.jsonl").exists()


def test_ingest_layers_must_share_text(tmp_path):
    (tmp_path / "p1.a.txt").write_text("selling {bot}\n")
    (tmp_path / "p1.b.txt").write_text("selling {bots}\n")
    assert run("ingest", tmp_path, "--forum", "x", "-o", tmp_path / "c.jsonl") == 1


def test_agree_table(tmp_path, capsys):
    path = tmp_path / "a.jsonl"
    write_canonical(synthetic_corpus(20, "darkode", seed=5, n_annotators=3), path)
    assert run("agree", path) == 0
    out = capsys.readouterr().out
    row = next(l for l in out.splitlines() if l.startswith("darkode"))
    kappa = float(row.split()[-1])
    assert 0.0 < kappa <= 1.0


# --------------------------------------------------------------------------
# train / predict / eval

@pytest.mark.parametrize("mode", ["token", "np", "post-token", "post-np"])
def test_train_predict_eval_round_trip(data, tmp_path, mode):
    train = data / "dk_train.jsonl"
    assert run("train", train, "--mode", mode, "-m", tmp_path / "m.txt", "--iterations", 2,
               "--records", tmp_path / "tr.jsonl") == 0
    assert run("predict", train, "--model", tmp_path / "m.txt", "-p", tmp_path / "p.jsonl") == 0
    assert run("eval", train, "-p", tmp_path / "p.jsonl", "--records", tmp_path / "ev.jsonl") == 0
    (tr,), (ev,) = records(tmp_path / "tr.jsonl"), records(tmp_path / "ev.jsonl")
    keys = ["P", "R", "F1", "type_P", "type_R", "type_F1", "post_accuracy", "posts_scored"]
    assert [tr[k] for k in keys] == [ev[k] for k in keys]
    # noisy gold keeps this from being a vacuous comparison
    assert ev["F1"] < 1.0


def test_eval_oov_breakdown(data, tmp_path, capsys):
    assert run("predict", data / "hf_dev.jsonl", "--baseline", "dict", "--dict-corpus",
               data / "dk_train.jsonl", "-p", tmp_path / "p.jsonl") == 0
    assert run("eval", data / "hf_dev.jsonl", "-p", tmp_path / "p.jsonl", "--train",
               data / "dk_train.jsonl", "--records", tmp_path / "ev.jsonl") == 0
    (ev,) = records(tmp_path / "ev.jsonl")
    assert 0.0 <= ev["oov_rate"] <= 1.0


def test_eval_rejects_missing_post(data, tmp_path):
    assert run("predict", data / "dk_dev.jsonl", "--baseline", "first", "-p", tmp_path / "p.jsonl") == 0
    lines = (tmp_path / "p.jsonl").read_text().splitlines()
    (tmp_path / "p.jsonl").write_text("\n".join(lines[:-1]) + "\n")
    assert run("eval", data / "dk_dev.jsonl", "-p", tmp_path / "p.jsonl") == 1


def test_significance_identical_files(data, tmp_path, capsys):
    assert run("predict", data / "dk_dev.jsonl", "--baseline", "freq", "-p", tmp_path / "p.jsonl") == 0
    capsys.readouterr()
    assert run("significance", data / "dk_dev.jsonl", "-a", tmp_path / "p.jsonl", "-b",
               tmp_path / "p.jsonl", "--resamples", 500) == 0
    out = dict(l.split("\t") for l in capsys.readouterr().out.splitlines()[1:])
    assert float(out["p_value"]) == 1.0


# --------------------------------------------------------------------------
# resources

def test_cluster_file_format(data, tmp_path):
    out = tmp_path / "c.txt"
    assert run("cluster", data / "dk_train.jsonl", "--num-clusters", 8, "--min-count", 3, "-o", out) == 0
    rows = [l.split("\t") for l in out.read_text().splitlines()]
    assert rows and all(len(r) == 3 and set(r[0]) <= {"0", "1"} and int(r[2]) >= 3 for r in rows)
    ids = [r[0] for r in rows]
    assert not any(a != b and b.startswith(a) for a in ids for b in ids)


def test_cluster_bad_setting(data, tmp_path):
    assert run("cluster", data / "dk_train.jsonl", "--num-clusters", 1, "-o", tmp_path / "c.txt") == 2


def test_gazetteer_command(data, tmp_path):
    out = tmp_path / "g.txt"
    assert run("gazetteer", data / "dk_train.jsonl", "--forum", "darkode", "-o", out) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "# marketsieve-gazetteer forum=darkode min_count=4" and len(lines) > 1


# --------------------------------------------------------------------------
# experiments

def test_xdomain_cell_matches_manual_pipeline(data, tmp_path):
    assert run("xdomain", "--config", data / "exp.cfg", "--variants", "Binary", "Dict",
               "--records", tmp_path / "x.jsonl") == 0
    cells = {(r["variant"], r["eval"]): r for r in records(tmp_path / "x.jsonl")}
    assert set(cells) == {(v, f) for v in ("Binary", "Dict") for f in ("darkode", "hackforums")}
    # the same cell by hand: np-mode model trained on darkode train, scored on hackforums dev
    assert run("train", data / "dk_train.jsonl", "--mode", "np", "--iterations", 2, "--seed", 3,
               "-m", tmp_path / "m.txt") == 0
    assert run("predict", data / "hf_dev.jsonl", "--model", tmp_path / "m.txt", "-p", tmp_path / "p.jsonl") == 0
    assert run("eval", data / "hf_dev.jsonl", "-p", tmp_path / "p.jsonl", "--records", tmp_path / "e.jsonl") == 0
    (ev,) = records(tmp_path / "e.jsonl")
    cell = cells["Binary", "hackforums"]
    for k in ("P", "R", "F1", "post_accuracy"):
        assert cell[k] == ev[k]


def test_xdomain_brown_needs_clusters(data):
    assert run("xdomain", "--config", data / "exp.cfg", "--variants", "Binary+Brown") == 2


def test_xdomain_gazetteer_cell(data, tmp_path, capsys):
    assert run("xdomain", "--config", data / "exp.cfg", "--variants", "Binary+Gaz") == 0
    assert "Binary+Gaz" in capsys.readouterr().out


def test_command_line_overrides_config(data, tmp_path, capsys):
    assert run("xdomain", "--config", data / "exp.cfg", "--variants", "Dict", "--eval-forums", "hackforums",
               "--seed", 9) == 0
    out = capsys.readouterr().out
    assert "seed=9" in out.splitlines()[0]
    assert "hackforums" in out and "darkode |" not in out.replace("train: darkode", "")


def test_curve(data, tmp_path, capsys):
    cfg = data / "exp.cfg"
    assert run("curve", "--config", cfg, "--train-forums", "darkode", "--eval-forums", "hackforums",
               "--sizes", 0, 10, "--records", tmp_path / "c.jsonl") == 0
    rows = records(tmp_path / "c.jsonl")
    zero = [r for r in rows if r["size"] == 0]
    # at size zero mixing and augmentation coincide
    assert len({r["F1"] for r in zero}) == 1
    assert run("curve", "--config", cfg, "--train-forums", "darkode", "--eval-forums", "hackforums",
               "--sizes", 0, 1000) == 2


# --------------------------------------------------------------------------
# determinism

def test_reruns_are_byte_identical(data, tmp_path):
    d = tmp_path

    def once():
        assert run("train", data / "dk_train.jsonl", "--mode", "post-token", "-m", d / "m.txt", "--out", d / "t.txt") == 0
        assert run("predict", data / "dk_dev.jsonl", "--model", d / "m.txt", "-p", d / "p.jsonl") == 0
        assert run("eval", data / "dk_dev.jsonl", "-p", d / "p.jsonl", "--out", d / "e.txt") == 0
        assert run("cluster", data / "dk_train.jsonl", "--num-clusters", 6, "--min-count", 2, "-o", d / "c.txt") == 0
        return {f.name: f.read_bytes() for f in d.iterdir()}

    first = once()
    # same paths again, overwriting every output
    assert once() == first
