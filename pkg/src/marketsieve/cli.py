"""Command-line driver.

Every subcommand reads the canonical corpus format, accepts an optional
``--config`` file (sectioned ``key = value``; the section named after the
subcommand plus ``[DEFAULT]``) whose keys are the long option names, and
lets command-line flags override config values. Reports start with a
header line carrying the command, seed and a hash of the resolved
settings.

Exit codes: 0 success, 1 input error, 2 config error, 3 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import sys
import warnings
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .adaptation import (
    brown_cluster,
    build_gazetteer,
    mix_corpora,
    read_clusters,
    read_gazetteer,
    token_stream,
    write_clusters,
    write_gazetteer,
)
from .agreement import corpus_agreement, merge_majority
from .corpus import (
    AnnotatedPost,
    AnnotationError,
    AnnotationWarning,
    CorpusFormatError,
    SyntaxAlignmentError,
    attach_syntax,
    parse_annotated,
    read_canonical,
    read_conll,
    tokenize,
    write_canonical,
)
from .evaluation import EvalReport, METRICS, bootstrap_test, evaluate, format_table, outcomes
from .features import FeatureConfig
from .learning import (
    MODES,
    LinearModel,
    TrainConfig,
    build_dictionary,
    load_model,
    predict_binary,
    predict_dict,
    predict_first_np,
    predict_freq,
    predict_post,
    save_model,
    train_binary,
    train_post_latent,
)
from .projection import MissingSyntaxError, Span

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2, 3
PRED_HEADER = "marketsieve-predictions v1"
VARIANTS = ("Dict", "Binary", "Binary+Brown", "Binary+Gaz", "Post", "Post+Brown", "Post+Gaz")
# settings that name outputs; they do not change results so stay out of the hash
_OUTPUT_KEYS = frozenset({"config", "out", "records", "corpus_out", "model_out", "pred_out",
                          "clusters_out", "gazetteer_out"})


class ConfigError(Exception):
    pass


class InputError(Exception):
    pass


# --------------------------------------------------------------------------
# settings and reports

def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace, command: str) -> None:
    """Fill options left unset on the command line from the config file."""
    if not args.config:
        return
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(args.config, encoding="utf-8") as f:
            cp.read_file(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{args.config}: {exc}") from None
    section = {}
    if cp.has_section(command):
        section = {k: v for k, v in cp.items(command, raw=True) if k not in cp.defaults()}
    actions = {a.dest: a for a in parser._actions if a.dest not in ("help", "config", "data")}
    for key, raw in list(cp.defaults().items()) + list(section.items()):
        dest = key.replace("-", "_")
        action = actions.get(dest)
        if action is None:
            if key in section:
                raise ConfigError(f"{args.config}: unknown key {key!r} for {command}")
            continue  # [DEFAULT] keys may target other commands
        if getattr(args, dest) != action.default:
            continue  # given on the command line
        try:
            if isinstance(action, argparse._StoreTrueAction):
                value = _bool(raw)
            elif action.nargs in ("+", "*"):
                conv = action.type or str
                value = [conv(x) for x in raw.replace(",", " ").split()]
            else:
                value = (action.type or str)(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{args.config}: bad value for {key}: {exc}") from None
        if action.choices is not None and value not in action.choices:
            raise ConfigError(f"{args.config}: {key} must be one of {sorted(action.choices)}")
        setattr(args, dest, value)


def _settings(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _OUTPUT_KEYS and k != "func"}


def config_hash(settings: dict) -> str:
    blob = json.dumps(settings, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _header(command: str, args: argparse.Namespace) -> str:
    settings = _settings(args)
    return f"# marketsieve {command} v{__version__} seed={args.seed} config={config_hash(settings)}"


def _emit(args: argparse.Namespace, command: str, text: str, records: Sequence[dict] = ()) -> None:
    header = _header(command, args)
    body = header + "\n" + text.rstrip("\n") + "\n"
    if getattr(args, "out", None):
        Path(args.out).write_text(body, encoding="utf-8")
    else:
        sys.stdout.write(body)
    if getattr(args, "records", None):
        settings_hash = header.split("config=")[1]
        with open(args.records, "w", encoding="utf-8", newline="\n") as f:
            for rec in records:
                rec = {"command": command, "seed": args.seed, "config": settings_hash, **rec}
                f.write(json.dumps(rec, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(type(obj).__name__)


def _report_record(r: EvalReport) -> dict:
    return {
        "P": r.token_prf.precision, "R": r.token_prf.recall, "F1": r.token_prf.f1,
        "type_P": r.type_prf.precision, "type_R": r.type_prf.recall, "type_F1": r.type_prf.f1,
        "post_accuracy": r.post_accuracy, "posts_scored": r.n_posts_scored,
    }


def _train_config(args: argparse.Namespace) -> TrainConfig:
    try:
        return TrainConfig(
            iterations=args.iterations,
            l1_strength=args.l1,
            adagrad_eta=args.eta,
            adagrad_delta=args.delta,
            cost_fp=args.cost_fp,
            cost_fn=args.cost_fn,
            singleton_weight=args.singleton_weight,
            target_domain_weight=args.target_weight,
            seed=args.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _load_corpus(path: str) -> list[AnnotatedPost]:
    try:
        return read_canonical(path)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    except CorpusFormatError as exc:
        raise InputError(f"{path}: {exc}") from None


def _load_corpora(paths: Sequence[str]) -> list[AnnotatedPost]:
    out = []
    for p in paths:
        out += _load_corpus(p)
    return out


# --------------------------------------------------------------------------
# predictions file

def _enc(c: int | Span):
    return [c.sent_index, c.start, c.end, c.head] if isinstance(c, Span) else int(c)


def _dec(x) -> int | Span:
    return Span(*x) if isinstance(x, list) else int(x)


def _sort_key(c: int | Span):
    return (c.start, c.head) if isinstance(c, Span) else (c, c)


def write_predictions(path, posts, preds, firsts, level: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(PRED_HEADER + "\n")
        for post, pred, first in zip(posts, preds, firsts):
            rec = {
                "forum": post.forum_id,
                "id": post.post_id,
                "level": level,
                "pred": [_enc(c) for c in sorted(pred, key=_sort_key)],
                "first": _enc(first) if first is not None else None,
            }
            f.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_predictions(path) -> tuple[str, dict]:
    """Returns the prediction level and {(forum, id): (pred, first)}."""
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    if not lines or lines[0] != PRED_HEADER:
        raise InputError(f"{path}:1: expected header {PRED_HEADER!r}")
    out, levels = {}, set()
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            key = (rec["forum"], rec["id"])
            pred = [_dec(x) for x in rec["pred"]]
            first = _dec(rec["first"]) if rec["first"] is not None else None
            levels.add(rec["level"])
        except (ValueError, KeyError, TypeError) as exc:
            raise InputError(f"{path}:{lineno}: malformed prediction record ({exc})") from None
        if key in out:
            raise InputError(f"{path}:{lineno}: duplicate prediction for {key[0]}/{key[1]}")
        out[key] = (pred, first)
    if len(levels) > 1:
        raise InputError(f"{path}: mixed prediction levels {sorted(levels)}")
    return (levels.pop() if levels else "token"), out


def _align(posts, table, path) -> tuple[list, list]:
    preds, firsts = [], []
    for p in posts:
        key = (p.forum_id, p.post_id)
        if key not in table:
            raise InputError(f"{path}: no prediction for post {key[0]}/{key[1]}")
        preds.append(table[key][0])
        firsts.append(table[key][1])
    return preds, firsts


# --------------------------------------------------------------------------
# model plumbing shared by train / predict / xdomain / curve

def _predict_all(model: LinearModel, posts) -> tuple[list, list]:
    preds, firsts = [], []
    for p in posts:
        if model.mode.startswith("post-"):
            c = predict_post(model, p.doc)
            preds.append([c] if c is not None else [])
            firsts.append(c)
        else:
            pred = sorted(predict_binary(model, p.doc), key=_sort_key)
            preds.append(pred)
            firsts.append(pred[0] if pred else None)
    return preds, firsts


def _train(posts, mode, tcfg, fcfg, clusters=None, gazetteer=None) -> LinearModel:
    if mode.startswith("post-"):
        return train_post_latent(posts, mode, tcfg, fcfg, clusters, gazetteer)
    return train_binary(posts, mode, tcfg, fcfg, clusters, gazetteer)


def _level(mode: str) -> str:
    return "np" if mode.endswith("np") else "token"


# --------------------------------------------------------------------------
# commands

def _group_inputs(paths: Sequence[str]) -> dict[str, list[tuple[str, Path]]]:
    """Map post id -> [(annotator, file)] from ``<post>.txt`` or
    ``<post>.<annotator>.txt`` file names; directories are expanded."""
    files = []
    for p in paths:
        path = Path(p)
        if path.is_dir():
            files += sorted(path.glob("*.txt"))
        elif path.exists():
            files.append(path)
        else:
            raise InputError(f"{p}: no such file")
    groups: dict[str, list[tuple[str, Path]]] = {}
    for f in files:
        post_id, _, annotator = f.stem.partition(".")
        groups.setdefault(post_id, []).append((annotator or "gold", f))
    return {k: sorted(v) for k, v in sorted(groups.items())}


def cmd_ingest(args) -> int:
    groups = _group_inputs(args.inputs)
    posts, flag_hist, n_warnings = [], Counter(), 0
    for post_id, members in groups.items():
        raw, layers = None, []
        for annotator, path in members:
            try:
                text = path.read_text(encoding="utf-8")
            except (OSError, UnicodeDecodeError) as exc:
                raise InputError(f"{path}: {exc}") from None
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", AnnotationWarning)
                try:
                    r, layer = parse_annotated(text, args.forum, post_id, annotator)
                except AnnotationError as exc:
                    raise InputError(f"{path}:{exc.line or 0}: {exc.message}") from None
            for w in caught:
                n_warnings += 1
                print(f"{path}: warning: {w.message}", file=sys.stderr)
            if raw is not None and r.lines != raw.lines:
                raise InputError(f"{path}: text differs from {members[0][1].name} for post {post_id}")
            raw = r
            layers.append(layer)
            flag_hist.update(layer.flags)
        doc = tokenize(raw)
        if args.syntax_dir:
            conll = Path(args.syntax_dir) / f"{post_id}.conll"
            if conll.exists():
                try:
                    doc = attach_syntax(doc, read_conll(conll))
                except (SyntaxAlignmentError, ValueError) as exc:
                    raise InputError(f"{conll}: {exc}") from None
            elif args.require_syntax:
                raise InputError(f"{conll}: missing syntax file")
        gold = merge_majority(layers) if len(layers) >= 2 else None
        for layer in layers:
            try:
                layer.validate(doc)
            except ValueError as exc:
                raise InputError(f"{post_id}: {exc}") from None
        posts.append(AnnotatedPost(doc, tuple(layers), gold))
    if not posts:
        raise InputError("no input posts")
    write_canonical(posts, args.corpus_out)

    n_tokens = sum(len(p.doc) for p in posts)
    n_products = sum(len(p.gold_indices) for p in posts)
    lines = [
        f"forum\t{args.forum}",
        f"posts\t{len(posts)}",
        f"tokens\t{n_tokens}",
        f"eligible_tokens\t{sum(len(p.doc.eligible()) for p in posts)}",
        f"gold_products\t{n_products}",
        f"with_syntax\t{sum(p.doc.has_syntax for p in posts)}",
        f"annotation_warnings\t{n_warnings}",
        "flags\t" + " ".join(f"{k}={flag_hist[k]}" for k in sorted(flag_hist)),
    ]
    rec = {"forum": args.forum, "posts": len(posts), "tokens": n_tokens,
           "gold_products": n_products, "flags": dict(sorted(flag_hist.items()))}
    _emit(args, "ingest", "\n".join(lines), [rec])
    return EXIT_OK


def cmd_agree(args) -> int:
    by_forum: dict[str, list[AnnotatedPost]] = {}
    for p in _load_corpora(args.corpus):
        by_forum.setdefault(p.forum_id, []).append(p)
    rows, records = [], []
    head = f"{'forum':<14} {'posts':>6} {'words/post':>10} {'labeled/post':>12} {'annotators':>10} {'kappa':>7}"
    rows.append(head)
    rows.append("-" * len(head))
    for forum, posts in sorted(by_forum.items()):
        words = np.mean([len(p.doc) for p in posts])
        labeled = np.mean([len(p.gold_indices) for p in posts])
        try:
            rep = corpus_agreement(posts, eligible_only=not args.all_tokens)
            kappa, n_ann = rep.kappa, rep.n_annotators
        except ValueError:
            kappa, n_ann = None, max((len(p.layers) for p in posts), default=0)
        k_txt = "undef" if kappa is None else f"{kappa:.3f}"
        rows.append(f"{forum:<14} {len(posts):>6} {words:>10.1f} {labeled:>12.1f} {n_ann:>10} {k_txt:>7}")
        records.append({"forum": forum, "posts": len(posts), "words_per_post": float(words),
                        "labeled_per_post": float(labeled), "annotators": n_ann, "kappa": kappa})
    _emit(args, "agree", "\n".join(rows), records)
    return EXIT_OK


def _feature_config(args, brown: bool | None = None, gaz: bool | None = None) -> FeatureConfig:
    return FeatureConfig(
        common_word_min_count=args.common_word_min_count,
        use_brown=args.clusters is not None if brown is None else brown,
        use_gazetteer=args.gazetteer is not None if gaz is None else gaz,
        domain_augment=args.augment,
    )


def cmd_train(args) -> int:
    posts = _load_corpora(args.corpus)
    tcfg = _train_config(args)
    clusters = _read_resource(read_clusters, args.clusters)
    gaz = _read_resource(read_gazetteer, args.gazetteer)
    if args.augment:
        posts = [replace(p, domain=p.forum_id) for p in posts]
    try:
        model = _train(posts, args.mode, tcfg, _feature_config(args), clusters, gaz)
    except MissingSyntaxError as exc:
        raise InputError(str(exc)) from None
    save_model(model, args.model_out)
    preds, firsts = _predict_all(model, posts)
    report = evaluate(posts, preds, firsts, level=_level(args.mode))
    text = (f"mode\t{args.mode}\nposts\t{len(posts)}\nfeatures\t{len(model.vocab)}\n"
            f"nonzero_weights\t{int(np.count_nonzero(model.weights))}\n\nin-sample\n"
            + format_table([("train", report)], "NPs" if _level(args.mode) == "np" else "Tokens"))
    _emit(args, "train", text, [{"split": "train", "mode": args.mode, **_report_record(report)}])
    return EXIT_OK


def _read_resource(reader, path):
    if path is None:
        return None
    try:
        return reader(path)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def cmd_predict(args) -> int:
    posts = _load_corpora(args.corpus)
    try:
        if args.baseline:
            if args.baseline == "freq":
                preds = [sorted(predict_freq(p.doc)) for p in posts]
            elif args.baseline == "dict":
                if not args.dict_corpus:
                    raise ConfigError("the dict baseline needs --dict-corpus")
                dictionary = build_dictionary(_load_corpora(args.dict_corpus))
                preds = [sorted(predict_dict(p.doc, dictionary)) for p in posts]
            else:
                firsts = [predict_first_np(p.doc) for p in posts]
                preds = [[f] if f is not None else [] for f in firsts]
            if args.baseline != "first":
                firsts = [pred[0] if pred else None for pred in preds]
            level = "np" if args.baseline == "first" else "token"
        else:
            if not args.model:
                raise ConfigError("predict needs --model or --baseline")
            model = _read_resource(load_model, args.model)
            if args.gazetteer:
                model = replace(model, featurizer=replace(model.featurizer,
                                                          gazetteer=_read_resource(read_gazetteer, args.gazetteer)))
            preds, firsts = _predict_all(model, posts)
            level = _level(model.mode)
    except MissingSyntaxError as exc:
        raise InputError(str(exc)) from None
    write_predictions(args.pred_out, posts, preds, firsts, level)
    n = sum(len(p) for p in preds)
    _emit(args, "predict", f"posts\t{len(posts)}\npredictions\t{n}\nlevel\t{level}",
          [{"posts": len(posts), "predictions": n, "level": level}])
    return EXIT_OK


def cmd_eval(args) -> int:
    posts = _load_corpora(args.corpus)
    pred_level, table = read_predictions(args.predictions)
    preds, firsts = _align(posts, table, args.predictions)
    level = args.level or pred_level
    if pred_level == "np" and level == "token":
        raise ConfigError("NP-level predictions cannot be scored at token level")
    train = _load_corpora(args.train) if args.train else None
    try:
        report = evaluate(posts, preds, firsts, level=level, train_posts=train)
    except MissingSyntaxError as exc:
        raise InputError(str(exc)) from None
    text = format_table([(args.name, report)], "NPs" if level == "np" else "Tokens")
    rec = {"name": args.name, "level": level, **_report_record(report)}
    if report.oov is not None:
        o = report.oov
        text += (f"\n\nOOV rate {_fmt(o.oov_rate)}  recall seen {_fmt(o.recall_seen)}"
                 f"  recall OOV {_fmt(o.recall_oov)}  (seen {o.n_seen}, OOV {o.n_oov})")
        rec.update(oov_rate=o.oov_rate, recall_seen=o.recall_seen, recall_oov=o.recall_oov)
    _emit(args, "eval", text, [rec])
    return EXIT_OK


def _fmt(x: float | None) -> str:
    return "-" if x is None else f"{100 * x:.1f}"


def cmd_cluster(args) -> int:
    posts = _load_corpora(args.corpus)
    try:
        h = brown_cluster(token_stream(posts), args.num_clusters, args.min_count)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    write_clusters(h, args.clusters_out)
    _emit(args, "cluster", f"words\t{len(h)}\nclusters\t{args.num_clusters}\nmerges\t{len(h.merges)}",
          [{"words": len(h), "clusters": args.num_clusters}])
    return EXIT_OK


def cmd_gazetteer(args) -> int:
    posts = _load_corpora(args.corpus)
    forum = args.forum or ",".join(sorted({p.forum_id for p in posts}))
    g = build_gazetteer(posts, args.min_count, forum)
    write_gazetteer(g, args.gazetteer_out)
    _emit(args, "gazetteer", f"forum\t{forum}\nmin_count\t{args.min_count}\nentries\t{len(g)}",
          [{"forum": forum, "min_count": args.min_count, "entries": len(g)}])
    return EXIT_OK


def cmd_significance(args) -> int:
    posts = _load_corpora(args.corpus)
    la, ta = read_predictions(args.system_a)
    lb, tb = read_predictions(args.system_b)
    level = args.level or ("np" if "np" in (la, lb) else "token")
    pa, fa = _align(posts, ta, args.system_a)
    pb, fb = _align(posts, tb, args.system_b)
    oa = outcomes(posts, pa, fa, level)
    ob = outcomes(posts, pb, fb, level)
    try:
        p = bootstrap_test(args.metric, oa, ob, args.resamples, args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    m = METRICS[args.metric]
    sa = m.score(np.sum([o.vector() for o in oa], axis=0))
    sb = m.score(np.sum([o.vector() for o in ob], axis=0))
    text = (f"metric\t{args.metric}\nlevel\t{level}\nA\t{sa:.4f}\nB\t{sb:.4f}\n"
            f"resamples\t{args.resamples}\np_value\t{p:.4f}")
    _emit(args, "significance", text, [{"metric": args.metric, "a": sa, "b": sb, "p_value": p}])
    return EXIT_OK


# --------------------------------------------------------------------------
# experiments

@dataclass
class ExperimentConfig:
    """Forum data paths plus the experiment selection, resolved from the
    ``[forum.NAME]`` config sections and ``--data NAME.split=PATH`` flags."""

    paths: dict[str, dict[str, str]]
    train_forums: list[str]
    eval_forums: list[str]
    eval_split: str

    def corpus(self, forum: str, split: str) -> list[AnnotatedPost]:
        try:
            path = self.paths[forum][split]
        except KeyError:
            raise ConfigError(f"no {split} data configured for forum {forum!r}") from None
        return _load_corpus(path)

    def has(self, forum: str, split: str) -> bool:
        return split in self.paths.get(forum, {})


def _experiment(args) -> ExperimentConfig:
    paths: dict[str, dict[str, str]] = {}
    if args.config:
        cp = configparser.ConfigParser(interpolation=None)
        with open(args.config, encoding="utf-8") as f:
            cp.read_file(f)
        for section in cp.sections():
            if section.startswith("forum."):
                paths[section[len("forum."):]] = {k: v for k, v in cp.items(section, raw=True)
                                                  if k not in cp.defaults()}
    for item in args.data or ():
        key, sep, path = item.partition("=")
        forum, dot, split = key.partition(".")
        if not (sep and dot and forum and split and path):
            raise ConfigError(f"--data expects NAME.split=PATH, got {item!r}")
        paths.setdefault(forum, {})[split] = path
    for forum, splits in paths.items():
        for split, path in splits.items():
            if not Path(path).exists():
                raise ConfigError(f"forum {forum}: {split} file {path} does not exist")
    return ExperimentConfig(paths, list(args.train_forums or ()), list(args.eval_forums or ()),
                            args.eval_split)


def _run_variant(variant, train, eval_sets, exp, args, clusters, tcfg) -> dict[str, EvalReport | None]:
    """NP-level scores of one system variant on every eval forum; None marks
    a cell the variant cannot fill."""
    kind, _, extra = variant.partition("+")
    out: dict[str, EvalReport | None] = {}
    if kind == "Dict":
        dictionary = build_dictionary(train)
        for forum, posts in eval_sets.items():
            preds = [sorted(predict_dict(p.doc, dictionary)) for p in posts]
            out[forum] = evaluate(posts, preds, level="np")
        return out
    mode = "np" if kind == "Binary" else "post-np"
    fcfg = FeatureConfig(common_word_min_count=args.common_word_min_count,
                         use_brown=extra == "Brown", use_gazetteer=extra == "Gaz")
    train_gaz = build_gazetteer(train, args.gazetteer_min_count) if extra == "Gaz" else None
    model = _train(train, mode, tcfg, fcfg, clusters if extra == "Brown" else None, train_gaz)
    for forum, posts in eval_sets.items():
        m = model
        if extra == "Gaz":
            if not exp.has(forum, "train"):
                out[forum] = None
                continue
            target_gaz = build_gazetteer(exp.corpus(forum, "train"), args.gazetteer_min_count, forum)
            m = replace(model, featurizer=replace(model.featurizer, gazetteer=target_gaz))
        preds, firsts = _predict_all(m, posts)
        out[forum] = evaluate(posts, preds, firsts, level="np")
    return out


def _cell(r: EvalReport | None) -> str:
    if r is None:
        return f"{'−':>5} {'−':>5} {'−':>5} {'−':>5}"
    acc = "    -" if r.post_accuracy is None else f"{100 * r.post_accuracy:5.1f}"
    p = r.token_prf
    return f"{100 * p.precision:5.1f} {100 * p.recall:5.1f} {100 * p.f1:5.1f} {acc}"


def cmd_xdomain(args) -> int:
    exp = _experiment(args)
    if not exp.train_forums or not exp.eval_forums:
        raise ConfigError("xdomain needs train_forums and eval_forums")
    variants = args.variants or list(VARIANTS)
    unknown = [v for v in variants if v not in VARIANTS]
    if unknown:
        raise ConfigError(f"unknown variant(s) {unknown}; choose from {list(VARIANTS)}")
    clusters = None
    if any(v.endswith("+Brown") for v in variants):
        if not args.clusters:
            raise ConfigError("Brown variants need --clusters")
        clusters = _read_resource(read_clusters, args.clusters)
    tcfg = _train_config(args)
    train = [p for f in exp.train_forums for p in exp.corpus(f, "train")]
    eval_sets = {f: exp.corpus(f, exp.eval_split) for f in exp.eval_forums}
    try:
        results = {v: _run_variant(v, train, eval_sets, exp, args, clusters, tcfg) for v in variants}
    except MissingSyntaxError as exc:
        raise InputError(str(exc)) from None

    width = max(len(v) for v in variants)
    group = 23
    top = f"{'':<{width}}" + "".join(f" | {f:^{group}}" for f in exp.eval_forums)
    sub = f"{'':<{width}}" + "".join(f" | {'P':>5} {'R':>5} {'F1':>5} {'Acc':>5}" for _ in exp.eval_forums)
    lines = [f"train: {', '.join(exp.train_forums)}  eval split: {exp.eval_split}  (NP level)", top, sub,
             "-" * len(sub)]
    records = []
    for v in variants:
        lines.append(f"{v:<{width}}" + "".join(f" | {_cell(results[v][f])}" for f in exp.eval_forums))
        for f in exp.eval_forums:
            r = results[v][f]
            records.append({"variant": v, "train": exp.train_forums, "eval": f,
                            **(_report_record(r) if r is not None else {"unavailable": True})})
    _emit(args, "xdomain", "\n".join(lines), records)
    return EXIT_OK


def cmd_curve(args) -> int:
    exp = _experiment(args)
    if not exp.train_forums or len(exp.eval_forums) != 1:
        raise ConfigError("curve needs source forums (train_forums) and one target (eval_forums)")
    target = exp.eval_forums[0]
    source = [p for f in exp.train_forums for p in exp.corpus(f, "train")]
    pool = exp.corpus(target, "train")
    dev = exp.corpus(target, exp.eval_split)
    sizes = sorted(set(args.sizes))
    if sizes and sizes[-1] > len(pool):
        raise ConfigError(f"target size {sizes[-1]} exceeds the {len(pool)} available {target} posts")
    order = np.random.default_rng(args.seed).permutation(len(pool))
    tcfg = _train_config(args)
    fcfg = FeatureConfig(common_word_min_count=args.common_word_min_count)
    lines = [f"source: {', '.join(exp.train_forums)}  target: {target}  mode: {args.mode}  "
             f"target weight: {tcfg.target_domain_weight:g}",
             f"{'size':>6} {'mix F1':>7} {'augment F1':>10}", "-" * 25]
    records = []
    for n in sizes:
        sample = [pool[k] for k in order[:n]]
        row = {}
        for setting in ("mix", "augment"):
            # with no target posts there is a single domain and nothing to conjoin
            augment = setting == "augment" and n > 0
            posts = mix_corpora(source, sample, tcfg.target_domain_weight, augment=augment)
            cfg = replace(fcfg, domain_augment=augment)
            model = _train(posts, args.mode, tcfg, cfg)
            preds, firsts = _predict_all(model, dev)
            row[setting] = evaluate(dev, preds, firsts, level="np")
            records.append({"size": n, "setting": setting, **_report_record(row[setting])})
        lines.append(f"{n:>6} {100 * row['mix'].token_prf.f1:>7.1f} {100 * row['augment'].token_prf.f1:>10.1f}")
    _emit(args, "curve", "\n".join(lines), records)
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="sectioned key = value settings file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--records", help="also write machine-readable JSONL records here")


def _add_training(p: argparse.ArgumentParser) -> None:
    d = TrainConfig()
    p.add_argument("--iterations", type=int, default=d.iterations)
    p.add_argument("--l1", type=float, default=d.l1_strength, help="l1 regularisation strength")
    p.add_argument("--eta", type=float, default=d.adagrad_eta, help="AdaGrad step size")
    p.add_argument("--delta", type=float, default=d.adagrad_delta)
    p.add_argument("--cost-fp", type=float, default=d.cost_fp)
    p.add_argument("--cost-fn", type=float, default=d.cost_fn)
    p.add_argument("--singleton-weight", type=float, default=d.singleton_weight)
    p.add_argument("--target-weight", type=float, default=d.target_domain_weight)
    p.add_argument("--common-word-min-count", type=int, default=FeatureConfig().common_word_min_count)


def _add_experiment(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", action="append", metavar="NAME.split=PATH",
                   help="forum corpus path; repeatable, overrides [forum.NAME] config sections")
    p.add_argument("--train-forums", nargs="+")
    p.add_argument("--eval-forums", nargs="+")
    p.add_argument("--eval-split", default="dev")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="marketsieve", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"marketsieve {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="annotated text files -> canonical corpus")
    _add_common(p)
    p.add_argument("inputs", nargs="+", help="<post>.txt or <post>.<annotator>.txt files, or directories")
    p.add_argument("--forum", required=True)
    p.add_argument("--syntax-dir", help="directory of <post>.conll dependency parses")
    p.add_argument("--require-syntax", action="store_true")
    p.add_argument("-o", "--corpus-out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("agree", help="per-forum inter-annotator agreement table")
    _add_common(p)
    p.add_argument("corpus", nargs="+")
    p.add_argument("--all-tokens", action="store_true", help="count out-of-scope tokens as items")
    p.set_defaults(func=cmd_agree)

    p = sub.add_parser("train", help="train a binary or post-level model")
    _add_common(p)
    p.add_argument("corpus", nargs="+")
    p.add_argument("--mode", choices=MODES, default="token")
    p.add_argument("--clusters", help="Brown cluster file; enables cluster features")
    p.add_argument("--gazetteer", help="gazetteer file; enables the gazetteer feature")
    p.add_argument("--augment", action="store_true", help="domain-conjoined feature copies")
    p.add_argument("-m", "--model-out", required=True)
    _add_training(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write predictions for a corpus")
    _add_common(p)
    p.add_argument("corpus", nargs="+")
    p.add_argument("--model")
    p.add_argument("--baseline", choices=("freq", "dict", "first"))
    p.add_argument("--dict-corpus", nargs="+", help="training corpus for the dict baseline")
    p.add_argument("--gazetteer", help="swap in this gazetteer at prediction time")
    p.add_argument("-p", "--pred-out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score a predictions file")
    _add_common(p)
    p.add_argument("corpus", nargs="+")
    p.add_argument("-p", "--predictions", required=True)
    p.add_argument("--level", choices=("token", "np"))
    p.add_argument("--train", nargs="+", help="training corpus, for the OOV breakdown")
    p.add_argument("--name", default="system")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cluster", help="Brown clusters over corpus text")
    _add_common(p)
    p.add_argument("corpus", nargs="+")
    p.add_argument("--num-clusters", type=int, default=50)
    p.add_argument("--min-count", type=int, default=10)
    p.add_argument("-o", "--clusters-out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("gazetteer", help="product stems seen often enough in gold")
    _add_common(p)
    p.add_argument("corpus", nargs="+")
    p.add_argument("--min-count", type=int, default=4)
    p.add_argument("--forum")
    p.add_argument("-o", "--gazetteer-out", required=True)
    p.set_defaults(func=cmd_gazetteer)

    p = sub.add_parser("significance", help="paired bootstrap between two prediction files")
    _add_common(p)
    p.add_argument("corpus", nargs="+")
    p.add_argument("-a", "--system-a", required=True)
    p.add_argument("-b", "--system-b", required=True)
    p.add_argument("--metric", choices=sorted(METRICS), default="token_f1")
    p.add_argument("--level", choices=("token", "np"))
    p.add_argument("--resamples", type=int, default=10000)
    p.set_defaults(func=cmd_significance)

    p = sub.add_parser("xdomain", help="within- and cross-forum matrix of system variants")
    _add_common(p)
    _add_experiment(p)
    p.add_argument("--variants", nargs="+")
    p.add_argument("--clusters")
    p.add_argument("--gazetteer-min-count", type=int, default=4)
    _add_training(p)
    p.set_defaults(func=cmd_xdomain)

    p = sub.add_parser("curve", help="learning curve over labeled target posts")
    _add_common(p)
    _add_experiment(p)
    p.add_argument("--sizes", nargs="+", type=int, default=[0, 20, 40, 80])
    p.add_argument("--mode", choices=("token", "np"), default="np")
    _add_training(p)
    p.set_defaults(func=cmd_curve)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    try:
        _apply_config(subparser, args, args.command)
        return args.func(args)
    except ConfigError as exc:
        print(f"marketsieve {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"marketsieve {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"marketsieve {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # anything else is a bug or a broken invariant
        print(f"marketsieve {args.command}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
