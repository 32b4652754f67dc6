from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from marketsieve.corpus import tokenize_text
from marketsieve.evaluation import (
    PRF,
    EvalReport,
    PostOutcome,
    bootstrap_test,
    canonical_types,
    evaluate,
    format_table,
    levenshtein,
    match_threshold,
    oov_decompose,
    outcomes,
    post_accuracy,
    token_prf,
    type_prf,
    types_match,
)
from marketsieve.porter import stem
from marketsieve.projection import Span

from helpers import annotated, parsed

# --------------------------------------------------------------------------
# token level: (pred sets, gold sets, expected P, R, F1) counted by hand

TOKEN_FIXTURES = [
    ([{1, 2}], [{1, 2}], (1.0, 1.0, 1.0)),
    ([{"a", "b"}], [{"b", "c"}], (0.5, 0.5, 0.5)),
    ([set()], [{3}], (0.0, 0.0, 0.0)),
    # tp=2 over 3 predictions and 4 gold items
    ([{1}, {4, 5}], [{1, 2}, {5, 6}], (2 / 3, 2 / 4, 2 * (2 / 3) * 0.5 / (2 / 3 + 0.5))),
    ([{1, 2, 3, 4}], [{1}], (0.25, 1.0, 0.4)),
    ([{7}, set(), {9}], [set(), set(), {9}], (0.5, 1.0, 2 / 3)),
]


@pytest.mark.parametrize("pred,gold,expected", TOKEN_FIXTURES)
def test_token_prf_fixtures(pred, gold, expected):
    assert tuple(token_prf(pred, gold)) == pytest.approx(expected, abs=0, rel=1e-15)


def test_token_prf_degenerate_flag():
    r = token_prf([set()], [{1}])
    assert r.degenerate and tuple(r) == (0.0, 0.0, 0.0)
    assert not token_prf([{1}], [{1}]).degenerate


def test_token_prf_eligibility_drops_both_sides():
    assert tuple(token_prf([{1, 8}], [{1, 9}], eligible=[{1, 2}])) == (1.0, 1.0, 1.0)


def test_token_prf_alignment_error():
    with pytest.raises(ValueError):
        token_prf([{1}], [])


@given(st.lists(st.frozensets(st.integers(0, 20), min_size=1), min_size=1, max_size=6))
def test_token_prf_reflexive(x):
    assert tuple(token_prf(x, x)) == (1.0, 1.0, 1.0)


@given(st.lists(st.tuples(st.frozensets(st.integers(0, 9)), st.frozensets(st.integers(0, 9))), min_size=1))
def test_f1_between_p_and_r(pairs):
    r = token_prf([p for p, _ in pairs], [g for _, g in pairs])
    for v in r:
        assert 0.0 <= v <= 1.0
    if r.precision + r.recall:
        assert min(r.precision, r.recall) - 1e-12 <= r.f1 <= max(r.precision, r.recall) + 1e-12


# --------------------------------------------------------------------------
# type matching: hand stems, hand distance, threshold by the longer stem

TYPE_PAIRS = [
    # length <= 4 (no edits allowed)
    ("rat", "cat", "rat", "cat", 1, False),
    ("bot", "bots", "bot", "bot", 0, True),
    ("vpn", "vps", "vpn", "vp", 1, False),
    ("hosting", "posting", "host", "post", 1, False),
    # 5 to 7 (one edit)
    ("crypters", "cryptors", "crypter", "cryptor", 1, True),
    ("booter", "booster", "booter", "booster", 1, True),
    ("booter", "hoster", "booter", "hoster", 2, False),
    ("keylogger", "keyloader", "keylogg", "keyload", 2, False),
    # 8 or more (two edits)
    ("ransomware", "ransonwear", "ransomwar", "ransonwear", 2, True),
    ("spotify", "spotiphy", "spotifi", "spotiphi", 2, True),
    ("accounts", "discounts", "account", "discount", 3, False),
    ("database", "databank", "databas", "databank", 2, True),
]


@pytest.mark.parametrize("a,b,sa,sb,dist,match", TYPE_PAIRS)
def test_types_match_fixture(a, b, sa, sb, dist, match):
    assert (stem(a), stem(b)) == (sa, sb)
    assert levenshtein(sa, sb) == dist
    assert types_match(a, b) is match
    assert types_match(b, a) is match


def test_fixture_covers_all_length_buckets():
    buckets = {match_threshold(max(len(sa), len(sb))) for _, _, sa, sb, _, _ in TYPE_PAIRS}
    assert buckets == {0, 1, 2}


def test_types_match_lowercases():
    assert types_match("Accounts", "account")


def test_thresholds():
    assert [match_threshold(n) for n in range(1, 11)] == [0, 0, 0, 0, 1, 1, 1, 2, 2, 2]


def test_levenshtein_against_library():
    nltk = pytest.importorskip("nltk")
    rng = random.Random(0)
    for _ in range(300):
        a = "".join(rng.choices("abc", k=rng.randint(0, 7)))
        b = "".join(rng.choices("abc", k=rng.randint(0, 7)))
        assert levenshtein(a, b) == nltk.edit_distance(a, b)


words = st.text(alphabet="abcdeirsty", min_size=1, max_size=10)


@given(words, words)
def test_types_match_symmetric(a, b):
    assert types_match(a, b) == types_match(b, a)


@given(words)
def test_types_match_reflexive(a):
    assert types_match(a, a)


def test_types_match_not_transitive():
    # documented: matching chains do not close
    a, b, c = "abcdef", "abcdxf", "abcdxy"
    assert types_match(a, b) and types_match(b, c) and not types_match(a, c)


def test_canonicalization_is_greedy_left_to_right():
    assert canonical_types(["bot", "bots", "rat", "Bot"]) == ["bot", "rat"]
    assert canonical_types(["abcdxf", "abcdef", "abcdxy"]) == ["abcdxf"]


# --------------------------------------------------------------------------
# type level

TYPE_FIXTURES = [
    ([["bot"]], [["bot", "bots"]], (1.0, 1.0, 1.0)),
    ([["account", "website"]], [["account"]], (0.5, 1.0, 2 / 3)),
    ([[], ["rat"]], [[], ["rat"]], (1.0, 1.0, 1.0)),
    ([["crypters"]], [["cryptor", "rdp"]], (1.0, 0.5, 2 / 3)),
    # post 1: 1 of 2 predictions right, 1 of 1 gold; post 2: 0 of 1, 0 of 2
    ([["bot", "kit"], ["vpn"]], [["bots"], ["vps", "rdp"]], (1 / 3, 1 / 3, 1 / 3)),
    ([[]], [["bot"]], (0.0, 0.0, 0.0)),
]


@pytest.mark.parametrize("pred,gold,expected", TYPE_FIXTURES)
def test_type_prf_fixtures(pred, gold, expected):
    assert tuple(type_prf(pred, gold)) == pytest.approx(expected, abs=0, rel=1e-15)


def test_type_prf_empty_post_contributes_nothing():
    base = type_prf([["bot"]], [["bot", "rat"]])
    assert type_prf([["bot"], []], [["bot", "rat"], []]) == base


def test_type_prf_macro():
    r = type_prf([["bot", "kit"], ["vpn"]], [["bots"], ["vps", "rdp"]], macro=True)
    assert (r.precision, r.recall) == (0.25, 0.5)


# --------------------------------------------------------------------------
# post level

POST_FIXTURES = [
    (["bot", "rat"], [["bots"], ["rat"]], 1.0),
    ([None, None], [["bot"], ["rat"]], 0.0),
    (["bot", "kit", None], [["bot"], ["kit"], ["rat"]], 2 / 3),
    (["bot", "rat"], [["bot"], []], 1.0),
    (["cryptors", "rdp", "vps", "keylogger"], [["crypter"], ["vps"], ["vpn"], ["keylogger", "rat"]], 0.5),
]


@pytest.mark.parametrize("first,gold,expected", POST_FIXTURES)
def test_post_accuracy_fixtures(first, gold, expected):
    assert post_accuracy(first, gold) == expected


def test_post_accuracy_needs_a_scored_post():
    with pytest.raises(ValueError):
        post_accuracy(["bot"], [[]])


@given(st.lists(st.tuples(st.sampled_from(["bot", "rat", "kit", None]),
                          st.lists(st.sampled_from(["bot", "rat", "kit"]), min_size=1, max_size=2)),
                min_size=1, max_size=8), st.data())
def test_post_accuracy_monotone(rows, data):
    firsts = [f for f, _ in rows]
    gold = [g for _, g in rows]
    k = data.draw(st.integers(0, len(rows) - 1))
    blanked = firsts[:k] + [None] + firsts[k + 1:]
    assert post_accuracy(blanked, gold) <= post_accuracy(firsts, gold)


# --------------------------------------------------------------------------
# OOV

def posts_of(*texts):
    return [annotated(tokenize_text(t, "f", f"p{k}"), [0]) for k, t in enumerate(texts)]


def test_oov_all_seen():
    train, dev = posts_of("bots", "rat"), posts_of("bot", "rats")
    r = oov_decompose(train, dev, [[0], []])
    assert (r.oov_rate, r.recall_seen, r.recall_oov, r.n_seen, r.n_oov) == (0.0, 0.5, None, 2, 0)


def test_oov_no_overlap():
    r = oov_decompose(posts_of("bot"), posts_of("kit", "rdp"), [[0], [0]])
    assert (r.oov_rate, r.recall_seen, r.recall_oov) == (1.0, None, 1.0)


def test_oov_mixed_with_spans():
    train, dev = posts_of("bot"), posts_of("bot", "kit", "rdp", "crypter")
    preds = [[Span(0, 0, 1, 0)], [], [0], []]
    r = oov_decompose(train, dev, preds)
    assert (r.oov_rate, r.recall_seen, r.recall_oov) == (0.75, 1.0, 1 / 3)


# --------------------------------------------------------------------------
# corpus-level and NP-level evaluation

def np_post():
    # "Selling a Backconnect bot" with "bot" heading a 3-token NP
    doc = parsed([[("Selling", "VBG", -1, "root"), ("a", "DT", 3, "det"),
                   ("Backconnect", "NN", 3, "compound"), ("bot", "NN", 0, "dobj")]])
    return annotated(doc, [3])


def test_np_level_head_anchored():
    post = np_post()
    # predicting the modifier projects to itself, not to the gold NP
    assert evaluate([post], [[2]], level="np").token_prf.f1 == 0.0
    assert evaluate([post], [[3]], level="np").token_prf.f1 == 1.0
    assert evaluate([post], [[Span(0, 1, 4, 3)]], level="np").token_prf.f1 == 1.0
    # at token level the same span scores by its head
    assert evaluate([post], [[Span(0, 1, 4, 3)]]).token_prf.f1 == 1.0


def test_evaluate_counts_and_first():
    posts = posts_of("bot for sale", "rat and kit", "nothing here")
    posts[1] = annotated(posts[1].doc, [0, 2])
    posts[2] = annotated(posts[2].doc, [])
    r = evaluate(posts, [[0, 2], [2], [1]])
    # tokens: tp=2 (bot, kit); predicted 4; gold 3
    assert tuple(r.token_prf) == pytest.approx((0.5, 2 / 3, 4 / 7), rel=1e-15)
    # earliest predictions "bot" and "kit" are both gold types
    assert r.post_accuracy == 1.0 and r.n_posts_scored == 2
    # an explicit first overrides the earliest-position rule
    assert evaluate(posts, [[0, 2], [2], [1]], firsts=[2, 2, None]).post_accuracy == 0.5
    assert evaluate(posts[:2], [[], []], firsts=[None, 0]).post_accuracy == 0.5


def test_evaluate_bounds():
    posts = posts_of("bot", "kit")
    r = evaluate(posts, [[0], []])
    for prf in (r.token_prf, r.type_prf):
        for v in prf:
            assert 0.0 <= v <= 1.0
    assert isinstance(r, EvalReport) and set(r.to_dict()) >= {"token_prf", "type_prf", "post_accuracy"}


def test_outcomes_rejects_bad_level():
    with pytest.raises(ValueError):
        outcomes(posts_of("bot"), [[0]], level="chunk")


# --------------------------------------------------------------------------
# bootstrap

def perfect_and_wrong(n=100):
    good = PostOutcome(1, 1, 1, 1, 1, 1, 1, 1, 1)
    bad = PostOutcome(0, 1, 1, 0, 1, 0, 1, 0, 1)
    return [good] * n, [bad] * n


@pytest.mark.parametrize("metric", ["token_f1", "type_f1", "post_accuracy"])
def test_bootstrap_perfect_beats_wrong(metric):
    a, b = perfect_and_wrong()
    assert bootstrap_test(metric, a, b, 2000) < 0.001
    assert bootstrap_test(metric, b, a, 2000) == 1.0


def test_bootstrap_identical_systems():
    posts = posts_of("bot", "kit", "rat", "rdp")
    outs = outcomes(posts, [[0], [], [0], []])
    assert bootstrap_test("token_f1", outs, outs, 1000) == 1.0


def test_bootstrap_deterministic_and_seeded():
    rng = random.Random(1)
    a = [PostOutcome(*(rng.randint(0, 1) for _ in range(9))) for _ in range(40)]
    b = [PostOutcome(*(rng.randint(0, 1) for _ in range(9))) for _ in range(40)]
    assert bootstrap_test("type_f1", a, b, 3000, seed=4) == bootstrap_test("type_f1", a, b, 3000, seed=4)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000))
def test_bootstrap_invariant_under_post_permutation(seed):
    rng = random.Random(seed)
    a = [PostOutcome(*(rng.randint(0, 2) for _ in range(9))) for _ in range(15)]
    b = [PostOutcome(*(rng.randint(0, 2) for _ in range(9))) for _ in range(15)]
    order = list(range(15))
    rng.shuffle(order)
    # under relabeling the multiset of resampled pairs is identical in law;
    # with many resamples the estimates agree closely
    p = bootstrap_test("token_f1", a, b, 4000, seed=seed)
    q = bootstrap_test("token_f1", [a[i] for i in order], [b[i] for i in order], 4000, seed=seed + 1)
    assert abs(p - q) < 0.05


def test_bootstrap_errors():
    a, b = perfect_and_wrong(3)
    with pytest.raises(ValueError):
        bootstrap_test("token_f1", a[:1], b[:1])
    with pytest.raises(ValueError):
        bootstrap_test("token_f1", a, b[:2])


# --------------------------------------------------------------------------
# table

def test_format_table():
    r = EvalReport(PRF(0.5, 0.25, 1 / 3), PRF(1.0, 1.0, 1.0), None, 0)
    lines = format_table([("Binary", r)]).splitlines()
    assert "Tokens" in lines[0] and "Products" in lines[0] and "Posts" in lines[0]
    assert lines[3] == "Binary |  50.0  25.0  33.3 | 100.0 100.0 100.0 |     -"
    assert len({len(l) for l in lines}) == 1
