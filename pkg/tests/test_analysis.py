"""Grammar variants and size comparison."""

import dataclasses

import pytest
from conftest import compiled, grammar, metrics
from hypothesis import given, settings
from hypothesis import strategies as st

from gramlm import (
    GramlmError,
    compare,
    diff_to_table,
    k_words_per_category,
    linked_features,
    oracle_enumerate,
    unlink_features,
    wordplus_grammar,
)


# ---- wordplus ----


@settings(max_examples=30, deadline=None)
@given(
    vocab=st.lists(
        st.text(alphabet="abcd", min_size=1, max_size=3), min_size=1, max_size=3, unique=True
    ),
    max_len=st.integers(min_value=1, max_value=3),
)
def test_wordplus_generates_every_nonempty_string(vocab, max_len):
    import itertools

    g = wordplus_grammar(vocab)
    expected = {
        tokens
        for n in range(1, max_len + 1)
        for tokens in itertools.product(sorted(vocab), repeat=n)
    }
    assert oracle_enumerate(g, max_len) == expected


def test_wordplus_matches_the_frozen_fixture():
    assert wordplus_grammar(["alpha", "bravo", "charlie"]) == grammar("wordplus3")


# ---- k words per category ----


def test_k_words_keeps_first_k_per_signature():
    g = grammar("wordplus3")
    cut = k_words_per_category(g, 1)
    assert [e.surface for e in cut.lexicon] == [("alpha",)]
    assert cut.rules == g.rules


def test_k_words_distinguishes_feature_signatures():
    g = grammar("rel_linked")
    cut = k_words_per_category(g, 1)
    # CORE and V both carry four distinct (num, kind) signatures, THAT one
    assert len(cut.lexicon) == 9
    assert len({e.category for e in cut.lexicon}) == 9


def test_k_words_shrinks_the_language():
    g = grammar("wordplus3")
    cut = k_words_per_category(g, 2)
    assert oracle_enumerate(cut, 2) < oracle_enumerate(g, 2)


def test_k_words_with_large_k_is_identity():
    g = grammar("shuttle_rels")
    assert k_words_per_category(g, 10**6) == g


# ---- unlinking ----


def test_unlink_reproduces_the_unlinked_fixture():
    unlinked = unlink_features(grammar("rel_linked"), "np_rel", ["num", "kind"])
    assert unlinked == grammar("rel_unlinked")


def test_unlink_touches_only_the_named_rule():
    before = grammar("rel_linked")
    after = unlink_features(before, "np_rel", ["num", "kind"])
    for rule in before.rules:
        if rule.id != "np_rel":
            assert after.rule(rule.id) == rule
    assert after.lexicon == before.lexicon
    assert after.features == before.features


def test_unlink_unknown_rule_raises():
    with pytest.raises(GramlmError):
        unlink_features(grammar("rel_linked"), "nope", ["num"])


def test_unlink_widens_the_language():
    linked = oracle_enumerate(grammar("rel_linked"), 4)
    unlinked = oracle_enumerate(grammar("rel_unlinked"), 4)
    assert linked < unlinked


def test_linked_features_reports_shared_variables():
    assert linked_features(grammar("rel_linked"), "np_rel") == ("num", "kind")
    assert linked_features(grammar("shuttle_rels"), "rel_mod") == ("agr", "sort")
    # severing the links leaves nothing shared
    assert linked_features(grammar("rel_unlinked"), "np_rel") == ()


# ---- comparison ----


def test_compare_ranks_the_fissioned_category_first():
    report = compare(metrics("rel_unlinked"), metrics("rel_linked"))
    assert report.transition_ratio == pytest.approx(30 / 14)
    assert report.ranked[0].category == "np"
    assert report.ranked[0].ratio == pytest.approx(3.0)
    assert report.only_left == [] and report.only_right == []


def test_compare_is_antisymmetric_in_totals():
    forward = compare(metrics("rel_unlinked"), metrics("rel_linked"))
    backward = compare(metrics("rel_linked"), metrics("rel_unlinked"))
    assert forward.left_totals == backward.right_totals
    assert forward.right_totals == backward.left_totals
    assert forward.transition_ratio == pytest.approx(1 / backward.transition_ratio)


def test_compare_reports_one_sided_categories():
    report = compare(metrics("intj"), metrics("tiny_agreement"))
    assert [d.category for d in report.only_left] == ["intj"]
    assert {d.category for d in report.only_right} == {"det", "n", "np", "s", "vp"}
    assert report.ranked == []


def test_diff_table_shows_ratio_and_categories():
    report = compare(metrics("rel_unlinked"), metrics("rel_linked"))
    table = diff_to_table(report)
    assert "transition ratio (right/left): 2.143" in table
    assert "np" in table


def test_compare_identity_is_flat():
    report = compare(metrics("rel_linked"), metrics("rel_linked"))
    assert report.transition_ratio == pytest.approx(1.0)
    assert all(d.ratio == pytest.approx(1.0) for d in report.ranked)


# ---- variants compose ----


def test_unlink_then_compile_shrinks_the_model():
    base = metrics("rel_linked")
    from gramlm import build_pfsg, compile_grammar, measure

    unlinked = measure(
        build_pfsg(compile_grammar(unlink_features(grammar("rel_linked"), "np_rel", ["num", "kind"])).cfg)
    )
    assert unlinked.total_transitions < base.total_transitions
