"""Reference parser/enumerator: frozen toy languages and parse results.

Every expected language here was computed from the grammar by hand-checkable
enumeration and then frozen; the compiled pipeline is tested against the
same sets elsewhere, so a drift in either side trips a test.
"""

import pytest
from conftest import TOYS, grammar
from hypothesis import given, settings
from hypothesis import strategies as st

from gramlm import UnknownTokenError, oracle_enumerate, oracle_parse, parse_grammar

TINY_LANGUAGE = {("the", "dog", "barks"), ("the", "dogs", "bark")}

REL_LINKED_LANGUAGE = {
    ("place",),
    ("places",),
    ("moment",),
    ("moments",),
    ("place", "that", "fits"),
    ("places", "that", "fit"),
    ("moment", "that", "passes"),
    ("moments", "that", "pass"),
}


def test_tiny_agreement_language():
    assert oracle_enumerate(grammar("tiny_agreement"), 8) == TINY_LANGUAGE


def test_direct_left_language():
    lang = oracle_enumerate(grammar("direct_left"), 8)
    assert lang == {("one",) + ("more",) * k for k in range(8)}


def test_indirect_left_language():
    lang = oracle_enumerate(grammar("indirect_left"), 8)
    assert lang == {
        ("rho", "pip") + ("quo", "pip") * k for k in range(4)
    }


def test_right_rec_language():
    lang = oracle_enumerate(grammar("right_rec"), 8)
    assert lang == {("more",) * k + ("one",) for k in range(8)}


def test_rel_linked_language():
    assert oracle_enumerate(grammar("rel_linked"), 8) == REL_LINKED_LANGUAGE


def test_rel_unlinked_language_overgenerates():
    nouns = ["place", "places", "moment", "moments"]
    verbs = ["fits", "fit", "passes", "pass"]
    expected = {(n,) for n in nouns} | {(n, "that", v) for n in nouns for v in verbs}
    assert oracle_enumerate(grammar("rel_unlinked"), 8) == expected
    # the linked language is a strict subset: linking only ever removes strings
    assert REL_LINKED_LANGUAGE < expected


def test_intj_language():
    assert oracle_enumerate(grammar("intj"), 8) == {("yes",), ("no",)}


def test_wordplus3_language_size():
    # 3^1 + 3^2 + ... + 3^8 strings over a three-word vocabulary
    assert len(oracle_enumerate(grammar("wordplus3"), 8)) == 9840


def test_accepts_and_counts_derivations():
    result = oracle_parse(grammar("tiny_agreement"), ["the", "dog", "barks"])
    assert result.accepted
    assert result.derivation_count == 1
    assert result.derivations == ["(S (NP (DET the) (N dog)) (VP barks))"]


def test_rejects_agreement_violation():
    result = oracle_parse(grammar("tiny_agreement"), ["the", "dog", "bark"])
    assert not result.accepted
    assert result.derivation_count == 0
    assert result.derivations == []


def test_single_word_tree():
    result = oracle_parse(grammar("intj"), ["yes"])
    assert result.accepted and result.derivations == ["(INTJ yes)"]


def test_ambiguity_is_counted():
    g = parse_grammar(
        """
        start X
        rule both: X -> A B
        rule wide: X -> C
        lex "hot": A
        lex "dog": B
        lex "hot dog": C
        """
    )
    result = oracle_parse(g, ["hot", "dog"])
    assert result.accepted
    assert result.derivation_count == 2
    assert sorted(result.derivations) == ["(X (A hot) (B dog))", "(X (C hot dog))"]


def test_multi_token_lexeme_spans_positions():
    g = parse_grammar(
        """
        start X
        rule x: X -> A B
        lex "big deal": A
        lex "deal": B
        """
    )
    assert oracle_parse(g, ["big", "deal", "deal"]).accepted
    assert not oracle_parse(g, ["big", "deal"]).accepted
    assert oracle_enumerate(g, 3) == {("big", "deal", "deal")}


def test_unknown_token_raises():
    with pytest.raises(UnknownTokenError) as err:
        oracle_parse(grammar("tiny_agreement"), ["the", "zebra", "barks"])
    assert err.value.token == "zebra"
    assert err.value.position == 1


def test_empty_input_rejected():
    assert not oracle_parse(grammar("tiny_agreement"), []).accepted


def test_max_derivations_truncates_trees_not_count():
    g = grammar("wordplus3")
    result = oracle_parse(g, ["alpha", "alpha"], max_derivations=0)
    assert result.accepted and result.derivation_count == 1
    assert result.derivations == []


@pytest.mark.parametrize("name", TOYS)
@settings(max_examples=20, deadline=None)
@given(data=st.data())
def test_enumeration_is_monotone_in_length(name, data):
    short = data.draw(st.integers(min_value=0, max_value=5))
    longer = data.draw(st.integers(min_value=short, max_value=6))
    g = grammar(name)
    assert oracle_enumerate(g, short) <= oracle_enumerate(g, longer)


@settings(max_examples=30, deadline=None)
@given(
    vocab=st.lists(
        st.text(alphabet="abcd", min_size=1, max_size=3), min_size=1, max_size=3, unique=True
    ),
    max_len=st.integers(min_value=1, max_value=3),
)
def test_enumeration_lengths_respect_bound(vocab, max_len):
    from gramlm import wordplus_grammar

    lang = oracle_enumerate(wordplus_grammar(vocab), max_len)
    assert all(1 <= len(s) <= max_len for s in lang)
