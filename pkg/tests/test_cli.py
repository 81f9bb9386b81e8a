"""Command-line interface, exercised end-to-end through subprocesses."""

import subprocess
import sys

import pytest
from conftest import asset, grammar

from gramlm import parse_grammar, print_grammar, unlink_features

ARTIFACTS = ["grammar.cfg", "grammar.pfsg", "metrics.txt", "metrics.kv"]


def run(*args, **kw):
    return subprocess.run(
        [sys.executable, "-m", "gramlm.cli", *map(str, args)],
        capture_output=True,
        text=True,
        **kw,
    )


# ---- check ----


def test_check_passes_on_a_toy():
    r = run("check", asset("tiny_agreement.gram"), "--max-len", "8")
    assert r.returncode == 0
    assert "EQUIVALENT up to length 8 (2 strings)" in r.stdout


def test_check_against_a_stale_model_fails(tmp_path):
    r = run("compile", asset("tiny_agreement.gram"), "--out", tmp_path)
    assert r.returncode == 0
    r = run(
        "check",
        asset("rel_linked.gram"),
        "--max-len",
        "4",
        "--against",
        tmp_path / "grammar.cfg",
    )
    assert r.returncode == 2
    assert "missing from compiled model" in r.stdout


def test_check_respects_string_cap():
    r = run("check", asset("wordplus3.gram"), "--max-len", "8", "--cap-strings", "100")
    assert r.returncode == 3
    assert "cap of 100" in r.stderr


# ---- compile ----


def test_compile_writes_all_artifacts(tmp_path):
    r = run("compile", asset("rel_linked.gram"), "--out", tmp_path / "out")
    assert r.returncode == 0
    assert "rule instances: naive=12 emitted=6 reduction=2x" in r.stdout
    assert "graphs=15" in r.stdout
    for name in ARTIFACTS:
        path = tmp_path / "out" / name
        assert path.is_file() and path.stat().st_size > 0


def test_compile_is_reproducible(tmp_path):
    for d in ("a", "b"):
        assert run("compile", asset("rel_linked.gram"), "--out", tmp_path / d).returncode == 0
    for name in ARTIFACTS:
        left = (tmp_path / "a" / name).read_bytes()
        right = (tmp_path / "b" / name).read_bytes()
        assert left == right, f"{name} differs between identical compiles"


# ---- stats and diff ----


def test_stats_on_grammar_and_compiled_model(tmp_path):
    r = run("stats", asset("rel_linked.gram"))
    assert r.returncode == 0
    assert "rule instances: naive=12 emitted=6" in r.stdout
    run("compile", asset("rel_linked.gram"), "--out", tmp_path)
    r2 = run("stats", tmp_path / "grammar.cfg")
    assert r2.returncode == 0
    assert "transitions        30" in r2.stdout


def test_diff_ranks_categories(tmp_path):
    run("compile", asset("rel_unlinked.gram"), "--out", tmp_path / "left")
    run("compile", asset("rel_linked.gram"), "--out", tmp_path / "right")
    r = run("diff", tmp_path / "left" / "metrics.kv", tmp_path / "right" / "metrics.kv")
    assert r.returncode == 0
    assert "transition ratio (right/left): 2.143" in r.stdout
    first_category_row = [
        line for line in r.stdout.splitlines() if line.startswith("np")
    ]
    assert first_category_row, r.stdout


# ---- parse ----


def test_parse_accepted_sentence():
    r = run("parse", asset("tiny_agreement.gram"), "the dog barks")
    assert r.returncode == 0
    assert "grammar: ACCEPT derivations=1" in r.stdout
    assert "(S (NP (DET the) (N dog)) (VP barks))" in r.stdout
    assert "model: ACCEPT derivations=1" in r.stdout


def test_parse_rejected_sentence():
    r = run("parse", asset("tiny_agreement.gram"), "the dog bark")
    assert r.returncode == 2
    assert "grammar: REJECT" in r.stdout
    assert "model: REJECT" in r.stdout


# ---- enumerate ----


def test_enumerate_lists_strings_in_order():
    r = run("enumerate", asset("tiny_agreement.gram"), "--max-len", "8")
    assert r.returncode == 0
    assert r.stdout.splitlines() == ["the dog barks", "the dogs bark"]
    assert "# 2 strings up to length 8" in r.stderr


def test_enumerate_oracle_agrees_with_model():
    model = run("enumerate", asset("rel_linked.gram"), "--max-len", "4")
    oracle = run("enumerate", asset("rel_linked.gram"), "--max-len", "4", "--oracle")
    assert model.returncode == oracle.returncode == 0
    assert model.stdout == oracle.stdout


# ---- perplexity ----


def test_perplexity_of_uniform_interjections(tmp_path):
    corpus = tmp_path / "corpus.txt"
    corpus.write_text("# a comment\nyes\n\nno\n", encoding="utf-8")
    r = run("perplexity", asset("intj.gram"), corpus)
    assert r.returncode == 0
    assert "sentences=2 included=2 words=2" in r.stdout
    assert "perplexity=2.000000" in r.stdout


# ---- variant ----


def test_variant_unlink_matches_library():
    r = run("variant", asset("rel_linked.gram"), "--unlink", "np_rel:num,kind", "--features", "all")
    assert r.returncode == 0
    expected = print_grammar(unlink_features(grammar("rel_linked"), "np_rel", ["num", "kind"]))
    assert r.stdout == expected
    assert parse_grammar(r.stdout) == grammar("rel_unlinked")


def test_variant_wordplus_flattens_the_grammar():
    r = run("variant", asset("tiny_agreement.gram"), "--wordplus")
    assert r.returncode == 0
    flat = parse_grammar(r.stdout)
    assert [rule.id for rule in flat.rules] == ["wp_more", "wp_one"]
    assert {entry.surface[0] for entry in flat.lexicon} == {"the", "dog", "dogs", "bark", "barks"}


# ---- failure modes ----


def test_missing_file_is_a_usage_error():
    r = run("check", "no_such_file.gram", "--max-len", "3")
    assert r.returncode == 1
    assert "error:" in r.stderr


def test_bad_grammar_is_a_usage_error(tmp_path):
    bad = tmp_path / "bad.gram"
    bad.write_text("start X\nrule broken X -> Y\n", encoding="utf-8")
    r = run("check", bad, "--max-len", "3")
    assert r.returncode == 1
    assert "error:" in r.stderr


def test_no_subcommand_is_a_usage_error():
    r = run()
    assert r.returncode == 1
