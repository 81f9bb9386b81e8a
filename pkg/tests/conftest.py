"""Shared fixtures: cached asset loading and the acceptance summary hook.

The shuttle grammars take seconds to compile, so everything expensive is
cached per-process and shared across test modules.  Tests that need a
fresh, uncached object (determinism checks) call the library directly.
"""

import functools
from pathlib import Path

from gramlm import build_pfsg, compile_grammar, measure, parse_grammar_file

ASSETS = Path(__file__).resolve().parent.parent / "src" / "gramlm" / "assets"

TOYS = [
    "tiny_agreement",
    "direct_left",
    "indirect_left",
    "right_rec",
    "wordplus3",
    "rel_linked",
    "rel_unlinked",
    "intj",
]
SHUTTLES = ["shuttle_no_rels", "shuttle_rels", "shuttle_unlinked"]


def asset(name: str) -> Path:
    return ASSETS / name


@functools.lru_cache(maxsize=None)
def grammar(name: str):
    return parse_grammar_file(ASSETS / f"{name}.gram")


@functools.lru_cache(maxsize=None)
def compiled(name: str):
    return compile_grammar(grammar(name))


@functools.lru_cache(maxsize=None)
def pfsgs(name: str):
    return build_pfsg(compiled(name).cfg)


@functools.lru_cache(maxsize=None)
def metrics(name: str):
    return measure(pfsgs(name))


def data_lines(name: str) -> list[str]:
    """Non-comment, non-blank lines of an asset text file."""
    out = []
    for line in (ASSETS / name).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return out


def pair_lines(name: str) -> list[tuple[bool, list[str]]]:
    """(must_parse, tokens) pairs from a +/- judgement file."""
    out = []
    for line in data_lines(name):
        sign, text = line[0], line[1:].strip()
        assert sign in "+-", f"bad judgement line: {line!r}"
        out.append((sign == "+", text.split()))
    return out


# ---------------------------------------------------------------------------
# Independent leftmost-cycle detector, kept deliberately separate from the
# production left-recursion machinery so the two cannot share a bug.


def leftmost_cycle_free(cfg) -> bool:
    """True iff no nonterminal reaches itself by descending left edges."""
    from gramlm.cfg import Alt, Ref, Seq, Star, Term

    bodies = dict(cfg.productions)

    nullable: dict[str, bool] = {name: False for name in bodies}

    def expr_nullable(expr) -> bool:
        if isinstance(expr, Term):
            return False
        if isinstance(expr, Ref):
            return nullable.get(expr.name, False)
        if isinstance(expr, Star):
            return True
        if isinstance(expr, Seq):
            return all(expr_nullable(item) for item in expr.items)
        if isinstance(expr, Alt):
            return any(expr_nullable(opt) for opt in expr.options)
        raise TypeError(type(expr))

    changed = True
    while changed:
        changed = False
        for name, body in bodies.items():
            if not nullable[name] and expr_nullable(body):
                nullable[name] = True
                changed = True

    def leftmost_refs(expr) -> set[str]:
        if isinstance(expr, Term):
            return set()
        if isinstance(expr, Ref):
            return {expr.name}
        if isinstance(expr, Star):
            return leftmost_refs(expr.body)
        if isinstance(expr, Alt):
            out: set[str] = set()
            for opt in expr.options:
                out |= leftmost_refs(opt)
            return out
        if isinstance(expr, Seq):
            out = set()
            for item in expr.items:
                out |= leftmost_refs(item)
                if not expr_nullable(item):
                    break
            return out
        raise TypeError(type(expr))

    edges = {name: leftmost_refs(body) & bodies.keys() for name, body in bodies.items()}
    WHITE, GREY, BLACK = 0, 1, 2
    color = {name: WHITE for name in bodies}

    def has_cycle(name: str) -> bool:
        color[name] = GREY
        for nxt in edges[name]:
            if color[nxt] == GREY:
                return True
            if color[nxt] == WHITE and has_cycle(nxt):
                return True
        color[name] = BLACK
        return False

    return not any(color[name] == WHITE and has_cycle(name) for name in bodies)


# ---------------------------------------------------------------------------
# Acceptance reporting: test_acceptance.py appends one line per criterion and
# this hook replays them at the end of the run so they are visible even when
# pytest captures per-test stdout.

ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(
        f"CRITERION {number}: {'PASS' if passed else 'FAIL'} — {detail}"
    )
    print(ACCEPTANCE_LINES[-1])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
