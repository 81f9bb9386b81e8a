"""Context-free grammar model with a regular-expression production body.

Production bodies are trees of :class:`Term` (quoted terminal),
:class:`Ref` (nonterminal reference), :class:`Seq`, :class:`Alt`, and
postfix :class:`Star`. Constructors normalize away single-element
sequences and alternations so structural equality matches the text format.

Text format, one production per line::

    s -> np vp | ( "hello" )* "world" ;

The first production is the start symbol.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union

from .errors import GramlmError


@dataclass(frozen=True)
class Term:
    token: str


@dataclass(frozen=True)
class Ref:
    name: str


@dataclass(frozen=True)
class Seq:
    items: tuple["Expr", ...]


@dataclass(frozen=True)
class Alt:
    options: tuple["Expr", ...]


@dataclass(frozen=True)
class Star:
    body: "Expr"


Expr = Union[Term, Ref, Seq, Alt, Star]


def seq(items) -> Expr:
    items = tuple(items)
    if len(items) == 1:
        return items[0]
    return Seq(items)


def alt(options) -> Expr:
    options = tuple(options)
    if len(options) == 1:
        return options[0]
    return Alt(options)


@dataclass(frozen=True)
class ContextFreeGrammar:
    start: str
    productions: tuple[tuple[str, Expr], ...]

    def __post_init__(self) -> None:
        names = [name for name, _ in self.productions]
        if len(set(names)) != len(names):
            raise GramlmError("duplicate production names")
        defined = set(names)
        if self.start not in defined:
            raise GramlmError(f"start symbol {self.start!r} has no production")
        for name, expr in self.productions:
            for ref in iter_refs(expr):
                if ref not in defined:
                    raise GramlmError(f"{name!r} references undefined {ref!r}")

    def body(self, name: str) -> Expr:
        for prod_name, expr in self.productions:
            if prod_name == name:
                return expr
        raise KeyError(name)

    def terminals(self) -> frozenset[str]:
        return frozenset(
            node.token
            for _, expr in self.productions
            for node in iter_nodes(expr)
            if isinstance(node, Term)
        )


def iter_nodes(expr: Expr) -> Iterator[Expr]:
    yield expr
    if isinstance(expr, Seq):
        for item in expr.items:
            yield from iter_nodes(item)
    elif isinstance(expr, Alt):
        for option in expr.options:
            yield from iter_nodes(option)
    elif isinstance(expr, Star):
        yield from iter_nodes(expr.body)


def iter_refs(expr: Expr) -> Iterator[str]:
    for node in iter_nodes(expr):
        if isinstance(node, Ref):
            yield node.name


def _render(expr: Expr, parent: str) -> str:
    if isinstance(expr, Term):
        return f'"{expr.token}"'
    if isinstance(expr, Ref):
        return expr.name
    if isinstance(expr, Star):
        return f"( {_render(expr.body, 'star')} )*"
    if isinstance(expr, Seq):
        body = " ".join(_render(item, "seq") for item in expr.items)
        return f"( {body} )" if parent == "seq" else body
    body = " | ".join(_render(option, "alt") for option in expr.options)
    return body if parent in ("top", "star") else f"( {body} )"


def cfg_to_text(cfg: ContextFreeGrammar) -> str:
    lines = [f"{name} -> {_render(expr, 'top')} ;" for name, expr in cfg.productions]
    return "\n".join(lines) + "\n"


_CFG_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#.*)
  | (?P<arrow>->)
  | (?P<punct>[()|;*])
  | (?P<string>"[^"]*")
  | (?P<name>[a-z0-9_+]+(?:-[a-z0-9_+]+)*)
    """,
    re.VERBOSE,
)


def cfg_from_text(text: str) -> ContextFreeGrammar:
    tokens: list[tuple[str, str]] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        pos = 0
        while pos < len(line):
            match = _CFG_TOKEN_RE.match(line, pos)
            if match is None:
                raise GramlmError(f"line {line_no}: unexpected character {line[pos]!r}")
            kind = match.lastgroup or ""
            if kind == "comment":
                break
            if kind != "ws":
                tokens.append((kind, match.group()))
            pos = match.end()

    index = 0

    def peek():
        return tokens[index] if index < len(tokens) else (None, None)

    def take(kind: str, value=None) -> str:
        nonlocal index
        got_kind, got = peek()
        if got_kind != kind or (value is not None and got != value):
            raise GramlmError(f"expected {value or kind!r}, got {got!r}")
        index += 1
        return got

    def parse_alt() -> Expr:
        options = [parse_seq()]
        while peek() == ("punct", "|"):
            take("punct", "|")
            options.append(parse_seq())
        return alt(options)

    def parse_seq() -> Expr:
        items = [parse_postfix()]
        while peek()[0] in ("name", "string") or peek() == ("punct", "("):
            items.append(parse_postfix())
        return seq(items)

    def parse_postfix() -> Expr:
        node = parse_primary()
        while peek() == ("punct", "*"):
            take("punct", "*")
            node = Star(node)
        return node

    def parse_primary() -> Expr:
        kind, value = peek()
        if kind == "string":
            take("string")
            return Term(value[1:-1])
        if kind == "name":
            take("name")
            return Ref(value)
        if (kind, value) == ("punct", "("):
            take("punct", "(")
            node = parse_alt()
            take("punct", ")")
            return node
        raise GramlmError(f"expected a terminal, name, or group, got {value!r}")

    productions: list[tuple[str, Expr]] = []
    while index < len(tokens):
        name = take("name")
        take("arrow")
        expr = parse_alt()
        take("punct", ";")
        productions.append((name, expr))
    if not productions:
        raise GramlmError("empty grammar text")
    return ContextFreeGrammar(productions[0][0], tuple(productions))
