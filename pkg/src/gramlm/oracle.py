"""Reference parser and enumerator working directly on the feature grammar.

This module is the ground truth the compiled artifacts are checked against,
so it deliberately shares no machinery with the compiler: items are
(symbol, feature map) pairs where unconstrained features stay FREE, daughter
matching walks the rule left to right carrying variable bindings, and
subsets are expanded to atoms at lexical seeding time.

Counting caveat: ``derivation_count`` counts (tree, forced value choice)
combinations. A rule mother with an unconstrained subset slot, or a variable
that appears only on the mother more than once, forces a value split and
inflates the count relative to bare trees. None of the bundled grammars use
those corners on counted symbols. Unary rule cycles would diverge; counts
saturate at ``count_cap`` instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Optional, Sequence

from .errors import ResourceCapError, UnknownTokenError
from .grammar import Atom, Category, Grammar, Rule, Subset, Var, constrained_features

FREE = None

# A feature map assigns each relevant feature of a symbol either a concrete
# value or FREE; maps are tuples aligned with the symbol's feature list.
FMap = tuple  # tuple[Optional[str], ...]


@dataclass(frozen=True)
class _Item:
    symbol: str
    fmap: FMap


@dataclass
class ParseResult:
    accepted: bool
    derivation_count: int
    derivations: list[str]


class _Analyzer:
    """Per-grammar tables shared by parsing and enumeration."""

    def __init__(self, grammar: Grammar, feature_filter: Optional[Iterable[str]] = None):
        self.grammar = grammar
        visible = None if feature_filter is None else frozenset(feature_filter)
        if visible is not None:
            unknown = visible - set(grammar.feature_names())
            if unknown:
                raise KeyError(f"unknown features in filter: {sorted(unknown)}")
        self.domains = {d.name: d.values for d in grammar.features}
        self.symbols = {c.symbol for r in grammar.rules for c in r.categories()}
        self.symbols.update(e.category.symbol for e in grammar.lexicon)
        self.relevant: dict[str, tuple[str, ...]] = {}
        for symbol in self.symbols:
            feats = constrained_features(grammar, symbol, include_lexicon=True)
            if visible is not None:
                feats = tuple(f for f in feats if f in visible)
            self.relevant[symbol] = feats
        self.visible = visible

    def _visible_constraints(self, cat: Category) -> list[tuple[int, object]]:
        feats = self.relevant[cat.symbol]
        index = {f: i for i, f in enumerate(feats)}
        out = []
        for feature, value in cat.constraints:
            if feature in index:
                out.append((index[feature], value))
        return out

    def lexical_items(self, cat: Category) -> list[FMap]:
        """Expand a lexical category into concrete items (subsets to atoms)."""
        feats = self.relevant[cat.symbol]
        choices: list[tuple[Optional[str], ...]] = []
        constraint = dict(cat.constraints)
        for feature in feats:
            value = constraint.get(feature)
            if value is None:
                choices.append((FREE,))
            elif isinstance(value, Atom):
                choices.append((value.value,))
            elif isinstance(value, Subset):
                choices.append(tuple(value.values))
            else:  # pragma: no cover - validation rejects lexical variables
                raise AssertionError("variable in lexical entry")
        return [tuple(combo) for combo in product(*choices)]

    def match_item(
        self, cat: Category, item: _Item, bindings: dict[str, str]
    ) -> Optional[dict[str, str]]:
        """Unify a daughter category against an item; return extended bindings."""
        if cat.symbol != item.symbol:
            return None
        new = bindings
        for slot, value in self._visible_constraints(cat):
            have = item.fmap[slot]
            if isinstance(value, Atom):
                if have is not FREE and have != value.value:
                    return None
            elif isinstance(value, Subset):
                if have is not FREE and have not in value.values:
                    return None
            elif isinstance(value, Var):
                bound = new.get(value.name)
                if have is FREE:
                    continue
                if bound is None:
                    if new is bindings:
                        new = dict(bindings)
                    new[value.name] = have
                elif bound != have:
                    return None
        return new

    def mother_items(self, rule: Rule, bindings: dict[str, str]) -> list[FMap]:
        """All mother items licensed by a completed daughter match."""
        feats = self.relevant[rule.mother.symbol]
        constraint = dict(rule.mother.constraints)
        var_mother_slots: dict[str, int] = {}
        for feature, value in rule.mother.constraints:
            if isinstance(value, Var):
                var_mother_slots[value.name] = var_mother_slots.get(value.name, 0) + 1
        choices: list[tuple[Optional[str], ...]] = []
        for feature in feats:
            value = constraint.get(feature)
            if value is None:
                choices.append((FREE,))
            elif isinstance(value, Atom):
                choices.append((value.value,))
            elif isinstance(value, Subset):
                choices.append(tuple(value.values))
            else:
                bound = bindings.get(value.name)
                if bound is not None:
                    choices.append((bound,))
                elif var_mother_slots.get(value.name, 0) > 1:
                    # A repeated unbound mother variable must take a single
                    # concrete value; split over the feature's domain.
                    choices.append(tuple(self.domains[feature]))
                else:
                    choices.append((FREE,))
        return [tuple(combo) for combo in product(*choices)]


def _check_tokens(grammar: Grammar, tokens: Sequence[str]) -> None:
    known = {tok for entry in grammar.lexicon for tok in entry.surface}
    for position, token in enumerate(tokens):
        if token not in known:
            raise UnknownTokenError(token, position)


def oracle_parse(
    grammar: Grammar,
    tokens: Sequence[str],
    feature_filter: Optional[Iterable[str]] = None,
    max_derivations: int = 10,
    count_cap: int = 10**6,
) -> ParseResult:
    """Parse a token sequence; count and render derivations.

    Derivations are rendered as bracketed trees, at most ``max_derivations``
    of them, in a deterministic order.
    """
    tokens = tuple(tokens)
    _check_tokens(grammar, tokens)
    analyzer = _Analyzer(grammar, feature_filter)
    n = len(tokens)
    if n == 0:
        return ParseResult(False, 0, [])

    # chart[(i, j)]: item -> derivation count (settled once per span);
    # back[(i, j)]: item -> origins, each ("lex", entry) or ("rule", rule, picked).
    chart: dict[tuple[int, int], dict[_Item, int]] = {}
    back: dict[tuple[int, int], dict[_Item, list]] = {}
    starts: dict[int, list[tuple[int, _Item]]] = {}

    def add(span: tuple[int, int], item: _Item, origin) -> bool:
        cell = chart.setdefault(span, {})
        fresh = item not in cell
        if fresh:
            cell[item] = 0
            starts.setdefault(span[0], []).append((span[1], item))
        back.setdefault(span, {}).setdefault(item, []).append(origin)
        return fresh

    for entry in grammar.lexicon:
        width = len(entry.surface)
        for i in range(n - width + 1):
            if tuple(tokens[i : i + width]) == entry.surface:
                for fmap in analyzer.lexical_items(entry.category):
                    add((i, i + width), _Item(entry.category.symbol, fmap), ("lex", entry))

    def matches(rule: Rule, i: int, j: int):
        """Yield (bindings, [(span, item), ...]) for complete daughter matches."""
        states: list[tuple[int, dict, list]] = [(i, {}, [])]
        for daughter in rule.daughters:
            next_states = []
            for pos, bindings, picked in states:
                for end, item in starts.get(pos, ()):
                    if end > j or item.symbol != daughter.symbol:
                        continue
                    extended = analyzer.match_item(daughter, item, bindings)
                    if extended is None:
                        continue
                    next_states.append((end, extended, picked + [((pos, end), item)]))
            states = next_states
            if not states:
                return
        for pos, bindings, picked in states:
            if pos == j:
                yield bindings, picked

    def settle_counts(i: int, j: int) -> None:
        """Evaluate counts over the span's origin graph to a fixpoint.

        Same-span children (unary chains) start at zero and rise monotonically,
        so iteration converges; a unary cycle would saturate at the cap.
        """
        cell = chart.get((i, j), {})
        for _ in range(max(64, len(cell) + 1)):
            changed = False
            for item in cell:
                total = 0
                for origin in back[(i, j)][item]:
                    if origin[0] == "lex":
                        total += 1
                    else:
                        prod = 1
                        for span, child in origin[2]:
                            prod *= chart[span][child]
                            if prod >= count_cap:
                                prod = count_cap
                                break
                        total += prod
                total = min(total, count_cap)
                if total != cell[item]:
                    cell[item] = total
                    changed = True
            if not changed:
                break

    for width in range(1, n + 1):
        for i in range(n - width + 1):
            j = i + width
            recorded: set = set()
            while True:
                grew = False
                for rule in grammar.rules:
                    for bindings, picked in list(matches(rule, i, j)):
                        key = (rule.id, tuple(picked))
                        if key in recorded:
                            continue
                        recorded.add(key)
                        grew = True
                        for fmap in analyzer.mother_items(rule, bindings):
                            add((i, j), _Item(rule.mother.symbol, fmap), ("rule", rule, picked))
                if not grew:
                    break
            settle_counts(i, j)

    total = 0
    roots = []
    for item, count in sorted(
        chart.get((0, n), {}).items(), key=lambda kv: (kv[0].symbol, str(kv[0].fmap))
    ):
        if item.symbol == grammar.start:
            total = min(total + count, count_cap)
            roots.append(item)

    derivations: list[str] = []

    def render(span: tuple[int, int], item: _Item, depth: int) -> list[str]:
        if depth > 64:
            return []
        rendered = []
        for origin in back.get(span, {}).get(item, []):
            if origin[0] == "lex":
                rendered.append(f"({item.symbol} {' '.join(origin[1].surface)})")
            else:
                _, _, picked = origin
                child_lists = [render(s, it, depth + 1) for s, it in picked]
                for combo in product(*child_lists):
                    rendered.append(f"({item.symbol} {' '.join(combo)})")
            if len(rendered) >= max_derivations:
                break
        return rendered[:max_derivations]

    seen: set[str] = set()
    for item in roots:
        for tree in render((0, n), item, 0):
            if tree not in seen:
                seen.add(tree)
                derivations.append(tree)
            if len(derivations) >= max_derivations:
                break
        if len(derivations) >= max_derivations:
            break

    return ParseResult(total > 0, total, derivations)


def oracle_enumerate(
    grammar: Grammar,
    max_len: int,
    feature_filter: Optional[Iterable[str]] = None,
    cap: int = 10**6,
) -> set[tuple[str, ...]]:
    """All token sequences of length <= max_len derivable from the start symbol.

    ``cap`` bounds the number of stored (item, string) pairs; exceeding it
    raises :class:`ResourceCapError`.
    """
    analyzer = _Analyzer(grammar, feature_filter)
    stored = 0

    # lang[item][length] -> set of token tuples
    lang: dict[_Item, dict[int, set[tuple[str, ...]]]] = {}

    def add(item: _Item, string: tuple[str, ...]) -> bool:
        nonlocal stored
        buckets = lang.setdefault(item, {})
        bucket = buckets.setdefault(len(string), set())
        if string in bucket:
            return False
        stored += 1
        if stored > cap:
            raise ResourceCapError("enumerated strings", cap)
        bucket.add(string)
        return True

    for entry in grammar.lexicon:
        if len(entry.surface) > max_len:
            continue
        for fmap in analyzer.lexical_items(entry.category):
            add(_Item(entry.category.symbol, fmap), entry.surface)

    # Minimum yield per symbol prunes hopeless daughter suffixes.
    min_yield: dict[str, int] = {}
    for entry in grammar.lexicon:
        sym = entry.category.symbol
        min_yield[sym] = min(min_yield.get(sym, len(entry.surface)), len(entry.surface))
    for _ in range(len(analyzer.symbols) + 1):
        changed = False
        for rule in grammar.rules:
            if all(d.symbol in min_yield for d in rule.daughters):
                total = sum(min_yield[d.symbol] for d in rule.daughters)
                if total < min_yield.get(rule.mother.symbol, max_len + 1):
                    min_yield[rule.mother.symbol] = total
                    changed = True
        if not changed:
            break

    by_symbol: dict[str, set[_Item]] = {}
    for item in lang:
        by_symbol.setdefault(item.symbol, set()).add(item)

    while True:
        changed = False
        for rule in grammar.rules:
            suffix_min = [0] * (len(rule.daughters) + 1)
            for idx in range(len(rule.daughters) - 1, -1, -1):
                need = min_yield.get(rule.daughters[idx].symbol, max_len + 1)
                suffix_min[idx] = suffix_min[idx + 1] + need
            if suffix_min[0] > max_len:
                continue
            states: list[tuple[dict, dict[int, set[tuple[str, ...]]]]] = [
                ({}, {0: {()}})
            ]
            for idx, daughter in enumerate(rule.daughters):
                next_states = []
                for bindings, strings in states:
                    for item in sorted(
                        by_symbol.get(daughter.symbol, ()),
                        key=lambda it: str(it.fmap),
                    ):
                        extended = analyzer.match_item(daughter, item, bindings)
                        if extended is None:
                            continue
                        combined: dict[int, set[tuple[str, ...]]] = {}
                        for got_len, got in lang[item].items():
                            for have_len, have in strings.items():
                                total = have_len + got_len
                                if total + suffix_min[idx + 1] > max_len:
                                    continue
                                bucket = combined.setdefault(total, set())
                                bucket.update(p + s for p in have for s in got)
                        if combined:
                            next_states.append((extended, combined))
                states = next_states
                if not states:
                    break
            for bindings, strings in states:
                for fmap in analyzer.mother_items(rule, bindings):
                    item = _Item(rule.mother.symbol, fmap)
                    if item not in lang:
                        by_symbol.setdefault(item.symbol, set()).add(item)
                    for bucket in strings.values():
                        for string in bucket:
                            if add(item, string):
                                changed = True
        if not changed:
            break

    result: set[tuple[str, ...]] = set()
    for item, buckets in lang.items():
        if item.symbol == grammar.start:
            for bucket in buckets.values():
                result.update(bucket)
    return result
