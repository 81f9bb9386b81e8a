"""Compilation from feature grammars to context-free grammars.

The pipeline has four stages:

1. :func:`strip_features` — drop semantic (or otherwise unwanted) features.
2. :func:`compute_instantiations` — per rule, the set of atomic value
   tuples over the rule's constrained slots that are both derivable
   bottom-up (supported) and reachable top-down from the start symbol
   (demanded), alternated to a fixpoint.
3. :func:`merge_ranges` — greedily merge atomic tuples into rule instances
   carrying value *sets* per dimension, preserving an exact disjoint cover
   of the tuple set. A dimension merges only if its slots span at most one
   mother and at most one daughter position; cross-daughter and repeated-
   mother variable groups must stay atomic or the cover would admit
   cross-terms the tuples never licensed.
4. :func:`emit_cfg` — nonterminals are (symbol, rectangle) pairs, where a
   rectangle gives a value set per naming dimension. Emission walks
   demanded rectangles from the start symbol's full supported rectangle,
   gathering every merged instance whose mother side intersects the
   rectangle and *restricting* linked dimensions by it. This restriction
   is the load-bearing mechanism: a rectangle demanding one atomic value
   of a linked feature splits the daughters one way per instance, while a
   rectangle demanding the full range rides through a one-mother/one-
   daughter link as a single alternative.

:func:`eliminate_left_recursion` and :func:`expansion_stats` round out the
module.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterable, Mapping, Optional, Sequence, Union

from .cfg import Alt, ContextFreeGrammar, Expr, Ref, Seq, Star, Term, alt, seq
from .errors import CompileError, ResourceCapError
from .grammar import (
    SEMANTIC,
    SYNTACTIC,
    Atom,
    Category,
    FeatureDecl,
    Grammar,
    LexEntry,
    Rule,
    Subset,
    Var,
    constrained_features,
)

Vector = tuple[str, ...]


def strip_features(grammar: Grammar, keep: Union[str, Iterable[str]] = "syntactic") -> Grammar:
    """Remove feature declarations and all constraints on them.

    ``keep`` is ``"syntactic"`` (drop semantic features), ``"all"`` (keep
    everything), or an explicit iterable of feature names to keep.
    """
    if keep == "all":
        return grammar
    if keep == "syntactic":
        kept = {d.name for d in grammar.features if d.kind == SYNTACTIC}
    else:
        kept = set(keep)
        unknown = kept - set(grammar.feature_names())
        if unknown:
            raise CompileError(f"cannot keep unknown features: {sorted(unknown)}")

    def strip_category(cat: Category) -> Category:
        return Category(cat.symbol, tuple((f, v) for f, v in cat.constraints if f in kept))

    return Grammar(
        tuple(d for d in grammar.features if d.name in kept),
        grammar.start,
        tuple(
            Rule(r.id, strip_category(r.mother), tuple(strip_category(d) for d in r.daughters), line=r.line)
            for r in grammar.rules
        ),
        tuple(LexEntry(e.surface, strip_category(e.category), line=e.line) for e in grammar.lexicon),
    )


@dataclass(frozen=True)
class SlotRef:
    """A constrained feature slot: occurrence 0 is the mother, 1.. daughters."""

    occ: int
    feature: str


@dataclass(frozen=True)
class DimSpec:
    """One instantiation dimension: a variable's slot group or a lone slot."""

    slots: tuple[SlotRef, ...]
    mergeable: bool


@dataclass(frozen=True)
class RuleInstance:
    """A merged instance: a value set per dimension (a rectangle of tuples)."""

    rule_id: str
    dims: tuple[DimSpec, ...]
    values: tuple[tuple[str, ...], ...]


@dataclass(frozen=True)
class InstantiationSet:
    """The retained atomic tuples of one rule, over its dimensions."""

    rule_id: str
    dims: tuple[DimSpec, ...]
    tuples: tuple[Vector, ...]


@dataclass
class Instantiations:
    """Per-rule retained tuples plus the support tables emission needs."""

    per_rule: dict[str, InstantiationSet]
    supported: dict[str, frozenset[Vector]]
    naming_dims: dict[str, tuple[str, ...]]


class _Index:
    """Shared lookup tables for one grammar."""

    def __init__(self, grammar: Grammar):
        self.grammar = grammar
        self.decl_index = {d.name: i for i, d in enumerate(grammar.features)}
        self.domains = {d.name: d.values for d in grammar.features}
        self.value_index = {
            name: {v: i for i, v in enumerate(values)} for name, values in self.domains.items()
        }
        symbols = {c.symbol for r in grammar.rules for c in r.categories()}
        symbols.update(e.category.symbol for e in grammar.lexicon)
        self.symbols = symbols
        self.naming_dims = {
            sym: constrained_features(grammar, sym, include_lexicon=False) for sym in symbols
        }
        self.rules_by_mother: dict[str, list[Rule]] = {}
        for rule in grammar.rules:
            self.rules_by_mother.setdefault(rule.mother.symbol, []).append(rule)
        self.lex_by_symbol: dict[str, list[LexEntry]] = {}
        for entry in grammar.lexicon:
            self.lex_by_symbol.setdefault(entry.category.symbol, []).append(entry)

    def dim_pos(self, symbol: str) -> dict[str, int]:
        return {f: i for i, f in enumerate(self.naming_dims[symbol])}

    def rule_dims(self, rule: Rule) -> tuple[DimSpec, ...]:
        var_slots: dict[str, list[SlotRef]] = {}
        lone: list[SlotRef] = []
        for occ, cat in enumerate(rule.categories()):
            for feature, constraint in cat.constraints:
                slot = SlotRef(occ, feature)
                if isinstance(constraint, Var):
                    var_slots.setdefault(constraint.name, []).append(slot)
                else:
                    lone.append(slot)
        dims = []
        for slots in var_slots.values():
            mothers = sum(1 for s in slots if s.occ == 0)
            dims.append(DimSpec(tuple(slots), mergeable=mothers <= 1 and len(slots) - mothers <= 1))
        for slot in lone:
            dims.append(DimSpec((slot,), mergeable=True))
        return tuple(
            sorted(dims, key=lambda d: min((self.decl_index[s.feature], s.occ) for s in d.slots))
        )

    def dim_domain(self, dim: DimSpec) -> tuple[str, ...]:
        return self.domains[dim.slots[0].feature]


def _lex_vectors(index: _Index, category: Category) -> Iterable[Vector]:
    """Expand a lexical category over its symbol's naming dimensions.

    Constraints on features that are not naming dimensions are ignored here:
    no rule ever unifies on them, so they cannot affect derivability.
    """
    constraint = dict(category.constraints)
    choices = []
    for feature in index.naming_dims[category.symbol]:
        value = constraint.get(feature)
        if value is None:
            choices.append(index.domains[feature])
        elif isinstance(value, Atom):
            choices.append((value.value,))
        elif isinstance(value, Subset):
            choices.append(value.values)
        else:  # pragma: no cover - validation rejects lexical variables
            raise AssertionError("variable in lexical entry")
    return product(*choices)


def _daughter_bindings(
    index: _Index, cat: Category, supported: Mapping[str, set[Vector]], bindings: dict
) -> Iterable[dict]:
    """Extend variable bindings over each supported vector matching ``cat``."""
    positions = index.dim_pos(cat.symbol)
    for vec in supported.get(cat.symbol, ()):
        new = bindings
        ok = True
        for feature, constraint in cat.constraints:
            have = vec[positions[feature]]
            if isinstance(constraint, Atom):
                if have != constraint.value:
                    ok = False
                    break
            elif isinstance(constraint, Subset):
                if have not in constraint.values:
                    ok = False
                    break
            else:
                bound = new.get(constraint.name)
                if bound is None:
                    if new is bindings:
                        new = dict(bindings)
                    new[constraint.name] = have
                elif bound != have:
                    ok = False
                    break
        if ok:
            yield new


def _mother_vectors(index: _Index, rule: Rule, bindings: Mapping[str, str]) -> Iterable[Vector]:
    """All mother vectors a completed daughter match licenses."""
    constraint = dict(rule.mother.constraints)
    unbound: dict[str, tuple[str, ...]] = {}
    for feature in index.naming_dims[rule.mother.symbol]:
        value = constraint.get(feature)
        if isinstance(value, Var) and value.name not in bindings and value.name not in unbound:
            unbound[value.name] = index.domains[feature]
    names = sorted(unbound)
    for extra in product(*(unbound[name] for name in names)):
        full = dict(bindings)
        full.update(zip(names, extra))
        choices = []
        for feature in index.naming_dims[rule.mother.symbol]:
            value = constraint.get(feature)
            if value is None:
                choices.append(index.domains[feature])
            elif isinstance(value, Atom):
                choices.append((value.value,))
            elif isinstance(value, Subset):
                choices.append(value.values)
            else:
                choices.append((full[value.name],))
        yield from product(*choices)


def _slot_values(occ: int, dims: tuple[DimSpec, ...], values: Sequence) -> dict[str, object]:
    """Map each constrained feature of one occurrence to its dim's value(s)."""
    out: dict[str, object] = {}
    for dim, value in zip(dims, values):
        for slot in dim.slots:
            if slot.occ == occ:
                out[slot.feature] = value
    return out


def _rect_has_support(
    index: _Index,
    symbol: str,
    fixed: Mapping[str, object],
    supported: Mapping[str, set[Vector]],
    atomic: bool,
) -> bool:
    """Does any supported vector of ``symbol`` fall inside the rectangle?

    ``fixed`` maps feature name to a single value (``atomic=True``) or to a
    collection of values; unmentioned dimensions are unrestricted.
    """
    positions = index.dim_pos(symbol)
    for vec in supported.get(symbol, ()):
        ok = True
        for feature, want in fixed.items():
            have = vec[positions[feature]]
            if atomic:
                if have != want:
                    ok = False
                    break
            elif have not in want:  # type: ignore[operator]
                ok = False
                break
        if ok:
            return True
    return False


def compute_instantiations(grammar: Grammar, cap_tuples: int = 10**7) -> Instantiations:
    """Supported-and-demanded atomic tuples per rule, to a fixpoint.

    Support is a bottom-up fixpoint over atomic naming-dimension vectors
    seeded from the lexicon; demand walks top-down from every supported
    start vector. A tuple is retained iff it is supported and its mother
    side meets a demanded vector; retention then demands every supported
    vector inside each daughter rectangle. One support pass and one demand
    pass land on the alternated fixpoint (the retained set is closed under
    both filters), but the loops below still run to quiescence.
    """
    index = _Index(grammar)
    budget = cap_tuples

    def spend(amount: int = 1) -> None:
        nonlocal budget
        budget -= amount
        if budget < 0:
            raise ResourceCapError("instantiation tuples", cap_tuples)

    supported: dict[str, set[Vector]] = {sym: set() for sym in index.symbols}
    for entry in grammar.lexicon:
        for vec in _lex_vectors(index, entry.category):
            if vec not in supported[entry.category.symbol]:
                spend()
                supported[entry.category.symbol].add(vec)

    while True:
        changed = False
        for rule in grammar.rules:
            states: list[dict] = [{}]
            for daughter in rule.daughters:
                states = [
                    extended
                    for bindings in states
                    for extended in _daughter_bindings(index, daughter, supported, bindings)
                ]
                deduped = {tuple(sorted(s.items())): s for s in states}
                states = list(deduped.values())
                if not states:
                    break
            target = supported[rule.mother.symbol]
            for bindings in states:
                for vec in _mother_vectors(index, rule, bindings):
                    if vec not in target:
                        spend()
                        target.add(vec)
                        changed = True
        if not changed:
            break

    if not supported.get(grammar.start):
        raise CompileError(
            f"start symbol {grammar.start!r} has no supported instantiations"
        )

    # Enumerate each rule's supported tuples over its dimensions.
    rule_dims: dict[str, tuple[DimSpec, ...]] = {}
    candidates: dict[str, list[Vector]] = {}
    for rule in grammar.rules:
        dims = index.rule_dims(rule)
        rule_dims[rule.id] = dims
        choices = []
        for dim in dims:
            lone = dim.slots[0]
            constraint = None
            if len(dim.slots) == 1:
                for occ, cat in enumerate(rule.categories()):
                    if occ == lone.occ:
                        constraint = cat.constraint_for(lone.feature)
            if isinstance(constraint, Atom):
                choices.append((constraint.value,))
            elif isinstance(constraint, Subset):
                choices.append(constraint.values)
            else:
                choices.append(index.dim_domain(dim))
        kept = []
        for values in product(*choices):
            spend()
            ok = True
            for occ in range(1, len(rule.daughters) + 1):
                fixed = _slot_values(occ, dims, values)
                if not _rect_has_support(
                    index, rule.daughters[occ - 1].symbol, fixed, supported, atomic=True
                ):
                    ok = False
                    break
            if ok:
                kept.append(values)
        candidates[rule.id] = kept

    # Demand pass: walk supported vectors top-down from the start symbol.
    demanded: dict[str, set[Vector]] = {sym: set() for sym in index.symbols}
    demanded[grammar.start] = set(supported[grammar.start])
    worklist: list[tuple[str, Vector]] = [(grammar.start, v) for v in sorted(demanded[grammar.start])]
    retained: dict[str, set[Vector]] = {rule.id: set() for rule in grammar.rules}

    def tuple_demanded(rule: Rule, values: Vector, vec: Vector) -> bool:
        positions = index.dim_pos(rule.mother.symbol)
        for dim, value in zip(rule_dims[rule.id], values):
            for slot in dim.slots:
                if slot.occ == 0 and vec[positions[slot.feature]] != value:
                    return False
        return True

    while worklist:
        symbol, vec = worklist.pop()
        for rule in index.rules_by_mother.get(symbol, ()):
            for values in candidates[rule.id]:
                if values in retained[rule.id] or not tuple_demanded(rule, values, vec):
                    continue
                retained[rule.id].add(values)
                for occ in range(1, len(rule.daughters) + 1):
                    daughter = rule.daughters[occ - 1]
                    fixed = _slot_values(occ, rule_dims[rule.id], values)
                    positions = index.dim_pos(daughter.symbol)
                    for dvec in supported[daughter.symbol]:
                        if dvec in demanded[daughter.symbol]:
                            continue
                        if all(dvec[positions[f]] == v for f, v in fixed.items()):
                            demanded[daughter.symbol].add(dvec)
                            worklist.append((daughter.symbol, dvec))

    def tuple_key(rule: Rule):
        dims = rule_dims[rule.id]
        domains = [
            {v: i for i, v in enumerate(index.dim_domain(dim))} for dim in dims
        ]
        return lambda values: tuple(dom[v] for dom, v in zip(domains, values))

    per_rule = {
        rule.id: InstantiationSet(
            rule.id, rule_dims[rule.id], tuple(sorted(retained[rule.id], key=tuple_key(rule)))
        )
        for rule in grammar.rules
    }
    return Instantiations(
        per_rule,
        {sym: frozenset(vectors) for sym, vectors in supported.items()},
        dict(index.naming_dims),
    )


def merge_ranges(inst: InstantiationSet, grammar: Grammar) -> tuple[RuleInstance, ...]:
    """Greedily merge atomic tuples into disjoint rectangles of value sets.

    Dimensions are scanned in their canonical (feature declaration, slot)
    order; instances agreeing everywhere except the scanned dimension merge
    by unioning that dimension's sets. The result partitions the input
    tuple set exactly: merging never invents a tuple (instances in a merge
    bucket are identical off-dimension) and never drops one (every tuple
    starts as a singleton instance).
    """
    index = _Index(grammar)
    domains = [
        {v: i for i, v in enumerate(index.dim_domain(dim))} for dim in inst.dims
    ]
    instances: list[tuple[tuple[str, ...], ...]] = [
        tuple((value,) for value in values) for values in inst.tuples
    ]
    while True:
        before = len(instances)
        for d_idx, dim in enumerate(inst.dims):
            if not dim.mergeable:
                continue
            buckets: dict[tuple, list[tuple[str, ...]]] = {}
            order: list[tuple] = []
            for values in sorted(
                instances,
                key=lambda vs: tuple(
                    tuple(dom[v] for v in span) for dom, span in zip(domains, vs)
                ),
            ):
                key = tuple(span for i, span in enumerate(values) if i != d_idx)
                if key not in buckets:
                    buckets[key] = []
                    order.append(key)
                buckets[key].append(values[d_idx])
            merged: list[tuple[tuple[str, ...], ...]] = []
            for key in order:
                union = sorted(
                    {v for span in buckets[key] for v in span}, key=domains[d_idx].__getitem__
                )
                rebuilt = list(key)
                rebuilt.insert(d_idx, tuple(union))
                merged.append(tuple(rebuilt))
            instances = merged
        if len(instances) == before:
            break
    instances.sort(
        key=lambda vs: tuple(tuple(dom[v] for v in span) for dom, span in zip(domains, vs))
    )
    return tuple(RuleInstance(inst.rule_id, inst.dims, values) for values in instances)


def merge_all(grammar: Grammar, inst: Instantiations) -> dict[str, tuple[RuleInstance, ...]]:
    """merge_ranges applied to every rule, keyed by rule id in rule order."""
    return {
        rule.id: merge_ranges(inst.per_rule[rule.id], grammar) for rule in grammar.rules
    }


def rect_name(symbol: str, dims: Sequence[str], spans: Sequence[Sequence[str]]) -> str:
    """Deterministic nonterminal name for a (symbol, rectangle) pair."""
    parts = [symbol.lower()]
    for feature, span in zip(dims, spans):
        parts.append(f"__{feature}-{'+'.join(span)}")
    return "".join(parts)


def emit_cfg(
    grammar: Grammar,
    inst: Instantiations,
    merged: Optional[Mapping[str, Sequence[RuleInstance]]] = None,
) -> ContextFreeGrammar:
    """Emit the context-free grammar over demanded rectangle nonterminals."""
    if merged is None:
        merged = merge_all(grammar, inst)
    index = _Index(grammar)
    supported = {sym: set(vectors) for sym, vectors in inst.supported.items()}

    # Per-dimension projections of the supported vectors, for canonicalizing.
    projections: dict[str, tuple[tuple[str, ...], ...]] = {}
    for symbol in index.symbols:
        dims = index.naming_dims[symbol]
        spans = []
        for pos, feature in enumerate(dims):
            values = {vec[pos] for vec in supported[symbol]}
            spans.append(
                tuple(sorted(values, key=index.value_index[feature].__getitem__))
            )
        projections[symbol] = tuple(spans)

    def canon_rect(symbol: str, spans: Sequence[Iterable[str]]) -> Optional[tuple[tuple[str, ...], ...]]:
        dims = index.naming_dims[symbol]
        out = []
        for pos, feature in enumerate(dims):
            span = tuple(
                sorted(
                    set(spans[pos]) & set(projections[symbol][pos]),
                    key=index.value_index[feature].__getitem__,
                )
            )
            if not span:
                return None
            out.append(span)
        return tuple(out)

    def rect_supported(symbol: str, spans: tuple[tuple[str, ...], ...]) -> bool:
        fixed = dict(zip(index.naming_dims[symbol], spans))
        return _rect_has_support(index, symbol, fixed, supported, atomic=False)

    start_spans = canon_rect(grammar.start, projections[grammar.start])
    if start_spans is None or not rect_supported(grammar.start, start_spans):
        raise CompileError(f"start symbol {grammar.start!r} has no supported instantiations")

    names: dict[tuple[str, tuple], str] = {}
    queue: list[tuple[str, tuple[tuple[str, ...], ...]]] = []

    def discover(symbol: str, spans: tuple[tuple[str, ...], ...]) -> str:
        key = (symbol, spans)
        if key not in names:
            names[key] = rect_name(symbol, index.naming_dims[symbol], spans)
            queue.append(key)
        return names[key]

    discover(grammar.start, start_spans)
    productions: list[tuple[str, Expr]] = []
    cursor = 0
    while cursor < len(queue):
        symbol, spans = queue[cursor]
        cursor += 1
        rect = dict(zip(index.naming_dims[symbol], spans))
        alternatives: list[Expr] = []
        for rule in index.rules_by_mother.get(symbol, ()):
            for instance in merged[rule.id]:
                restricted = _restrict_instance(instance, rect)
                if restricted is None:
                    continue
                refs: list[Expr] = []
                for occ, daughter in enumerate(rule.daughters, start=1):
                    fixed = _slot_values(occ, instance.dims, restricted)
                    child_spans = []
                    positions = index.dim_pos(daughter.symbol)
                    for feature in index.naming_dims[daughter.symbol]:
                        child_spans.append(fixed.get(feature, projections[daughter.symbol][positions[feature]]))
                    child = canon_rect(daughter.symbol, child_spans)
                    if child is None or not rect_supported(daughter.symbol, child):
                        refs = []
                        break
                    refs.append(Ref(discover(daughter.symbol, child)))
                if refs:
                    alternatives.append(seq(refs))
        for entry in index.lex_by_symbol.get(symbol, ()):
            constraint = dict(entry.category.constraints)
            ok = True
            for feature, span in rect.items():
                value = constraint.get(feature)
                if isinstance(value, Atom) and value.value not in span:
                    ok = False
                elif isinstance(value, Subset) and not set(value.values) & set(span):
                    ok = False
            if ok:
                alternatives.append(seq([Term(tok) for tok in entry.surface]))
        unique: list[Expr] = []
        seen: set[Expr] = set()
        for alternative in alternatives:
            if alternative not in seen:
                seen.add(alternative)
                unique.append(alternative)
        if not unique:
            raise CompileError(
                f"demanded nonterminal {names[(symbol, spans)]!r} has no alternatives"
            )
        productions.append((names[(symbol, spans)], alt(unique)))

    if len(set(names.values())) != len(names):
        raise CompileError("rectangle naming collision")
    return ContextFreeGrammar(productions[0][0], tuple(productions))


def _restrict_instance(
    instance: RuleInstance, rect: Mapping[str, Sequence[str]]
) -> Optional[tuple[tuple[str, ...], ...]]:
    """Intersect an instance's mother-linked dimensions with a rectangle."""
    out = []
    for dim, span in zip(instance.dims, instance.values):
        allowed = set(span)
        for slot in dim.slots:
            if slot.occ == 0:
                allowed &= set(rect[slot.feature])
        if not allowed:
            return None
        out.append(tuple(v for v in span if v in allowed))
    return tuple(out)


def _leftmost_refs(expr: Expr) -> tuple[set[str], bool]:
    """Referenced names reachable in leftmost position, plus nullability."""
    if isinstance(expr, Term):
        return set(), False
    if isinstance(expr, Ref):
        return {expr.name}, False
    if isinstance(expr, Star):
        refs, _ = _leftmost_refs(expr.body)
        return refs, True
    if isinstance(expr, Alt):
        refs: set[str] = set()
        nullable = False
        for option in expr.options:
            sub, n = _leftmost_refs(option)
            refs |= sub
            nullable = nullable or n
        return refs, nullable
    refs = set()
    for item in expr.items:
        sub, nullable = _leftmost_refs(item)
        refs |= sub
        if not nullable:
            return refs, False
    return refs, True


def _strongly_connected(order: Sequence[str], edges: Mapping[str, set[str]]) -> list[list[str]]:
    """Tarjan's algorithm, iterative, preserving definition order within SCCs."""
    index_of: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    result: list[list[str]] = []
    counter = 0

    for root in order:
        if root in index_of:
            continue
        work = [(root, iter(sorted(edges.get(root, ()))))]
        index_of[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, children = work[-1]
            advanced = False
            for child in children:
                if child not in edges and child not in index_of:
                    continue
                if child not in index_of:
                    index_of[child] = low[child] = counter
                    counter += 1
                    stack.append(child)
                    on_stack.add(child)
                    work.append((child, iter(sorted(edges.get(child, ())))))
                    advanced = True
                    break
                if child in on_stack:
                    low[node] = min(low[node], index_of[child])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index_of[node]:
                component = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component.append(member)
                    if member == node:
                        break
                position = {name: i for i, name in enumerate(order)}
                component.sort(key=position.__getitem__)
                result.append(component)
    return result


def _flatten_alternatives(expr: Expr) -> Optional[list[list[Expr]]]:
    """Production body as alternative item lists, or None if not flat.

    Stars are allowed as items (substitution introduces them mid-sequence);
    nested alternation is not.
    """
    options = expr.options if isinstance(expr, Alt) else (expr,)
    out: list[list[Expr]] = []
    for option in options:
        items = option.items if isinstance(option, Seq) else (option,)
        flat: list[Expr] = []
        for item in items:
            if isinstance(item, (Term, Ref, Star)):
                flat.append(item)
            else:
                return None
        out.append(flat)
    return out


def eliminate_left_recursion(cfg: ContextFreeGrammar) -> ContextFreeGrammar:
    """Rewrite left-recursive productions using trailing repetition.

    Direct recursion ``A -> A a1 | .. | A ak | b1 | .. | bm`` becomes
    ``A -> (b1|..|bm) (a1|..|ak)*`` — no fresh nonterminal and no empty
    production, which the graph backend requires. Indirect recursion is
    first reduced to direct recursion by substituting earlier members of
    the same leftmost-reference cycle, in definition order. Grammars whose
    leftmost-reference graph is already acyclic are returned unchanged
    (the same object). A starred body taking part in a cycle is not
    supported and raises :class:`CompileError`.
    """
    order = [name for name, _ in cfg.productions]
    bodies = {name: expr for name, expr in cfg.productions}
    edges = {name: _leftmost_refs(expr)[0] for name, expr in cfg.productions}
    components = _strongly_connected(order, edges)
    cyclic = [c for c in components if len(c) > 1 or (len(c) == 1 and c[0] in edges[c[0]])]
    if not cyclic:
        return cfg

    rewritten = dict(bodies)
    for component in cyclic:
        member_set = set(component)
        flat: dict[str, list[list[Expr]]] = {}
        for name in component:
            flattened = _flatten_alternatives(rewritten[name])
            if flattened is None:
                raise CompileError(
                    f"left recursion through a starred body at {name!r} is not supported"
                )
            flat[name] = flattened
        for i, name in enumerate(component):
            # Substitute earlier cycle members heading an alternative.
            for j in range(i):
                earlier = component[j]
                while True:
                    expanded: list[list[Expr]] = []
                    hit = False
                    for option in flat[name]:
                        if option and isinstance(option[0], Ref) and option[0].name == earlier:
                            hit = True
                            for replacement in flat[earlier]:
                                expanded.append(replacement + option[1:])
                        else:
                            expanded.append(option)
                    flat[name] = expanded
                    if not hit:
                        break
            recursive = [opt[1:] for opt in flat[name] if opt and isinstance(opt[0], Ref) and opt[0].name == name]
            others = [opt for opt in flat[name] if not (opt and isinstance(opt[0], Ref) and opt[0].name == name)]
            if not recursive:
                rewritten[name] = alt([seq(opt) for opt in flat[name]])
                continue
            if any(not tail for tail in recursive):
                raise CompileError(f"cyclic unit production at {name!r}")
            if not others:
                raise CompileError(f"production {name!r} is only left-recursive; its language is empty")
            base = alt([seq(opt) for opt in others])
            loop = Star(alt([seq(tail) for tail in recursive]))
            if isinstance(base, Seq):
                rewritten[name] = Seq(tuple(base.items) + (loop,))
            else:
                rewritten[name] = Seq((base, loop))
            # Later members substitute this member's full language, which is
            # each base alternative with the repetition appended.
            flat[name] = [opt + [loop] for opt in others]
        # Verify no member of the component is still leftmost-cyclic.
        for name in component:
            refs, _ = _leftmost_refs(rewritten[name])
            if name in refs:
                raise CompileError(f"left recursion at {name!r} survived elimination")

    productions = tuple((name, rewritten[name]) for name in order)
    return ContextFreeGrammar(cfg.start, productions)


@dataclass(frozen=True)
class ExpansionStats:
    """Rule-count accounting for one compilation."""

    naive_count: int
    emitted_rules: int

    @property
    def reduction_factor(self) -> Fraction:
        if self.emitted_rules == 0:
            raise ZeroDivisionError("no emitted rules")
        return Fraction(self.naive_count, self.emitted_rules)

    def reduction_text(self, digits: int = 12) -> str:
        """The factor as a decimal string; exact arithmetic, so huge ratios
        never overflow the way a float quotient would."""
        from decimal import Decimal, localcontext

        factor = self.reduction_factor
        with localcontext() as ctx:
            ctx.prec = digits
            value = Decimal(factor.numerator) / Decimal(factor.denominator)
        return format(value.normalize(), "f")


def expansion_stats(
    grammar: Grammar, merged: Mapping[str, Sequence[RuleInstance]]
) -> ExpansionStats:
    """Compare naive full-domain instantiation against the merged instances.

    The naive count instantiates every constrained slot over its feature's
    full domain (variables once per distinct variable), summed over rules;
    the lexicon is not counted on either side.
    """
    index = _Index(grammar)
    naive = 0
    for rule in grammar.rules:
        combos = 1
        seen_vars: set[str] = set()
        for cat in rule.categories():
            for feature, constraint in cat.constraints:
                if isinstance(constraint, Var):
                    if constraint.name not in seen_vars:
                        seen_vars.add(constraint.name)
                        combos *= len(index.domains[feature])
                else:
                    combos *= len(index.domains[feature])
        naive += combos
    emitted = sum(len(instances) for instances in merged.values())
    return ExpansionStats(naive, emitted)


@dataclass
class CompileResult:
    grammar: Grammar  # the stripped grammar that was compiled
    inst: Instantiations
    merged: dict[str, tuple[RuleInstance, ...]]
    cfg_raw: ContextFreeGrammar  # before left-recursion elimination
    cfg: ContextFreeGrammar
    stats: ExpansionStats


def compile_grammar(
    grammar: Grammar,
    features: Union[str, Iterable[str]] = "syntactic",
    cap_tuples: int = 10**7,
) -> CompileResult:
    """Run the whole pipeline on an (already variant-transformed) grammar."""
    stripped = strip_features(grammar, features)
    inst = compute_instantiations(stripped, cap_tuples=cap_tuples)
    merged = merge_all(stripped, inst)
    cfg_raw = emit_cfg(stripped, inst, merged)
    cfg = eliminate_left_recursion(cfg_raw)
    return CompileResult(stripped, inst, merged, cfg_raw, cfg, expansion_stats(stripped, merged))
