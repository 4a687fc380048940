"""Finite coalgebras: morphisms, behavioural equivalence, minimization.

A coalgebra is a finite carrier together with a structure map assigning
each state a value of the declared functor shape over the carrier.
Behavioural equivalence is computed by partition refinement along the
final sequence: start from the one-block partition and repeatedly
identify states whose structure values agree after collapsing the
current blocks.  Two independent oracles are provided for testing:
a relation-refinement fixpoint on the disjoint union of two coalgebras,
and an exhaustive search over all set partitions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Iterator

from .errors import CapExceeded, EnumerationTooLarge, FunctorMismatch, ParseError
from .functor import (
    DistV,
    FinFun,
    FinSet,
    FunctorExpr,
    InlV,
    InrV,
    NbhdV,
    PairV,
    Ref,
    SetV,
    Sym,
    TableV,
    TValue,
    apply_on_fun,
    check_value,
    enumeration_cap,
    functor_to_text,
    kripke_valuations,
    mkdist,
    mknbhd,
    mkset,
    mktable,
    parse_functor,
)


class Coalgebra:
    """A finite carrier with a structure map into the functor shape."""

    __slots__ = ("functor", "carrier", "structure")

    def __init__(self, functor: FunctorExpr, carrier: FinSet, structure: dict[str, TValue]):
        if set(structure) != set(carrier.elements):
            raise ValueError("structure map must be total on the carrier")
        for x in carrier:
            check_value(functor, structure[x], carrier, path=f"structure[{x}].")
        self.functor = functor
        self.carrier = carrier
        self.structure = dict(structure)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Coalgebra)
            and self.functor == other.functor
            and self.carrier == other.carrier
            and self.structure == other.structure
        )

    def __repr__(self) -> str:
        return f"Coalgebra({functor_to_text(self.functor)}, {list(self.carrier)})"

    def realized_denominator(self) -> int:
        """lcm of all weight denominators occurring in the structure map;
        the default bound for distribution enumerations."""
        dens = [1]

        def walk(v: TValue):
            match v:
                case DistV(entries):
                    for u, w in entries:
                        dens.append(w.denominator)
                        walk(u)
                case PairV(a, b):
                    walk(a)
                    walk(b)
                case InlV(u) | InrV(u):
                    walk(u)
                case TableV(entries):
                    for _, u in entries:
                        walk(u)
                case SetV(items):
                    for u in items:
                        walk(u)
                case NbhdV(members):
                    for m in members:
                        for u in m:
                            walk(u)
                case _:
                    pass

        for x in self.carrier:
            walk(self.structure[x])
        return lcm(*dens)


class Partition:
    """A partition of a carrier into blocks, canonically ordered.

    Blocks are sorted by their least element; elements are sorted within
    each block.
    """

    __slots__ = ("carrier", "blocks", "_block_of")

    def __init__(self, carrier: FinSet, blocks):
        canon = tuple(sorted(tuple(sorted(b)) for b in blocks))
        seen: list[str] = []
        for b in canon:
            if not b:
                raise ValueError("empty block")
            seen.extend(b)
        if sorted(seen) != list(carrier.elements):
            raise ValueError("blocks do not partition the carrier")
        self.carrier = carrier
        self.blocks = canon
        self._block_of = {x: i for i, b in enumerate(canon) for x in b}

    def block_index(self, x: str) -> int:
        return self._block_of[x]

    def same_block(self, x: str, y: str) -> bool:
        return self._block_of[x] == self._block_of[y]

    def quotient(self) -> tuple[FinFun, FinSet]:
        """The quotient map onto block names q0, q1, ... in canonical order."""
        names = [f"q{i}" for i in range(len(self.blocks))]
        Q = FinSet(names)
        return FinFun(self.carrier, Q, {x: f"q{self._block_of[x]}" for x in self.carrier}), Q

    def refines(self, other: "Partition") -> bool:
        return all(
            len({other.block_index(x) for x in b}) == 1 for b in self.blocks
        )

    def pairs(self) -> set[tuple[str, str]]:
        out = set()
        for b in self.blocks:
            for x in b:
                for y in b:
                    out.add((x, y))
        return out

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Partition)
            and self.carrier == other.carrier
            and self.blocks == other.blocks
        )

    def __hash__(self) -> int:
        return hash((self.carrier, self.blocks))

    def __repr__(self) -> str:
        return f"Partition({[list(b) for b in self.blocks]})"


def is_morphism(
    f: FinFun, src: Coalgebra, tgt: Coalgebra, dist_bound: int | None = None
) -> tuple[bool, str | None]:
    """Check T f . xi = nu . f; returns (ok, witness state on failure)."""
    if src.functor != tgt.functor:
        raise FunctorMismatch(
            f"functor mismatch: {functor_to_text(src.functor)} vs {functor_to_text(tgt.functor)}"
        )
    if f.dom != src.carrier or f.cod != tgt.carrier:
        raise ValueError("function endpoints do not match the carriers")
    bound = dist_bound
    if bound is None:
        bound = lcm(src.realized_denominator(), tgt.realized_denominator())
    tf = apply_on_fun(src.functor, f, bound)
    for x in src.carrier:
        if tf(src.structure[x]) != tgt.structure[f(x)]:
            return False, x
    return True, None


def refinement_trace(c: Coalgebra, dist_bound: int | None = None) -> list[Partition]:
    """Partitions of the final-sequence refinement, from the one-block
    partition to the first stable one.  Stabilizes in <= |carrier| rounds."""
    if len(c.carrier) == 0:
        return [Partition(c.carrier, [])]
    bound = dist_bound if dist_bound is not None else c.realized_denominator()
    part = Partition(c.carrier, [tuple(c.carrier)])
    trace = [part]
    while True:
        q, _ = part.quotient()
        tq = apply_on_fun(c.functor, q, bound)
        sig: dict[TValue, list[str]] = {}
        for x in c.carrier:
            sig.setdefault(tq(c.structure[x]), []).append(x)
        refined = Partition(c.carrier, sig.values())
        if refined == part:
            return trace
        trace.append(refined)
        part = refined


def behavioural_equivalence(c: Coalgebra, dist_bound: int | None = None) -> Partition:
    """The coarsest partition stable under one refinement step."""
    return refinement_trace(c, dist_bound)[-1]


def coproduct_coalgebra(c1: Coalgebra, c2: Coalgebra) -> Coalgebra:
    """Disjoint union, with carriers kept apart by "l:"/"r:" prefixes."""
    if c1.functor != c2.functor:
        raise FunctorMismatch("coproduct needs a shared functor")
    carrier = FinSet([f"l:{x}" for x in c1.carrier] + [f"r:{y}" for y in c2.carrier])
    bound = lcm(c1.realized_denominator(), c2.realized_denominator())
    structure: dict[str, TValue] = {}
    for c, prefix in ((c1, "l:"), (c2, "r:")):
        inj = FinFun(c.carrier, carrier, {x: prefix + x for x in c.carrier})
        t_inj = apply_on_fun(c.functor, inj, bound)
        for x in c.carrier:
            structure[prefix + x] = t_inj(c.structure[x])
    return Coalgebra(c1.functor, carrier, structure)


def brute_force_bisimilarity(
    c1: Coalgebra, c2: Coalgebra, max_states: int = 8
) -> set[tuple[str, str]]:
    """Cross-coalgebra behavioural equivalence, as an oracle.

    Computed as the greatest fixpoint of relation refinement on the
    disjoint union: starting from the total relation, repeatedly keep a
    pair when the two structure values agree after quotienting by the
    current relation.  Returns the related (state of c1, state of c2)
    pairs.
    """
    if len(c1.carrier) + len(c2.carrier) > max_states:
        raise CapExceeded(
            f"combined carrier {len(c1.carrier) + len(c2.carrier)} exceeds cap {max_states}"
        )
    both = coproduct_coalgebra(c1, c2)
    bound = both.realized_denominator()
    elems = list(both.carrier)
    rel = {(x, y) for x in elems for y in elems}
    while True:
        blocks: dict[str, set[str]] = {}
        for x in elems:
            blocks.setdefault(min(y for y in elems if (x, y) in rel), set()).add(x)
        part = Partition(both.carrier, blocks.values())
        q, _ = part.quotient()
        tq = apply_on_fun(both.functor, q, bound)
        sig = {x: tq(both.structure[x]) for x in elems}
        refined = {(x, y) for (x, y) in rel if sig[x] == sig[y]}
        if refined == rel:
            break
        rel = refined
    return {
        (x, y) for x in c1.carrier for y in c2.carrier if (f"l:{x}", f"r:{y}") in rel
    }


def set_partitions(items: list[str]) -> Iterator[list[list[str]]]:
    """All partitions of a list (Bell(n) of them)."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1 :]
        yield [[first]] + part


def coarsest_stable_partition(c: Coalgebra, max_states: int = 8) -> Partition:
    """Exhaustive oracle: enumerate every partition of the carrier, keep
    the stable ones (states in a block have equal structure values after
    quotienting), and return the coarsest.  Independent of the refinement
    path; exponential, so capped."""
    if len(c.carrier) > max_states:
        raise CapExceeded(f"carrier {len(c.carrier)} exceeds cap {max_states}")
    bound = c.realized_denominator()
    stable: list[Partition] = []
    for blocks in set_partitions(list(c.carrier)):
        part = Partition(c.carrier, blocks)
        q, _ = part.quotient()
        tq = apply_on_fun(c.functor, q, bound)
        ok = True
        for b in part.blocks:
            sigs = {tq(c.structure[x]) for x in b}
            if len(sigs) > 1:
                ok = False
                break
        if ok:
            stable.append(part)
    best = max(stable, key=lambda p: sum(len(b) ** 2 for b in p.blocks))
    # the coarsest stable partition contains every other stable one
    for p in stable:
        assert p.refines(best), "stable partitions have no maximum"
    return best


def minimize(c: Coalgebra, dist_bound: int | None = None) -> tuple[Coalgebra, FinFun]:
    """Quotient by behavioural equivalence.

    Returns the minimized coalgebra and the quotient map, which is a
    coalgebra morphism; the result has all-singleton behavioural
    equivalence.
    """
    part = behavioural_equivalence(c, dist_bound)
    q, Q = part.quotient()
    bound = dist_bound if dist_bound is not None else c.realized_denominator()
    tq = apply_on_fun(c.functor, q, bound)
    structure = {}
    for i, b in enumerate(part.blocks):
        structure[f"q{i}"] = tq(c.structure[b[0]])
    return Coalgebra(c.functor, Q, structure), q


# ---------------------------------------------------------------------------
# Canonical depth-bounded tree models (Kripke shape only)


def tree_model(T: FunctorExpr, depth: int, cap: int | None = None) -> Coalgebra:
    """The coalgebra of all labelled set-branching trees of height <= depth.

    Only defined for the Kripke shape Const(V) * P(Id).  The carrier
    grows as |W_0| = |V|, |W_{n+1}| = |V| * 2^|W_n|; distinct trees are
    pairwise non-equivalent, so the result is minimal.
    """
    V = kripke_valuations(T)
    if V is None:
        raise ValueError("tree models are only defined for the shape C{...} * P(Id)")
    if depth < 0:
        raise ValueError("depth must be >= 0")
    limit = enumeration_cap(cap)
    trees: set[tuple[str, frozenset]] = {(v, frozenset()) for v in V}
    for _ in range(depth):
        if len(V) * (2 ** len(trees)) > limit:
            raise EnumerationTooLarge(
                f"enumeration too large: {len(V)}*2^{len(trees)} trees exceeds cap {limit}"
            )
        subsets = [frozenset()]
        for t in sorted(trees, key=_tree_name):
            subsets = subsets + [s | {t} for s in subsets]
        trees = {(v, s) for v in V for s in subsets}
    structure = {}
    for v, s in trees:
        structure[_tree_name((v, s))] = PairV(
            Sym(v), mkset(Ref(_tree_name(t)) for t in s)
        )
    return Coalgebra(T, FinSet(structure.keys()), structure)


def _tree_name(tree: tuple[str, frozenset]) -> str:
    v, children = tree
    return v + "(" + ",".join(sorted(_tree_name(t) for t in children)) + ")"


# ---------------------------------------------------------------------------
# Coalgebra documents


def value_to_json(v: TValue):
    match v:
        case Ref(state):
            return {"id": state}
        case Sym(symbol):
            return {"c": symbol}
        case PairV(a, b):
            return {"pair": [value_to_json(a), value_to_json(b)]}
        case InlV(u):
            return {"inl": value_to_json(u)}
        case InrV(u):
            return {"inr": value_to_json(u)}
        case TableV(entries):
            return {"fun": {c: value_to_json(u) for c, u in entries}}
        case SetV(items):
            return {"set": [value_to_json(u) for u in items]}
        case DistV(entries):
            return {"dist": [[value_to_json(u), _frac_str(w)] for u, w in entries]}
        case NbhdV(members):
            return {"nbhd": [[value_to_json(u) for u in m] for m in members]}
    raise TypeError(f"unknown value {v!r}")


def _frac_str(w: Fraction) -> str:
    return str(w.numerator) if w.denominator == 1 else f"{w.numerator}/{w.denominator}"


def _parse_frac(s: str) -> Fraction:
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as e:
        raise ParseError(f"bad rational literal {s!r}: {e}") from None


def value_from_json(doc) -> TValue:
    if not isinstance(doc, dict) or len(doc) != 1:
        raise ParseError(f"bad value literal: {doc!r}")
    (tag, body), = doc.items()
    match tag:
        case "id":
            return Ref(body)
        case "c":
            return Sym(body)
        case "pair":
            return PairV(value_from_json(body[0]), value_from_json(body[1]))
        case "inl":
            return InlV(value_from_json(body))
        case "inr":
            return InrV(value_from_json(body))
        case "fun":
            return mktable({c: value_from_json(u) for c, u in body.items()})
        case "set":
            return mkset(value_from_json(u) for u in body)
        case "dist":
            return mkdist((value_from_json(u), _parse_frac(w)) for u, w in body)
        case "nbhd":
            return mknbhd([value_from_json(u) for u in m] for m in body)
    raise ParseError(f"unknown value tag {tag!r}")


def coalgebra_to_json(c: Coalgebra) -> dict:
    return {
        "functor": functor_to_text(c.functor),
        "carrier": list(c.carrier),
        "structure": {x: value_to_json(c.structure[x]) for x in c.carrier},
    }


def coalgebra_from_json(doc: dict) -> Coalgebra:
    try:
        functor = parse_functor(doc["functor"])
        carrier = FinSet(doc["carrier"])
        structure = {x: value_from_json(v) for x, v in doc["structure"].items()}
    except KeyError as e:
        raise ParseError(f"missing coalgebra field {e.args[0]!r}") from None
    return Coalgebra(functor, carrier, structure)


def dump_coalgebra(c: Coalgebra) -> str:
    """Canonical document text; load(dump(c)) == c and dumping is
    byte-stable."""
    return json.dumps(coalgebra_to_json(c), indent=2, sort_keys=True) + "\n"


def load_coalgebra(text: str) -> Coalgebra:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"bad document: {e.msg} (line {e.lineno}, column {e.colno})") from None
    return coalgebra_from_json(doc)

