"""Finite sets, finite functions, and a grammar of set functors.

A functor expression denotes a type constructor built from the identity,
constants, binary products and coproducts, finite exponents, finite
powerset, finitely-supported rational distributions, and double
contravariant powerset (neighborhood) nodes.  Every expression acts both
on finite sets (:func:`apply_on_set` enumerates ``T X``) and on finite
functions (:func:`apply_on_fun` yields ``T f``), and the functor laws can
be checked exhaustively at small sizes (:func:`check_functor_laws`).

Concrete values of shape ``T`` over a carrier are :class:`TValue` trees.
They are canonicalized on construction (sorted set members, reduced
rational weights, zero weights dropped) so that structural equality is
semantic equality and enumerations are deterministic.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Callable, Iterable, Iterator

from .errors import EnumerationTooLarge, ParseError, ShapeError

Rational = Fraction

DEFAULT_CAP = 1 << 20


def enumeration_cap(cap: int | None = None) -> int:
    """The active cardinality cap: explicit arg, else COALG_CAP, else 2^20."""
    if cap is not None:
        return cap
    env = os.environ.get("COALG_CAP")
    return int(env) if env else DEFAULT_CAP


# ---------------------------------------------------------------------------
# Finite sets and functions


class FinSet:
    """An ordered finite set of opaque string identifiers.

    Elements are stored in lexicographic order, so structurally equal sets
    compare equal and iteration order is canonical.
    """

    __slots__ = ("elements", "_index")

    def __init__(self, elements: Iterable[str]):
        elems = tuple(sorted(elements))
        for a, b in zip(elems, elems[1:]):
            if a == b:
                raise ValueError(f"duplicate element {a!r}")
        self.elements = elems
        self._index = {x: i for i, x in enumerate(elems)}

    def __iter__(self) -> Iterator[str]:
        return iter(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, x: object) -> bool:
        return x in self._index

    def index(self, x: str) -> int:
        return self._index[x]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FinSet) and self.elements == other.elements

    def __hash__(self) -> int:
        return hash(self.elements)

    def __repr__(self) -> str:
        return f"FinSet({list(self.elements)!r})"


class FinFun:
    """A total function between two finite sets."""

    __slots__ = ("dom", "cod", "mapping")

    def __init__(self, dom: FinSet, cod: FinSet, mapping: dict[str, str]):
        for x in dom:
            if x not in mapping:
                raise ValueError(f"no image for {x!r}")
            if mapping[x] not in cod:
                raise ValueError(f"image {mapping[x]!r} of {x!r} not in codomain")
        if set(mapping) != set(dom.elements):
            extra = set(mapping) - set(dom.elements)
            raise ValueError(f"mapping defined outside domain: {sorted(extra)}")
        self.dom = dom
        self.cod = cod
        self.mapping = dict(mapping)

    def __call__(self, x: str) -> str:
        return self.mapping[x]

    @staticmethod
    def identity(X: FinSet) -> "FinFun":
        return FinFun(X, X, {x: x for x in X})

    def then(self, g: "FinFun") -> "FinFun":
        """Diagrammatic composition: (f.then(g))(x) = g(f(x))."""
        if self.cod != g.dom:
            raise ValueError("functions are not composable")
        return FinFun(self.dom, g.cod, {x: g(self(x)) for x in self.dom})

    def is_injective(self) -> bool:
        return len(set(self.mapping.values())) == len(self.dom)

    def preimage(self, ys: Iterable[str]) -> frozenset[str]:
        ys = set(ys)
        return frozenset(x for x in self.dom if self.mapping[x] in ys)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, FinFun)
            and self.dom == other.dom
            and self.cod == other.cod
            and self.mapping == other.mapping
        )

    def __hash__(self) -> int:
        return hash((self.dom, self.cod, tuple(sorted(self.mapping.items()))))

    def __repr__(self) -> str:
        return f"FinFun({self.mapping!r})"


def all_functions(X: FinSet, Y: FinSet) -> Iterator[FinFun]:
    """Every total function X -> Y (|Y|^|X| of them)."""
    if len(X) == 0:
        yield FinFun(X, Y, {})
        return
    for images in product(Y.elements, repeat=len(X)):
        yield FinFun(X, Y, dict(zip(X.elements, images)))


# ---------------------------------------------------------------------------
# Functor expressions


class FunctorExpr:
    """Base class of functor-expression nodes."""

    __slots__ = ()

    def __str__(self) -> str:
        return functor_to_text(self)


@dataclass(frozen=True)
class IdF(FunctorExpr):
    pass


@dataclass(frozen=True)
class ConstF(FunctorExpr):
    alphabet: FinSet

    def __post_init__(self):
        if len(self.alphabet) == 0:
            raise ValueError("constant functor needs a nonempty alphabet")


@dataclass(frozen=True)
class ProdF(FunctorExpr):
    left: FunctorExpr
    right: FunctorExpr


@dataclass(frozen=True)
class CoprodF(FunctorExpr):
    left: FunctorExpr
    right: FunctorExpr


@dataclass(frozen=True)
class ExpF(FunctorExpr):
    base: FunctorExpr
    alphabet: FinSet

    def __post_init__(self):
        if len(self.alphabet) == 0:
            raise ValueError("exponent needs a nonempty alphabet")


@dataclass(frozen=True)
class PowF(FunctorExpr):
    inner: FunctorExpr


@dataclass(frozen=True)
class DistF(FunctorExpr):
    inner: FunctorExpr


@dataclass(frozen=True)
class NbhdF(FunctorExpr):
    inner: FunctorExpr


UNIT = ConstF(FinSet(["*"]))  # the one-element constant used for "may stop"


def kripke_functor(valuations: Iterable[str]) -> FunctorExpr:
    """The labelled-powerset shape Const(V) * P(Id)."""
    return ProdF(ConstF(FinSet(valuations)), PowF(IdF()))


def kripke_valuations(T: FunctorExpr) -> FinSet | None:
    """The valuation alphabet if T is of Kripke shape, else None."""
    if (
        isinstance(T, ProdF)
        and isinstance(T.left, ConstF)
        and isinstance(T.right, PowF)
        and isinstance(T.right.inner, IdF)
    ):
        return T.left.alphabet
    return None


def contains_dist(T: FunctorExpr) -> bool:
    match T:
        case DistF(_):
            return True
        case ProdF(l, r) | CoprodF(l, r):
            return contains_dist(l) or contains_dist(r)
        case ExpF(base, _):
            return contains_dist(base)
        case PowF(inner) | NbhdF(inner):
            return contains_dist(inner)
        case _:
            return False


# ---------------------------------------------------------------------------
# Values


class TValue:
    """Base class of concrete elements of ``T X``."""

    __slots__ = ()

    def key(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Ref(TValue):
    """A reference to a carrier element (the Id shape)."""

    state: str

    def key(self):
        return (0, self.state)


@dataclass(frozen=True)
class Sym(TValue):
    """A constant symbol drawn from a Const alphabet."""

    symbol: str

    def key(self):
        return (1, self.symbol)


@dataclass(frozen=True)
class PairV(TValue):
    left: TValue
    right: TValue

    def key(self):
        return (2, self.left.key(), self.right.key())


@dataclass(frozen=True)
class InlV(TValue):
    value: TValue

    def key(self):
        return (3, self.value.key())


@dataclass(frozen=True)
class InrV(TValue):
    value: TValue

    def key(self):
        return (4, self.value.key())


@dataclass(frozen=True)
class TableV(TValue):
    """A finite table indexed by an exponent alphabet, entries sorted."""

    entries: tuple[tuple[str, TValue], ...]

    def __getitem__(self, symbol: str) -> TValue:
        for c, v in self.entries:
            if c == symbol:
                return v
        raise KeyError(symbol)

    def key(self):
        return (5, tuple((c, v.key()) for c, v in self.entries))


@dataclass(frozen=True)
class SetV(TValue):
    """A finite set of values, duplicate-free and canonically sorted."""

    items: tuple[TValue, ...]

    def key(self):
        return (6, tuple(v.key() for v in self.items))


@dataclass(frozen=True)
class DistV(TValue):
    """A rational probability distribution with finite support.

    Entries are (value, weight) pairs sorted by value; weights are
    positive reduced rationals summing to exactly 1.
    """

    entries: tuple[tuple[TValue, Fraction], ...]

    def weight(self, v: TValue) -> Fraction:
        for u, w in self.entries:
            if u == v:
                return w
        return Fraction(0)

    def key(self):
        return (7, tuple((v.key(), (w.numerator, w.denominator)) for v, w in self.entries))


@dataclass(frozen=True)
class NbhdV(TValue):
    """A set of sets of values (a neighborhood collection)."""

    members: tuple[tuple[TValue, ...], ...]

    def member_sets(self) -> set[frozenset[TValue]]:
        return {frozenset(m) for m in self.members}

    def key(self):
        return (8, tuple(tuple(v.key() for v in m) for m in self.members))


def mkset(items: Iterable[TValue]) -> SetV:
    uniq = {v.key(): v for v in items}
    return SetV(tuple(uniq[k] for k in sorted(uniq)))


def mktable(entries: dict[str, TValue]) -> TableV:
    return TableV(tuple(sorted(entries.items())))


def mkdist(pairs: Iterable[tuple[TValue, Fraction]]) -> DistV:
    acc: dict = {}
    vals: dict = {}
    for v, w in pairs:
        k = v.key()
        acc[k] = acc.get(k, Fraction(0)) + Fraction(w)
        vals[k] = v
    total = sum(acc.values(), Fraction(0))
    if total != 1:
        raise ValueError(f"distribution weights sum to {total}, not 1")
    entries = []
    for k in sorted(acc):
        w = acc[k]
        if w < 0 or w > 1:
            raise ValueError(f"weight {w} outside [0, 1]")
        if w != 0:
            entries.append((vals[k], w))
    return DistV(tuple(entries))


def mknbhd(members: Iterable[Iterable[TValue]]) -> NbhdV:
    canon = {}
    for m in members:
        s = mkset(m)
        canon[s.key()] = s.items
    return NbhdV(tuple(canon[k] for k in sorted(canon)))


def check_value(T: FunctorExpr, v: TValue, X: FinSet, path: str = "") -> None:
    """Raise ShapeError unless v is a well-shaped element of T X."""
    match T, v:
        case IdF(), Ref(state):
            if state not in X:
                raise ShapeError(f"unknown carrier element {state!r}", path)
        case ConstF(alphabet), Sym(symbol):
            if symbol not in alphabet:
                raise ShapeError(f"symbol {symbol!r} not in alphabet", path)
        case ProdF(l, r), PairV(a, b):
            check_value(l, a, X, path + "pair.0.")
            check_value(r, b, X, path + "pair.1.")
        case CoprodF(l, _), InlV(a):
            check_value(l, a, X, path + "inl.")
        case CoprodF(_, r), InrV(b):
            check_value(r, b, X, path + "inr.")
        case ExpF(base, alphabet), TableV(entries):
            keys = tuple(c for c, _ in entries)
            if keys != alphabet.elements:
                raise ShapeError(
                    f"table keys {list(keys)} do not match alphabet {list(alphabet)}", path
                )
            for c, u in entries:
                check_value(base, u, X, path + f"fun[{c}].")
        case PowF(inner), SetV(items):
            for i, u in enumerate(items):
                check_value(inner, u, X, path + f"set[{i}].")
        case DistF(inner), DistV(entries):
            total = Fraction(0)
            for i, (u, w) in enumerate(entries):
                check_value(inner, u, X, path + f"dist[{i}].")
                if w <= 0 or w > 1:
                    raise ShapeError(f"weight {w} outside (0, 1]", path + f"dist[{i}]")
                total += w
            if total != 1:
                raise ShapeError(f"weights sum to {total}, not 1", path)
        case NbhdF(inner), NbhdV(members):
            for i, m in enumerate(members):
                for j, u in enumerate(m):
                    check_value(inner, u, X, path + f"nbhd[{i}][{j}].")
        case _:
            raise ShapeError(
                f"value {type(v).__name__} does not fit functor node {type(T).__name__}", path
            )


# ---------------------------------------------------------------------------
# Action on sets


def functor_size(T: FunctorExpr, n: int, dist_bound: int | None = None) -> int:
    """|T X| for |X| = n (Dist counted at the given denominator bound)."""
    match T:
        case IdF():
            return n
        case ConstF(alphabet):
            return len(alphabet)
        case ProdF(l, r):
            return functor_size(l, n, dist_bound) * functor_size(r, n, dist_bound)
        case CoprodF(l, r):
            return functor_size(l, n, dist_bound) + functor_size(r, n, dist_bound)
        case ExpF(base, alphabet):
            return functor_size(base, n, dist_bound) ** len(alphabet)
        case PowF(inner):
            s = functor_size(inner, n, dist_bound)
            if s > 64:
                raise EnumerationTooLarge(f"enumeration too large: 2^{s} values")
            return 1 << s
        case DistF(inner):
            if dist_bound is None:
                raise EnumerationTooLarge(
                    "enumeration too large: distributions need a denominator bound"
                )
            s = functor_size(inner, n, dist_bound)
            return math.comb(dist_bound + s - 1, s - 1) if s > 0 else 0
        case NbhdF(inner):
            s = functor_size(inner, n, dist_bound)
            if s > 6:
                raise EnumerationTooLarge(f"enumeration too large: 2^2^{s} values")
            return 1 << (1 << s)
    raise TypeError(f"unknown functor node {T!r}")


def apply_on_set(
    T: FunctorExpr,
    X: FinSet,
    dist_bound: int | None = None,
    cap: int | None = None,
) -> list[TValue]:
    """Enumerate every value of shape T over X, canonically ordered.

    Dist nodes enumerate the distributions whose weights have denominator
    dividing ``dist_bound``.  Raises EnumerationTooLarge when the result
    would exceed the cardinality cap.
    """
    limit = enumeration_cap(cap)
    size = functor_size(T, len(X), dist_bound)
    if size > limit:
        raise EnumerationTooLarge(f"enumeration too large: {size} values exceeds cap {limit}")
    return _enumerate(T, X, dist_bound)


def _enumerate(T: FunctorExpr, X: FinSet, d: int | None) -> list[TValue]:
    match T:
        case IdF():
            return [Ref(x) for x in X]
        case ConstF(alphabet):
            return [Sym(c) for c in alphabet]
        case ProdF(l, r):
            ls, rs = _enumerate(l, X, d), _enumerate(r, X, d)
            return [PairV(a, b) for a in ls for b in rs]
        case CoprodF(l, r):
            return [InlV(a) for a in _enumerate(l, X, d)] + [
                InrV(b) for b in _enumerate(r, X, d)
            ]
        case ExpF(base, alphabet):
            vs = _enumerate(base, X, d)
            out = []
            for row in product(vs, repeat=len(alphabet)):
                out.append(mktable(dict(zip(alphabet.elements, row))))
            return out
        case PowF(inner):
            vs = _enumerate(inner, X, d)
            out = []
            for mask in range(1 << len(vs)):
                out.append(mkset(v for i, v in enumerate(vs) if mask >> i & 1))
            return sorted(out, key=lambda v: v.key())
        case DistF(inner):
            if d is None:
                raise EnumerationTooLarge(
                    "enumeration too large: distributions need a denominator bound"
                )
            vs = _enumerate(inner, X, d)
            out = []
            for weights in _compositions(d, len(vs)):
                out.append(
                    mkdist(
                        (v, Fraction(k, d)) for v, k in zip(vs, weights) if k
                    )
                )
            return sorted(out, key=lambda v: v.key())
        case NbhdF(inner):
            vs = _enumerate(inner, X, d)
            subsets = []
            for mask in range(1 << len(vs)):
                subsets.append(tuple(v for i, v in enumerate(vs) if mask >> i & 1))
            out = []
            for mask in range(1 << len(subsets)):
                out.append(mknbhd(s for i, s in enumerate(subsets) if mask >> i & 1))
            return sorted(out, key=lambda v: v.key())
    raise TypeError(f"unknown functor node {T!r}")


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All tuples of `parts` nonnegative ints summing to `total`."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


# ---------------------------------------------------------------------------
# Action on functions


def apply_on_fun(
    T: FunctorExpr,
    f: FinFun,
    dist_bound: int | None = None,
    cap: int | None = None,
) -> Callable[[TValue], TValue]:
    """The function T f : T X -> T Y as a mapper over values.

    Powerset nodes take direct images, distributions push forward along
    fibers, and neighborhoods map N to {B | (T'f)^-1(B) in N}, which
    requires enumerating the inner shape over both carriers.
    """
    nbhd_tables: dict[int, tuple] = {}

    def prepare(node: FunctorExpr) -> None:
        match node:
            case NbhdF(inner):
                prepare(inner)
                dom_vals = apply_on_set(inner, f.dom, dist_bound, cap)
                cod_vals = apply_on_set(inner, f.cod, dist_bound, cap)
                if len(cod_vals) > 20:
                    raise EnumerationTooLarge(
                        f"enumeration too large: 2^{len(cod_vals)} neighborhood members"
                    )
                dom_index = {u: i for i, u in enumerate(dom_vals)}
                cod_index = {u: j for j, u in enumerate(cod_vals)}
                # dom-elements hitting each codomain value, as a bitmask
                fiber = [0] * len(cod_vals)
                for i, u in enumerate(dom_vals):
                    fiber[cod_index[go(inner, u)]] |= 1 << i
                # preimage mask of every codomain subset, by peeling low bits
                pre = [0] * (1 << len(cod_vals))
                for mask in range(1, len(pre)):
                    low = mask & -mask
                    pre[mask] = pre[mask ^ low] | fiber[low.bit_length() - 1]
                nbhd_tables[id(node)] = (dom_index, cod_vals, pre)
            case ProdF(l, r) | CoprodF(l, r):
                prepare(l)
                prepare(r)
            case ExpF(base, _):
                prepare(base)
            case PowF(inner) | DistF(inner):
                prepare(inner)
            case _:
                pass

    def go(node: FunctorExpr, v: TValue) -> TValue:
        match node, v:
            case IdF(), Ref(state):
                return Ref(f(state))
            case ConstF(_), Sym(_):
                return v
            case ProdF(l, r), PairV(a, b):
                return PairV(go(l, a), go(r, b))
            case CoprodF(l, _), InlV(a):
                return InlV(go(l, a))
            case CoprodF(_, r), InrV(b):
                return InrV(go(r, b))
            case ExpF(base, _), TableV(entries):
                return TableV(tuple((c, go(base, u)) for c, u in entries))
            case PowF(inner), SetV(items):
                return mkset(go(inner, u) for u in items)
            case DistF(inner), DistV(entries):
                return mkdist((go(inner, u), w) for u, w in entries)
            case NbhdF(_), NbhdV(members):
                dom_index, cod_vals, pre = nbhd_tables[id(node)]
                member_masks = set()
                for m in members:
                    mm = 0
                    for u in m:
                        mm |= 1 << dom_index[u]
                    member_masks.add(mm)
                out = []
                for mask, premask in enumerate(pre):
                    if premask in member_masks:
                        out.append(
                            tuple(cod_vals[j] for j in range(len(cod_vals)) if mask >> j & 1)
                        )
                return mknbhd(out)
        raise ShapeError(
            f"value {type(v).__name__} does not fit functor node {type(node).__name__}"
        )

    prepare(T)

    def mapper(v: TValue) -> TValue:
        return go(T, v)

    return mapper


@dataclass
class LawReport:
    """Result of a functor-law check, with any counterexamples found."""

    identity_ok: bool
    composition_ok: bool
    identity_failures: list[TValue]
    composition_failures: list[TValue]

    @property
    def ok(self) -> bool:
        return self.identity_ok and self.composition_ok


def check_functor_laws(
    T: FunctorExpr,
    X: FinSet,
    Y: FinSet,
    Z: FinSet,
    f: FinFun,
    g: FinFun,
    dist_bound: int | None = None,
    cap: int | None = None,
) -> LawReport:
    """Check T(id) = id on T X and T(g.f) = T g . T f pointwise on T X."""
    if f.dom != X or f.cod != Y or g.dom != Y or g.cod != Z:
        raise ValueError("expected f : X -> Y and g : Y -> Z")
    values = apply_on_set(T, X, dist_bound, cap)
    t_id = apply_on_fun(T, FinFun.identity(X), dist_bound, cap)
    t_f = apply_on_fun(T, f, dist_bound, cap)
    t_g = apply_on_fun(T, g, dist_bound, cap)
    t_gf = apply_on_fun(T, f.then(g), dist_bound, cap)
    id_bad = [v for v in values if t_id(v) != v]
    comp_bad = [v for v in values if t_gf(v) != t_g(t_f(v))]
    return LawReport(not id_bad, not comp_bad, id_bad, comp_bad)


# ---------------------------------------------------------------------------
# The specific iso P(C x X) ~ (P X)^C

def labelled_pow_to_table(v: TValue, alphabet: FinSet) -> TValue:
    """Convert a P(Const C * Id) value to the equivalent (P Id)^C table."""
    if not isinstance(v, SetV):
        raise ShapeError("expected a set of (label, state) pairs")
    buckets: dict[str, list[TValue]] = {c: [] for c in alphabet}
    for item in v.items:
        if not (isinstance(item, PairV) and isinstance(item.left, Sym)):
            raise ShapeError("expected (label, state) pairs inside the set")
        buckets[item.left.symbol].append(item.right)
    return mktable({c: mkset(us) for c, us in buckets.items()})


def table_to_labelled_pow(v: TValue, alphabet: FinSet) -> TValue:
    """Convert a (P Id)^C table to the equivalent P(Const C * Id) value."""
    if not isinstance(v, TableV):
        raise ShapeError("expected a table of successor sets")
    pairs = []
    for c, s in v.entries:
        if c not in alphabet:
            raise ShapeError(f"unexpected table key {c!r}")
        if not isinstance(s, SetV):
            raise ShapeError("expected successor sets as table entries")
        pairs.extend(PairV(Sym(c), u) for u in s.items)
    return mkset(pairs)


# ---------------------------------------------------------------------------
# Concrete syntax: Id | C{a,b} | F * G | F + G | F^{a,b} | P(F) | D(F) | N(F)


def functor_to_text(T: FunctorExpr) -> str:
    """Render with minimal parentheses; `*` binds tighter than `+`,
    exponents tightest."""

    def render(node: FunctorExpr, level: int) -> str:
        match node:
            case IdF():
                return "Id"
            case ConstF(alphabet):
                return "C{" + ",".join(alphabet) + "}"
            case PowF(inner):
                return f"P({render(inner, 0)})"
            case DistF(inner):
                return f"D({render(inner, 0)})"
            case NbhdF(inner):
                return f"N({render(inner, 0)})"
            case ExpF(base, alphabet):
                s = render(base, 2) + "^{" + ",".join(alphabet) + "}"
                return s
            case ProdF(l, r):
                s = f"{render(l, 1)} * {render(r, 2)}"
                return f"({s})" if level >= 2 else s
            case CoprodF(l, r):
                s = f"{render(l, 0)} + {render(r, 1)}"
                return f"({s})" if level >= 1 else s
        raise TypeError(f"unknown functor node {node!r}")

    return render(T, 0)


def parse_functor(text: str) -> FunctorExpr:
    """Parse the concrete functor syntax; inverse of functor_to_text."""
    pos = 0
    n = len(text)

    def skip_ws():
        nonlocal pos
        while pos < n and text[pos].isspace():
            pos += 1

    def peek() -> str:
        skip_ws()
        return text[pos] if pos < n else ""

    def expect(ch: str):
        nonlocal pos
        skip_ws()
        if pos >= n or text[pos] != ch:
            raise ParseError(f"expected {ch!r}", pos)
        pos += 1

    def parse_alphabet() -> FinSet:
        nonlocal pos
        expect("{")
        elems = []
        current = []
        while True:
            if pos >= n:
                raise ParseError("unterminated alphabet", pos)
            ch = text[pos]
            if ch == "}":
                pos += 1
                break
            if ch == ",":
                pos += 1
                word = "".join(current).strip()
                if not word:
                    raise ParseError("empty alphabet element", pos)
                elems.append(word)
                current = []
            else:
                current.append(ch)
                pos += 1
        word = "".join(current).strip()
        if word:
            elems.append(word)
        if not elems:
            raise ParseError("empty alphabet", pos)
        return FinSet(elems)

    def parse_sum() -> FunctorExpr:
        node = parse_product()
        while peek() == "+":
            expect("+")
            node = CoprodF(node, parse_product())
        return node

    def parse_product() -> FunctorExpr:
        node = parse_exponent()
        while peek() == "*":
            expect("*")
            node = ProdF(node, parse_exponent())
        return node

    def parse_exponent() -> FunctorExpr:
        node = parse_atom()
        while peek() == "^":
            expect("^")
            node = ExpF(node, parse_alphabet())
        return node

    def parse_atom() -> FunctorExpr:
        nonlocal pos
        skip_ws()
        if pos >= n:
            raise ParseError("unexpected end of functor expression", pos)
        ch = text[pos]
        if ch == "(":
            expect("(")
            node = parse_sum()
            expect(")")
            return node
        if text.startswith("Id", pos):
            pos += 2
            return IdF()
        if ch == "C":
            pos += 1
            return ConstF(parse_alphabet())
        if ch in "PDN":
            pos += 1
            expect("(")
            inner = parse_sum()
            expect(")")
            return {"P": PowF, "D": DistF, "N": NbhdF}[ch](inner)
        raise ParseError(f"unexpected character {ch!r}", pos)

    node = parse_sum()
    skip_ws()
    if pos != n:
        raise ParseError("trailing input after functor expression", pos)
    return node
