"""Finite Boolean algebras by atoms, homomorphisms, and presentations.

A finite Boolean algebra is represented by its atom set; elements are
int bitmasks over the atoms, so the operations are bit operations and
structural equality is algebra equality.  Homomorphisms between finite
algebras correspond exactly to functions from target atoms to source
atoms (the dual direction), which makes enumeration complete and
duplicate-free.  Presentations by generators and relations are realized
by enumerating the relation-respecting 0/1 assignments: the resulting
algebra has one atom per satisfying assignment.

The finite Stone duality lives here as well: the spectrum of an algebra
is its atom set (equivalently its two-valued homomorphisms), the dual of
a finite set is its powerset algebra, and the evaluation map into the
powerset of the spectrum is the representation embedding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Iterator

from .errors import Cancelled, CapExceeded, ParseError
from .functor import FinFun, FinSet


class FinBA:
    """A finite Boolean algebra, elements encoded as atom bitmasks."""

    __slots__ = ("atoms",)

    def __init__(self, atoms: FinSet):
        self.atoms = atoms

    @property
    def top(self) -> int:
        return (1 << len(self.atoms)) - 1

    bot = 0

    def neg(self, a: int) -> int:
        return self.top ^ a

    def meet(self, a: int, b: int) -> int:
        return a & b

    def join(self, a: int, b: int) -> int:
        return a | b

    def le(self, a: int, b: int) -> bool:
        return a & ~b == 0

    def atom_mask(self, i: int) -> int:
        return 1 << i

    def size(self) -> int:
        return 1 << len(self.atoms)

    def elements(self, cap: int = 1 << 20) -> Iterator[int]:
        if self.size() > cap:
            raise CapExceeded(f"cannot enumerate {self.size()} elements")
        return iter(range(self.size()))

    def coatoms(self) -> list[int]:
        return [self.top ^ (1 << i) for i in range(len(self.atoms))]

    def atom_names(self, mask: int) -> list[str]:
        return [x for i, x in enumerate(self.atoms) if mask >> i & 1]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FinBA) and self.atoms == other.atoms

    def __hash__(self) -> int:
        return hash(self.atoms)

    def __repr__(self) -> str:
        return f"FinBA(atoms={list(self.atoms)})"


TWO = FinBA(FinSet(["*"]))


class BAHom:
    """A Boolean algebra homomorphism, stored by its dual atom function.

    ``dual[j]`` is the index of the source atom that the j-th target atom
    tracks; applying the hom sends an element to the target atoms whose
    tracked source atom lies in it.  Every hom between finite algebras
    arises this way, uniquely.
    """

    __slots__ = ("src", "tgt", "dual")

    def __init__(self, src: FinBA, tgt: FinBA, dual: tuple[int, ...]):
        if len(dual) != len(tgt.atoms):
            raise ValueError("dual function must be total on target atoms")
        for i in dual:
            if not 0 <= i < len(src.atoms):
                raise ValueError(f"bad source atom index {i}")
        self.src = src
        self.tgt = tgt
        self.dual = tuple(dual)

    def __call__(self, a: int) -> int:
        out = 0
        for j, i in enumerate(self.dual):
            if a >> i & 1:
                out |= 1 << j
        return out

    def then(self, g: "BAHom") -> "BAHom":
        """Diagrammatic composition: (f.then(g))(a) = g(f(a))."""
        if self.tgt != g.src:
            raise ValueError("homs are not composable")
        return BAHom(self.src, g.tgt, tuple(self.dual[i] for i in g.dual))

    @staticmethod
    def identity(A: FinBA) -> "BAHom":
        return BAHom(A, A, tuple(range(len(A.atoms))))

    def is_injective(self) -> bool:
        return len(set(self.dual)) == len(self.src.atoms)

    def is_bijective(self) -> bool:
        return self.is_injective() and len(self.tgt.atoms) == len(self.src.atoms)

    def inverse(self) -> "BAHom":
        if not self.is_bijective():
            raise ValueError("hom is not an isomorphism")
        inv = [0] * len(self.src.atoms)
        for j, i in enumerate(self.dual):
            inv[i] = j
        return BAHom(self.tgt, self.src, tuple(inv))

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, BAHom)
            and self.src == other.src
            and self.tgt == other.tgt
            and self.dual == other.dual
        )

    def __hash__(self) -> int:
        return hash((self.src, self.tgt, self.dual))

    def __repr__(self) -> str:
        return f"BAHom(dual={self.dual})"


def hom_set(
    A: FinBA, B: FinBA, cap: int = 1 << 20, cancel=None
) -> list[BAHom]:
    """All homomorphisms A -> B (|atoms A| ^ |atoms B| of them)."""
    n = len(A.atoms) ** len(B.atoms) if len(B.atoms) else 1
    if len(A.atoms) == 0:
        # the trivial algebra maps only to itself
        return [BAHom(A, B, ())] if len(B.atoms) == 0 else []
    if n > cap:
        raise CapExceeded(f"{n} homomorphisms exceed cap {cap}")
    out = []
    for k, dual in enumerate(product(range(len(A.atoms)), repeat=len(B.atoms))):
        if cancel is not None and k % 1024 == 0 and cancel():
            raise Cancelled("homomorphism enumeration cancelled")
        out.append(BAHom(A, B, dual))
    return out


# ---------------------------------------------------------------------------
# Terms and presentations


class BoolTerm:
    __slots__ = ()

    def __str__(self) -> str:
        return term_to_text(self)


@dataclass(frozen=True)
class BTop(BoolTerm):
    pass


@dataclass(frozen=True)
class BBot(BoolTerm):
    pass


@dataclass(frozen=True)
class BVar(BoolTerm):
    name: str


@dataclass(frozen=True)
class BNot(BoolTerm):
    operand: BoolTerm


@dataclass(frozen=True)
class BAnd(BoolTerm):
    left: BoolTerm
    right: BoolTerm


@dataclass(frozen=True)
class BOr(BoolTerm):
    left: BoolTerm
    right: BoolTerm


def eval_term(t: BoolTerm, env: dict[str, int], algebra: FinBA) -> int:
    """Evaluate a term with variables interpreted as algebra elements."""
    match t:
        case BTop():
            return algebra.top
        case BBot():
            return algebra.bot
        case BVar(name):
            return env[name]
        case BNot(a):
            return algebra.neg(eval_term(a, env, algebra))
        case BAnd(a, b):
            return eval_term(a, env, algebra) & eval_term(b, env, algebra)
        case BOr(a, b):
            return eval_term(a, env, algebra) | eval_term(b, env, algebra)
    raise TypeError(f"unknown term {t!r}")


def term_to_text(t: BoolTerm) -> str:
    match t:
        case BTop():
            return "top"
        case BBot():
            return "bot"
        case BVar(name):
            return name
        case BNot(a):
            return "~" + term_to_text(a)
        case BAnd(a, b):
            return f"({term_to_text(a)} & {term_to_text(b)})"
        case BOr(a, b):
            return f"({term_to_text(a)} | {term_to_text(b)})"
    raise TypeError(f"unknown term {t!r}")


def parse_term(text: str) -> BoolTerm:
    """Parse `bot | top | ~t | t & t | t | t | g` with ~ > & > |."""
    pos = 0
    n = len(text)

    def skip():
        nonlocal pos
        while pos < n and text[pos].isspace():
            pos += 1

    def parse_or() -> BoolTerm:
        nonlocal pos
        node = parse_and()
        while True:
            skip()
            if pos < n and text[pos] == "|":
                pos += 1
                node = BOr(node, parse_and())
            else:
                return node

    def parse_and() -> BoolTerm:
        nonlocal pos
        node = parse_unary()
        while True:
            skip()
            if pos < n and text[pos] == "&":
                pos += 1
                node = BAnd(node, parse_unary())
            else:
                return node

    def parse_unary() -> BoolTerm:
        nonlocal pos
        skip()
        if pos < n and text[pos] == "~":
            pos += 1
            return BNot(parse_unary())
        if pos < n and text[pos] == "(":
            pos += 1
            node = parse_or()
            skip()
            if pos >= n or text[pos] != ")":
                raise ParseError("expected ')'", pos)
            pos += 1
            return node
        start = pos
        while pos < n and (text[pos].isalnum() or text[pos] in "_*'"):
            pos += 1
        word = text[start:pos]
        if not word:
            raise ParseError("expected a term", pos)
        if word == "top":
            return BTop()
        if word == "bot":
            return BBot()
        return BVar(word)

    node = parse_or()
    skip()
    if pos != n:
        raise ParseError("trailing input after term", pos)
    return node


@dataclass(frozen=True)
class Presentation:
    """Generators and relations (pairs of terms identified)."""

    generators: FinSet
    relations: tuple[tuple[BoolTerm, BoolTerm], ...]

    def __post_init__(self):
        for s, t in self.relations:
            for term in (s, t):
                _check_vars(term, self.generators)


def _check_vars(t: BoolTerm, generators: FinSet) -> None:
    match t:
        case BVar(name):
            if name not in generators:
                raise ValueError(f"unknown generator {name!r}")
        case BNot(a):
            _check_vars(a, generators)
        case BAnd(a, b) | BOr(a, b):
            _check_vars(a, generators)
            _check_vars(b, generators)
        case _:
            pass


def realize(
    p: Presentation, generator_cap: int = 20, cancel=None
) -> tuple[FinBA, dict[str, int]]:
    """The algebra presented by generators and relations.

    Atoms are the 0/1 assignments of the generators satisfying every
    relation; the returned dict interprets each generator as the set of
    assignments mapping it to 1.  Satisfies the universal property: a
    relation-respecting valuation of the generators into any finite
    algebra extends to a unique homomorphism.
    """
    gens = list(p.generators)
    if len(gens) > generator_cap:
        raise CapExceeded(f"{len(gens)} generators exceed cap {generator_cap}")
    satisfying: list[int] = []
    for bits in range(1 << len(gens)):
        if cancel is not None and bits % 1024 == 0 and cancel():
            raise Cancelled("assignment enumeration cancelled")
        env = {g: (1 if bits >> i & 1 else 0) for i, g in enumerate(gens)}
        if all(
            eval_term(s, env, TWO) == eval_term(t, env, TWO) for s, t in p.relations
        ):
            satisfying.append(bits)
    names = ["m" + "".join(str(bits >> i & 1) for i in range(len(gens))) for bits in satisfying]
    algebra = FinBA(FinSet(names))
    order = {name: j for j, name in enumerate(algebra.atoms)}
    interp = {g: 0 for g in gens}
    for bits, name in zip(satisfying, names):
        for i, g in enumerate(gens):
            if bits >> i & 1:
                interp[g] |= 1 << order[name]
    return algebra, interp


def respects_relations(p: Presentation, val: dict[str, int], B: FinBA) -> bool:
    return all(eval_term(s, val, B) == eval_term(t, val, B) for s, t in p.relations)


def extensions_of_valuation(
    p: Presentation, interp: dict[str, int], A: FinBA, val: dict[str, int], B: FinBA
) -> list[BAHom]:
    """All homs A -> B sending each realized generator to its valuation."""
    return [
        h for h in hom_set(A, B) if all(h(interp[g]) == val[g] for g in p.generators)
    ]


# ---------------------------------------------------------------------------
# Finite Stone duality


def spectrum(A: FinBA) -> FinSet:
    """The point set of A: canonically its atoms."""
    return A.atoms


def spectrum_points(A: FinBA) -> list[BAHom]:
    """The same points as two-valued homomorphisms, aligned with atoms."""
    return [BAHom(A, TWO, (i,)) for i in range(len(A.atoms))]


def powerset_algebra(X: FinSet) -> FinBA:
    return FinBA(X)


def representation_map(A: FinBA) -> BAHom:
    """The evaluation map of A into the powerset of its spectrum: an
    element goes to the set of points sending it to 1.  Injective (and,
    finitely, bijective)."""
    points = spectrum_points(A)
    P = powerset_algebra(spectrum(A))
    dual = []
    for j in range(len(P.atoms)):
        # the point p_j tracks the unique atom it maps to 1
        hits = [i for i in range(len(A.atoms)) if points[j](A.atom_mask(i)) == TWO.top]
        assert len(hits) == 1
        dual.append(hits[0])
    return BAHom(A, P, tuple(dual))


def spectrum_of_hom(h: BAHom) -> FinFun:
    """The dual action on points: a point of the target composes to a
    point of the source (inverse image on spectra)."""
    src_pts, tgt_pts = spectrum(h.src), spectrum(h.tgt)
    mapping = {}
    for j, name in enumerate(tgt_pts):
        mapping[name] = src_pts.elements[h.dual[j]]
    return FinFun(tgt_pts, src_pts, mapping)


def powerset_of_fun(f: FinFun) -> BAHom:
    """The dual action on subsets: inverse image as a homomorphism
    P(cod f) -> P(dom f)."""
    PY, PX = powerset_algebra(f.cod), powerset_algebra(f.dom)
    dual = tuple(f.cod.index(f(x)) for x in f.dom)
    return BAHom(PY, PX, dual)


@dataclass
class DualityReport:
    algebra_iso: BAHom  # A -> P(S A)
    point_bijection: dict[str, str]  # X -> S(P X)
    ok: bool


def duality_isos(A: FinBA, X: FinSet, element_cap: int = 1 << 20) -> DualityReport:
    """Construct and verify the two finite duality isomorphisms."""
    hat = representation_map(A)
    ok = hat.is_bijective()
    if ok and A.size() <= element_cap:
        seen = set()
        for a in A.elements(element_cap):
            img = hat(a)
            ok = ok and img not in seen
            seen.add(img)
        ok = ok and len(seen) == A.size()
    # X -> S(P X): an element goes to the singleton atom it names
    SPX = spectrum(powerset_algebra(X))
    bij = {x: SPX.elements[X.index(x)] for x in X}
    ok = ok and sorted(bij.values()) == list(SPX.elements)
    return DualityReport(hat, bij, ok)


# ---------------------------------------------------------------------------
# Coproducts and modal algebras


def ba_coproduct(A: FinBA, B: FinBA) -> tuple[FinBA, BAHom, BAHom]:
    """The coproduct algebra: atoms are pairs of atoms, injections track
    the projections."""
    names = [f"{a}&{b}" for a in A.atoms for b in B.atoms]
    C = FinBA(FinSet(names))
    pair_of = {}
    for i, a in enumerate(A.atoms):
        for j, b in enumerate(B.atoms):
            pair_of[f"{a}&{b}"] = (i, j)
    dual1, dual2 = [], []
    for name in C.atoms:
        i, j = pair_of[name]
        dual1.append(i)
        dual2.append(j)
    return C, BAHom(A, C, tuple(dual1)), BAHom(B, C, tuple(dual2))


class ModalAlgebra:
    """A finite Boolean algebra with a box operation preserving finite
    meets (box top = top, box(a & b) = box a & box b)."""

    __slots__ = ("base", "box_table", "letters")

    def __init__(self, base: FinBA, box_table: dict[int, int], letters: dict[str, int] | None = None):
        if box_table.get(base.top) != base.top:
            raise ValueError("box does not preserve top")
        coatoms = base.coatoms()
        for a in base.elements():
            expect = base.top
            for c in coatoms:
                if base.le(a, c):
                    expect &= box_table[c]
            if box_table.get(a) != expect:
                raise ValueError(f"box does not preserve meets (element {a})")
        self.base = base
        self.box_table = dict(box_table)
        self.letters = dict(letters or {})

    def box(self, a: int) -> int:
        return self.box_table[a]

    def dia(self, a: int) -> int:
        return self.base.neg(self.box(self.base.neg(a)))


def meet_preserving_self_maps(A: FinBA, cap: int = 1 << 20) -> list[tuple[int, ...]]:
    """All meet-preserving self-maps of A, as full tables indexed by
    element mask.

    A meet-preserving map is determined freely by its values on the
    coatoms: the value at any element is the meet of the values at the
    coatoms above it (and top goes to top).
    """
    coatoms = A.coatoms()
    count = A.size() ** len(coatoms) if coatoms else 1
    if count > cap:
        raise CapExceeded(f"{count} meet-preserving maps exceed cap {cap}")
    out = []
    for values in product(range(A.size()), repeat=len(coatoms)):
        table = []
        for a in range(A.size()):
            v = A.top
            for c, fc in zip(coatoms, values):
                if A.le(a, c):
                    v &= fc
            table.append(v)
        out.append(tuple(table))
    return out


def meet_preserving_self_maps_bruteforce(A: FinBA) -> list[tuple[int, ...]]:
    """Filter all |A|^|A| self-maps by the two equations; tiny A only."""
    size = A.size()
    if size ** size > 1 << 22:
        raise CapExceeded("algebra too large for the brute-force enumeration")
    out = []
    for table in product(range(size), repeat=size):
        if table[A.top] != A.top:
            continue
        if all(table[a & b] == table[a] & table[b] for a in range(size) for b in range(size)):
            out.append(table)
    return out


# ---------------------------------------------------------------------------
# Presentation documents


def load_presentation(text: str) -> Presentation:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"bad document: {e.msg} (line {e.lineno}, column {e.colno})") from None
    try:
        gens = FinSet(doc["generators"])
        rels = tuple(
            (parse_term(s), parse_term(t)) for s, t in doc["relations"]
        )
    except KeyError as e:
        raise ParseError(f"missing presentation field {e.args[0]!r}") from None
    return Presentation(gens, rels)


def dump_presentation(p: Presentation) -> str:
    doc = {
        "generators": list(p.generators),
        "relations": [[term_to_text(s), term_to_text(t)] for s, t in p.relations],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def free_presentation(names: Iterable[str]) -> Presentation:
    return Presentation(FinSet(names), ())
