"""Seeded random coalgebras and formulas for the property suites.

The coalgebra generator draws functor shapes from the standard zoo
(streams, lists, deterministic automata, labelled transition systems in
both encodings, probabilistic systems, neighborhood frames) plus plain
powerset, with small carriers and small exact weights.
"""

from __future__ import annotations

from fractions import Fraction
from random import Random

from .coalgebra import Coalgebra
from .functor import (
    ConstF,
    CoprodF,
    DistF,
    ExpF,
    FinSet,
    FunctorExpr,
    IdF,
    InlV,
    InrV,
    NbhdF,
    PairV,
    PowF,
    ProdF,
    Ref,
    Sym,
    TValue,
    UNIT,
    mkdist,
    mknbhd,
    mkset,
    mktable,
)
from .logic import (
    And,
    At,
    Box,
    ConstEq,
    Dia,
    Embed,
    Formula,
    Implies,
    InL,
    InR,
    IsL,
    IsR,
    NbhdBox,
    Next,
    Not,
    OAnd,
    OBot,
    OImplies,
    ONot,
    OOr,
    OTop,
    OneStep,
    Or,
    Pi1,
    Pi2,
    PrGeq,
    Bot,
    Top,
)


def functor_zoo() -> list[FunctorExpr]:
    """The table of standard shapes the random corpus draws from."""
    C = FinSet(["a", "b"])
    two = FinSet(["0", "1"])
    return [
        ProdF(ConstF(C), IdF()),  # streams
        CoprodF(ProdF(ConstF(C), IdF()), UNIT),  # finite or infinite lists
        ProdF(ConstF(two), ExpF(IdF(), C)),  # deterministic automata
        PowF(ProdF(ConstF(C), IdF())),  # labelled transition systems
        ExpF(PowF(IdF()), C),  # ... in the exponent encoding
        ExpF(CoprodF(UNIT, DistF(IdF())), C),  # probabilistic systems
        NbhdF(IdF()),  # neighborhood frames
        PowF(IdF()),  # plain transition systems
    ]


def random_value(
    T: FunctorExpr, X: FinSet, rng: Random, dist_bound: int = 4
) -> TValue:
    match T:
        case IdF():
            return Ref(rng.choice(X.elements))
        case ConstF(alphabet):
            return Sym(rng.choice(alphabet.elements))
        case ProdF(l, r):
            return PairV(
                random_value(l, X, rng, dist_bound), random_value(r, X, rng, dist_bound)
            )
        case CoprodF(l, r):
            if rng.random() < 0.5:
                return InlV(random_value(l, X, rng, dist_bound))
            return InrV(random_value(r, X, rng, dist_bound))
        case ExpF(base, alphabet):
            return mktable(
                {c: random_value(base, X, rng, dist_bound) for c in alphabet}
            )
        case PowF(inner):
            out = []
            for _ in range(rng.randrange(0, max(2, len(X)) + 1)):
                out.append(random_value(inner, X, rng, dist_bound))
            return mkset(out)
        case DistF(inner):
            d = rng.randrange(1, dist_bound + 1)
            support_size = rng.randrange(1, min(d, 3) + 1)
            support = [random_value(inner, X, rng, dist_bound) for _ in range(support_size)]
            # a random composition of d into one part per support value
            cuts = sorted(rng.randrange(0, d + 1) for _ in range(len(support) - 1))
            parts = []
            prev = 0
            for cut in cuts + [d]:
                parts.append(cut - prev)
                prev = cut
            return mkdist(
                (v, Fraction(k, d)) for v, k in zip(support, parts) if k
            )
        case NbhdF(inner):
            members = []
            for _ in range(rng.randrange(0, 4)):
                members.append(
                    [random_value(inner, X, rng, dist_bound) for _ in range(rng.randrange(0, 3))]
                )
            return mknbhd(members)
    raise TypeError(f"unknown functor node {T!r}")


def random_coalgebra(
    rng: Random,
    functor: FunctorExpr | None = None,
    max_states: int = 6,
    dist_bound: int = 4,
) -> Coalgebra:
    if functor is None:
        functor = rng.choice(functor_zoo())
    n = rng.randrange(1, max_states + 1)
    carrier = FinSet(f"s{i}" for i in range(n))
    structure = {x: random_value(functor, carrier, rng, dist_bound) for x in carrier}
    return Coalgebra(functor, carrier, structure)


def random_formula(
    T: FunctorExpr, rng: Random, depth: int = 3, dist_bound: int = 4, size: int = 12
) -> Formula:
    """A random well-sorted formula with modal depth <= depth.

    The size budget shrinks on every recursion, forcing leaves when
    spent."""
    if size <= 1:
        return rng.choice([Top(), Bot()])
    choices = ["top", "bot", "not", "and", "or", "implies"]
    if depth > 0:
        choices += ["next"] * 3
    match rng.choice(choices):
        case "top":
            return Top()
        case "bot":
            return Bot()
        case "not":
            return Not(random_formula(T, rng, depth, dist_bound, size - 1))
        case "and":
            return And(
                random_formula(T, rng, depth, dist_bound, (size - 1) // 2),
                random_formula(T, rng, depth, dist_bound, (size - 1) // 2),
            )
        case "or":
            return Or(
                random_formula(T, rng, depth, dist_bound, (size - 1) // 2),
                random_formula(T, rng, depth, dist_bound, (size - 1) // 2),
            )
        case "implies":
            return Implies(
                random_formula(T, rng, depth, dist_bound, (size - 1) // 2),
                random_formula(T, rng, depth, dist_bound, (size - 1) // 2),
            )
        case "next":
            return Next(random_one_step(T, T, rng, depth - 1, dist_bound, size - 1))
    raise AssertionError


def random_one_step(
    node: FunctorExpr,
    root: FunctorExpr,
    rng: Random,
    depth: int,
    dist_bound: int,
    size: int = 8,
) -> OneStep:
    if size > 2 and rng.random() < 0.2:
        match rng.randrange(6):
            case 0:
                return OTop()
            case 1:
                return OBot()
            case 2:
                return ONot(random_one_step(node, root, rng, depth, dist_bound, size - 1))
            case 3:
                return OAnd(
                    random_one_step(node, root, rng, depth, dist_bound, (size - 1) // 2),
                    random_one_step(node, root, rng, depth, dist_bound, (size - 1) // 2),
                )
            case 4:
                return OOr(
                    random_one_step(node, root, rng, depth, dist_bound, (size - 1) // 2),
                    random_one_step(node, root, rng, depth, dist_bound, (size - 1) // 2),
                )
            case 5:
                return OImplies(
                    random_one_step(node, root, rng, depth, dist_bound, (size - 1) // 2),
                    random_one_step(node, root, rng, depth, dist_bound, (size - 1) // 2),
                )
    match node:
        case IdF():
            return Embed(random_formula(root, rng, depth, dist_bound, size - 1))
        case ConstF(alphabet):
            return ConstEq(rng.choice(alphabet.elements))
        case ProdF(l, r):
            if rng.random() < 0.5:
                return Pi1(random_one_step(l, root, rng, depth, dist_bound, size - 1))
            return Pi2(random_one_step(r, root, rng, depth, dist_bound, size - 1))
        case CoprodF(l, r):
            match rng.randrange(4):
                case 0:
                    return IsL()
                case 1:
                    return IsR()
                case 2:
                    return InL(random_one_step(l, root, rng, depth, dist_bound, size - 1))
                case _:
                    return InR(random_one_step(r, root, rng, depth, dist_bound, size - 1))
        case ExpF(base, alphabet):
            return At(
                rng.choice(alphabet.elements),
                random_one_step(base, root, rng, depth, dist_bound, size - 1),
            )
        case PowF(inner):
            ctor = Box if rng.random() < 0.5 else Dia
            return ctor(random_one_step(inner, root, rng, depth, dist_bound, size - 1))
        case DistF(inner):
            den = rng.randrange(1, dist_bound + 1)
            num = rng.randrange(0, den + 1)
            return PrGeq(
                Fraction(num, den),
                random_one_step(inner, root, rng, depth, dist_bound, size - 1),
            )
        case NbhdF(inner):
            return NbhdBox(random_one_step(inner, root, rng, depth, dist_bound, size - 1))
    raise TypeError(f"unknown functor node {node!r}")
