"""Modal formulas over a functor and their predicate-lifting semantics.

State formulas are classical propositional logic plus a next-step
operator ``O`` whose argument is a one-step formula sorted against the
coalgebra's functor expression: projections at products, injection tests
at coproducts, component selection at exponents, box/diamond at
powersets, probability thresholds at distributions, and a membership box
at neighborhoods.  A state satisfies ``O a`` when its structure value
satisfies ``a``.

Each one-step connective denotes a predicate lifting; naturality of the
liftings (and hence invariance of the logic under behavioural
equivalence) is checkable exhaustively at small sizes.  For non-equivalent
states a distinguishing formula is synthesized along the refinement
trace.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable

from .errors import ParseError, SortError
from .coalgebra import Coalgebra, Partition, refinement_trace
from .functor import (
    ConstF,
    CoprodF,
    DistF,
    DistV,
    ExpF,
    FinFun,
    FinSet,
    FunctorExpr,
    IdF,
    InlV,
    InrV,
    NbhdF,
    NbhdV,
    PairV,
    PowF,
    ProdF,
    Ref,
    SetV,
    Sym,
    TableV,
    TValue,
    apply_on_fun,
    apply_on_set,
    kripke_valuations,
)


# ---------------------------------------------------------------------------
# Abstract syntax


class Formula:
    __slots__ = ()

    def __str__(self) -> str:
        return formula_to_text(self)


class OneStep:
    __slots__ = ()

    def __str__(self) -> str:
        return one_step_to_text(self)


@dataclass(frozen=True)
class Top(Formula):
    pass


@dataclass(frozen=True)
class Bot(Formula):
    pass


@dataclass(frozen=True)
class Not(Formula):
    operand: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Next(Formula):
    step: OneStep


@dataclass(frozen=True)
class Hole(Formula):
    """Placeholder predicate used in lifting schemes for naturality checks."""


@dataclass(frozen=True)
class OTop(OneStep):
    pass


@dataclass(frozen=True)
class OBot(OneStep):
    pass


@dataclass(frozen=True)
class ONot(OneStep):
    operand: OneStep


@dataclass(frozen=True)
class OAnd(OneStep):
    left: OneStep
    right: OneStep


@dataclass(frozen=True)
class OOr(OneStep):
    left: OneStep
    right: OneStep


@dataclass(frozen=True)
class OImplies(OneStep):
    left: OneStep
    right: OneStep


@dataclass(frozen=True)
class Embed(OneStep):
    """A state formula used as a predicate at an Id position."""

    formula: Formula


@dataclass(frozen=True)
class ConstEq(OneStep):
    symbol: str


@dataclass(frozen=True)
class Pi1(OneStep):
    arg: OneStep


@dataclass(frozen=True)
class Pi2(OneStep):
    arg: OneStep


@dataclass(frozen=True)
class IsL(OneStep):
    pass


@dataclass(frozen=True)
class IsR(OneStep):
    pass


@dataclass(frozen=True)
class InL(OneStep):
    arg: OneStep


@dataclass(frozen=True)
class InR(OneStep):
    arg: OneStep


@dataclass(frozen=True)
class At(OneStep):
    symbol: str
    arg: OneStep


@dataclass(frozen=True)
class Box(OneStep):
    arg: OneStep


@dataclass(frozen=True)
class Dia(OneStep):
    arg: OneStep


@dataclass(frozen=True)
class PrGeq(OneStep):
    threshold: Fraction
    arg: OneStep


@dataclass(frozen=True)
class NbhdBox(OneStep):
    arg: OneStep


# ---------------------------------------------------------------------------
# Sort checking


def check_sorted(phi: Formula, functor: FunctorExpr, path: str = "") -> None:
    """Raise SortError unless phi is well-sorted for the functor."""
    match phi:
        case Top() | Bot() | Hole():
            return
        case Not(a):
            check_sorted(a, functor, path + "~.")
        case And(a, b) | Or(a, b) | Implies(a, b):
            check_sorted(a, functor, path + "l.")
            check_sorted(b, functor, path + "r.")
        case Next(step):
            check_one_step(step, functor, functor, path + "O.")
        case _:
            raise SortError(f"unknown formula node {type(phi).__name__}", path)


def check_one_step(a: OneStep, node: FunctorExpr, root: FunctorExpr, path: str = "") -> None:
    match a:
        case OTop() | OBot():
            return
        case ONot(b):
            check_one_step(b, node, root, path + "~.")
        case OAnd(b, c) | OOr(b, c) | OImplies(b, c):
            check_one_step(b, node, root, path + "l.")
            check_one_step(c, node, root, path + "r.")
        case Embed(phi):
            if not isinstance(node, IdF):
                raise SortError("embedded formula outside an Id position", path)
            check_sorted(phi, root, path + "{}.")
        case ConstEq(symbol):
            if not isinstance(node, ConstF):
                raise SortError("= test outside a constant position", path)
            if symbol not in node.alphabet:
                raise SortError(f"symbol {symbol!r} not in alphabet", path)
        case Pi1(b):
            if not isinstance(node, ProdF):
                raise SortError("pi1 outside a product position", path)
            check_one_step(b, node.left, root, path + "pi1.")
        case Pi2(b):
            if not isinstance(node, ProdF):
                raise SortError("pi2 outside a product position", path)
            check_one_step(b, node.right, root, path + "pi2.")
        case IsL() | IsR():
            if not isinstance(node, CoprodF):
                raise SortError("injection test outside a coproduct position", path)
        case InL(b):
            if not isinstance(node, CoprodF):
                raise SortError("inl. outside a coproduct position", path)
            check_one_step(b, node.left, root, path + "inl.")
        case InR(b):
            if not isinstance(node, CoprodF):
                raise SortError("inr. outside a coproduct position", path)
            check_one_step(b, node.right, root, path + "inr.")
        case At(symbol, b):
            if not isinstance(node, ExpF):
                raise SortError("@ selection outside an exponent position", path)
            if symbol not in node.alphabet:
                raise SortError(f"symbol {symbol!r} not in exponent alphabet", path)
            check_one_step(b, node.base, root, path + f"@{symbol}.")
        case Box(b) | Dia(b):
            if not isinstance(node, PowF):
                raise SortError("box/diamond outside a powerset position", path)
            check_one_step(b, node.inner, root, path + "[].")
        case PrGeq(threshold, b):
            if not isinstance(node, DistF):
                raise SortError("probability threshold outside a distribution position", path)
            if threshold < 0 or threshold > 1:
                raise SortError(f"threshold {threshold} outside [0, 1]", path)
            check_one_step(b, node.inner, root, path + "Pr.")
        case NbhdBox(b):
            if not isinstance(node, NbhdF):
                raise SortError("[N] outside a neighborhood position", path)
            check_one_step(b, node.inner, root, path + "[N].")
        case _:
            raise SortError(f"unknown one-step node {type(a).__name__}", path)


# ---------------------------------------------------------------------------
# Semantics


def _sat(
    a: OneStep,
    node: FunctorExpr,
    v: TValue,
    lookup: Callable[[Formula], frozenset],
    X: FinSet,
    bound: int | None,
    ext_cache: dict,
) -> bool:
    match a:
        case OTop():
            return True
        case OBot():
            return False
        case ONot(b):
            return not _sat(b, node, v, lookup, X, bound, ext_cache)
        case OAnd(b, c):
            return _sat(b, node, v, lookup, X, bound, ext_cache) and _sat(
                c, node, v, lookup, X, bound, ext_cache
            )
        case OOr(b, c):
            return _sat(b, node, v, lookup, X, bound, ext_cache) or _sat(
                c, node, v, lookup, X, bound, ext_cache
            )
        case OImplies(b, c):
            return (not _sat(b, node, v, lookup, X, bound, ext_cache)) or _sat(
                c, node, v, lookup, X, bound, ext_cache
            )
        case Embed(phi):
            assert isinstance(v, Ref)
            return v.state in lookup(phi)
        case ConstEq(symbol):
            assert isinstance(v, Sym)
            return v.symbol == symbol
        case Pi1(b):
            assert isinstance(v, PairV) and isinstance(node, ProdF)
            return _sat(b, node.left, v.left, lookup, X, bound, ext_cache)
        case Pi2(b):
            assert isinstance(v, PairV) and isinstance(node, ProdF)
            return _sat(b, node.right, v.right, lookup, X, bound, ext_cache)
        case IsL():
            return isinstance(v, InlV)
        case IsR():
            return isinstance(v, InrV)
        case InL(b):
            assert isinstance(node, CoprodF)
            return isinstance(v, InlV) and _sat(
                b, node.left, v.value, lookup, X, bound, ext_cache
            )
        case InR(b):
            assert isinstance(node, CoprodF)
            return isinstance(v, InrV) and _sat(
                b, node.right, v.value, lookup, X, bound, ext_cache
            )
        case At(symbol, b):
            assert isinstance(v, TableV) and isinstance(node, ExpF)
            return _sat(b, node.base, v[symbol], lookup, X, bound, ext_cache)
        case Box(b):
            assert isinstance(v, SetV) and isinstance(node, PowF)
            return all(
                _sat(b, node.inner, u, lookup, X, bound, ext_cache) for u in v.items
            )
        case Dia(b):
            assert isinstance(v, SetV) and isinstance(node, PowF)
            return any(
                _sat(b, node.inner, u, lookup, X, bound, ext_cache) for u in v.items
            )
        case PrGeq(threshold, b):
            assert isinstance(v, DistV) and isinstance(node, DistF)
            mass = sum(
                (w for u, w in v.entries if _sat(b, node.inner, u, lookup, X, bound, ext_cache)),
                Fraction(0),
            )
            return mass >= threshold
        case NbhdBox(b):
            assert isinstance(v, NbhdV) and isinstance(node, NbhdF)
            key = id(a)
            if key not in ext_cache:
                ext_cache[key] = frozenset(
                    u
                    for u in apply_on_set(node.inner, X, bound)
                    if _sat(b, node.inner, u, lookup, X, bound, ext_cache)
                )
            return ext_cache[key] in v.member_sets()
    raise SortError(f"unknown one-step node {type(a).__name__}")


def eval_formula(
    phi: Formula, c: Coalgebra, dist_bound: int | None = None
) -> frozenset[str]:
    """The extension of phi in c, as a set of states."""
    check_sorted(phi, c.functor)
    bound = dist_bound if dist_bound is not None else c.realized_denominator()
    everything = frozenset(c.carrier)
    memo: dict[Formula, frozenset] = {}

    def ev(f: Formula) -> frozenset[str]:
        if f in memo:
            return memo[f]
        match f:
            case Top():
                out = everything
            case Bot():
                out = frozenset()
            case Not(a):
                out = everything - ev(a)
            case And(a, b):
                out = ev(a) & ev(b)
            case Or(a, b):
                out = ev(a) | ev(b)
            case Implies(a, b):
                out = (everything - ev(a)) | ev(b)
            case Next(step):
                ext_cache: dict = {}
                out = frozenset(
                    x
                    for x in c.carrier
                    if _sat(step, c.functor, c.structure[x], ev, c.carrier, bound, ext_cache)
                )
            case _:
                raise SortError(f"cannot evaluate {type(f).__name__}")
        memo[f] = out
        return out

    return ev(phi)


def lifting_extension(
    a: OneStep,
    T: FunctorExpr,
    X: FinSet,
    env: dict[Formula, frozenset] | None = None,
    dist_bound: int | None = None,
) -> set[TValue]:
    """The subset of the enumerated T X satisfying the one-step formula.

    Extensions of embedded formulas (and of Hole placeholders) are
    supplied through env.
    """
    env = env or {}

    def lookup(phi: Formula) -> frozenset:
        if phi in env:
            return frozenset(env[phi])
        if isinstance(phi, Top):
            return frozenset(X)
        if isinstance(phi, Bot):
            return frozenset()
        raise SortError(f"no extension supplied for embedded formula {phi}")

    ext_cache: dict = {}
    return {
        v
        for v in apply_on_set(T, X, dist_bound)
        if _sat(a, T, v, lookup, X, dist_bound, ext_cache)
    }


def check_naturality(
    scheme: OneStep,
    T: FunctorExpr,
    f: FinFun,
    dist_bound: int | None = None,
) -> tuple[bool, frozenset | None]:
    """Check the lifting square for every predicate on the codomain.

    For each P subseteq Y compares (T f)^-1 of the extension over Y
    against the extension over X of the scheme instantiated at f^-1(P).
    Returns (True, None) or (False, first failing predicate).
    """
    X, Y = f.dom, f.cod
    tf = apply_on_fun(T, f, dist_bound)
    tx = apply_on_set(T, X, dist_bound)
    ty = apply_on_set(T, Y, dist_bound)
    images = {v: tf(v) for v in tx}
    for mask in range(1 << len(Y)):
        P = frozenset(y for i, y in enumerate(Y) if mask >> i & 1)

        def look_y(phi, _P=P):
            return _P if isinstance(phi, Hole) else frozenset()

        def look_x(phi, _P=f.preimage(P)):
            return _P if isinstance(phi, Hole) else frozenset()

        ext_y = {v for v in ty if _sat(scheme, T, v, look_y, Y, dist_bound, {})}
        lhs = {v for v in tx if images[v] in ext_y}
        rhs = {v for v in tx if _sat(scheme, T, v, look_x, X, dist_bound, {})}
        if lhs != rhs:
            return False, P
    return True, None


# ---------------------------------------------------------------------------
# Characteristic one-step formulas and distinguishing formulas


def char_one_step(
    t: TValue,
    node: FunctorExpr,
    Q: FinSet,
    block_formula: dict[str, Formula],
    dist_bound: int | None = None,
) -> OneStep:
    """A one-step formula singling out t among values of shape `node`
    over the quotient carrier Q, assuming the given formulas are exact
    characteristic formulas of the quotient classes."""
    match node, t:
        case IdF(), Ref(state):
            return Embed(block_formula[state])
        case ConstF(_), Sym(symbol):
            return ConstEq(symbol)
        case ProdF(l, r), PairV(a, b):
            return OAnd(
                Pi1(char_one_step(a, l, Q, block_formula, dist_bound)),
                Pi2(char_one_step(b, r, Q, block_formula, dist_bound)),
            )
        case CoprodF(l, _), InlV(u):
            return InL(char_one_step(u, l, Q, block_formula, dist_bound))
        case CoprodF(_, r), InrV(u):
            return InR(char_one_step(u, r, Q, block_formula, dist_bound))
        case ExpF(base, _), TableV(entries):
            conj = None
            for cch, u in entries:
                part = At(cch, char_one_step(u, base, Q, block_formula, dist_bound))
                conj = part if conj is None else OAnd(conj, part)
            return conj if conj is not None else OTop()
        case PowF(inner), SetV(items):
            chars = [char_one_step(u, inner, Q, block_formula, dist_bound) for u in items]
            union = _odisj(chars, inner)
            out: OneStep = Box(union)
            for ch in chars:
                out = OAnd(out, Dia(ch))
            return out
        case DistF(inner), DistV(entries):
            chars = [
                (char_one_step(u, inner, Q, block_formula, dist_bound), w)
                for u, w in entries
            ]
            out = PrGeq(Fraction(1), _odisj([ch for ch, _ in chars], inner))
            for ch, w in chars:
                out = OAnd(out, PrGeq(w, ch))
            return out
        case NbhdF(inner), NbhdV(_):
            members = t.member_sets()
            inner_vals = apply_on_set(inner, Q, dist_bound)
            inner_char = {
                u: char_one_step(u, inner, Q, block_formula, dist_bound) for u in inner_vals
            }
            out = None
            for mask in range(1 << len(inner_vals)):
                B = frozenset(inner_vals[i] for i in range(len(inner_vals)) if mask >> i & 1)
                test: OneStep = NbhdBox(_odisj([inner_char[u] for u in sorted(B, key=lambda v: v.key())], inner))
                if B not in members:
                    test = ONot(test)
                out = test if out is None else OAnd(out, test)
            return out if out is not None else OTop()
    raise SortError(
        f"value {type(t).__name__} does not fit functor node {type(node).__name__}"
    )


def _odisj(parts: list[OneStep], node: FunctorExpr) -> OneStep:
    if isinstance(node, IdF):
        # keep Id positions as a single embedded formula
        inner = [embed_collapse(p) for p in parts]
        out = inner[0] if inner else Bot()
        for p in inner[1:]:
            out = Or(out, p)
        return Embed(out)
    if not parts:
        return OBot()
    out = parts[0]
    for p in parts[1:]:
        out = OOr(out, p)
    return out


def distinguishing_formula(
    c: Coalgebra, x: str, y: str, dist_bound: int | None = None
) -> Formula | None:
    """A formula holding at x but not at y, or None when x and y are
    behaviourally equivalent.  The modal depth is bounded by the number
    of refinement rounds."""
    if x not in c.carrier or y not in c.carrier:
        raise ValueError("states not in the carrier")
    bound = dist_bound if dist_bound is not None else c.realized_denominator()
    trace = refinement_trace(c, bound)
    if trace[-1].same_block(x, y):
        return None
    block_formula: dict[str, Formula] = {"q0": Top()}
    for r in range(1, len(trace)):
        prev, part = trace[r - 1], trace[r]
        q, Q = prev.quotient()
        tq = apply_on_fun(c.functor, q, bound)
        new_formula: dict[str, Formula] = {}
        for i, b in enumerate(part.blocks):
            sig = tq(c.structure[b[0]])
            new_formula[f"q{i}"] = Next(
                char_one_step(sig, c.functor, Q, block_formula, bound)
            )
        if not part.same_block(x, y):
            return new_formula[f"q{part.block_index(x)}"]
        block_formula = new_formula
    raise AssertionError("trace ended without separating non-equivalent states")


def modal_depth(phi: Formula) -> int:
    match phi:
        case Top() | Bot() | Hole():
            return 0
        case Not(a):
            return modal_depth(a)
        case And(a, b) | Or(a, b) | Implies(a, b):
            return max(modal_depth(a), modal_depth(b))
        case Next(step):
            return 1 + _os_depth(step)
    raise SortError(f"unknown formula node {type(phi).__name__}")


def _os_depth(a: OneStep) -> int:
    match a:
        case Embed(phi):
            return modal_depth(phi)
        case ONot(b) | Pi1(b) | Pi2(b) | InL(b) | InR(b) | Box(b) | Dia(b) | NbhdBox(b):
            return _os_depth(b)
        case At(_, b) | PrGeq(_, b):
            return _os_depth(b)
        case OAnd(b, c) | OOr(b, c) | OImplies(b, c):
            return max(_os_depth(b), _os_depth(c))
        case _:
            return 0


def embed_collapse(a: OneStep) -> Formula:
    """Collapse an Id-sorted one-step formula to the single state formula
    it denotes (booleans commute with embedding)."""
    match a:
        case Embed(phi):
            return phi
        case OTop():
            return Top()
        case OBot():
            return Bot()
        case ONot(b):
            return Not(embed_collapse(b))
        case OAnd(b, c):
            return And(embed_collapse(b), embed_collapse(c))
        case OOr(b, c):
            return Or(embed_collapse(b), embed_collapse(c))
        case OImplies(b, c):
            return Implies(embed_collapse(b), embed_collapse(c))
    raise SortError(f"one-step node {type(a).__name__} is not Id-sorted")


# ---------------------------------------------------------------------------
# Sugar


def letters_of_valuation(v: str) -> frozenset[str]:
    """Letters contained in a valuation identifier ("v" + sorted letters)."""
    if not v.startswith("v"):
        raise ParseError(f"valuation {v!r} does not follow the 'v<letters>' convention")
    return frozenset(v[1:])


def letter_formula(p: str, functor: FunctorExpr) -> Formula:
    """Elaborate a proposition letter over the Kripke shape."""
    V = kripke_valuations(functor)
    if V is None:
        raise SortError(f"proposition letter {p!r} needs the shape C{{...}} * P(Id)")
    hits = [v for v in V if p in letters_of_valuation(v)]
    if not hits:
        raise SortError(f"letter {p!r} does not occur in any valuation")
    disj: OneStep = ConstEq(hits[0])
    for v in hits[1:]:
        disj = OOr(disj, ConstEq(v))
    return Next(Pi1(disj))


def box_formula(phi: Formula, functor: FunctorExpr) -> Formula:
    """[]phi at the supported shapes: P(Id) and C{...} * P(Id)."""
    if functor == PowF(IdF()):
        return Next(Box(Embed(phi)))
    if kripke_valuations(functor) is not None:
        return Next(Pi2(Box(Embed(phi))))
    raise SortError("[] sugar needs the shape P(Id) or C{...} * P(Id)")


def dia_formula(phi: Formula, functor: FunctorExpr) -> Formula:
    if functor == PowF(IdF()):
        return Next(Dia(Embed(phi)))
    if kripke_valuations(functor) is not None:
        return Next(Pi2(Dia(Embed(phi))))
    raise SortError("<> sugar needs the shape P(Id) or C{...} * P(Id)")


def labelled_box_formula(label: str, phi: Formula, functor: FunctorExpr) -> Formula:
    """[a]phi at the labelled shapes P(Id)^C and P(C{...} * Id)."""
    match functor:
        case ExpF(PowF(IdF()), alphabet) if label in alphabet:
            return Next(At(label, Box(Embed(phi))))
        case PowF(ProdF(ConstF(alphabet), IdF())) if label in alphabet:
            return Next(Box(OImplies(Pi1(ConstEq(label)), Pi2(Embed(phi)))))
    raise SortError(f"[{label}] sugar needs a labelled transition shape with that label")


def labelled_dia_formula(label: str, phi: Formula, functor: FunctorExpr) -> Formula:
    match functor:
        case ExpF(PowF(IdF()), alphabet) if label in alphabet:
            return Next(At(label, Dia(Embed(phi))))
        case PowF(ProdF(ConstF(alphabet), IdF())) if label in alphabet:
            return Next(Dia(OAnd(Pi1(ConstEq(label)), Pi2(Embed(phi)))))
    raise SortError(f"<{label}> sugar needs a labelled transition shape with that label")


# ---------------------------------------------------------------------------
# Concrete syntax


def formula_to_text(phi: Formula) -> str:
    """Canonical rendering: binary connectives fully parenthesized."""
    match phi:
        case Top():
            return "true"
        case Bot():
            return "false"
        case Hole():
            return "_"
        case Not(a):
            return "~" + formula_to_text(a)
        case And(a, b):
            return f"({formula_to_text(a)} & {formula_to_text(b)})"
        case Or(a, b):
            return f"({formula_to_text(a)} | {formula_to_text(b)})"
        case Implies(a, b):
            return f"({formula_to_text(a)} -> {formula_to_text(b)})"
        case Next(step):
            return "O " + _os_arg(step)
    raise SortError(f"unknown formula node {type(phi).__name__}")


def one_step_to_text(a: OneStep) -> str:
    match a:
        case OTop():
            return "true"
        case OBot():
            return "false"
        case ONot(b):
            return "~" + _os_arg(b)
        case OAnd(b, c):
            return f"({one_step_to_text(b)} & {one_step_to_text(c)})"
        case OOr(b, c):
            return f"({one_step_to_text(b)} | {one_step_to_text(c)})"
        case OImplies(b, c):
            return f"({one_step_to_text(b)} -> {one_step_to_text(c)})"
        case Embed(phi):
            return "{" + formula_to_text(phi) + "}"
        case ConstEq(symbol):
            return f"= {symbol}"
        case Pi1(b):
            return "pi1 " + _os_arg(b)
        case Pi2(b):
            return "pi2 " + _os_arg(b)
        case IsL():
            return "isl"
        case IsR():
            return "isr"
        case InL(b):
            return "inl." + _os_arg(b)
        case InR(b):
            return "inr." + _os_arg(b)
        case At(symbol, b):
            return f"@{symbol} " + _os_arg(b)
        case Box(b):
            return "[] " + _os_arg(b)
        case Dia(b):
            return "<> " + _os_arg(b)
        case PrGeq(threshold, b):
            t = (
                str(threshold.numerator)
                if threshold.denominator == 1
                else f"{threshold.numerator}/{threshold.denominator}"
            )
            return f"Pr>={t} " + _os_arg(b)
        case NbhdBox(b):
            return "[N] " + _os_arg(b)
    raise SortError(f"unknown one-step node {type(a).__name__}")


def _os_arg(a: OneStep) -> str:
    if isinstance(a, ConstEq):
        return "(" + one_step_to_text(a) + ")"
    return one_step_to_text(a)


_LETTER_CHARS = "abcdefghijklmnopqrstuvwxyz"


class _FormulaParser:
    """Recursive-descent parser for the formula grammar, sort-directed.

    Precedence ~ > & > | > -> with -> right-associative.  Sugar for the
    supported shapes elaborates during parsing; the canonical printer
    never emits sugar, so print-then-parse is the identity.
    """

    def __init__(self, text: str, functor: FunctorExpr):
        self.text = text
        self.n = len(text)
        self.pos = 0
        self.functor = functor

    def skip(self):
        while self.pos < self.n and self.text[self.pos].isspace():
            self.pos += 1

    def startswith(self, s: str) -> bool:
        self.skip()
        return self.text.startswith(s, self.pos)

    def eat(self, s: str) -> bool:
        if self.startswith(s):
            self.pos += len(s)
            return True
        return False

    def expect(self, s: str):
        if not self.eat(s):
            raise ParseError(f"expected {s!r}", self.pos)

    def word(self) -> str:
        self.skip()
        start = self.pos
        while self.pos < self.n and (
            self.text[self.pos].isalnum() or self.text[self.pos] in "_*'"
        ):
            self.pos += 1
        if start == self.pos:
            raise ParseError("expected an identifier", self.pos)
        return self.text[start : self.pos]

    def keyword_ahead(self, kw: str) -> bool:
        """True if kw is next and not a prefix of a longer identifier."""
        self.skip()
        if not self.text.startswith(kw, self.pos):
            return False
        end = self.pos + len(kw)
        return end >= self.n or not (self.text[end].isalnum() or self.text[end] in "_*'")

    # --- state formulas ---

    def formula(self) -> Formula:
        left = self.disjunction()
        if self.eat("->"):
            return Implies(left, self.formula())
        return left

    def disjunction(self) -> Formula:
        node = self.conjunction()
        while self.startswith("|"):
            self.expect("|")
            node = Or(node, self.conjunction())
        return node

    def conjunction(self) -> Formula:
        node = self.unary()
        while self.eat("&"):
            node = And(node, self.unary())
        return node

    def unary(self) -> Formula:
        self.skip()
        if self.eat("~"):
            return Not(self.unary())
        if self.keyword_ahead("O"):
            self.pos += 1
            return Next(self.os_unary(self.functor))
        if self.eat("[]"):
            return box_formula(self.unary(), self.functor)
        if self.eat("<>"):
            return dia_formula(self.unary(), self.functor)
        if self.startswith("[") and not self.startswith("[N]"):
            self.expect("[")
            label = self.word()
            self.expect("]")
            return labelled_box_formula(label, self.unary(), self.functor)
        if self.startswith("<"):
            self.expect("<")
            label = self.word()
            self.expect(">")
            return labelled_dia_formula(label, self.unary(), self.functor)
        return self.atom()

    def atom(self) -> Formula:
        self.skip()
        if self.eat("("):
            node = self.formula()
            self.expect(")")
            return node
        if self.keyword_ahead("true"):
            self.pos += 4
            return Top()
        if self.keyword_ahead("false"):
            self.pos += 5
            return Bot()
        if self.pos < self.n and self.text[self.pos] in _LETTER_CHARS:
            return letter_formula(self.word(), self.functor)
        raise ParseError("expected a formula", self.pos)

    # --- one-step formulas, sorted against a functor node ---

    def os_formula(self, node: FunctorExpr) -> OneStep:
        left = self.os_disjunction(node)
        if self.eat("->"):
            return OImplies(left, self.os_formula(node))
        return left

    def os_disjunction(self, node: FunctorExpr) -> OneStep:
        out = self.os_conjunction(node)
        while self.startswith("|"):
            self.expect("|")
            out = OOr(out, self.os_conjunction(node))
        return out

    def os_conjunction(self, node: FunctorExpr) -> OneStep:
        out = self.os_unary(node)
        while self.eat("&"):
            out = OAnd(out, self.os_unary(node))
        return out

    def os_unary(self, node: FunctorExpr) -> OneStep:
        self.skip()
        if self.eat("~"):
            return ONot(self.os_unary(node))
        if self.keyword_ahead("true"):
            self.pos += 4
            return OTop()
        if self.keyword_ahead("false"):
            self.pos += 5
            return OBot()
        if self.startswith("{"):
            if not isinstance(node, IdF):
                raise SortError("embedded formula outside an Id position")
            self.expect("{")
            phi = self.formula()
            self.expect("}")
            return Embed(phi)
        if isinstance(node, IdF):
            if self.eat("("):
                out = self.os_formula(node)
                self.expect(")")
                return out
            # bare state formulas are auto-embedded at Id positions
            return Embed(self.unary())
        if self.eat("="):
            if not isinstance(node, ConstF):
                raise SortError("= test outside a constant position")
            return ConstEq(self.word())
        if self.keyword_ahead("pi1"):
            self.pos += 3
            if not isinstance(node, ProdF):
                raise SortError("pi1 outside a product position")
            return Pi1(self.os_unary(node.left))
        if self.keyword_ahead("pi2"):
            self.pos += 3
            if not isinstance(node, ProdF):
                raise SortError("pi2 outside a product position")
            return Pi2(self.os_unary(node.right))
        if self.keyword_ahead("isl"):
            self.pos += 3
            if not isinstance(node, CoprodF):
                raise SortError("isl outside a coproduct position")
            return IsL()
        if self.keyword_ahead("isr"):
            self.pos += 3
            if not isinstance(node, CoprodF):
                raise SortError("isr outside a coproduct position")
            return IsR()
        if self.startswith("inl."):
            self.pos += 4
            if not isinstance(node, CoprodF):
                raise SortError("inl. outside a coproduct position")
            return InL(self.os_unary(node.left))
        if self.startswith("inr."):
            self.pos += 4
            if not isinstance(node, CoprodF):
                raise SortError("inr. outside a coproduct position")
            return InR(self.os_unary(node.right))
        if self.startswith("@"):
            self.expect("@")
            symbol = self.word()
            if not isinstance(node, ExpF):
                raise SortError("@ selection outside an exponent position")
            return At(symbol, self.os_unary(node.base))
        if self.eat("[N]"):
            if not isinstance(node, NbhdF):
                raise SortError("[N] outside a neighborhood position")
            return NbhdBox(self.os_unary(node.inner))
        if self.eat("[]"):
            if kripke_valuations(node) is not None:
                # sugar at the Kripke product sort: box the second component
                return Pi2(Box(self.os_unary(IdF())))
            if not isinstance(node, PowF):
                raise SortError("box outside a powerset position")
            return Box(self.os_unary(node.inner))
        if self.eat("<>"):
            if kripke_valuations(node) is not None:
                return Pi2(Dia(self.os_unary(IdF())))
            if not isinstance(node, PowF):
                raise SortError("diamond outside a powerset position")
            return Dia(self.os_unary(node.inner))
        if self.startswith("Pr>="):
            self.pos += 4
            num = self._int()
            den = 1
            if self.eat("/"):
                den = self._int()
            if not isinstance(node, DistF):
                raise SortError("probability threshold outside a distribution position")
            return PrGeq(Fraction(num, den), self.os_unary(node.inner))
        if self.eat("("):
            out = self.os_formula(node)
            self.expect(")")
            return out
        raise ParseError("expected a one-step formula", self.pos)

    def _int(self) -> int:
        self.skip()
        start = self.pos
        while self.pos < self.n and self.text[self.pos].isdigit():
            self.pos += 1
        if start == self.pos:
            raise ParseError("expected a number", self.pos)
        return int(self.text[start : self.pos])


def parse_formula(text: str, functor: FunctorExpr) -> Formula:
    """Parse a state formula against the given functor shape."""
    p = _FormulaParser(text, functor)
    phi = p.formula()
    p.skip()
    if p.pos != p.n:
        raise ParseError("trailing input after formula", p.pos)
    check_sorted(phi, functor)
    return phi
