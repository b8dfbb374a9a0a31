"""Many-sorted first-order syntax for plane geometry.

Terms and formulas are immutable trees over the sorts Point, Line, Circle,
Real and Prop.  Everything downstream (definition expansion, tactic
execution, SMT translation, numeric evaluation) manipulates these trees.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Optional, Union


class SortTag(enum.Enum):
    POINT = "Point"
    LINE = "Line"
    CIRCLE = "Circle"
    REAL = "Real"
    PROP = "Prop"

    def __str__(self) -> str:
        return self.value


POINT = SortTag.POINT
LINE = SortTag.LINE
CIRCLE = SortTag.CIRCLE
REAL = SortTag.REAL
PROP = SortTag.PROP

# Placeholder sort for identifiers in proof scripts, where the surrounding
# context (and therefore the real sort) is only known at execution time.
UNRESOLVED = PROP


class LogicError(Exception):
    """Base class for malformed-syntax errors raised by this module."""


class SortMismatch(LogicError):
    pass


class ArityMismatch(LogicError):
    pass


class UnknownSymbol(LogicError):
    pass


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Var:
    name: str
    sort: SortTag


@dataclass(frozen=True)
class NumLit:
    value: Fraction


@dataclass(frozen=True)
class App:
    fn: str
    args: tuple["Term", ...]


Term = Union[Var, NumLit, App]


# Fixed function signature: argument sorts and result sort per symbol.
FUNCTIONS: dict[str, tuple[tuple[SortTag, ...], SortTag]] = {
    "length": ((POINT, POINT), REAL),
    "angle": ((POINT, POINT, POINT), REAL),
    "area": ((POINT, POINT, POINT), REAL),
    "rightAngle": ((), REAL),
    "pi": ((), REAL),
    "sin": ((REAL,), REAL),
    "cos": ((REAL,), REAL),
    "add": ((REAL, REAL), REAL),
    "sub": ((REAL, REAL), REAL),
    "mul": ((REAL, REAL), REAL),
    "div": ((REAL, REAL), REAL),
    "neg": ((REAL,), REAL),
}

# Fixed predicate signature: argument sorts per symbol.
PREDICATES: dict[str, tuple[SortTag, ...]] = {
    "onLine": (POINT, LINE),
    "between": (POINT, POINT, POINT),
    "onCircle": (POINT, CIRCLE),
    "insideCircle": (POINT, CIRCLE),
    "outsideCircle": (POINT, CIRCLE),
    "isCentre": (POINT, CIRCLE),
    "sameSide": (POINT, POINT, LINE),
    "opposingSides": (POINT, POINT, LINE),
    "intersectsLine": (LINE, LINE),
    "intersectsCircle": (LINE, CIRCLE),
    "eqPoint": (POINT, POINT),
    "eqLine": (LINE, LINE),
    "eqCircle": (CIRCLE, CIRCLE),
}

# Equality predicate per object sort (Real equality is a Cmp).
EQ_PREDICATES: dict[SortTag, str] = {
    POINT: "eqPoint",
    LINE: "eqLine",
    CIRCLE: "eqCircle",
}


def term_sort(t: Term) -> SortTag:
    if isinstance(t, Var):
        return t.sort
    if isinstance(t, NumLit):
        return REAL
    if isinstance(t, App):
        try:
            return FUNCTIONS[t.fn][1]
        except KeyError:
            raise UnknownSymbol(f"unknown function symbol {t.fn!r}")
    raise LogicError(f"not a term: {t!r}")


# ---------------------------------------------------------------------------
# Formulas


@dataclass(frozen=True)
class PredApp:
    pred: str
    args: tuple[Term, ...]


@dataclass(frozen=True)
class Cmp:
    op: str  # "=", "<" or "<=", always on Real terms
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class Not:
    body: "Formula"


@dataclass(frozen=True)
class And:
    args: tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    args: tuple["Formula", ...]


@dataclass(frozen=True)
class Implies:
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class Iff:
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class Forall:
    binders: tuple[tuple[str, SortTag], ...]
    body: "Formula"


@dataclass(frozen=True)
class Exists:
    binders: tuple[tuple[str, SortTag], ...]
    body: "Formula"


@dataclass(frozen=True)
class TrueF:
    pass


@dataclass(frozen=True)
class FalseF:
    pass


Formula = Union[
    PredApp, Cmp, Not, And, Or, Implies, Iff, Forall, Exists, TrueF, FalseF
]

TRUE = TrueF()
FALSE = FalseF()


def conj(parts: Iterable[Formula]) -> Formula:
    """And of the given formulas; True when empty, unwrapped when singleton."""
    items = tuple(parts)
    if not items:
        return TRUE
    if len(items) == 1:
        return items[0]
    return And(items)


def disj(parts: Iterable[Formula]) -> Formula:
    items = tuple(parts)
    if not items:
        return FALSE
    if len(items) == 1:
        return items[0]
    return Or(items)


def eq_obj(lhs: Term, rhs: Term) -> Formula:
    """Sort-appropriate equality atom for two object terms."""
    s = term_sort(lhs)
    if s != term_sort(rhs):
        raise SortMismatch(f"equality between {s} and {term_sort(rhs)}")
    if s == REAL:
        return Cmp("=", lhs, rhs)
    try:
        return PredApp(EQ_PREDICATES[s], (lhs, rhs))
    except KeyError:
        raise SortMismatch(f"no equality at sort {s}")


def conjuncts(f: Formula) -> tuple[Formula, ...]:
    """Flatten top-level conjunction (recursively) into a tuple."""
    if isinstance(f, And):
        out: list[Formula] = []
        for part in f.args:
            out.extend(conjuncts(part))
        return tuple(out)
    if isinstance(f, TrueF):
        return ()
    return (f,)


# ---------------------------------------------------------------------------
# Rules


RULE_KINDS = ("construction", "inference", "definition", "theorem")


@dataclass(frozen=True)
class Rule:
    """A named universally quantified implication premise -> conclusion."""

    name: str
    kind: str
    params: tuple[tuple[str, SortTag], ...]
    premise: Formula
    conclusion: Formula

    def __post_init__(self) -> None:
        if self.kind not in RULE_KINDS:
            raise LogicError(f"bad rule kind {self.kind!r}")


# ---------------------------------------------------------------------------
# Free variables and substitution


def term_free_vars(t: Term) -> frozenset[tuple[str, SortTag]]:
    if isinstance(t, Var):
        return frozenset([(t.name, t.sort)])
    if isinstance(t, NumLit):
        return frozenset()
    out: frozenset = frozenset()
    for a in t.args:
        out |= term_free_vars(a)
    return out


def free_vars(f: Formula) -> frozenset[tuple[str, SortTag]]:
    if isinstance(f, (TrueF, FalseF)):
        return frozenset()
    if isinstance(f, PredApp):
        out: frozenset = frozenset()
        for a in f.args:
            out |= term_free_vars(a)
        return out
    if isinstance(f, Cmp):
        return term_free_vars(f.lhs) | term_free_vars(f.rhs)
    if isinstance(f, Not):
        return free_vars(f.body)
    if isinstance(f, (And, Or)):
        out = frozenset()
        for a in f.args:
            out |= free_vars(a)
        return out
    if isinstance(f, (Implies, Iff)):
        return free_vars(f.lhs) | free_vars(f.rhs)
    if isinstance(f, (Forall, Exists)):
        bound = {n for n, _ in f.binders}
        return frozenset(
            (n, s) for n, s in free_vars(f.body) if n not in bound
        )
    raise LogicError(f"not a formula: {f!r}")


def fresh_name(base: str, avoid: set[str]) -> str:
    name = base
    while name in avoid:
        name += "′"  # prime
    return name


def subst_term(t: Term, sub: Mapping[str, Term]) -> Term:
    if isinstance(t, Var):
        repl = sub.get(t.name)
        if repl is None:
            return t
        if term_sort(repl) != t.sort:
            raise SortMismatch(
                f"substituting {t.sort} variable {t.name!r} "
                f"with a {term_sort(repl)} term"
            )
        return repl
    if isinstance(t, NumLit):
        return t
    return App(t.fn, tuple(subst_term(a, sub) for a in t.args))


def substitute(f: Formula, sub: Mapping[str, Term]) -> Formula:
    """Capture-avoiding simultaneous substitution of variables in f."""
    if isinstance(f, (TrueF, FalseF)):
        return f
    if isinstance(f, PredApp):
        return PredApp(f.pred, tuple(subst_term(a, sub) for a in f.args))
    if isinstance(f, Cmp):
        return Cmp(f.op, subst_term(f.lhs, sub), subst_term(f.rhs, sub))
    if isinstance(f, Not):
        return Not(substitute(f.body, sub))
    if isinstance(f, And):
        return And(tuple(substitute(a, sub) for a in f.args))
    if isinstance(f, Or):
        return Or(tuple(substitute(a, sub) for a in f.args))
    if isinstance(f, Implies):
        return Implies(substitute(f.lhs, sub), substitute(f.rhs, sub))
    if isinstance(f, Iff):
        return Iff(substitute(f.lhs, sub), substitute(f.rhs, sub))
    if isinstance(f, (Forall, Exists)):
        inner = {n: t for n, t in sub.items()}
        for n, _ in f.binders:
            inner.pop(n, None)
        if not inner:
            return type(f)(f.binders, f.body)
        # Rename binders that would capture free variables of the
        # substituted terms.
        clash = set()
        for t in inner.values():
            clash |= {n for n, _ in term_free_vars(t)}
        body_free = {n for n, _ in free_vars(f.body)}
        binders = list(f.binders)
        for i, (n, s) in enumerate(binders):
            if n in clash:
                avoid = clash | body_free | {b for b, _ in binders}
                avoid |= set(inner.keys())
                n2 = fresh_name(n, avoid)
                binders[i] = (n2, s)
                inner[n] = Var(n2, s)
        return type(f)(tuple(binders), substitute(f.body, inner))
    raise LogicError(f"not a formula: {f!r}")


def instantiate_rule(rule: Rule, args: Iterable[Term]) -> tuple[Formula, Formula]:
    """Substitute rule parameters positionally, returning (premise, conclusion).

    Existential binders in the conclusion stay bound.
    """
    args = tuple(args)
    if len(args) != len(rule.params):
        raise ArityMismatch(
            f"rule {rule.name} expects {len(rule.params)} arguments, "
            f"got {len(args)}"
        )
    sub: dict[str, Term] = {}
    for (pname, psort), arg in zip(rule.params, args):
        asort = term_sort(arg)
        if asort != psort:
            raise SortMismatch(
                f"rule {rule.name}: parameter {pname} has sort {psort}, "
                f"argument has sort {asort}"
            )
        sub[pname] = arg
    return substitute(rule.premise, sub), substitute(rule.conclusion, sub)


# ---------------------------------------------------------------------------
# Normalization


def _structural(f: Formula) -> Formula:
    if isinstance(f, (TrueF, FalseF, PredApp, Cmp)):
        return f
    if isinstance(f, Not):
        b = _structural(f.body)
        if isinstance(b, Not):
            return b.body
        return Not(b)
    if isinstance(f, (And, Or)):
        cls = type(f)
        flat: list[Formula] = []
        for a in f.args:
            na = _structural(a)
            if isinstance(na, cls):
                flat.extend(na.args)
            else:
                flat.append(na)
        flat.sort(key=_alpha_key)
        if len(flat) == 1:
            return flat[0]
        return cls(tuple(flat))
    if isinstance(f, Implies):
        return Implies(_structural(f.lhs), _structural(f.rhs))
    if isinstance(f, Iff):
        return Iff(_structural(f.lhs), _structural(f.rhs))
    if isinstance(f, (Forall, Exists)):
        return type(f)(f.binders, _structural(f.body))
    raise LogicError(f"not a formula: {f!r}")


def _alpha_key(f: Formula) -> str:
    """Serialization with bound variables replaced by binding levels.

    Alpha-equivalent formulas map to equal keys, so sorting conjunction
    operands by this key is stable under renaming.
    """
    out: list[str] = []
    _key_formula(f, {}, out)
    return "".join(out)


def _key_term(t: Term, env: dict[str, int], out: list[str]) -> None:
    if isinstance(t, Var):
        if t.name in env:
            out.append(f"b{env[t.name]}")
        else:
            out.append(f"v:{t.name}")
        out.append(f":{t.sort.value};")
    elif isinstance(t, NumLit):
        out.append(f"n{t.value};")
    else:
        out.append(f"({t.fn} ")
        for a in t.args:
            _key_term(a, env, out)
        out.append(")")


def _key_formula(f: Formula, env: dict[str, int], out: list[str]) -> None:
    if isinstance(f, TrueF):
        out.append("T")
    elif isinstance(f, FalseF):
        out.append("F")
    elif isinstance(f, PredApp):
        out.append(f"({f.pred} ")
        for a in f.args:
            _key_term(a, env, out)
        out.append(")")
    elif isinstance(f, Cmp):
        out.append(f"(cmp{f.op} ")
        _key_term(f.lhs, env, out)
        _key_term(f.rhs, env, out)
        out.append(")")
    elif isinstance(f, Not):
        out.append("(not ")
        _key_formula(f.body, env, out)
        out.append(")")
    elif isinstance(f, (And, Or)):
        out.append("(and " if isinstance(f, And) else "(or ")
        for a in f.args:
            _key_formula(a, env, out)
        out.append(")")
    elif isinstance(f, (Implies, Iff)):
        out.append("(=> " if isinstance(f, Implies) else "(<=> ")
        _key_formula(f.lhs, env, out)
        _key_formula(f.rhs, env, out)
        out.append(")")
    elif isinstance(f, (Forall, Exists)):
        out.append("(all " if isinstance(f, Forall) else "(ex ")
        inner = dict(env)
        for n, s in f.binders:
            inner[n] = len(inner)
            out.append(f"[{s.value}]")
        _key_formula(f.body, inner, out)
        out.append(")")
    else:
        raise LogicError(f"not a formula: {f!r}")


def _alpha_rename(f: Formula, env: dict[str, str], counter: list[int]) -> Formula:
    if isinstance(f, (TrueF, FalseF)):
        return f
    if isinstance(f, PredApp):
        return PredApp(f.pred, tuple(_rename_term(a, env) for a in f.args))
    if isinstance(f, Cmp):
        return Cmp(f.op, _rename_term(f.lhs, env), _rename_term(f.rhs, env))
    if isinstance(f, Not):
        return Not(_alpha_rename(f.body, env, counter))
    if isinstance(f, (And, Or)):
        return type(f)(tuple(_alpha_rename(a, env, counter) for a in f.args))
    if isinstance(f, (Implies, Iff)):
        return type(f)(
            _alpha_rename(f.lhs, env, counter),
            _alpha_rename(f.rhs, env, counter),
        )
    if isinstance(f, (Forall, Exists)):
        inner = dict(env)
        binders = []
        for n, s in f.binders:
            # "%" cannot occur in source identifiers, so canonical binder
            # names never capture free variables.
            nn = f"%{counter[0]}"
            counter[0] += 1
            inner[n] = nn
            binders.append((nn, s))
        return type(f)(tuple(binders), _alpha_rename(f.body, inner, counter))
    raise LogicError(f"not a formula: {f!r}")


def _rename_term(t: Term, env: dict[str, str]) -> Term:
    if isinstance(t, Var):
        return Var(env.get(t.name, t.name), t.sort)
    if isinstance(t, NumLit):
        return t
    return App(t.fn, tuple(_rename_term(a, env) for a in t.args))


def normalize(f: Formula) -> Formula:
    """Canonical form: AC-sorted conjunction/disjunction, no double negation,
    binders renamed positionally.  Idempotent; alpha-equivalent inputs
    normalize to structurally equal trees.
    """
    return _alpha_rename(_structural(f), {}, [0])


def alpha_equal(a: Formula, b: Formula) -> bool:
    return normalize(a) == normalize(b)


# ---------------------------------------------------------------------------
# Sort checking


def check_term(
    t: Term,
    env: Mapping[str, SortTag],
    *,
    allow_free: bool = True,
) -> SortTag:
    if isinstance(t, Var):
        if t.name in env:
            if env[t.name] != t.sort:
                raise SortMismatch(
                    f"variable {t.name!r} used at sort {t.sort}, "
                    f"declared {env[t.name]}"
                )
        elif not allow_free:
            raise UnknownSymbol(f"unbound variable {t.name!r}")
        if t.sort == PROP:
            raise SortMismatch(f"variable {t.name!r} has sort Prop")
        return t.sort
    if isinstance(t, NumLit):
        return REAL
    if isinstance(t, App):
        try:
            argsorts, result = FUNCTIONS[t.fn]
        except KeyError:
            raise UnknownSymbol(f"unknown function symbol {t.fn!r}")
        if len(t.args) != len(argsorts):
            raise ArityMismatch(
                f"{t.fn} expects {len(argsorts)} arguments, got {len(t.args)}"
            )
        for a, want in zip(t.args, argsorts):
            got = check_term(a, env, allow_free=allow_free)
            if got != want:
                raise SortMismatch(f"{t.fn}: expected {want}, got {got}")
        return result
    raise LogicError(f"not a term: {t!r}")


def check_formula(
    f: Formula,
    env: Optional[Mapping[str, SortTag]] = None,
    extra_preds: Optional[Mapping[str, tuple[SortTag, ...]]] = None,
    *,
    allow_free: bool = True,
) -> None:
    """Raise if f is not well-sorted.

    env maps variable names to sorts; extra_preds supplies definition
    symbols beyond the fixed signature.
    """
    env = dict(env or {})
    _check(f, env, dict(extra_preds or {}), allow_free)


def _check(
    f: Formula,
    env: dict[str, SortTag],
    preds: dict[str, tuple[SortTag, ...]],
    allow_free: bool,
) -> None:
    if isinstance(f, (TrueF, FalseF)):
        return
    if isinstance(f, PredApp):
        sig = PREDICATES.get(f.pred) or preds.get(f.pred)
        if sig is None:
            raise UnknownSymbol(f"unknown predicate {f.pred!r}")
        if len(f.args) != len(sig):
            raise ArityMismatch(
                f"{f.pred} expects {len(sig)} arguments, got {len(f.args)}"
            )
        for a, want in zip(f.args, sig):
            got = check_term(a, env, allow_free=allow_free)
            if got != want:
                raise SortMismatch(f"{f.pred}: expected {want}, got {got}")
        return
    if isinstance(f, Cmp):
        if f.op not in ("=", "<", "<="):
            raise LogicError(f"bad comparison operator {f.op!r}")
        for side in (f.lhs, f.rhs):
            if check_term(side, env, allow_free=allow_free) != REAL:
                raise SortMismatch("comparison on non-Real term")
        return
    if isinstance(f, Not):
        _check(f.body, env, preds, allow_free)
        return
    if isinstance(f, (And, Or)):
        for a in f.args:
            _check(a, env, preds, allow_free)
        return
    if isinstance(f, (Implies, Iff)):
        _check(f.lhs, env, preds, allow_free)
        _check(f.rhs, env, preds, allow_free)
        return
    if isinstance(f, (Forall, Exists)):
        seen = set()
        inner = dict(env)
        for n, s in f.binders:
            if n in seen:
                raise LogicError(f"duplicate binder {n!r} in one quantifier")
            if s == PROP:
                raise SortMismatch(f"binder {n!r} has sort Prop")
            seen.add(n)
            inner[n] = s
        _check(f.body, inner, preds, allow_free)
        return
    raise LogicError(f"not a formula: {f!r}")
