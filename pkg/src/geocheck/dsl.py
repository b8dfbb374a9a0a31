"""Lexer, parsers and pretty-printer for the geometry proof DSL.

Three text shapes share one grammar core: theorem statements
(``theorem name : ∀ (A B : Point), hyp → goal``), tactic scripts
(``euclid_apply exists_midpoint B C as D``), and axiom/definition files.
Unicode operators and their ASCII aliases are both accepted; rendering is
canonical Unicode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Union

from . import logic
from .logic import (
    PROP,
    REAL,
    SortTag,
    Term,
    Formula,
    Var,
    NumLit,
    App,
    PredApp,
    Cmp,
    Not,
    And,
    Or,
    Implies,
    Iff,
    Forall,
    Exists,
    TrueF,
    FalseF,
    TRUE,
    Rule,
)

# ---------------------------------------------------------------------------
# Diagnostics


@dataclass(frozen=True)
class Span:
    line: int
    col: int
    end_line: int
    end_col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    span: Span
    code: str = "syntax"
    hint: Optional[str] = None

    def __str__(self) -> str:
        text = f"{self.span}: {self.severity}: {self.message}"
        if self.hint:
            text += f" (hint: {self.hint})"
        return text


class DslError(Exception):
    """Parse or elaboration failure, carrying a positioned diagnostic."""

    def __init__(self, diagnostic: Diagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic


def _err(message: str, span: Span, code: str = "syntax", hint: str = None) -> DslError:
    return DslError(Diagnostic("error", message, span, code, hint))


@dataclass(frozen=True)
class SourceFile:
    path: str
    text: str
    kind: str  # "theorem-file" | "library-file" | "axiom-file" | "manifest"


# ---------------------------------------------------------------------------
# Tactic script nodes


@dataclass(frozen=True)
class Intros:
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Apply:
    rule: str
    args: tuple[Term, ...]
    witnesses: tuple[str, ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Finish:
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Assert:
    formula: Formula
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Have:
    name: Optional[str]
    formula: Formula
    sub: tuple["TacticNode", ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ByCases:
    cond: Formula
    then: tuple["TacticNode", ...]
    other: tuple["TacticNode", ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ByContra:
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Use:
    term: Term
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SplitGoal:
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class CasesHyp:
    hyp: str
    branches: tuple[tuple["TacticNode", ...], ...]
    line: int = field(default=0, compare=False)


TacticNode = Union[
    Intros, Apply, Finish, Assert, Have, ByCases, ByContra, Use, SplitGoal, CasesHyp
]
TacticScript = tuple[TacticNode, ...]

TACTIC_KEYWORDS = {
    "euclid_intros",
    "euclid_apply",
    "euclid_finish",
    "euclid_assert",
    "have",
    "by_cases",
    "by_contra",
    "use",
    "constructor",
    "split_ands",
    "cases",
}

# ---------------------------------------------------------------------------
# Lexer

_PUNCT = {
    "∀": "FORALL",
    "∃": "EXISTS",
    "∧": "AND",
    "∨": "OR",
    "¬": "NOT",
    "→": "ARROW",
    "↔": "IFF",
    "≠": "NEQ",
    "≤": "LE",
    "≥": "GE",
    "<": "LT",
    ">": "GT",
    "=": "EQ",
    ":": "COLON",
    ",": "COMMA",
    "(": "LP",
    ")": "RP",
    ".": "DOT",
    "·": "BULLET",
    "|": "PIPE",
    "∠": "ANGLE",
    "△": "AREA",
    "∟": "RIGHTANGLE",
    "+": "PLUS",
    "-": "MINUS",
    "*": "STAR",
    "/": "SLASH",
    "@": "AT",
    "[": "LBRACK",
    "]": "RBRACK",
    "{": "LBRACE",
    "}": "RBRACE",
    ";": "SEMI",
}

_MULTI = [
    (":=", "COLONEQ"),
    ("->", "ARROW"),
    ("<->", "IFF"),
    ("!=", "NEQ"),
    ("<=", "LE"),
    (">=", "GE"),
    ("/\\", "AND"),
    ("\\/", "OR"),
]

_WORD_ALIASES = {"forall": "FORALL", "exists": "EXISTS", "not": "NOT"}

_IDENT_EXTRA = set("_'′₀₁₂₃₄₅₆₇₈₉")


@dataclass(frozen=True)
class Token:
    kind: str
    value: str
    line: int
    col: int

    @property
    def span(self) -> Span:
        return Span(self.line, self.col, self.line, self.col + len(self.value))


def _strip_comment(line: str) -> str:
    for mark in ("#", "--"):
        idx = line.find(mark)
        if idx >= 0:
            line = line[:idx]
    return line


def tokenize(text: str, first_line: int = 1) -> list[Token]:
    tokens: list[Token] = []
    for lineno, raw in enumerate(text.splitlines(), start=first_line):
        line = _strip_comment(raw)
        i = 0
        n = len(line)
        while i < n:
            ch = line[i]
            if ch.isspace():
                i += 1
                continue
            matched = False
            for lit, kind in _MULTI:
                if line.startswith(lit, i):
                    tokens.append(Token(kind, lit, lineno, i + 1))
                    i += len(lit)
                    matched = True
                    break
            if matched:
                continue
            if ch.isdigit():
                j = i + 1
                while j < n and (line[j].isdigit() or line[j] == "."):
                    j += 1
                tokens.append(Token("NUMBER", line[i:j], lineno, i + 1))
                i = j
                continue
            if ch.isalpha() or ch == "_":
                j = i + 1
                while j < n and (line[j].isalnum() or line[j] in _IDENT_EXTRA):
                    j += 1
                word = line[i:j]
                kind = _WORD_ALIASES.get(word, "IDENT")
                tokens.append(Token(kind, word, lineno, i + 1))
                i = j
                continue
            if ch in _PUNCT:
                tokens.append(Token(_PUNCT[ch], ch, lineno, i + 1))
                i += 1
                continue
            raise _err(
                f"unexpected character {ch!r}",
                Span(lineno, i + 1, lineno, i + 2),
            )
    return tokens


# ---------------------------------------------------------------------------
# Symbol tables

_SORT_NAMES = {
    "Point": SortTag.POINT,
    "Line": SortTag.LINE,
    "Circle": SortTag.CIRCLE,
    "Real": SortTag.REAL,
    "ℝ": SortTag.REAL,
}


def default_symbols() -> dict[str, tuple[str, tuple[SortTag, ...]]]:
    """Fixed signature symbols plus surface aliases, name -> (kind, argsorts)."""
    table: dict[str, tuple[str, tuple[SortTag, ...]]] = {}
    for name, (argsorts, _res) in logic.FUNCTIONS.items():
        table[name] = ("fn", argsorts)
    for name, argsorts in logic.PREDICATES.items():
        table[name] = ("pred", argsorts)
    table["dist"] = ("fn:length", logic.FUNCTIONS["length"][0])
    return table


# ---------------------------------------------------------------------------
# Expression parser (statements and script formulas share it)


class _Parser:
    def __init__(
        self,
        tokens: Sequence[Token],
        symbols: Mapping[str, tuple[str, tuple[SortTag, ...]]],
        env: Optional[dict[str, SortTag]],
        script_mode: bool,
    ):
        self.toks = list(tokens)
        self.pos = 0
        self.symbols = symbols
        self.env = env if env is not None else {}
        self.script_mode = script_mode

    # -- token helpers

    def peek(self, ahead: int = 0) -> Optional[Token]:
        idx = self.pos + ahead
        return self.toks[idx] if idx < len(self.toks) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            last = self.toks[-1] if self.toks else Token("EOF", "", 1, 1)
            raise _err("unexpected end of input", last.span)
        self.pos += 1
        return tok

    def expect(self, kind: str) -> Token:
        tok = self.peek()
        if tok is None or tok.kind != kind:
            span = tok.span if tok else Span(1, 1, 1, 1)
            got = tok.value if tok else "end of input"
            raise _err(f"expected {kind}, found {got!r}", span)
        return self.next()

    def at_end(self) -> bool:
        return self.pos >= len(self.toks)

    # -- binders

    def parse_binder_groups(self) -> tuple[tuple[str, SortTag], ...]:
        binders: list[tuple[str, SortTag]] = []
        while self.peek() is not None and self.peek().kind == "LP":
            save = self.pos
            self.next()
            names = []
            while self.peek() is not None and self.peek().kind == "IDENT":
                names.append(self.next())
            if not names or self.peek() is None or self.peek().kind != "COLON":
                # Not a binder group after all (e.g. a parenthesized body).
                self.pos = save
                break
            self.next()
            sort_tok = self.expect("IDENT")
            sort = _SORT_NAMES.get(sort_tok.value)
            if sort is None:
                raise _err(
                    f"unknown sort {sort_tok.value!r}",
                    sort_tok.span,
                    code="sort-annotation-missing",
                )
            self.expect("RP")
            for t in names:
                binders.append((t.value, sort))
        if not binders:
            tok = self.peek()
            span = tok.span if tok else Span(1, 1, 1, 1)
            raise _err("expected parenthesized binder group", span)
        return tuple(binders)

    # -- formulas / terms

    _CMP_KINDS = ("EQ", "NEQ", "LT", "LE", "GT", "GE")

    def parse_expr(self, prec: int = 0):
        node = self.parse_implies() if prec == 0 else None
        return node

    def parse_formula(self):
        return self.parse_iff()

    def parse_iff(self):
        lhs = self.parse_implies()
        while self.peek() is not None and self.peek().kind == "IFF":
            tok = self.next()
            rhs = self.parse_implies()
            lhs = Iff(self._as_formula(lhs, tok), self._as_formula(rhs, tok))
        return lhs

    def parse_implies(self):
        lhs = self.parse_or()
        if self.peek() is not None and self.peek().kind == "ARROW":
            tok = self.next()
            rhs = self.parse_implies()
            return Implies(self._as_formula(lhs, tok), self._as_formula(rhs, tok))
        return lhs

    def parse_or(self):
        parts = [self.parse_and()]
        while self.peek() is not None and self.peek().kind == "OR":
            tok = self.next()
            parts.append(self.parse_and())
        if len(parts) == 1:
            return parts[0]
        return Or(tuple(self._as_formula(p, self.toks[self.pos - 1]) for p in parts))

    def parse_and(self):
        parts = [self.parse_unary()]
        while self.peek() is not None and self.peek().kind == "AND":
            self.next()
            parts.append(self.parse_unary())
        if len(parts) == 1:
            return parts[0]
        return And(tuple(self._as_formula(p, self.toks[self.pos - 1]) for p in parts))

    def parse_unary(self):
        tok = self.peek()
        if tok is not None and tok.kind == "NOT":
            self.next()
            body = self.parse_unary()
            return Not(self._as_formula(body, tok))
        if tok is not None and tok.kind in ("FORALL", "EXISTS"):
            self.next()
            binders = self.parse_binder_groups()
            self.expect("COMMA")
            outer = {}
            for n, s in binders:
                outer[n] = self.env.get(n)
                self.env[n] = s
            body = self.parse_iff()
            for n, _ in binders:
                if outer[n] is None:
                    del self.env[n]
                else:
                    self.env[n] = outer[n]
            cls = Forall if tok.kind == "FORALL" else Exists
            return cls(binders, self._as_formula(body, tok))
        return self.parse_cmp()

    def parse_cmp(self):
        lhs = self.parse_sum()
        tok = self.peek()
        if tok is None or tok.kind not in self._CMP_KINDS:
            return lhs
        self.next()
        rhs = self.parse_sum()
        lterm = self._as_term(lhs, tok)
        rterm = self._as_term(rhs, tok)
        if tok.kind in ("GT", "GE"):
            lterm, rterm = rterm, lterm
        op = {"EQ": "=", "NEQ": "=", "LT": "<", "LE": "<=", "GT": "<", "GE": "<="}[
            tok.kind
        ]
        ls, rs = self._term_sort(lterm, tok), self._term_sort(rterm, tok)
        if self.script_mode and PROP in (ls, rs):
            # Sorts of bare script identifiers are resolved by the engine;
            # "eq?" is its placeholder equality.
            atom: Formula
            if op == "=":
                atom = PredApp("eq?", (lterm, rterm))
            else:
                atom = Cmp(op, lterm, rterm)
            return Not(atom) if tok.kind == "NEQ" else atom
        if ls != rs:
            raise _err(
                f"comparison between sorts {ls} and {rs}", tok.span, "sort-mismatch"
            )
        if ls == REAL:
            atom = Cmp(op, lterm, rterm)
        else:
            if op != "=":
                raise _err(f"ordering on sort {ls}", tok.span, "sort-mismatch")
            pred = logic.EQ_PREDICATES.get(ls)
            if pred is None:
                raise _err(f"no equality at sort {ls}", tok.span, "sort-mismatch")
            atom = PredApp(pred, (lterm, rterm))
        return Not(atom) if tok.kind == "NEQ" else atom

    def parse_sum(self):
        node = self.parse_product()
        while self.peek() is not None and self.peek().kind in ("PLUS", "MINUS"):
            tok = self.next()
            rhs = self.parse_product()
            node = self._arith("add" if tok.kind == "PLUS" else "sub", node, rhs, tok)
        return node

    def parse_product(self):
        node = self.parse_neg()
        while self.peek() is not None and self.peek().kind in ("STAR", "SLASH"):
            tok = self.next()
            rhs = self.parse_neg()
            node = self._arith("mul" if tok.kind == "STAR" else "div", node, rhs, tok)
        return node

    def parse_neg(self):
        tok = self.peek()
        if tok is not None and tok.kind == "MINUS":
            self.next()
            body = self._as_term(self.parse_neg(), tok)
            if isinstance(body, NumLit):
                return NumLit(-body.value)
            return App("neg", (body,))
        return self.parse_postfix()

    def _arith(self, fn: str, lhs, rhs, tok: Token) -> Term:
        lt = self._as_term(lhs, tok)
        rt = self._as_term(rhs, tok)
        if isinstance(lt, NumLit) and isinstance(rt, NumLit):
            if fn == "add":
                return NumLit(lt.value + rt.value)
            if fn == "sub":
                return NumLit(lt.value - rt.value)
            if fn == "mul":
                return NumLit(lt.value * rt.value)
            if fn == "div":
                if rt.value == 0:
                    raise _err("division by zero literal", tok.span)
                return NumLit(lt.value / rt.value)
        return App(fn, (lt, rt))

    def parse_postfix(self):
        node = self.parse_atom()
        while self.peek() is not None and self.peek().kind == "DOT":
            dot = self.next()
            name_tok = self.expect("IDENT")
            entry = self.symbols.get(name_tok.value)
            if entry is None:
                raise _err(
                    f"unknown predicate {name_tok.value!r}",
                    name_tok.span,
                    "unknown-symbol",
                )
            kind, argsorts = entry
            rest = len(argsorts) - 1
            if rest < 0:
                raise _err(
                    f"{name_tok.value} takes no arguments", name_tok.span
                )
            args = [self._as_term(node, dot)]
            for _ in range(rest):
                args.append(self._as_term(self.parse_arg_atom(), name_tok))
            node = self._apply_symbol(name_tok, kind, tuple(args))
        return node

    def parse_arg_atom(self):
        """One application argument: an identifier, literal, or bracketed form."""
        tok = self.peek()
        if tok is None:
            raise _err("expected argument", self.toks[-1].span)
        if tok.kind == "IDENT" and self.peek(1) is not None and self.peek(1).kind == "LP":
            return self.parse_atom()
        if tok.kind == "IDENT":
            self.next()
            return self._identifier(tok, bare=True)
        if tok.kind in ("NUMBER", "LP", "PIPE", "ANGLE", "AREA", "RIGHTANGLE"):
            return self.parse_atom()
        raise _err(f"expected argument, found {tok.value!r}", tok.span)

    def _starts_atom(self) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind in (
            "IDENT",
            "NUMBER",
            "LP",
            "PIPE",
            "ANGLE",
            "AREA",
            "RIGHTANGLE",
        )

    def parse_atom(self):
        tok = self.next()
        if tok.kind == "NUMBER":
            try:
                return NumLit(Fraction(tok.value))
            except ValueError:
                raise _err(f"bad numeric literal {tok.value!r}", tok.span)
        if tok.kind == "RIGHTANGLE":
            return App("rightAngle", ())
        if tok.kind == "LP":
            inner = self.parse_iff()
            self.expect("RP")
            return inner
        if tok.kind == "PIPE":
            self.expect("LP")
            lhs = self._as_term(self.parse_arg_atom(), tok)
            self.expect("MINUS")
            rhs = self._as_term(self.parse_arg_atom(), tok)
            self.expect("RP")
            self.expect("PIPE")
            return App("length", (lhs, rhs))
        if tok.kind == "ANGLE":
            a = self._as_term(self.parse_arg_atom(), tok)
            self.expect("COLON")
            b = self._as_term(self.parse_arg_atom(), tok)
            self.expect("COLON")
            c = self._as_term(self.parse_arg_atom(), tok)
            return App("angle", (a, b, c))
        if tok.kind == "AREA":
            a = self._as_term(self.parse_arg_atom(), tok)
            self.expect("COLON")
            b = self._as_term(self.parse_arg_atom(), tok)
            self.expect("COLON")
            c = self._as_term(self.parse_arg_atom(), tok)
            return App("area", (a, b, c))
        if tok.kind == "IDENT":
            return self._identifier(tok, bare=False)
        raise _err(f"unexpected token {tok.value!r}", tok.span)

    def _identifier(self, tok: Token, bare: bool):
        name = tok.value
        if name == "True":
            return TRUE
        if name == "False":
            return FalseF()
        if name in ("pi", "π"):
            return App("pi", ())
        entry = self.symbols.get(name)
        if entry is not None:
            kind, argsorts = entry
            if len(argsorts) == 0:
                return self._apply_symbol(tok, kind, ())
            if bare:
                # Inside another application's argument list a symbol name
                # with missing arguments is not a call.
                nxt = self.peek()
                if nxt is None or nxt.kind != "LP":
                    raise _err(
                        f"{name} expects {len(argsorts)} arguments",
                        tok.span,
                        "arity",
                    )
            args: list[Term] = []
            if self.peek() is not None and self.peek().kind == "LP":
                self.next()
                while True:
                    args.append(self._as_term(self.parse_iff(), tok))
                    nxt = self.peek()
                    if nxt is not None and nxt.kind == "COMMA":
                        self.next()
                        continue
                    break
                self.expect("RP")
            else:
                for _ in argsorts:
                    if not self._starts_atom():
                        nxt = self.peek()
                        span = nxt.span if nxt else tok.span
                        raise _err(
                            f"{name} expects {len(argsorts)} arguments",
                            span,
                            "arity",
                        )
                    args.append(self._as_term(self.parse_arg_atom(), tok))
            if len(args) != len(argsorts):
                raise _err(
                    f"{name} expects {len(argsorts)} arguments, got {len(args)}",
                    tok.span,
                    "arity",
                )
            return self._apply_symbol(tok, kind, tuple(args))
        # plain variable
        if self.peek() is not None and self.peek().kind == "LP":
            raise _err(f"unknown symbol {name!r}", tok.span, "unknown-symbol")
        if name in self.env:
            return Var(name, self.env[name])
        if self.script_mode:
            return Var(name, logic.UNRESOLVED)
        raise _err(
            f"variable {name!r} has no sort annotation",
            tok.span,
            "sort-annotation-missing",
        )

    def _apply_symbol(self, tok: Token, kind: str, args: tuple[Term, ...]):
        name = tok.value
        if kind.startswith("fn:"):
            name = kind.split(":", 1)[1]
            kind = "fn"
        if kind == "fn":
            return App(name, args)
        return PredApp(name, args)

    # -- coercions

    def _is_formula(self, node) -> bool:
        return isinstance(
            node, (PredApp, Cmp, Not, And, Or, Implies, Iff, Forall, Exists, TrueF, FalseF)
        )

    def _as_formula(self, node, tok: Token) -> Formula:
        if self._is_formula(node):
            return node
        raise _err("expected a formula, found a term", tok.span, "sort-mismatch")

    def _as_term(self, node, tok: Token) -> Term:
        if isinstance(node, (Var, NumLit, App)):
            return node
        raise _err("expected a term, found a formula", tok.span, "sort-mismatch")

    def _term_sort(self, t: Term, tok: Token) -> SortTag:
        try:
            return logic.term_sort(t)
        except logic.LogicError as e:
            raise _err(str(e), tok.span, "sort-mismatch")


# ---------------------------------------------------------------------------
# Statement / declaration parsing


def _rule_from_formula(name: str, kind: str, f: Formula, span: Span) -> Rule:
    params: tuple[tuple[str, SortTag], ...] = ()
    body = f
    if isinstance(body, Forall):
        params = body.binders
        body = body.body
    antecedents: list[Formula] = []
    while isinstance(body, Implies):
        antecedents.append(body.lhs)
        body = body.rhs
    premise = logic.conj([a for a in antecedents if not isinstance(a, TrueF)])
    return Rule(name=name, kind=kind, params=params, premise=premise, conclusion=body)


def parse_statement(
    text: str,
    symbols: Optional[Mapping[str, tuple[str, tuple[SortTag, ...]]]] = None,
    first_line: int = 1,
) -> Rule:
    """Parse one ``theorem NAME : ...`` header into a Rule of kind theorem.

    A trailing ``:= by ...`` proof block, if present, is ignored here; use
    parse_library to get statements paired with their scripts.
    """
    symbols = symbols if symbols is not None else default_symbols()
    tokens = tokenize(text, first_line)
    for i, tok in enumerate(tokens):
        if tok.kind == "COLONEQ":
            tokens = tokens[:i]
            break
    p = _Parser(tokens, symbols, env={}, script_mode=False)
    kw = p.expect("IDENT")
    if kw.value != "theorem":
        raise _err("expected 'theorem'", kw.span)
    name = p.expect("IDENT")
    p.expect("COLON")
    f = p.parse_formula()
    if not p.at_end():
        raise _err(f"trailing input after statement", p.peek().span)
    f = p._as_formula(f, kw)
    rule = _rule_from_formula(name.value, "theorem", f, kw.span)
    _check_rule_sorts(rule, symbols, kw.span)
    return rule


def _check_rule_sorts(rule: Rule, symbols, span: Span) -> None:
    extra = {
        n: tuple(argsorts)
        for n, (kind, argsorts) in symbols.items()
        if kind == "def"
    }
    env = dict(rule.params)
    try:
        logic.check_formula(rule.premise, env, extra)
        logic.check_formula(rule.conclusion, env, extra)
    except logic.LogicError as e:
        raise _err(str(e), span, "sort-mismatch")


# ---------------------------------------------------------------------------
# Tactic script parsing


@dataclass
class _Line:
    indent: int
    text: str
    lineno: int
    bullet: bool


def _script_lines(text: str, first_line: int) -> list[_Line]:
    lines: list[_Line] = []
    for lineno, raw in enumerate(text.splitlines(), start=first_line):
        content = _strip_comment(raw).rstrip()
        if not content.strip():
            continue
        stripped = content.lstrip()
        indent = len(content) - len(stripped)
        bullet = stripped.startswith("·") or (
            stripped.startswith(".") and not stripped.startswith("..")
            and (len(stripped) == 1 or stripped[1] == " ")
        )
        if bullet:
            rest = stripped[1:].lstrip()
            lines.append(_Line(indent, rest, lineno, True))
        else:
            lines.append(_Line(indent, stripped, lineno, False))
    return lines


class _ScriptParser:
    def __init__(self, lines: list[_Line], symbols):
        self.lines = lines
        self.symbols = symbols

    def parse(self) -> TacticScript:
        if not self.lines:
            return ()
        nodes, i = self.parse_block(0, self.lines[0].indent)
        if i != len(self.lines):
            ln = self.lines[i]
            raise _err(
                "unexpected dedent or stray bullet",
                Span(ln.lineno, ln.indent + 1, ln.lineno, ln.indent + 2),
            )
        return tuple(nodes)

    def parse_block(self, i: int, indent: int) -> tuple[list[TacticNode], int]:
        nodes: list[TacticNode] = []
        while i < len(self.lines):
            ln = self.lines[i]
            if ln.indent < indent or ln.bullet:
                break
            node, i = self.parse_tactic(i)
            if isinstance(node, list):
                nodes.extend(node)
            else:
                nodes.append(node)
        return nodes, i

    def _formula(self, text: str, ln: _Line) -> Formula:
        toks = tokenize(text, ln.lineno)
        p = _Parser(toks, self.symbols, env={}, script_mode=True)
        f = p.parse_formula()
        if not p.at_end():
            raise _err("trailing input after formula", p.peek().span)
        if not p._is_formula(f):
            raise _err(
                "expected a formula",
                Span(ln.lineno, ln.indent + 1, ln.lineno, ln.indent + 1 + len(text)),
            )
        return f

    def parse_branches(self, i: int, parent_indent: int, want: Optional[int]):
        """Bullet-marked branch blocks following a splitting tactic."""
        branches: list[tuple[TacticNode, ...]] = []
        if i < len(self.lines) and self.lines[i].bullet:
            bullet_indent = self.lines[i].indent
            while (
                i < len(self.lines)
                and self.lines[i].bullet
                and self.lines[i].indent == bullet_indent
            ):
                ln = self.lines[i]
                first = _Line(bullet_indent + 2, ln.text, ln.lineno, False)
                body = [first] if ln.text else []
                i += 1
                while i < len(self.lines) and self.lines[i].indent > bullet_indent:
                    body.append(self.lines[i])
                    i += 1
                sub = _ScriptParser(body, self.symbols).parse()
                branches.append(sub)
        if want is not None and len(branches) != want:
            ln = self.lines[min(i, len(self.lines) - 1)]
            raise _err(
                f"expected {want} bullet branches, found {len(branches)}",
                Span(ln.lineno, 1, ln.lineno, 2),
            )
        return branches, i

    def parse_tactic(self, i: int):
        ln = self.lines[i]
        toks = tokenize(ln.text, ln.lineno)
        if not toks:
            return [], i + 1
        head = toks[0]
        rest = toks[1:]

        def rest_text() -> str:
            return ln.text[len(head.value):].strip()

        if head.kind != "IDENT":
            raise _err(f"expected a tactic, found {head.value!r}", head.span)
        name = head.value

        if name not in TACTIC_KEYWORDS:
            raise _err(
                f"unknown tactic {name!r}",
                head.span,
                "unknown-tactic",
                hint="only the declarative geometry tactics are supported",
            )

        if name == "euclid_intros":
            self._expect_empty(rest, ln)
            return Intros(line=ln.lineno), i + 1
        if name == "euclid_finish":
            self._expect_empty(rest, ln)
            return Finish(line=ln.lineno), i + 1
        if name == "by_contra":
            # an optional hypothesis name is tolerated and ignored
            return ByContra(line=ln.lineno), i + 1
        if name in ("constructor", "split_ands"):
            self._expect_empty(rest, ln)
            node = SplitGoal(line=ln.lineno)
            branches, j = self.parse_branches(i + 1, ln.indent, want=None)
            flat: list[TacticNode] = [node]
            for b in branches:
                flat.extend(b)
            return flat, j
        if name == "euclid_assert":
            return Assert(self._formula(rest_text(), ln), line=ln.lineno), i + 1
        if name == "use":
            p = _Parser(rest, self.symbols, env={}, script_mode=True)
            term = p._as_term(p.parse_sum(), head)
            if not p.at_end():
                raise _err("trailing input after witness", p.peek().span)
            return Use(term, line=ln.lineno), i + 1
        if name == "euclid_apply":
            return self._parse_apply(rest, ln), i + 1
        if name == "by_cases":
            text = rest_text()
            # tolerate "by_cases h : P"
            if rest and rest[0].kind == "IDENT" and len(rest) > 1 and rest[1].kind == "COLON":
                text = ln.text.split(":", 1)[1].strip()
            cond = self._formula(text, ln)
            branches, j = self.parse_branches(i + 1, ln.indent, want=2)
            return ByCases(cond, branches[0], branches[1], line=ln.lineno), j
        if name == "cases":
            if not rest or rest[0].kind != "IDENT":
                raise _err("cases expects a hypothesis name", head.span)
            branches, j = self.parse_branches(i + 1, ln.indent, want=None)
            if not branches:
                raise _err("cases expects bullet branches", head.span)
            return CasesHyp(rest[0].value, tuple(branches), line=ln.lineno), j
        if name == "have":
            return self._parse_have(toks, ln, i)
        raise _err(f"unknown tactic {name!r}", head.span, "unknown-tactic")

    def _expect_empty(self, rest: list[Token], ln: _Line) -> None:
        if rest:
            raise _err(f"unexpected argument {rest[0].value!r}", rest[0].span)

    def _parse_apply(self, rest: list[Token], ln: _Line) -> Apply:
        if not rest or rest[0].kind != "IDENT":
            span = rest[0].span if rest else Span(ln.lineno, 1, ln.lineno, 2)
            raise _err("euclid_apply expects a rule name", span)
        rule = rest[0].value
        p = _Parser(rest[1:], self.symbols, env={}, script_mode=True)
        args: list[Term] = []
        witnesses: list[str] = []
        while not p.at_end():
            tok = p.peek()
            if tok.kind == "IDENT" and tok.value == "as":
                p.next()
                while not p.at_end():
                    w = p.expect("IDENT")
                    witnesses.append(w.value)
                    if not p.at_end() and p.peek().kind == "COMMA":
                        p.next()
                break
            if tok.kind == "IDENT" and tok.value == "with":
                raise _err(
                    "the 'with' argument form is not supported",
                    tok.span,
                    "unsupported",
                    hint="pass arguments positionally and name witnesses with 'as'",
                )
            args.append(p._as_term(p.parse_arg_atom(), tok))
        return Apply(rule, tuple(args), tuple(witnesses), line=ln.lineno)

    def _parse_have(self, toks: list[Token], ln: _Line, i: int):
        # have [name] : FORMULA := by [inline tactic]
        idx = 1
        name: Optional[str] = None
        if idx < len(toks) and toks[idx].kind == "IDENT":
            name = toks[idx].value
            idx += 1
        if idx >= len(toks) or toks[idx].kind != "COLON":
            raise _err("have expects ': FORMULA'", toks[0].span)
        idx += 1
        coloneq = None
        for j in range(idx, len(toks)):
            if toks[j].kind == "COLONEQ":
                coloneq = j
                break
        if coloneq is None:
            raise _err("have expects ':= by'", toks[0].span)
        p = _Parser(toks[idx:coloneq], self.symbols, env={}, script_mode=True)
        f = p.parse_formula()
        if not p.at_end():
            raise _err("trailing input in have formula", p.peek().span)
        if not p._is_formula(f):
            raise _err("have expects a formula", toks[idx].span)
        after = toks[coloneq + 1:]
        if not after or after[0].kind != "IDENT" or after[0].value != "by":
            raise _err("have expects ':= by'", toks[coloneq].span)
        inline = after[1:]
        if inline:
            text = ln.text.split(":=", 1)[1].strip()
            assert text.startswith("by")
            sub_line = _Line(ln.indent + 2, text[2:].strip(), ln.lineno, False)
            sub = _ScriptParser([sub_line], self.symbols).parse()
            return Have(name, f, sub, line=ln.lineno), i + 1
        body: list[_Line] = []
        j = i + 1
        while j < len(self.lines) and self.lines[j].indent > ln.indent:
            body.append(self.lines[j])
            j += 1
        if not body:
            raise _err("have has an empty proof block", toks[0].span)
        sub = _ScriptParser(body, self.symbols).parse()
        return Have(name, f, sub, line=ln.lineno), j


def parse_proof(
    text: str,
    symbols: Optional[Mapping[str, tuple[str, tuple[SortTag, ...]]]] = None,
    first_line: int = 1,
) -> TacticScript:
    """Parse a tactic block (the text after ':= by') into a TacticScript.

    Identifiers in script arguments carry a placeholder sort; the engine
    resolves them against the goal context at execution time.
    """
    symbols = symbols if symbols is not None else default_symbols()
    lines = _script_lines(text, first_line)
    if lines and lines[0].text == "by":
        lines = lines[1:]
    return _ScriptParser(lines, symbols).parse()


# ---------------------------------------------------------------------------
# Library / axiom file parsing


@dataclass(frozen=True)
class DefinitionDecl:
    name: str
    params: tuple[tuple[str, SortTag], ...]
    body: Formula
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class AxiomDecl:
    name: str
    group: str
    rule: Rule
    euclid_tagged: bool
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class TheoremDecl:
    rule: Rule
    script: TacticScript
    line: int = field(default=0, compare=False)


LibraryEntry = Union[DefinitionDecl, AxiomDecl, TheoremDecl]

AXIOM_GROUPS = (
    "construction",
    "diagrammatic-inference",
    "metric-inference",
    "superposition",
    "leangeo-extension",
)

_DECL_HEADS = ("def", "axiom", "theorem")


def parse_library(
    text: str,
    symbols: Optional[Mapping[str, tuple[str, tuple[SortTag, ...]]]] = None,
) -> list[LibraryEntry]:
    """Parse a library or axiom file into declarations in file order.

    Definitions extend the symbol table as parsing proceeds, so later
    declarations may reference earlier ones.  File order is the visibility
    order used for rule lookup during checking.
    """
    table = dict(symbols if symbols is not None else default_symbols())
    raw_lines = text.splitlines()
    entries: list[LibraryEntry] = []

    # split into declaration chunks: a chunk starts at a column-0 line whose
    # first word is a declaration keyword or attribute
    chunks: list[tuple[int, list[str]]] = []
    current: Optional[list[str]] = None
    for lineno, raw in enumerate(raw_lines, start=1):
        content = _strip_comment(raw).rstrip()
        if not content.strip():
            continue
        stripped = content.lstrip()
        head = stripped.split(None, 1)[0] if stripped else ""
        starts = (not content[0].isspace()) and (
            head in _DECL_HEADS or stripped.startswith("@[")
        )
        if starts:
            current = [raw]
            chunks.append((lineno, current))
        else:
            if current is None:
                raise _err(
                    f"expected a declaration, found {stripped.split()[0]!r}",
                    Span(lineno, 1, lineno, 1 + len(stripped)),
                )
            current.append(raw)

    seen: set[str] = set()
    pending_attrs: list[str] = []
    for lineno, chunk in chunks:
        body = "\n".join(chunk)
        head = _strip_comment(chunk[0]).strip().split(None, 1)[0]
        if head.startswith("@["):
            attr = head[2:].rstrip("]")
            pending_attrs.append(attr)
            remainder = _strip_comment(chunk[0]).strip()[len(head):].strip()
            remaining = [remainder] + chunk[1:] if remainder else chunk[1:]
            if not remaining:
                continue
            body = "\n".join(remaining)
            head = _strip_comment(remaining[0]).strip().split(None, 1)[0]
        if head == "def":
            entry = _parse_def(body, lineno, table)
        elif head == "axiom":
            entry = _parse_axiom(body, lineno, table, pending_attrs)
        elif head == "theorem":
            entry = _parse_theorem(body, lineno, table)
        else:
            raise _err(f"expected a declaration, found {head!r}", Span(lineno, 1, lineno, 2))
        pending_attrs = []
        if _entry_name(entry) in seen:
            raise _err(
                f"duplicate name {_entry_name(entry)!r}",
                Span(lineno, 1, lineno, 2),
                "duplicate-name",
            )
        seen.add(_entry_name(entry))
        if isinstance(entry, DefinitionDecl):
            table[entry.name] = ("def", tuple(s for _, s in entry.params))
        entries.append(entry)
    return entries


def _entry_name(entry: LibraryEntry) -> str:
    if isinstance(entry, DefinitionDecl):
        return entry.name
    if isinstance(entry, AxiomDecl):
        return entry.name
    return entry.rule.name


def _parse_def(text: str, lineno: int, table) -> DefinitionDecl:
    toks = tokenize(text, lineno)
    p = _Parser(toks, table, env={}, script_mode=False)
    kw = p.expect("IDENT")
    name = p.expect("IDENT")
    if name.value in table:
        raise _err(f"duplicate name {name.value!r}", name.span, "duplicate-name")
    params = p.parse_binder_groups()
    p.expect("COLONEQ")
    p.env = dict(params)
    f = p.parse_formula()
    if not p.at_end():
        raise _err("trailing input after definition", p.peek().span)
    f = p._as_formula(f, kw)
    free = {n for n, _ in logic.free_vars(f)}
    if not free <= {n for n, _ in params}:
        raise _err(
            f"definition {name.value} has unbound variables "
            f"{sorted(free - {n for n, _ in params})}",
            name.span,
        )
    return DefinitionDecl(name.value, params, f, line=lineno)


def _parse_axiom(text: str, lineno: int, table, attrs: list[str]) -> AxiomDecl:
    toks = tokenize(text, lineno)
    p = _Parser(toks, table, env={}, script_mode=False)
    kw = p.expect("IDENT")
    name = p.expect("IDENT")
    grp = p.expect("IDENT")
    if grp.value != "group":
        raise _err("axiom expects 'group GROUP :'", grp.span)
    parts = [p.expect("IDENT").value]
    while p.peek() is not None and p.peek().kind == "MINUS":
        p.next()
        parts.append(p.expect("IDENT").value)
    group = "-".join(parts)
    if group not in AXIOM_GROUPS:
        raise _err(f"unknown axiom group {group!r}", grp.span)
    p.expect("COLON")
    f = p.parse_formula()
    if not p.at_end():
        raise _err("trailing input after axiom", p.peek().span)
    f = p._as_formula(f, kw)
    kind = "construction" if group == "construction" else "inference"
    rule = _rule_from_formula(name.value, kind, f, name.span)
    _check_rule_sorts(rule, table, name.span)
    tagged = group != "construction"
    if "euclid" in attrs:
        tagged = True
    if "noeuclid" in attrs:
        tagged = False
    return AxiomDecl(name.value, group, rule, tagged, line=lineno)


def _parse_theorem(text: str, lineno: int, table) -> TheoremDecl:
    lines = text.splitlines()
    header_parts: list[str] = []
    script_lines: list[str] = []
    script_start = lineno
    in_script = False
    for off, raw in enumerate(lines):
        if in_script:
            script_lines.append(raw)
            continue
        content = _strip_comment(raw)
        idx = content.find(":=")
        if idx >= 0:
            header_parts.append(content[:idx])
            tail = content[idx + 2:].strip()
            if not tail.startswith("by"):
                raise _err(
                    "theorem proof must start with ':= by'",
                    Span(lineno + off, idx + 1, lineno + off, idx + 3),
                )
            tail = tail[2:].strip()
            if tail:
                script_lines.append("  " + tail)
            script_start = lineno + off + 1
            in_script = True
        else:
            header_parts.append(raw)
    if not in_script:
        raise _err(
            "theorem declaration has no ':= by' proof",
            Span(lineno, 1, lineno, 2),
        )
    rule = parse_statement("\n".join(header_parts), table, first_line=lineno)
    script = parse_proof("\n".join(script_lines), table, first_line=script_start)
    return TheoremDecl(rule, script, line=lineno)


# ---------------------------------------------------------------------------
# Rendering


_SORT_ORDER = (SortTag.POINT, SortTag.LINE, SortTag.CIRCLE, SortTag.REAL)


def _render_binders(binders: Iterable[tuple[str, SortTag]]) -> str:
    groups: list[tuple[list[str], SortTag]] = []
    for n, s in binders:
        if groups and groups[-1][1] == s:
            groups[-1][0].append(n)
        else:
            groups.append(([n], s))
    return " ".join(f"({' '.join(ns)} : {s.value})" for ns, s in groups)


def render_term(t: Term, prec: int = 0) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, NumLit):
        v = t.value
        if v.denominator == 1:
            return str(v.numerator)
        return f"{v.numerator}/{v.denominator}"
    if isinstance(t, App):
        if t.fn == "length":
            return f"|({_atom(t.args[0])} - {_atom(t.args[1])})|"
        if t.fn == "angle":
            return "∠ " + ":".join(_atom(a) for a in t.args)
        if t.fn == "area":
            return "△ " + ":".join(_atom(a) for a in t.args)
        if t.fn == "rightAngle":
            return "∟"
        if t.fn == "pi":
            return "π"
        if t.fn in ("sin", "cos"):
            return f"{t.fn}({render_term(t.args[0])})"
        if t.fn == "neg":
            inner = render_term(t.args[0], 30)
            return f"-{inner}"
        infix = {"add": ("+", 10), "sub": ("-", 10), "mul": ("*", 20), "div": ("/", 20)}
        if t.fn in infix:
            op, level = infix[t.fn]
            lhs = render_term(t.args[0], level)
            rhs = render_term(t.args[1], level + 1)
            text = f"{lhs} {op} {rhs}"
            return f"({text})" if prec > level else text
        raise logic.UnknownSymbol(f"cannot render function {t.fn!r}")
    raise logic.LogicError(f"not a term: {t!r}")


def _atom(t: Term) -> str:
    text = render_term(t, 100)
    if isinstance(t, (Var, NumLit)) or (
        isinstance(t, App) and t.fn in ("length", "rightAngle", "pi", "sin", "cos")
    ):
        return text
    return f"({text})"


_NEQ_PREDS = set(logic.EQ_PREDICATES.values()) | {"eq?"}


def render_formula(f: Formula, prec: int = 0) -> str:
    if isinstance(f, TrueF):
        return "True"
    if isinstance(f, FalseF):
        return "False"
    if isinstance(f, PredApp):
        if f.pred in _NEQ_PREDS:
            return _wrap(f"{_atom(f.args[0])} = {_atom(f.args[1])}", 5, prec)
        args = " ".join(_atom(a) for a in f.args)
        return f"{f.pred} {args}" if args else f.pred
    if isinstance(f, Cmp):
        op = {"=": "=", "<": "<", "<=": "≤"}[f.op]
        return _wrap(f"{render_term(f.lhs, 6)} {op} {render_term(f.rhs, 6)}", 5, prec)
    if isinstance(f, Not):
        body = f.body
        if isinstance(body, PredApp) and body.pred in _NEQ_PREDS:
            return _wrap(
                f"{_atom(body.args[0])} ≠ {_atom(body.args[1])}", 5, prec
            )
        if isinstance(body, Cmp) and body.op == "=":
            return _wrap(
                f"{render_term(body.lhs, 6)} ≠ {render_term(body.rhs, 6)}",
                5,
                prec,
            )
        return f"¬ {render_formula(body, 40)}"
    if isinstance(f, And):
        text = " ∧ ".join(render_formula(a, 4) for a in f.args)
        return _wrap(text, 3, prec)
    if isinstance(f, Or):
        text = " ∨ ".join(render_formula(a, 3) for a in f.args)
        return _wrap(text, 2, prec)
    if isinstance(f, Implies):
        text = f"{render_formula(f.lhs, 2)} → {render_formula(f.rhs, 1)}"
        return _wrap(text, 1, prec)
    if isinstance(f, Iff):
        text = f"{render_formula(f.lhs, 1)} ↔ {render_formula(f.rhs, 1)}"
        return _wrap(text, 0, prec)
    if isinstance(f, (Forall, Exists)):
        q = "∀" if isinstance(f, Forall) else "∃"
        text = f"{q} {_render_binders(f.binders)}, {render_formula(f.body, 0)}"
        return _wrap(text, 0, prec)
    raise logic.LogicError(f"not a formula: {f!r}")


def _wrap(text: str, level: int, prec: int) -> str:
    return f"({text})" if prec > level else text


def render_rule(rule: Rule) -> str:
    body: Formula = rule.conclusion
    premise = rule.premise
    if not isinstance(premise, TrueF) or rule.kind == "theorem":
        body = Implies(premise, body)
    if rule.params:
        body = Forall(rule.params, body)
    return f"theorem {rule.name} : {render_formula(body)}"


def render_script(script: TacticScript, indent: int = 2) -> str:
    lines: list[str] = []
    _render_nodes(script, indent, lines)
    return "\n".join(lines)


def _render_nodes(nodes: Sequence[TacticNode], indent: int, out: list[str]) -> None:
    pad = " " * indent
    for node in nodes:
        if isinstance(node, Intros):
            out.append(pad + "euclid_intros")
        elif isinstance(node, Finish):
            out.append(pad + "euclid_finish")
        elif isinstance(node, ByContra):
            out.append(pad + "by_contra")
        elif isinstance(node, SplitGoal):
            out.append(pad + "constructor")
        elif isinstance(node, Use):
            out.append(pad + f"use {render_term(node.term)}")
        elif isinstance(node, Assert):
            out.append(pad + f"euclid_assert {render_formula(node.formula)}")
        elif isinstance(node, Apply):
            text = pad + f"euclid_apply {node.rule}"
            for a in node.args:
                text += f" {_atom(a)}"
            if node.witnesses:
                text += " as " + " ".join(node.witnesses)
            out.append(text)
        elif isinstance(node, Have):
            label = f" {node.name}" if node.name else ""
            out.append(pad + f"have{label} : {render_formula(node.formula)} := by")
            _render_nodes(node.sub, indent + 2, out)
        elif isinstance(node, ByCases):
            out.append(pad + f"by_cases {render_formula(node.cond)}")
            for branch in (node.then, node.other):
                _render_branch(branch, indent, out)
        elif isinstance(node, CasesHyp):
            out.append(pad + f"cases {node.hyp}")
            for branch in node.branches:
                _render_branch(branch, indent, out)
        else:
            raise logic.LogicError(f"cannot render tactic {node!r}")


def _render_branch(branch: Sequence[TacticNode], indent: int, out: list[str]) -> None:
    tmp: list[str] = []
    _render_nodes(branch, indent + 2, tmp)
    if not tmp:
        tmp = [" " * (indent + 2) + "euclid_finish"]
    out.append(" " * indent + "· " + tmp[0][indent + 2:])
    out.extend(tmp[1:])


def render(x) -> str:
    """Canonical Unicode text for a Rule or TacticScript; reparsing yields
    a structurally equal value."""
    if isinstance(x, Rule):
        return render_rule(x)
    if isinstance(x, tuple):
        return render_script(x)
    if isinstance(x, (Var, NumLit, App)):
        return render_term(x)
    return render_formula(x)
