"""SMT-LIB 2 translation, axiom-command caching, and the solver driver.

Obligations are discharged by unsatisfiability: the local hypotheses, the
tagged axioms, and the negated goal are written as one SMT-LIB 2 query and
handed to an external solver process (CVC5- or Z3-compatible).  Axiom
translation is cached per session: each constant's commands are produced
once, in dependency order, and reused verbatim by every later query.
"""

from __future__ import annotations

import os
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence

from . import logic
from .logic import (
    App,
    Cmp,
    Exists,
    FalseF,
    Forall,
    Formula,
    NumLit,
    PredApp,
    Rule,
    SortTag,
    Term,
    TrueF,
    Var,
)
from .theory import AxiomEntry, Theory


class SmtError(Exception):
    pass


class UnexpandedDefinition(SmtError):
    pass


class UnknownConstant(SmtError):
    pass


class CycleDetected(SmtError):
    pass


class SolverNotFound(SmtError):
    pass


class ProtocolError(SmtError):
    pass


@dataclass(frozen=True)
class SmtCommand:
    kind: str  # declare-sort | declare-fun | assert | option | check
    text: str


@dataclass(frozen=True)
class SolverVerdict:
    status: str  # unsat | sat | unknown | timeout | solver-error
    wall_time: float
    detail: str = ""

    @property
    def discharges(self) -> bool:
        return self.status == "unsat"


@dataclass
class SolverConfig:
    solver_path: Optional[str] = None
    solver_args: tuple[str, ...] = ()
    timeout_secs: float = 60.0
    # shorter budget for argument-inference probe queries
    probe_timeout_secs: float = 2.0
    dump_dir: Optional[str] = None
    get_model: bool = False
    axiom_allowlist: Optional[frozenset[str]] = None
    jobs: int = 1
    seed: int = 0


# ---------------------------------------------------------------------------
# Name mangling


def mangle(name: str) -> str:
    """Deterministic, injective ASCII mangling for context variable names."""
    out = ["v_"]
    for ch in name:
        if ch.isascii() and (ch.isalnum()):
            out.append(ch)
        elif ch == "_":
            out.append("__")
        else:
            out.append(f"_{ord(ch):04x}_")
    return "".join(out)


_SORT_SMT = {
    SortTag.POINT: "Point",
    SortTag.LINE: "Line",
    SortTag.CIRCLE: "Circle",
    SortTag.REAL: "Real",
}

_EQ_PREDS = set(logic.EQ_PREDICATES.values())

_ARITH = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


def _lit(value: Fraction) -> str:
    num, den = value.numerator, value.denominator
    if num < 0:
        return f"(- {_lit(-value)})"
    if den == 1:
        return f"{num}.0"
    return f"(/ {num} {den})"


def translate_term(t: Term, env: dict[str, str]) -> str:
    if isinstance(t, Var):
        return env.get(t.name, mangle(t.name))
    if isinstance(t, NumLit):
        return _lit(t.value)
    if isinstance(t, App):
        if t.fn in _ARITH:
            op = _ARITH[t.fn]
            return f"({op} {translate_term(t.args[0], env)} {translate_term(t.args[1], env)})"
        if t.fn == "neg":
            return f"(- {translate_term(t.args[0], env)})"
        if t.fn not in logic.FUNCTIONS:
            raise SmtError(f"unknown function {t.fn!r}")
        if not t.args:
            return t.fn
        args = " ".join(translate_term(a, env) for a in t.args)
        return f"({t.fn} {args})"
    raise SmtError(f"not a term: {t!r}")


def translate_formula(f: Formula, env: Optional[dict[str, str]] = None) -> str:
    env = env if env is not None else {}
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, FalseF):
        return "false"
    if isinstance(f, PredApp):
        if f.pred in _EQ_PREDS:
            return f"(= {translate_term(f.args[0], env)} {translate_term(f.args[1], env)})"
        if f.pred == "eq?":
            raise SmtError("unresolved placeholder equality reached translation")
        if f.pred not in logic.PREDICATES:
            raise UnexpandedDefinition(
                f"definition {f.pred!r} reached translation unexpanded"
            )
        args = " ".join(translate_term(a, env) for a in f.args)
        return f"({f.pred} {args})"
    if isinstance(f, Cmp):
        return f"({f.op} {translate_term(f.lhs, env)} {translate_term(f.rhs, env)})"
    if isinstance(f, logic.Not):
        return f"(not {translate_formula(f.body, env)})"
    if isinstance(f, logic.And):
        return "(and " + " ".join(translate_formula(a, env) for a in f.args) + ")"
    if isinstance(f, logic.Or):
        return "(or " + " ".join(translate_formula(a, env) for a in f.args) + ")"
    if isinstance(f, logic.Implies):
        return f"(=> {translate_formula(f.lhs, env)} {translate_formula(f.rhs, env)})"
    if isinstance(f, logic.Iff):
        return f"(= {translate_formula(f.lhs, env)} {translate_formula(f.rhs, env)})"
    if isinstance(f, (Forall, Exists)):
        q = "forall" if isinstance(f, Forall) else "exists"
        inner = dict(env)
        parts = []
        for n, s in f.binders:
            m = mangle(n)
            inner[n] = m
            parts.append(f"({m} {_SORT_SMT[s]})")
        return f"({q} ({' '.join(parts)}) {translate_formula(f.body, inner)})"
    raise SmtError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# Dependency graph over declared constants


SORT_CONSTANTS = ("Point", "Line", "Circle")


@dataclass
class DependencyGraph:
    """uses-edges between constants; emission follows dependencies first."""

    edges: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def add(self, name: str, deps: Sequence[str]) -> None:
        self.edges[name] = tuple(deps)

    def ordered_dfs(self, roots: Sequence[str]) -> list[str]:
        """Postorder DFS from roots: every dependency precedes its users.
        Deterministic: children are visited in recorded order."""
        out: list[str] = []
        done: set[str] = set()
        active: set[str] = set()

        def visit(v: str) -> None:
            if v in done:
                return
            if v in active:
                raise CycleDetected(f"dependency cycle through {v!r}")
            active.add(v)
            for dep in self.edges.get(v, ()):
                visit(dep)
            active.discard(v)
            done.add(v)
            out.append(v)

        for r in roots:
            visit(r)
        return out


def _symbol_deps(name: str) -> list[str]:
    if name in SORT_CONSTANTS:
        return []
    if name in logic.FUNCTIONS:
        argsorts, res = logic.FUNCTIONS[name]
        deps = [_SORT_SMT[s] for s in argsorts if s in _SORT_SMT and s != SortTag.REAL]
        return _dedup(deps)
    if name in logic.PREDICATES:
        deps = [
            _SORT_SMT[s]
            for s in logic.PREDICATES[name]
            if s in _SORT_SMT and s != SortTag.REAL
        ]
        return _dedup(deps)
    raise UnknownConstant(f"unknown constant {name!r}")


def _dedup(items: Iterable[str]) -> list[str]:
    seen: set[str] = set()
    out = []
    for x in items:
        if x not in seen:
            seen.add(x)
            out.append(x)
    return out


def _formula_symbols(f: Formula) -> list[str]:
    """Function and predicate symbols in first-use order (equality skipped)."""
    out: list[str] = []

    def term(t: Term) -> None:
        if isinstance(t, App):
            if t.fn not in _ARITH and t.fn != "neg":
                out.append(t.fn)
            for a in t.args:
                term(a)

    def walk(g: Formula) -> None:
        if isinstance(g, PredApp):
            if g.pred not in _EQ_PREDS:
                out.append(g.pred)
            for a in g.args:
                term(a)
        elif isinstance(g, Cmp):
            term(g.lhs)
            term(g.rhs)
        elif isinstance(g, logic.Not):
            walk(g.body)
        elif isinstance(g, (logic.And, logic.Or)):
            for a in g.args:
                walk(a)
        elif isinstance(g, (logic.Implies, logic.Iff)):
            walk(g.lhs)
            walk(g.rhs)
        elif isinstance(g, (Forall, Exists)):
            walk(g.body)

    walk(f)
    return _dedup(out)


def rule_closure(rule: Rule) -> Formula:
    body: Formula = rule.conclusion
    if not isinstance(rule.premise, TrueF):
        body = logic.Implies(rule.premise, body)
    if rule.params:
        body = Forall(rule.params, body)
    return body


def translate_decl(name: str, theory: Theory, extra: dict[str, Rule]) -> list[SmtCommand]:
    """Commands for one constant: a sort, a signature symbol, or an axiom."""
    if name in SORT_CONSTANTS:
        return [SmtCommand("declare-sort", f"(declare-sort {name} 0)")]
    if name in logic.FUNCTIONS:
        argsorts, res = logic.FUNCTIONS[name]
        args = " ".join(_SORT_SMT[s] for s in argsorts)
        return [
            SmtCommand("declare-fun", f"(declare-fun {name} ({args}) {_SORT_SMT[res]})")
        ]
    if name in logic.PREDICATES:
        args = " ".join(_SORT_SMT[s] for s in logic.PREDICATES[name])
        return [SmtCommand("declare-fun", f"(declare-fun {name} ({args}) Bool)")]
    rule = extra.get(name)
    if rule is None:
        ax = theory.axiom(name)
        rule = ax.rule if ax is not None else None
    if rule is None:
        raise UnknownConstant(f"unknown constant {name!r}")
    expanded = theory.registry.expand(rule_closure(rule))
    return [SmtCommand("assert", f"(assert {translate_formula(expanded)})")]


class QueryCache:
    """Ordered, deduplicated SMT command cache plus its dependency graph.

    Many readers may assemble queries concurrently; extension is serialized.
    Translation counts are exposed so sessions can assert cache behavior.
    """

    def __init__(self, theory: Theory, extra_rules: Optional[dict[str, Rule]] = None):
        self.theory = theory
        self.extra_rules = dict(extra_rules or {})
        self.graph = DependencyGraph()
        self.commands: dict[str, list[SmtCommand]] = {}
        self.order: list[str] = []
        self.translations = 0
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    def _deps_of(self, name: str) -> list[str]:
        if name in SORT_CONSTANTS:
            return []
        if name in logic.FUNCTIONS or name in logic.PREDICATES:
            return _symbol_deps(name)
        rule = self.extra_rules.get(name)
        if rule is None:
            ax = self.theory.axiom(name)
            rule = ax.rule if ax is not None else None
        if rule is None:
            raise UnknownConstant(f"unknown constant {name!r}")
        expanded = self.theory.registry.expand(rule_closure(rule))
        return _formula_symbols(expanded)

    def add_commands_for_constant(self, name: str) -> list[SmtCommand]:
        """Emit commands for name and its not-yet-cached dependencies, in
        dependency order; constants already cached emit nothing."""
        with self._lock:
            if name in self.commands:
                self.hits += 1
                return []
            self.misses += 1
            closure: dict[str, list[str]] = {}

            def gather(v: str) -> None:
                if v in closure or v in self.commands:
                    return
                deps = self._deps_of(v)
                closure[v] = deps
                for d in deps:
                    gather(d)

            gather(name)
            graph = DependencyGraph()
            for v, deps in closure.items():
                graph.add(v, tuple(d for d in deps))
                self.graph.add(v, tuple(deps))
            # ordered DFS over the new constants only; cached ones are
            # already emitted earlier in self.order
            order = [
                v
                for v in self._ordered(graph, name)
                if v not in self.commands
            ]
            emitted: list[SmtCommand] = []
            for v in order:
                cmds = translate_decl(v, self.theory, self.extra_rules)
                self.translations += 1
                self.commands[v] = cmds
                self.order.append(v)
                emitted.extend(cmds)
            return emitted

    def _ordered(self, graph: DependencyGraph, root: str) -> list[str]:
        out: list[str] = []
        done: set[str] = set(self.commands)
        active: set[str] = set()

        def visit(v: str) -> None:
            if v in done:
                return
            if v in active:
                raise CycleDetected(f"dependency cycle through {v!r}")
            active.add(v)
            for dep in graph.edges.get(v, self._deps_of(v)):
                visit(dep)
            active.discard(v)
            done.add(v)
            out.append(v)

        visit(root)
        return out

    def all_commands(self) -> list[SmtCommand]:
        return [cmd for name in self.order for cmd in self.commands[name]]


# ---------------------------------------------------------------------------
# Query assembly


def assemble_query(
    context_vars: Sequence[tuple[str, SortTag]],
    hypotheses: Sequence[Formula],
    obligation: Formula,
    cache: QueryCache,
    config: SolverConfig,
    tagged_names: Optional[Sequence[str]] = None,
) -> list[SmtCommand]:
    """options ++ cached axiom commands ++ context declarations ++
    hypothesis asserts ++ negated obligation ++ (check-sat)."""
    theory = cache.theory
    cmds: list[SmtCommand] = [SmtCommand("option", "(set-logic ALL)")]
    if tagged_names is None:
        tagged_names = [ax.name for ax in theory.tagged_axioms()]
    if config.axiom_allowlist is not None:
        tagged_names = [n for n in tagged_names if n in config.axiom_allowlist]
    # make sure every sort is declared even for axiom-free queries
    for s in SORT_CONSTANTS:
        cache.add_commands_for_constant(s)
    for name in tagged_names:
        cache.add_commands_for_constant(name)
    cmds.extend(cache.all_commands())
    env: dict[str, str] = {}
    for n, s in context_vars:
        m = mangle(n)
        env[n] = m
        cmds.append(SmtCommand("declare-fun", f"(declare-const {m} {_SORT_SMT[s]})"))
    reg = theory.registry
    for h in hypotheses:
        cmds.append(
            SmtCommand("assert", f"(assert {translate_formula(reg.expand(h), env)})")
        )
    neg = logic.Not(obligation)
    cmds.append(
        SmtCommand("assert", f"(assert {translate_formula(reg.expand(neg), env)})")
    )
    cmds.append(SmtCommand("check", "(check-sat)"))
    if config.get_model:
        cmds.append(SmtCommand("option", "(get-model)"))
    return cmds


def query_text(commands: Sequence[SmtCommand]) -> str:
    return "\n".join(c.text for c in commands) + "\n"


# ---------------------------------------------------------------------------
# Solver process driver


def run_solver(
    commands: Sequence[SmtCommand],
    config: SolverConfig,
    timeout: Optional[float] = None,
    dump_path: Optional[Path] = None,
) -> SolverVerdict:
    """One-shot solve: write the query, spawn the solver, classify output.

    The wall-clock timeout is enforced by terminating the process.
    """
    if not config.solver_path:
        raise SolverNotFound("no solver configured (--solver-path)")
    budget = timeout if timeout is not None else config.timeout_secs
    text = query_text(commands)
    if dump_path is not None:
        dump_path.parent.mkdir(parents=True, exist_ok=True)
        dump_path.write_text(text, encoding="utf-8")
    with tempfile.NamedTemporaryFile(
        "w", suffix=".smt2", delete=False, encoding="utf-8"
    ) as fh:
        fh.write(text)
        path = fh.name
    start = time.monotonic()
    try:
        proc = subprocess.Popen(
            [config.solver_path, *config.solver_args, path],
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
    except FileNotFoundError:
        os.unlink(path)
        raise SolverNotFound(f"solver executable not found: {config.solver_path}")
    try:
        out, err = proc.communicate(timeout=budget)
    except subprocess.TimeoutExpired:
        proc.kill()
        proc.communicate()
        os.unlink(path)
        return SolverVerdict("timeout", time.monotonic() - start)
    finally:
        if os.path.exists(path):
            os.unlink(path)
    wall = time.monotonic() - start
    for line in out.splitlines():
        word = line.strip()
        if word == "unsat":
            return SolverVerdict("unsat", wall)
        if word == "sat":
            detail = out if config.get_model else ""
            return SolverVerdict("sat", wall, detail)
        if word == "unknown":
            return SolverVerdict("unknown", wall)
    return SolverVerdict(
        "solver-error", wall, (out + err).strip()[:2000] or "no output"
    )


# ---------------------------------------------------------------------------
# Session: entailment checks with shared cache and statistics


class SmtSession:
    """Shared per-run state: theory, extra library axioms, query cache,
    dump numbering and call statistics."""

    def __init__(
        self,
        theory: Theory,
        config: SolverConfig,
        extra_axioms: Sequence[AxiomEntry] = (),
    ):
        extra = {ax.name: ax.rule for ax in extra_axioms}
        self.theory = theory
        self.config = config
        self.cache = QueryCache(theory, extra)
        self.solver_calls = 0
        self._dump_counter = 0
        self._lock = threading.Lock()
        # tagged library axioms join the theory's tagged set in every query
        self._tagged_names = [ax.name for ax in theory.tagged_axioms()] + [
            ax.name for ax in extra_axioms if ax.euclid_tagged
        ]

    def entails(
        self,
        context_vars: Sequence[tuple[str, SortTag]],
        hypotheses: Sequence[Formula],
        goal: Formula,
        label: str = "query",
        timeout: Optional[float] = None,
    ) -> SolverVerdict:
        cmds = self.assemble(context_vars, hypotheses, goal)
        dump_path = None
        if self.config.dump_dir:
            with self._lock:
                n = self._dump_counter
                self._dump_counter += 1
            safe = "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in label)
            dump_path = Path(self.config.dump_dir) / f"{n:04d}_{safe}.smt2"
        with self._lock:
            self.solver_calls += 1
        return run_solver(cmds, self.config, timeout=timeout, dump_path=dump_path)

    def assemble(
        self,
        context_vars: Sequence[tuple[str, SortTag]],
        hypotheses: Sequence[Formula],
        goal: Formula,
    ) -> list[SmtCommand]:
        return assemble_query(
            context_vars,
            hypotheses,
            goal,
            self.cache,
            self.config,
            tagged_names=self._tagged_names,
        )

    def hypotheses_satisfiable(
        self,
        context_vars: Sequence[tuple[str, SortTag]],
        hypotheses: Sequence[Formula],
        label: str = "sanity",
        timeout: Optional[float] = None,
    ) -> SolverVerdict:
        """Satisfiability probe of hypotheses alone (no negated goal):
        an unsat answer means the hypotheses are contradictory."""
        cmds = self.assemble(context_vars, hypotheses, logic.TRUE)
        # drop the negated-goal assert: (not true) would be trivially unsat
        cmds = [
            c
            for c in cmds
            if c.text != "(assert (not true))"
        ]
        with self._lock:
            self.solver_calls += 1
        return run_solver(cmds, self.config, timeout=timeout)
