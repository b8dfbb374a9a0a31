"""Proof-state management and tactic interpretation.

A proof state is a stack of goals (typed variable context, named
hypotheses, target formula).  Tactics transform the top goal; every
semantic obligation (rule premises, asserted facts, final goals) is
delegated to the SMT session.  A goal-closing obligation succeeds only on
an unsat verdict.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from . import dsl, logic, theory as theory_mod
from .logic import (
    And,
    App,
    Cmp,
    Exists,
    FalseF,
    Forall,
    Formula,
    Implies,
    NumLit,
    PredApp,
    Rule,
    SortTag,
    Term,
    TrueF,
    Var,
    conjuncts,
    normalize,
    substitute,
)
from .smt import SmtSession, SolverVerdict


class TacticError(Exception):
    def __init__(self, message: str, code: str, verdict: Optional[SolverVerdict] = None):
        super().__init__(message)
        self.message = message
        self.code = code
        self.verdict = verdict


def _fail(message: str, code: str, verdict: Optional[SolverVerdict] = None) -> TacticError:
    return TacticError(message, code, verdict)


# Bounds for bare/partial euclid_apply argument inference.
INFER_CANDIDATE_BOUND = 5000
INFER_PROBE_BOUND = 128


@dataclass(frozen=True)
class Hypothesis:
    name: str
    formula: Formula


@dataclass
class GoalContext:
    vars: list[tuple[str, SortTag]] = field(default_factory=list)
    hyps: list[Hypothesis] = field(default_factory=list)
    next_hyp: int = 0

    def copy(self) -> "GoalContext":
        return GoalContext(list(self.vars), list(self.hyps), self.next_hyp)

    def var_sort(self, name: str) -> Optional[SortTag]:
        for n, s in self.vars:
            if n == name:
                return s
        return None

    def has_hyp_name(self, name: str) -> bool:
        return any(h.name == name for h in self.hyps)

    def fresh_hyp_name(self) -> str:
        name = f"h{self.next_hyp}"
        self.next_hyp += 1
        while self.has_hyp_name(name):
            name = f"h{self.next_hyp}"
            self.next_hyp += 1
        return name

    def add_hypothesis(self, f: Formula, name: Optional[str] = None) -> None:
        if name is None:
            key = normalize(f)
            for h in self.hyps:
                if normalize(h.formula) == key:
                    return
            name = self.fresh_hyp_name()
        elif self.has_hyp_name(name):
            raise _fail(f"hypothesis name {name!r} already in use", "duplicate-name")
        self.hyps.append(Hypothesis(name, f))


@dataclass
class ProofGoal:
    context: GoalContext
    target: Formula


@dataclass(frozen=True)
class TraceEntry:
    label: str
    tactic: str
    obligation: Optional[Formula]
    verdict: str
    wall_time: float


@dataclass
class ProofState:
    goals: list[ProofGoal]
    trace: list[TraceEntry] = field(default_factory=list)

    @property
    def done(self) -> bool:
        return not self.goals

    @property
    def top(self) -> ProofGoal:
        if not self.goals:
            raise _fail("no goals left", "no-goals")
        return self.goals[-1]


@dataclass
class CheckReport:
    name: str
    status: str  # proved | failed | timeout
    failure: Optional[tuple[str, str]] = None  # (tactic label, diagnostic)
    trace: list[TraceEntry] = field(default_factory=list)
    solver_calls: int = 0
    cache_hits: int = 0
    cache_misses: int = 0
    wall_time: float = 0.0

    @property
    def proved(self) -> bool:
        return self.status == "proved"


@dataclass
class EngineServices:
    lookup: Callable[[str], Rule]
    session: SmtSession


def init_state(thm: Rule) -> ProofState:
    """Single goal with empty context and the theorem's closed target."""
    target: Formula = Implies(
        thm.premise if not isinstance(thm.premise, TrueF) else TrueF(),
        thm.conclusion,
    )
    if thm.params:
        target = Forall(thm.params, target)
    return ProofState([ProofGoal(GoalContext(), target)])


# ---------------------------------------------------------------------------
# Script-term elaboration


def resolve_term(t: Term, ctx: GoalContext, bound: dict[str, SortTag]) -> Term:
    if isinstance(t, NumLit):
        return t
    if isinstance(t, Var):
        sort = bound.get(t.name) or ctx.var_sort(t.name)
        if sort is None:
            raise _fail(f"unknown name {t.name!r} in this context", "unknown-name")
        return Var(t.name, sort)
    if isinstance(t, App):
        return App(t.fn, tuple(resolve_term(a, ctx, bound) for a in t.args))
    raise _fail(f"not a term: {t!r}", "syntax")


def resolve_formula(f: Formula, ctx: GoalContext, bound: Optional[dict[str, SortTag]] = None) -> Formula:
    """Rewrite placeholder sorts in a script formula from the goal context."""
    bound = bound or {}
    if isinstance(f, (TrueF, FalseF)):
        return f
    if isinstance(f, PredApp):
        args = tuple(resolve_term(a, ctx, bound) for a in f.args)
        if f.pred == "eq?":
            try:
                return logic.eq_obj(args[0], args[1])
            except logic.LogicError as e:
                raise _fail(str(e), "sort-mismatch")
        return PredApp(f.pred, args)
    if isinstance(f, Cmp):
        return Cmp(f.op, resolve_term(f.lhs, ctx, bound), resolve_term(f.rhs, ctx, bound))
    if isinstance(f, logic.Not):
        return logic.Not(resolve_formula(f.body, ctx, bound))
    if isinstance(f, (And, logic.Or)):
        return type(f)(tuple(resolve_formula(a, ctx, bound) for a in f.args))
    if isinstance(f, (Implies, logic.Iff)):
        return type(f)(
            resolve_formula(f.lhs, ctx, bound), resolve_formula(f.rhs, ctx, bound)
        )
    if isinstance(f, (Forall, Exists)):
        inner = dict(bound)
        for n, s in f.binders:
            inner[n] = s
        return type(f)(f.binders, resolve_formula(f.body, ctx, inner))
    raise _fail(f"not a formula: {f!r}", "syntax")


# ---------------------------------------------------------------------------
# Engine


class Engine:
    """Executes a tactic script against a proof state."""

    def __init__(self, services: EngineServices):
        self.services = services
        self.session = services.session
        self.registry = services.session.theory.registry

    # -- obligations

    def _discharge(
        self,
        ctx: GoalContext,
        goal: Formula,
        label: str,
        tactic: str,
        state: ProofState,
        timeout: Optional[float] = None,
    ) -> SolverVerdict:
        """One obligation: context entails goal.  Trivial and by-assumption
        cases succeed without a solver call."""
        start = time.monotonic()
        if isinstance(goal, TrueF):
            verdict = SolverVerdict("unsat", 0.0, "trivial")
        elif self._is_assumption(ctx, goal):
            verdict = SolverVerdict("unsat", time.monotonic() - start, "assumption")
        else:
            verdict = self.session.entails(
                ctx.vars, [h.formula for h in ctx.hyps], goal, label, timeout=timeout
            )
        state.trace.append(
            TraceEntry(label, tactic, goal, verdict.status, verdict.wall_time)
        )
        return verdict

    def _is_assumption(self, ctx: GoalContext, goal: Formula) -> bool:
        keys = {normalize(h.formula) for h in ctx.hyps}
        return all(normalize(c) in keys for c in conjuncts(goal)) if conjuncts(goal) else False

    # -- tactics

    def tac_intros(self, state: ProofState) -> None:
        goal = state.top
        target = goal.target
        if not isinstance(target, (Forall, Implies)):
            raise _fail(
                "euclid_intros: goal has no leading quantifier or implication",
                "not-a-universal",
            )
        if isinstance(target, Forall):
            for n, s in target.binders:
                if goal.context.var_sort(n) is not None:
                    raise _fail(f"variable {n!r} already introduced", "duplicate-name")
                goal.context.vars.append((n, s))
            target = target.body
        while isinstance(target, Implies):
            for c in conjuncts(target.lhs):
                goal.context.add_hypothesis(c)
            target = target.rhs
        goal.target = target

    def tac_apply(self, state: ProofState, node: dsl.Apply, label: str) -> None:
        goal = state.top
        ctx = goal.context
        rule = self._lookup(node.rule)
        given = [resolve_term(t, ctx, {}) for t in node.args]
        if len(given) > len(rule.params):
            raise _fail(
                f"rule {rule.name} takes {len(rule.params)} arguments, "
                f"got {len(given)}",
                "arity-mismatch",
            )
        for (pname, psort), arg in zip(rule.params, given):
            asort = logic.term_sort(arg)
            if asort != psort:
                raise _fail(
                    f"rule {rule.name}: parameter {pname} expects {psort}, "
                    f"argument has sort {asort}",
                    "sort-mismatch",
                )
        if len(given) < len(rule.params):
            args, verdict = self._infer_args(state, ctx, rule, given, label)
        else:
            args = given
            verdict = None
        sub = {pname: arg for (pname, _), arg in zip(rule.params, args)}
        premise = substitute(rule.premise, sub)
        conclusion = substitute(rule.conclusion, sub)
        if verdict is None:
            verdict = self._discharge(ctx, premise, label, f"apply {rule.name}", state)
            if not verdict.discharges:
                raise _fail(
                    f"premise of {rule.name} not established "
                    f"(solver verdict: {verdict.status})",
                    "premise-not-established",
                    verdict,
                )
        else:
            state.trace.append(
                TraceEntry(label, f"apply {rule.name}", premise, verdict.status, verdict.wall_time)
            )
        self._add_conclusion(ctx, conclusion, node.witnesses)

    def _lookup(self, name: str) -> Rule:
        try:
            return self.services.lookup(name)
        except theory_mod.ForwardReference as e:
            raise _fail(str(e), "forward-reference")
        except theory_mod.UnknownRule as e:
            raise _fail(str(e), "unknown-rule")

    def _infer_args(
        self,
        state: ProofState,
        ctx: GoalContext,
        rule: Rule,
        given: list[Term],
        label: str,
    ) -> tuple[list[Term], Optional[SolverVerdict]]:
        """Deterministic bounded search for the missing trailing arguments.

        Candidates are enumerated over sort-matching context variables in
        introduction order.  Candidates whose instantiated premise conjuncts
        all appear among the hypotheses are preferred and need no probe;
        otherwise candidates are probed with a short solver budget and the
        first discharging one wins.
        """
        missing = rule.params[len(given):]
        pools: list[list[Term]] = []
        for pname, psort in missing:
            pool = [Var(n, s) for n, s in ctx.vars if s == psort]
            if not pool:
                raise _fail(
                    f"cannot infer argument {pname} of {rule.name}: no {psort} "
                    f"in context",
                    "arity-mismatch",
                )
            pools.append(pool)
        total = 1
        for pool in pools:
            total *= len(pool)
        if total > INFER_CANDIDATE_BOUND:
            raise _fail(
                f"argument inference for {rule.name} has {total} candidates "
                f"(bound {INFER_CANDIDATE_BOUND}); supply arguments explicitly",
                "inference-bound",
            )
        hyp_keys = {normalize(h.formula) for h in ctx.hyps}
        deferred: list[list[Term]] = []
        for extra in itertools.product(*pools):
            args = given + list(extra)
            sub = {p: a for (p, _), a in zip(rule.params, args)}
            premise = substitute(rule.premise, sub)
            parts = conjuncts(premise)
            if not parts or all(normalize(c) in hyp_keys for c in parts):
                verdict = SolverVerdict("unsat", 0.0, "assumption")
                return args, verdict
            deferred.append(args)
        probes = 0
        for args in deferred:
            if probes >= INFER_PROBE_BOUND:
                break
            sub = {p: a for (p, _), a in zip(rule.params, args)}
            premise = substitute(rule.premise, sub)
            probes += 1
            verdict = self.session.entails(
                ctx.vars,
                [h.formula for h in ctx.hyps],
                premise,
                f"{label}_infer{probes}",
                timeout=self.session.config.probe_timeout_secs,
            )
            if verdict.discharges:
                return args, verdict
        raise _fail(
            f"no argument assignment for {rule.name} satisfies its premise "
            f"({probes} probed); supply arguments explicitly",
            "premise-not-established",
        )

    def _add_conclusion(
        self, ctx: GoalContext, conclusion: Formula, witnesses: Sequence[str]
    ) -> None:
        if isinstance(conclusion, Exists):
            if len(witnesses) != len(conclusion.binders):
                raise _fail(
                    f"construction introduces {len(conclusion.binders)} objects, "
                    f"got {len(witnesses)} witness names",
                    "witness-count-mismatch",
                )
            sub: dict[str, Term] = {}
            for (bname, bsort), wname in zip(conclusion.binders, witnesses):
                if ctx.var_sort(wname) is not None:
                    raise _fail(
                        f"witness name {wname!r} collides with an existing "
                        f"context variable",
                        "duplicate-name",
                    )
                ctx.vars.append((wname, bsort))
                sub[bname] = Var(wname, bsort)
            body = substitute(conclusion.body, sub)
            for c in conjuncts(body):
                ctx.add_hypothesis(c)
        else:
            if witnesses:
                raise _fail(
                    "witness names given but the rule's conclusion is not "
                    "existential",
                    "not-an-existential",
                )
            for c in conjuncts(conclusion):
                ctx.add_hypothesis(c)

    def tac_finish(self, state: ProofState, label: str) -> None:
        goal = state.top
        verdict = self._discharge(goal.context, goal.target, label, "finish", state)
        if not verdict.discharges:
            raise _fail(
                f"goal not closed (solver verdict: {verdict.status})",
                "goal-not-closed",
                verdict,
            )
        state.goals.pop()

    def tac_assert(self, state: ProofState, node: dsl.Assert, label: str) -> None:
        goal = state.top
        f = resolve_formula(node.formula, goal.context)
        self._check_sorts(f, goal.context)
        verdict = self._discharge(goal.context, f, label, "assert", state)
        if not verdict.discharges:
            raise _fail(
                f"euclid_assert failed (solver verdict: {verdict.status})",
                "goal-not-closed",
                verdict,
            )
        goal.context.add_hypothesis(f)

    def tac_have(self, state: ProofState, node: dsl.Have, label: str) -> None:
        goal = state.top
        f = resolve_formula(node.formula, goal.context)
        self._check_sorts(f, goal.context)
        if node.name is not None and goal.context.has_hyp_name(node.name):
            raise _fail(f"hypothesis name {node.name!r} already in use", "duplicate-name")
        sub_goal = ProofGoal(goal.context.copy(), f)
        depth = len(state.goals)
        state.goals.append(sub_goal)
        self.run_nodes(state, node.sub, label)
        if len(state.goals) != depth:
            raise _fail(
                f"have {node.name or ''}: sub-proof did not close its goal",
                "proof-incomplete",
            )
        goal.context.add_hypothesis(f, node.name)

    def tac_by_cases(self, state: ProofState, node: dsl.ByCases, label: str) -> None:
        goal = state.top
        cond = resolve_formula(node.cond, goal.context)
        self._check_sorts(cond, goal.context)
        state.goals.pop()
        for branch_label, branch_f, branch_script in (
            (f"{label}.pos", cond, node.then),
            (f"{label}.neg", logic.Not(cond), node.other),
        ):
            branch_goal = ProofGoal(goal.context.copy(), goal.target)
            branch_goal.context.add_hypothesis(branch_f)
            depth = len(state.goals)
            state.goals.append(branch_goal)
            self.run_nodes(state, branch_script, branch_label)
            if len(state.goals) != depth:
                raise _fail(
                    f"by_cases branch did not close its goal", "proof-incomplete"
                )

    def tac_by_contra(self, state: ProofState) -> None:
        goal = state.top
        goal.context.add_hypothesis(logic.Not(goal.target))
        goal.target = FalseF()

    def tac_use(self, state: ProofState, node: dsl.Use) -> None:
        goal = state.top
        if not isinstance(goal.target, Exists):
            raise _fail("use: goal is not existential", "not-an-existential")
        term = resolve_term(node.term, goal.context, {})
        (bname, bsort), rest = goal.target.binders[0], goal.target.binders[1:]
        if logic.term_sort(term) != bsort:
            raise _fail(
                f"use: witness has sort {logic.term_sort(term)}, "
                f"goal binds {bsort}",
                "sort-mismatch",
            )
        if rest:
            goal.target = substitute(Exists(rest, goal.target.body), {bname: term})
        else:
            goal.target = substitute(goal.target.body, {bname: term})

    def tac_split_goal(self, state: ProofState) -> None:
        goal = state.top
        if not isinstance(goal.target, And):
            raise _fail("constructor: goal is not a conjunction", "not-a-conjunction")
        state.goals.pop()
        for part in reversed(goal.target.args):
            state.goals.append(ProofGoal(goal.context.copy(), part))

    def tac_cases(self, state: ProofState, node: dsl.CasesHyp, label: str) -> None:
        goal = state.top
        hyp = None
        for h in goal.context.hyps:
            if h.name == node.hyp:
                hyp = h
                break
        if hyp is None:
            raise _fail(f"unknown hypothesis {node.hyp!r}", "unknown-name")
        if not isinstance(hyp.formula, logic.Or):
            raise _fail(
                f"cases: hypothesis {node.hyp} is not a disjunction",
                "not-a-disjunction",
            )
        parts = hyp.formula.args
        if len(node.branches) != len(parts):
            raise _fail(
                f"cases: {len(parts)} disjuncts but {len(node.branches)} branches",
                "not-a-disjunction",
            )
        state.goals.pop()
        for i, (part, branch) in enumerate(zip(parts, node.branches)):
            branch_goal = ProofGoal(goal.context.copy(), goal.target)
            branch_goal.context.hyps = [
                Hypothesis(h.name, part if h.name == node.hyp else h.formula)
                for h in branch_goal.context.hyps
            ]
            depth = len(state.goals)
            state.goals.append(branch_goal)
            self.run_nodes(state, branch, f"{label}.{i}")
            if len(state.goals) != depth:
                raise _fail("cases branch did not close its goal", "proof-incomplete")

    def _check_sorts(self, f: Formula, ctx: GoalContext) -> None:
        try:
            logic.check_formula(
                f, dict(ctx.vars), self.registry.arity_table(), allow_free=False
            )
        except logic.LogicError as e:
            raise _fail(str(e), "sort-mismatch")

    # -- script execution

    def run_nodes(
        self, state: ProofState, nodes: Sequence[dsl.TacticNode], prefix: str
    ) -> None:
        for i, node in enumerate(nodes):
            label = f"{prefix}.{i}" if prefix else str(i)
            if isinstance(node, dsl.Intros):
                self.tac_intros(state)
            elif isinstance(node, dsl.Apply):
                self.tac_apply(state, node, label)
            elif isinstance(node, dsl.Finish):
                self.tac_finish(state, label)
            elif isinstance(node, dsl.Assert):
                self.tac_assert(state, node, label)
            elif isinstance(node, dsl.Have):
                self.tac_have(state, node, label)
            elif isinstance(node, dsl.ByCases):
                self.tac_by_cases(state, node, label)
            elif isinstance(node, dsl.ByContra):
                self.tac_by_contra(state)
            elif isinstance(node, dsl.Use):
                self.tac_use(state, node)
            elif isinstance(node, dsl.SplitGoal):
                self.tac_split_goal(state)
            elif isinstance(node, dsl.CasesHyp):
                self.tac_cases(state, node, label)
            else:
                raise _fail(f"unsupported tactic node {node!r}", "unknown-tactic")


def run_script(
    thm: Rule, script: dsl.TacticScript, services: EngineServices
) -> CheckReport:
    """Execute a script on a theorem; failures are encoded in the report."""
    session = services.session
    calls0 = session.solver_calls
    hits0 = session.cache.hits
    misses0 = session.cache.misses
    state = init_state(thm)
    engine = Engine(services)
    start = time.monotonic()
    status = "proved"
    failure = None
    try:
        engine.run_nodes(state, script, thm.name)
        if not state.done:
            status = "failed"
            failure = ("end", f"proof incomplete: {len(state.goals)} goal(s) remain")
    except TacticError as e:
        if e.verdict is not None and e.verdict.status == "timeout":
            status = "timeout"
        else:
            status = "failed"
        label = state.trace[-1].label if state.trace else "start"
        failure = (label, f"{e.code}: {e.message}")
    return CheckReport(
        name=thm.name,
        status=status,
        failure=failure,
        trace=state.trace,
        solver_calls=session.solver_calls - calls0,
        cache_hits=session.cache.hits - hits0,
        cache_misses=session.cache.misses - misses0,
        wall_time=time.monotonic() - start,
    )
