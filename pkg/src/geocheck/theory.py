"""Geometric theory: fixed signature, definition registry, axiom system,
and the ordered theorem library.

The axiom system ships as a data file (``data/axioms.geo``) holding the
construction, diagrammatic-inference, metric-inference and superposition
groups plus the nine high-level extension axioms, in the same grammar the
DSL uses for library files.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from . import dsl, logic
from .logic import Exists, Formula, PredApp, Rule, SortTag, TrueF, substitute


class TheoryError(Exception):
    pass


class DuplicateName(TheoryError):
    pass


class CyclicDefinition(TheoryError):
    pass


class UnknownSymbol(TheoryError):
    pass


class AxiomFileMissing(TheoryError):
    pass


class UnknownRule(TheoryError):
    pass


class ForwardReference(TheoryError):
    """A proof cites a library theorem that is declared later in the order."""


# ---------------------------------------------------------------------------
# Signature


@dataclass(frozen=True)
class Signature:
    functions: Mapping[str, tuple[tuple[SortTag, ...], SortTag]]
    predicates: Mapping[str, tuple[SortTag, ...]]

    def lookup_function(self, name: str):
        return self.functions.get(name)

    def lookup_predicate(self, name: str):
        return self.predicates.get(name)


def builtin_signature() -> Signature:
    """The fixed many-sorted signature shared by every module."""
    return Signature(dict(logic.FUNCTIONS), dict(logic.PREDICATES))


# ---------------------------------------------------------------------------
# Definitions


@dataclass(frozen=True)
class DefinitionEntry:
    name: str
    params: tuple[tuple[str, SortTag], ...]
    body: Formula


class DefinitionRegistry:
    """Ordered collection of predicate abbreviations.

    Each entry's body may reference only the fixed signature and earlier
    entries, so expansion always terminates.  Bodies are stored both raw
    and pre-expanded.
    """

    def __init__(self) -> None:
        self.entries: dict[str, DefinitionEntry] = {}
        self.order: list[str] = []
        self._expanded: dict[str, Formula] = {}

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __iter__(self):
        return iter(self.order)

    def get(self, name: str) -> Optional[DefinitionEntry]:
        return self.entries.get(name)

    def arity_table(self) -> dict[str, tuple[SortTag, ...]]:
        return {
            n: tuple(s for _, s in e.params) for n, e in self.entries.items()
        }

    def register(self, entry: DefinitionEntry) -> None:
        if entry.name in self.entries or entry.name in logic.PREDICATES:
            raise DuplicateName(f"definition {entry.name!r} already registered")
        free = {n for n, _ in logic.free_vars(entry.body)}
        params = {n for n, _ in entry.params}
        if not free <= params:
            raise TheoryError(
                f"definition {entry.name}: unbound variables {sorted(free - params)}"
            )
        for sym in _referenced_predicates(entry.body):
            if sym == entry.name:
                raise CyclicDefinition(
                    f"definition {entry.name} references itself"
                )
            if sym not in logic.PREDICATES and sym not in self.entries:
                raise UnknownSymbol(
                    f"definition {entry.name} references unknown symbol {sym!r}"
                )
        self._expanded[entry.name] = self.expand(entry.body)
        self.entries[entry.name] = entry
        self.order.append(entry.name)

    def expand(self, f: Formula) -> Formula:
        """Unfold definition atoms until only signature symbols remain."""
        if isinstance(f, PredApp):
            args = f.args
            if f.pred in logic.PREDICATES:
                return f
            entry = self.entries.get(f.pred)
            if entry is None:
                raise UnknownSymbol(f"unknown predicate {f.pred!r}")
            sub = {n: a for (n, _), a in zip(entry.params, args)}
            return substitute(self._expanded[f.pred], sub)
        if isinstance(f, (logic.TrueF, logic.FalseF, logic.Cmp)):
            return f
        if isinstance(f, logic.Not):
            return logic.Not(self.expand(f.body))
        if isinstance(f, (logic.And, logic.Or)):
            return type(f)(tuple(self.expand(a) for a in f.args))
        if isinstance(f, (logic.Implies, logic.Iff)):
            return type(f)(self.expand(f.lhs), self.expand(f.rhs))
        if isinstance(f, (logic.Forall, logic.Exists)):
            return type(f)(f.binders, self.expand(f.body))
        raise logic.LogicError(f"not a formula: {f!r}")


def _referenced_predicates(f: Formula) -> set[str]:
    out: set[str] = set()

    def walk(g: Formula) -> None:
        if isinstance(g, PredApp):
            out.add(g.pred)
        elif isinstance(g, logic.Not):
            walk(g.body)
        elif isinstance(g, (logic.And, logic.Or)):
            for a in g.args:
                walk(a)
        elif isinstance(g, (logic.Implies, logic.Iff)):
            walk(g.lhs)
            walk(g.rhs)
        elif isinstance(g, (logic.Forall, logic.Exists)):
            walk(g.body)

    walk(f)
    return out


def register_definition(registry: DefinitionRegistry, entry: DefinitionEntry) -> DefinitionRegistry:
    registry.register(entry)
    return registry


def expand(f: Formula, registry: DefinitionRegistry) -> Formula:
    return registry.expand(f)


# ---------------------------------------------------------------------------
# Axioms


@dataclass(frozen=True)
class AxiomEntry:
    name: str
    rule: Rule
    group: str
    euclid_tagged: bool


@dataclass
class Theory:
    """Signature + definitions + axioms, loaded once and then immutable."""

    signature: Signature
    registry: DefinitionRegistry
    axioms: list[AxiomEntry]

    def axiom(self, name: str) -> Optional[AxiomEntry]:
        for ax in self.axioms:
            if ax.name == name:
                return ax
        return None

    def tagged_axioms(self) -> list[AxiomEntry]:
        return [ax for ax in self.axioms if ax.euclid_tagged]

    def symbols(self) -> dict[str, tuple[str, tuple[SortTag, ...]]]:
        table = dsl.default_symbols()
        for name in self.registry:
            entry = self.registry.entries[name]
            table[name] = ("def", tuple(s for _, s in entry.params))
        return table


def _axiom_text() -> str:
    res = importlib.resources.files("geocheck").joinpath("data/axioms.geo")
    try:
        return res.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise AxiomFileMissing("packaged axiom file data/axioms.geo is missing")


def load_theory(axiom_text: Optional[str] = None) -> Theory:
    """Parse the axiom/definition file into a Theory.

    Construction-group axioms must conclude with an existential; their
    violation is a load error, not a checker diagnostic.
    """
    text = axiom_text if axiom_text is not None else _axiom_text()
    registry = DefinitionRegistry()
    axioms: list[AxiomEntry] = []
    entries = dsl.parse_library(text)
    for entry in entries:
        if isinstance(entry, dsl.DefinitionDecl):
            registry.register(DefinitionEntry(entry.name, entry.params, entry.body))
        elif isinstance(entry, dsl.AxiomDecl):
            if entry.group == "construction" and not isinstance(
                entry.rule.conclusion, Exists
            ):
                raise TheoryError(
                    f"construction axiom {entry.name} has no existential conclusion"
                )
            axioms.append(
                AxiomEntry(entry.name, entry.rule, entry.group, entry.euclid_tagged)
            )
        else:
            raise TheoryError("axiom file cannot contain theorem proofs")
    return Theory(builtin_signature(), registry, axioms)


_THEORY_CACHE: Optional[Theory] = None


def default_theory() -> Theory:
    global _THEORY_CACHE
    if _THEORY_CACHE is None:
        _THEORY_CACHE = load_theory()
    return _THEORY_CACHE


def axiom_set() -> list[AxiomEntry]:
    """All axioms from the shipped axiom file, in file order."""
    return list(default_theory().axioms)


# ---------------------------------------------------------------------------
# Theorem library


@dataclass(frozen=True)
class LibraryTheorem:
    rule: Rule
    script: dsl.TacticScript
    source: str  # "path:line"
    position: int


@dataclass
class TheoremLibrary:
    """Theorems in visibility order, plus any axioms declared alongside them.

    A theorem's proof may cite axioms, definitions, and strictly earlier
    theorems only.
    """

    theory: Theory
    theorems: list[LibraryTheorem] = field(default_factory=list)
    extra_axioms: list[AxiomEntry] = field(default_factory=list)

    def position_of(self, name: str) -> Optional[int]:
        for thm in self.theorems:
            if thm.rule.name == name:
                return thm.position
        return None


END = None  # position marker for user files: every theorem is visible


def load_library(
    theory: Theory,
    sources: Sequence[tuple[str, str]],
) -> TheoremLibrary:
    """Build a library from (path, text) pairs, in the given file order.

    Definitions declared in library files extend the theory's registry;
    axiom declarations are collected as extra axioms.
    """
    lib = TheoremLibrary(theory)
    table = theory.symbols()
    position = 0
    for path, text in sources:
        try:
            entries = dsl.parse_library(text, table)
        except dsl.DslError as e:
            d = e.diagnostic
            raise dsl.DslError(
                dsl.Diagnostic(d.severity, f"{path}: {d.message}", d.span, d.code, d.hint)
            )
        for entry in entries:
            name = dsl._entry_name(entry)
            if _known_rule_name(lib, theory, name):
                raise DuplicateName(f"{path}: duplicate name {name!r}")
            if isinstance(entry, dsl.DefinitionDecl):
                theory.registry.register(
                    DefinitionEntry(entry.name, entry.params, entry.body)
                )
                table[entry.name] = ("def", tuple(s for _, s in entry.params))
            elif isinstance(entry, dsl.AxiomDecl):
                lib.extra_axioms.append(
                    AxiomEntry(entry.name, entry.rule, entry.group, entry.euclid_tagged)
                )
            else:
                lib.theorems.append(
                    LibraryTheorem(
                        entry.rule, entry.script, f"{path}:{entry.line}", position
                    )
                )
                position += 1
    return lib


def _known_rule_name(lib: TheoremLibrary, theory: Theory, name: str) -> bool:
    if theory.axiom(name) is not None or name in theory.registry:
        return True
    if any(ax.name == name for ax in lib.extra_axioms):
        return True
    return lib.position_of(name) is not None


def load_library_dir(theory: Theory, directory: Union[str, Path]) -> TheoremLibrary:
    """Load every ``*.geo`` file under directory, sorted by filename."""
    directory = Path(directory)
    files = sorted(directory.glob("*.geo"))
    sources = [(str(p), p.read_text(encoding="utf-8")) for p in files]
    return load_library(theory, sources)


def definition_rule(theory: Theory, name: str) -> Optional[Rule]:
    entry = theory.registry.get(name)
    if entry is None:
        return None
    atom = PredApp(name, tuple(logic.Var(n, s) for n, s in entry.params))
    return Rule(
        name=name,
        kind="definition",
        params=entry.params,
        premise=TrueF(),
        conclusion=logic.Iff(atom, entry.body),
    )


def lookup_rule(
    name: str, library: TheoremLibrary, position: Optional[int] = END
) -> Rule:
    """Resolve a rule name at a library position.

    Theorems are visible only strictly before ``position``; ``END`` (None)
    means every library theorem is visible (checking a user file).
    """
    theory = library.theory
    ax = theory.axiom(name)
    if ax is not None:
        return ax.rule
    for extra in library.extra_axioms:
        if extra.name == name:
            return extra.rule
    as_def = definition_rule(theory, name)
    if as_def is not None:
        return as_def
    for thm in library.theorems:
        if thm.rule.name == name:
            if position is not END and thm.position >= position:
                raise ForwardReference(
                    f"rule {name!r} is declared at library position "
                    f"{thm.position}, not visible from position {position}"
                )
            return thm.rule
    raise UnknownRule(f"unknown rule {name!r}")


def citation_edges(library: TheoremLibrary) -> list[tuple[str, str]]:
    """(theorem, cited-theorem) pairs, for well-foundedness checks."""
    names = {t.rule.name: t.position for t in library.theorems}
    edges = []
    for thm in library.theorems:
        for cited in _cited_rules(thm.script):
            if cited in names:
                edges.append((thm.rule.name, cited))
    return edges


def _cited_rules(script: dsl.TacticScript) -> set[str]:
    out: set[str] = set()
    for node in script:
        if isinstance(node, dsl.Apply):
            out.add(node.rule)
        elif isinstance(node, dsl.Have):
            out |= _cited_rules(node.sub)
        elif isinstance(node, dsl.ByCases):
            out |= _cited_rules(node.then)
            out |= _cited_rules(node.other)
        elif isinstance(node, dsl.CasesHyp):
            for b in node.branches:
                out |= _cited_rules(b)
    return out
