"""Grammar-based workflow specifications, dependency assignments and views.

Everything here is an immutable value.  Ports are positional and 1-based;
occurrences inside a simple workflow are addressed by their declaration
index (1-based) and, once ordered, by their topological position.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

from .matrix import BoolMatrix

ATOMIC = "atomic"
COMPOSITE = "composite"
IN = "in"
OUT = "out"

# module name -> inputs x outputs matrix
DependencyAssignment = Mapping[str, BoolMatrix]


class GrammarError(ValueError):
    """Structural problem that prevents an operation from running."""


@dataclass(frozen=True)
class ModuleDecl:
    name: str
    n_inputs: int
    n_outputs: int
    kind: str = ATOMIC

    @property
    def is_composite(self) -> bool:
        return self.kind == COMPOSITE


@dataclass(frozen=True, order=True)
class PortRef:
    occurrence: int
    side: str
    port: int


@dataclass(frozen=True)
class SimpleWorkflow:
    occurrences: tuple[str, ...]
    edges: tuple[tuple[PortRef, PortRef], ...] = ()
    initial_inputs: tuple[PortRef, ...] = ()
    final_outputs: tuple[PortRef, ...] = ()


@dataclass(frozen=True)
class Production:
    """``lhs -> rhs``; ``input_map[x-1]`` is the 1-based index into
    ``rhs.initial_inputs`` that lhs input ``x`` maps to (``None`` = identity)."""

    id: int
    lhs: str
    rhs: SimpleWorkflow
    input_map: tuple[int, ...] | None = None
    output_map: tuple[int, ...] | None = None

    def lhs_input(self, x: int) -> PortRef:
        idx = x if self.input_map is None else self.input_map[x - 1]
        return self.rhs.initial_inputs[idx - 1]

    def lhs_output(self, y: int) -> PortRef:
        idx = y if self.output_map is None else self.output_map[y - 1]
        return self.rhs.final_outputs[idx - 1]

    @cached_property
    def order(self) -> tuple[int, ...]:
        """Occurrence declaration indices in topological order."""
        return tuple(topological_order(self.rhs))

    @cached_property
    def position(self) -> dict[int, int]:
        return {occ: pos for pos, occ in enumerate(self.order, start=1)}

    def module_at(self, pos: int) -> str:
        return self.rhs.occurrences[self.order[pos - 1] - 1]

    def __len__(self) -> int:
        return len(self.rhs.occurrences)


@dataclass(frozen=True)
class CompiledProduction:
    """Wiring of one production in topological-position space.

    ``sources[pos-1][p-1]`` is ``(src_pos, src_port)`` for a data edge or
    ``(0, x)`` when the port is lhs input ``x``; ``finals[y-1]`` is the
    ``(pos, port)`` output that realises lhs output ``y``.
    """

    id: int
    lhs: str
    modules: tuple[str, ...]
    sources: tuple[tuple[tuple[int, int], ...], ...]
    finals: tuple[tuple[int, int], ...]
    n_inputs: int
    n_outputs: int
    internal_edges: tuple[tuple[int, int, int, int], ...]


@dataclass(frozen=True)
class WorkflowGrammar:
    modules: tuple[ModuleDecl, ...]
    start: str
    productions: tuple[Production, ...]

    @cached_property
    def module(self) -> dict[str, ModuleDecl]:
        return {m.name: m for m in self.modules}

    @cached_property
    def composites(self) -> frozenset[str]:
        return frozenset(m.name for m in self.modules if m.is_composite)

    @cached_property
    def atomics(self) -> frozenset[str]:
        return frozenset(m.name for m in self.modules if not m.is_composite)

    @cached_property
    def production(self) -> dict[int, Production]:
        return {p.id: p for p in self.productions}

    @cached_property
    def productions_of(self) -> dict[str, tuple[Production, ...]]:
        out: dict[str, list[Production]] = {}
        for p in self.productions:
            out.setdefault(p.lhs, []).append(p)
        return {k: tuple(v) for k, v in out.items()}

    def arity(self, name: str) -> tuple[int, int]:
        m = self.module[name]
        return m.n_inputs, m.n_outputs

    @cached_property
    def max_arity(self) -> int:
        return max(max(m.n_inputs, m.n_outputs) for m in self.modules)

    def compiled(self, k: int) -> CompiledProduction:
        return self._compiled[k]

    @cached_property
    def _compiled(self) -> dict[int, CompiledProduction]:
        return {p.id: _compile(self, p) for p in self.productions}


def _compile(g: WorkflowGrammar, p: Production) -> CompiledProduction:
    lhs = g.module[p.lhs]
    return compile_workflow(
        p.rhs,
        lambda name: g.arity(name),
        [p.lhs_input(x) for x in range(1, lhs.n_inputs + 1)],
        [p.lhs_output(y) for y in range(1, lhs.n_outputs + 1)],
        order=p.order,
        id=p.id,
        lhs=p.lhs,
    )


def compile_workflow(
    w: SimpleWorkflow,
    arity,
    inputs: list[PortRef],
    outputs: list[PortRef],
    order: tuple[int, ...] | None = None,
    id: int = 0,
    lhs: str = "",
) -> CompiledProduction:
    """Wire ``w`` in topological-position space; ``inputs``/``outputs`` give
    the boundary ports in boundary order and ``arity(name)`` the port counts."""
    if order is None:
        order = tuple(topological_order(w))
    pos = {occ: i for i, occ in enumerate(order, start=1)}
    mods = tuple(w.occurrences[occ - 1] for occ in order)
    sources: list[list[tuple[int, int] | None]] = [[None] * arity(m)[0] for m in mods]
    internal = []
    for src, dst in w.edges:
        sp, dp = pos[src.occurrence], pos[dst.occurrence]
        sources[dp - 1][dst.port - 1] = (sp, src.port)
        internal.append((sp, src.port, dp, dst.port))
    for x, ref in enumerate(inputs, start=1):
        sources[pos[ref.occurrence] - 1][ref.port - 1] = (0, x)
    finals = tuple((pos[ref.occurrence], ref.port) for ref in outputs)
    if any(s is None for row in sources for s in row):
        raise GrammarError(f"production {id}: unconnected input port")
    internal.sort()
    return CompiledProduction(
        id=id,
        lhs=lhs,
        modules=mods,
        sources=tuple(tuple(row) for row in sources),  # type: ignore[arg-type]
        finals=finals,
        n_inputs=len(inputs),
        n_outputs=len(outputs),
        internal_edges=tuple(internal),
    )


@dataclass(frozen=True)
class View:
    expandable: frozenset[str]
    assignment: Mapping[str, BoolMatrix] = field(default_factory=dict)


def default_view(g: WorkflowGrammar, deps: DependencyAssignment) -> View:
    return View(g.composites, {m: deps[m] for m in g.atomics if m in deps})


# operations ----------------------------------------------------------------


def topological_order(w: SimpleWorkflow) -> list[int]:
    """Kahn's algorithm, always emitting the ready occurrence with the
    smallest declaration index."""
    n = len(w.occurrences)
    succ: dict[int, set[int]] = {i: set() for i in range(1, n + 1)}
    indeg = {i: 0 for i in range(1, n + 1)}
    for src, dst in w.edges:
        a, b = src.occurrence, dst.occurrence
        if b not in succ[a]:
            succ[a].add(b)
            indeg[b] += 1
    ready = [i for i in range(1, n + 1) if indeg[i] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        i = heapq.heappop(ready)
        order.append(i)
        for j in succ[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                heapq.heappush(ready, j)
    if len(order) != n:
        raise GrammarError("simple workflow contains a cycle")
    return order


def productive_modules(g: WorkflowGrammar) -> set[str]:
    """Modules with at least one terminal-only derivation."""
    good = set(g.atomics)
    changed = True
    while changed:
        changed = False
        for p in g.productions:
            if p.lhs not in good and all(m in good for m in p.rhs.occurrences):
                good.add(p.lhs)
                changed = True
    return good


def derivable_modules(g: WorkflowGrammar) -> set[str]:
    """Modules reachable from the start module through productions."""
    seen = {g.start}
    stack = [g.start]
    while stack:
        m = stack.pop()
        for p in g.productions_of.get(m, ()):
            for occ in p.rhs.occurrences:
                if occ not in seen:
                    seen.add(occ)
                    stack.append(occ)
    return seen


def restrict_grammar(g: WorkflowGrammar, expandable: Iterable[str]) -> WorkflowGrammar:
    """Keep productions of expandable composites only; everything else turns
    atomic and modules that can no longer be derived are dropped.
    Production ids are preserved."""
    keep = frozenset(expandable)
    if not keep <= g.composites:
        raise GrammarError(f"not composite modules: {sorted(keep - g.composites)}")
    prods = tuple(p for p in g.productions if p.lhs in keep)
    mods = tuple(
        ModuleDecl(m.name, m.n_inputs, m.n_outputs, COMPOSITE if m.name in keep else ATOMIC)
        for m in g.modules
    )
    staged = WorkflowGrammar(mods, g.start, prods)
    alive = derivable_modules(staged)
    return WorkflowGrammar(
        tuple(m for m in mods if m.name in alive),
        g.start,
        tuple(p for p in prods if p.lhs in alive),
    )


# validation ----------------------------------------------------------------


@dataclass(frozen=True)
class Issue:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


class ValidationReport(list):
    """List of :class:`Issue`; empty means valid."""

    @property
    def ok(self) -> bool:
        return not self

    def codes(self) -> set[str]:
        return {i.code for i in self}


def validate_grammar(g: WorkflowGrammar, deps: DependencyAssignment | None = None) -> ValidationReport:
    report = ValidationReport()

    def add(code: str, msg: str) -> None:
        report.append(Issue(code, msg))

    names: dict[str, ModuleDecl] = {}
    for m in g.modules:
        if m.name in names:
            add("duplicate-module", f"module {m.name!r} declared twice")
        names[m.name] = m
        if m.n_inputs < 1 or m.n_outputs < 1:
            add("arity", f"module {m.name!r} needs at least one input and one output")
        if m.kind not in (ATOMIC, COMPOSITE):
            add("kind", f"module {m.name!r} has unknown kind {m.kind!r}")
    if g.start not in names:
        add("unknown-start", f"start module {g.start!r} is not declared")

    seen_ids = set()
    for p in g.productions:
        if p.id in seen_ids:
            add("duplicate-production", f"production id {p.id} repeated")
        seen_ids.add(p.id)
        lhs = names.get(p.lhs)
        if lhs is None:
            add("unknown-module", f"production {p.id}: lhs {p.lhs!r} undeclared")
            continue
        if not lhs.is_composite:
            add("atomic-lhs", f"production {p.id}: lhs {p.lhs!r} is atomic")
        _validate_workflow(p, lhs, names, add)

    if g.start in names:
        if report:
            return report
        for m in sorted(g.composites - set(g.productions_of)):
            add("no-production", f"composite {m!r} has no production")
        for m in sorted(set(names) - productive_modules(g)):
            if m in g.composites and m in g.productions_of:
                add("unproductive", f"composite {m!r} has no terminal derivation")
        for m in sorted(set(names) - derivable_modules(g)):
            add("unreachable", f"module {m!r} cannot be derived from {g.start!r}")

    if deps is not None:
        for m in g.modules:
            if m.is_composite:
                continue
            mat = deps.get(m.name)
            if mat is None:
                add("missing-dependency", f"atomic {m.name!r} has no dependency matrix")
                continue
            _check_lambda(m, mat, add)
    return report


def _check_lambda(m: ModuleDecl, mat: BoolMatrix, add) -> None:
    if mat.shape != (m.n_inputs, m.n_outputs):
        add("dependency-shape", f"{m.name!r}: matrix {mat.shape} vs ports ({m.n_inputs}, {m.n_outputs})")
    elif not mat.covers_rows_and_cols():
        add("dependency-coverage", f"{m.name!r}: every input and output needs a dependency")


def _validate_workflow(p: Production, lhs: ModuleDecl, names: Mapping[str, ModuleDecl], add) -> None:
    w = p.rhs
    tag = f"production {p.id}"
    if not w.occurrences:
        add("empty-workflow", f"{tag}: rhs has no modules")
        return
    for occ in w.occurrences:
        if occ not in names:
            add("unknown-module", f"{tag}: rhs module {occ!r} undeclared")
            return

    def port_ok(ref: PortRef, side: str) -> bool:
        if not 1 <= ref.occurrence <= len(w.occurrences) or ref.side != side:
            add("bad-port", f"{tag}: {ref} is not a valid {side} port reference")
            return False
        decl = names[w.occurrences[ref.occurrence - 1]]
        limit = decl.n_inputs if side == IN else decl.n_outputs
        if not 1 <= ref.port <= limit:
            add("bad-port", f"{tag}: {ref} outside arity of {decl.name!r}")
            return False
        return True

    used: dict[PortRef, int] = {}
    for src, dst in w.edges:
        for ref, side in ((src, OUT), (dst, IN)):
            if port_ok(ref, side):
                used[ref] = used.get(ref, 0) + 1
        if src.occurrence == dst.occurrence:
            add("cyclic-workflow", f"{tag}: edge loops on occurrence {src.occurrence}")
    for ref in w.initial_inputs:
        if port_ok(ref, IN):
            used[ref] = used.get(ref, 0) + 1
    for ref in w.final_outputs:
        if port_ok(ref, OUT):
            used[ref] = used.get(ref, 0) + 1
    for i, occ in enumerate(w.occurrences, start=1):
        decl = names[occ]
        for side, limit in ((IN, decl.n_inputs), (OUT, decl.n_outputs)):
            for port in range(1, limit + 1):
                n = used.get(PortRef(i, side, port), 0)
                if n == 0:
                    add("dangling-port", f"{tag}: {occ}#{i} {side} port {port} is unconnected")
                elif n > 1:
                    add("adjacent-edges", f"{tag}: {occ}#{i} {side} port {port} is used {n} times")
    try:
        topological_order(w)
    except GrammarError:
        add("cyclic-workflow", f"{tag}: data edges form a cycle")
    if len(w.initial_inputs) != lhs.n_inputs or len(w.final_outputs) != lhs.n_outputs:
        add(
            "arity-mismatch",
            f"{tag}: {p.lhs!r} has ({lhs.n_inputs}, {lhs.n_outputs}) ports but rhs exposes "
            f"({len(w.initial_inputs)}, {len(w.final_outputs)})",
        )
    for mapping, size in ((p.input_map, len(w.initial_inputs)), (p.output_map, len(w.final_outputs))):
        if mapping is not None and sorted(mapping) != list(range(1, size + 1)):
            add("arity-mismatch", f"{tag}: port map {mapping} is not a permutation of 1..{size}")


def check_view(g: WorkflowGrammar, view: View) -> WorkflowGrammar:
    """Restrict ``g`` to ``view`` and make sure the view's assignment covers
    every unexpandable derivable module.  Returns the restricted grammar."""
    sub = restrict_grammar(g, view.expandable)
    missing = sorted(m for m in sub.atomics if m not in view.assignment)
    if missing:
        raise GrammarError(f"view assigns no dependencies to {missing}")
    for m in sub.atomics:
        mat = view.assignment[m]
        decl = sub.module[m]
        if mat.shape != (decl.n_inputs, decl.n_outputs) or not mat.covers_rows_and_cols():
            raise GrammarError(f"view dependency for {m!r} is malformed")
    return sub
