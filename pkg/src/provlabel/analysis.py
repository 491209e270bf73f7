"""Static analysis of workflow grammars.

Production graphs with ``(k, i)`` edge ids, recursion classification and
cycle tables, port-level reachability inside a single production, and the
fixpoint that extends an atomic dependency assignment to every module.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

from .matrix import BoolMatrix
from .model import (
    CompiledProduction,
    DependencyAssignment,
    GrammarError,
    SimpleWorkflow,
    WorkflowGrammar,
    compile_workflow,
    derivable_modules,
)

NON_RECURSIVE = "non_recursive"
STRICTLY_LINEAR = "strictly_linear"
LINEAR = "linear"
GENERAL = "general"

EdgeId = tuple[int, int]


# production graph ------------------------------------------------------------


@dataclass(frozen=True)
class ProductionGraph:
    vertices: tuple[str, ...]
    edges: tuple[tuple[str, str, EdgeId], ...]

    def out_edges(self, v: str) -> list[tuple[str, str, EdgeId]]:
        return [e for e in self.edges if e[0] == v]


def build_production_graph(g: WorkflowGrammar) -> ProductionGraph:
    edges = []
    for p in g.productions:
        for i in range(1, len(p) + 1):
            edges.append((p.lhs, p.module_at(i), (p.id, i)))
    return ProductionGraph(tuple(m.name for m in g.modules), tuple(edges))


def strongly_connected_components(vertices: Sequence[str], succ: Mapping[str, Sequence[str]]) -> list[list[str]]:
    """Iterative Tarjan."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    out: list[list[str]] = []
    counter = 0
    for root in vertices:
        if root in index:
            continue
        work = [(root, iter(succ.get(root, ())))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ.get(w, ()))))
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            else:
                work.pop()
                if work:
                    parent = work[-1][0]
                    low[parent] = min(low[parent], low[v])
                if low[v] == index[v]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on_stack.discard(w)
                        comp.append(w)
                        if w == v:
                            break
                    out.append(comp)
    return out


@dataclass(frozen=True)
class CycleTable:
    """Vertex-disjoint cycles of a production graph.

    ``cycles[s-1]`` lists the edge ids of cycle ``s`` starting from its first
    edge; consecutive edges chain head-to-tail and the list wraps around.
    """

    cycles: tuple[tuple[EdgeId, ...], ...] = ()
    modules: tuple[tuple[str, ...], ...] = ()

    def __len__(self) -> int:
        return len(self.cycles)

    def cycle(self, s: int) -> tuple[EdgeId, ...]:
        return self.cycles[s - 1]

    def edge(self, s: int, position: int) -> EdgeId:
        """Edge at 1-based ``position`` of cycle ``s``, wrapping around."""
        c = self.cycles[s - 1]
        return c[(position - 1) % len(c)]

    @property
    def edge_index(self) -> dict[EdgeId, tuple[int, int]]:
        return self._edge_index

    @property
    def module_index(self) -> dict[str, tuple[int, int]]:
        """module -> (s, t) where t is the position of its outgoing cycle edge."""
        return self._module_index

    def __post_init__(self) -> None:
        ei = {}
        mi = {}
        for s, (edges, mods) in enumerate(zip(self.cycles, self.modules), start=1):
            for t, (e, m) in enumerate(zip(edges, mods), start=1):
                ei[e] = (s, t)
                mi[m] = (s, t)
        object.__setattr__(self, "_edge_index", ei)
        object.__setattr__(self, "_module_index", mi)

    def to_json(self) -> list[list[list[int]]]:
        return [[list(e) for e in c] for c in self.cycles]


@dataclass(frozen=True)
class RecursionReport:
    recursion_class: str
    cycles: CycleTable = field(default_factory=CycleTable)

    @property
    def strictly_linear(self) -> bool:
        return self.recursion_class in (NON_RECURSIVE, STRICTLY_LINEAR)


def classify_recursion(pg: ProductionGraph) -> RecursionReport:
    succ: dict[str, list[str]] = {v: [] for v in pg.vertices}
    for src, dst, _ in pg.edges:
        succ.setdefault(src, []).append(dst)
    comps = strongly_connected_components(list(pg.vertices), succ)
    comp_of = {v: n for n, comp in enumerate(comps) for v in comp}

    nontrivial = []
    for n, comp in enumerate(comps):
        inner = [e for e in pg.edges if comp_of.get(e[0]) == n and comp_of.get(e[1]) == n]
        if inner:
            nontrivial.append((comp, inner))
    if not nontrivial:
        return RecursionReport(NON_RECURSIVE)

    simple = True
    for comp, inner in nontrivial:
        outd = {v: 0 for v in comp}
        ind = {v: 0 for v in comp}
        for src, dst, _ in inner:
            outd[src] += 1
            ind[dst] += 1
        if len(inner) != len(comp) or any(outd[v] != 1 or ind[v] != 1 for v in comp):
            simple = False
            break
    if simple:
        cycles = []
        for comp, inner in nontrivial:
            by_src = {e[0]: e for e in inner}
            first = min(inner, key=lambda e: e[2])
            seq = [first]
            while len(seq) < len(inner):
                seq.append(by_src[seq[-1][1]])
            cycles.append(seq)
        cycles.sort(key=lambda seq: min(e[2] for e in seq))
        return RecursionReport(
            STRICTLY_LINEAR,
            CycleTable(
                tuple(tuple(e[2] for e in seq) for seq in cycles),
                tuple(tuple(e[0] for e in seq) for seq in cycles),
            ),
        )

    # Linear iff no production of a recursive module puts two occurrences of
    # that module's component into one rhs (then no derivation from M can hold
    # two instances of M).  Only used for reporting.
    per_production: dict[tuple[int, int], int] = {}
    for src, dst, (k, _) in pg.edges:
        if comp_of[src] == comp_of[dst] and any(src in comp for comp, _ in nontrivial):
            key = (k, comp_of[src])
            per_production[key] = per_production.get(key, 0) + 1
    if all(n <= 1 for n in per_production.values()):
        return RecursionReport(LINEAR)
    return RecursionReport(GENERAL)


def analyze_recursion(g: WorkflowGrammar) -> RecursionReport:
    return classify_recursion(build_production_graph(g))


# port reachability inside one production ----------------------------------------


@lru_cache(maxsize=4096)
def _column_sources(m: BoolMatrix) -> tuple[int, ...]:
    """For each output column, the bitmask of input rows that reach it."""
    return m.transpose().rows


def propagate(
    cp: CompiledProduction,
    mats: Sequence[BoolMatrix],
    seed_pos: int = 0,
) -> tuple[list[list[int]], list[list[int]]]:
    """Forward bitmask propagation over the port graph of one production.

    With ``seed_pos == 0`` the sources are the lhs inputs (bit ``x-1``);
    otherwise they are the outputs of the occurrence at ``seed_pos`` (bit
    ``c-1``).  Returns per-position input and output masks.
    """
    n = len(cp.modules)
    in_masks: list[list[int]] = [[] for _ in range(n + 1)]
    out_masks: list[list[int]] = [[] for _ in range(n + 1)]
    for pos in range(1, n + 1):
        srcs = cp.sources[pos - 1]
        if pos < seed_pos:
            in_masks[pos] = [0] * len(srcs)
            out_masks[pos] = [0] * mats[pos - 1].ncols
            continue
        if pos == seed_pos:
            in_masks[pos] = [0] * len(srcs)
            out_masks[pos] = [1 << c for c in range(mats[pos - 1].ncols)]
            continue
        ins = []
        for sp, sport in srcs:
            if sp == 0:
                ins.append(1 << (sport - 1) if seed_pos == 0 else 0)
            else:
                ins.append(out_masks[sp][sport - 1])
        in_masks[pos] = ins
        outs = []
        for col in _column_sources(mats[pos - 1]):
            acc = 0
            r = 0
            while col:
                if col & 1:
                    acc |= ins[r]
                col >>= 1
                r += 1
            outs.append(acc)
        out_masks[pos] = outs
    return in_masks, out_masks


def masks_to_matrix(nrows: int, col_masks: Sequence[int]) -> BoolMatrix:
    """Matrix whose column ``c`` has the rows set in ``col_masks[c]``."""
    rows = [0] * nrows
    for c, mask in enumerate(col_masks):
        r = 0
        while mask:
            if mask & 1:
                rows[r] |= 1 << c
            mask >>= 1
            r += 1
    return BoolMatrix(nrows, len(col_masks), rows)


def occurrence_matrices(cp: CompiledProduction, a: DependencyAssignment) -> list[BoolMatrix]:
    try:
        return [a[m] for m in cp.modules]
    except KeyError as exc:
        raise GrammarError(f"no dependency matrix for module {exc.args[0]!r}") from None


def induced_compiled(cp: CompiledProduction, mats: Sequence[BoolMatrix]) -> BoolMatrix:
    _, outs = propagate(cp, mats)
    return masks_to_matrix(cp.n_inputs, [outs[pos][port - 1] for pos, port in cp.finals])


def induced_matrix(w: SimpleWorkflow, a: DependencyAssignment) -> BoolMatrix:
    """Initial-input x final-output reachability of ``w`` under ``a``."""
    for m in w.occurrences:
        if m not in a:
            raise GrammarError(f"no dependency matrix for module {m!r}")
    cp = compile_workflow(w, lambda m: a[m].shape, list(w.initial_inputs), list(w.final_outputs))
    return induced_compiled(cp, occurrence_matrices(cp, a))


# full dependency assignment ----------------------------------------------------


class UnsafeError(Exception):
    """Two derivations of one module induce different dependencies."""

    def __init__(self, witness: UnsafeWitness):
        super().__init__(
            f"unsafe: production {witness.production} induces {witness.induced.to_lists()} "
            f"for {witness.module!r}, expected {witness.expected.to_lists()}"
        )
        self.witness = witness


class UnproductiveError(GrammarError):
    pass


# derivation tree: (production id, children) where children lists the
# derivations of the composite occurrences in topological position order
Derivation = tuple[int, tuple["Derivation", ...]]


@dataclass(frozen=True)
class UnsafeWitness:
    module: str
    production: int
    expected: BoolMatrix
    induced: BoolMatrix
    first: Derivation
    second: Derivation

    def to_json(self) -> dict:
        return {
            "module": self.module,
            "production": self.production,
            "expected": self.expected.to_lists(),
            "induced": self.induced.to_lists(),
            "first": self.first,
            "second": self.second,
        }


def compute_full_assignment(
    g: WorkflowGrammar,
    deps: DependencyAssignment,
    rng: random.Random | None = None,
) -> dict[str, BoolMatrix]:
    """Extend ``deps`` (atomic modules) to every derivable module.

    Productions are verified once all their rhs modules have a matrix; the
    first verified production of a composite defines it and every later one
    must agree.  ``rng`` shuffles the schedule (the result does not depend on
    it for safe inputs).  Raises :class:`UnsafeError` or
    :class:`UnproductiveError`.
    """
    alive = derivable_modules(g)
    star: dict[str, BoolMatrix] = {}
    for m in g.atomics:
        if m in alive:
            if m not in deps:
                raise GrammarError(f"no dependency matrix for atomic {m!r}")
            star[m] = deps[m]
    defined_by: dict[str, int] = {}
    prods = [p for p in g.productions if p.lhs in alive]
    pending = list(prods)
    while pending:
        if rng is not None:
            rng.shuffle(pending)
        progressed = False
        rest = []
        for p in pending:
            if not all(m in star for m in p.rhs.occurrences):
                rest.append(p)
                continue
            progressed = True
            cp = g.compiled(p.id)
            got = induced_compiled(cp, occurrence_matrices(cp, star))
            if p.lhs not in star:
                star[p.lhs] = got
                defined_by[p.lhs] = p.id
            elif star[p.lhs] != got:
                raise UnsafeError(
                    UnsafeWitness(
                        p.lhs,
                        p.id,
                        star[p.lhs],
                        got,
                        _derivation(g, p.lhs, defined_by),
                        (p.id, tuple(_derivation(g, m, defined_by) for m in cp.modules if m in g.composites)),
                    )
                )
        pending = rest
        if not progressed:
            break
    missing = sorted(m for m in g.composites if m in alive and m not in star)
    if missing:
        raise UnproductiveError(f"composites never verifiable: {missing}")
    for p in prods:
        cp = g.compiled(p.id)
        assert induced_compiled(cp, occurrence_matrices(cp, star)) == star[p.lhs]
    return star


def _derivation(g: WorkflowGrammar, m: str, defined_by: Mapping[str, int]) -> Derivation:
    k = defined_by[m]
    cp = g.compiled(k)
    return (k, tuple(_derivation(g, c, defined_by) for c in cp.modules if c in g.composites))


@dataclass(frozen=True)
class Analysis:
    """Everything the run labeler and view labeler need about a grammar."""

    grammar: WorkflowGrammar
    recursion: RecursionReport
    lambda_star: Mapping[str, BoolMatrix] | None = None

    @property
    def cycles(self) -> CycleTable:
        return self.recursion.cycles


def analyze(g: WorkflowGrammar, deps: DependencyAssignment | None = None) -> Analysis:
    rec = analyze_recursion(g)
    star = compute_full_assignment(g, deps) if deps is not None else None
    return Analysis(g, rec, star)
