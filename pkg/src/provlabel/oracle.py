"""Brute-force ground truth, kept apart from the labeling code on purpose.

``FlatPortGraph`` spells out every port of a projected run and walks it
directly; ``enumerate_and_check_safety`` derives terminal workflows up to a
height bound and compares what they induce.  Neither touches the decoder,
the view tables or the bitmask propagation used elsewhere.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping

from .analysis import compute_full_assignment
from .matrix import BoolMatrix
from .model import View, WorkflowGrammar, restrict_grammar
from .run import ProjectedRun

BOUNDARY = -1


class OracleError(LookupError):
    pass


class FlatPortGraph:
    """Ports of every module instance left in a projected run, joined by data
    edges and by each instance's dependency matrix.

    Vertices are ``(node, side, port)``; an instance uses the view's matrix
    if its module is not expandable, otherwise (a composite the run has not
    expanded yet) the full assignment of the view.
    """

    def __init__(self, pr: ProjectedRun, perceived: Mapping[str, BoolMatrix]):
        self.items = pr.items
        succ: dict[tuple, list[tuple]] = {}
        for node, module in pr.modules.items():
            mat = perceived[module]
            for r in range(mat.nrows):
                succ.setdefault((node, "in", r + 1), [])
                for c in range(mat.ncols):
                    if mat.get(r, c):
                        succ[(node, "in", r + 1)].append((node, "out", c + 1))
            for c in range(mat.ncols):
                succ.setdefault((node, "out", c + 1), [])
        for src, dst in pr.items.values():
            if src is not None and dst is not None:
                succ[(src[0], "out", src[1])].append((dst[0], "in", dst[1]))
        self.succ = succ
        self._reach: dict[tuple, set] = {}

    def source_vertex(self, item: int) -> tuple:
        src, dst = self._endpoints(item)
        return (src[0], "out", src[1]) if src is not None else (dst[0], "in", dst[1])

    def target_vertex(self, item: int) -> tuple:
        src, dst = self._endpoints(item)
        return (dst[0], "in", dst[1]) if dst is not None else (src[0], "out", src[1])

    def _endpoints(self, item: int):
        try:
            return self.items[item]
        except KeyError:
            raise OracleError(f"item d{item} is not in the projected run") from None

    def reachable_from(self, v: tuple) -> set:
        got = self._reach.get(v)
        if got is None:
            got = {v}
            stack = [v]
            while stack:
                u = stack.pop()
                for w in self.succ[u]:
                    if w not in got:
                        got.add(w)
                        stack.append(w)
            self._reach[v] = got
        return got

    def depends(self, d1: int, d2: int) -> bool:
        if d1 == d2:
            self._endpoints(d1)
            return True
        return self.target_vertex(d2) in self.reachable_from(self.source_vertex(d1))


def perceived_assignment(g: WorkflowGrammar, view: View) -> dict[str, BoolMatrix]:
    """Matrix for every module an instance of R_U can carry."""
    sub = restrict_grammar(g, view.expandable)
    out = dict(view.assignment)
    out.update(compute_full_assignment(sub, view.assignment))
    return out


def oracle_graph(pr: ProjectedRun, g: WorkflowGrammar) -> FlatPortGraph:
    return FlatPortGraph(pr, perceived_assignment(g, pr.view))


def oracle_reachable(pr: ProjectedRun, g: WorkflowGrammar, d1: int, d2: int) -> bool:
    return oracle_graph(pr, g).depends(d1, d2)


# safety by enumeration -----------------------------------------------------------

Derivation = tuple[int, tuple]


@dataclass(frozen=True)
class SafeWithinBound:
    bound: int
    matrices: Mapping[str, BoolMatrix]

    safe = True


@dataclass(frozen=True)
class UnsafePair:
    module: str
    first: Derivation
    second: Derivation
    first_matrix: BoolMatrix
    second_matrix: BoolMatrix

    safe = False


def _workflow_reach(g: WorkflowGrammar, k: int, child: Mapping[int, BoolMatrix]) -> BoolMatrix:
    """Input x output reachability of production ``k``'s rhs by DFS, with
    ``child[occurrence]`` the matrix used for each occurrence."""
    p = g.production[k]
    w = p.rhs
    lhs_in, lhs_out = g.arity(p.lhs)
    nxt: dict[tuple, list[tuple]] = {}
    for occ, mat in child.items():
        for r in range(mat.nrows):
            nxt[(occ, "in", r + 1)] = [(occ, "out", c + 1) for c in range(mat.ncols) if mat.get(r, c)]
    for a, b in w.edges:
        nxt.setdefault((a.occurrence, "out", a.port), []).append((b.occurrence, "in", b.port))
    rows = []
    for x in range(1, lhs_in + 1):
        ref = p.lhs_input(x)
        seen = {(ref.occurrence, "in", ref.port)}
        stack = list(seen)
        while stack:
            u = stack.pop()
            for v in nxt.get(u, ()):
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        mask = 0
        for y in range(1, lhs_out + 1):
            ref = p.lhs_output(y)
            if (ref.occurrence, "out", ref.port) in seen:
                mask |= 1 << (y - 1)
        rows.append(mask)
    return BoolMatrix(lhs_in, lhs_out, rows)


def enumerate_and_check_safety(
    g: WorkflowGrammar,
    deps: Mapping[str, BoolMatrix],
    bound: int = 5,
    max_composites: int = 4,
    max_combinations: int = 200_000,
) -> SafeWithinBound | UnsafePair:
    """Compare the dependencies induced by every terminal derivation tree of
    height at most ``bound``, one distinct matrix per tree shape class."""
    if len(g.composites) > max_composites or bound > 5:
        raise OracleError("enumeration guard exceeded")
    found: dict[str, dict[BoolMatrix, Derivation]] = {m: {} for m in g.composites}
    budget = max_combinations
    for _ in range(bound):
        layer: dict[str, dict[BoolMatrix, Derivation]] = {m: dict(v) for m, v in found.items()}
        for p in g.productions:
            w = p.rhs
            options = []
            for occ, name in enumerate(w.occurrences, start=1):
                if name in g.composites:
                    options.append([(occ, m, d) for m, d in found[name].items()])
                else:
                    options.append([(occ, deps[name], None)])
            for combo in itertools.product(*options):
                budget -= 1
                if budget < 0:
                    raise OracleError("enumeration guard exceeded")
                mat = _workflow_reach(g, p.id, {occ: m for occ, m, _ in combo})
                tree = (p.id, tuple(d for _, _, d in combo if d is not None))
                seen = layer[p.lhs]
                if mat not in seen:
                    if seen:
                        other_mat, other = next(iter(seen.items()))
                        return UnsafePair(p.lhs, other, tree, other_mat, mat)
                    seen[mat] = tree
        found = layer
    return SafeWithinBound(bound, {m: next(iter(v)) for m, v in found.items() if v})
