"""Reachability between two labeled data items under a view label.

The source item is read through its producing port and the target item
through its consuming port; items on the start module's boundary use the
boundary port instead.  The two root paths are compared: if one is a prefix
of the other nothing can connect them, otherwise the answer is one entry of
a short product of stored matrices.  All products are evaluated as a single
bit vector pushed through the factors, so the work depends on path lengths
and never on run size.
"""

from __future__ import annotations

from dataclasses import dataclass

from .labeling import DataLabel, EdgeLabel
from .matrix import BoolMatrix, PowerTable, product
from .viewlabel import ViewLabel


class NotVisibleError(LookupError):
    """The label uses a production the view does not expand."""


@dataclass(frozen=True)
class QueryVerdict:
    reachable: bool
    matrices_multiplied: int

    def __bool__(self) -> bool:
        return self.reachable


class _Query:
    """Per-query state: table accessor and a multiplication counter."""

    __slots__ = ("vl", "tables", "mults", "cycles")

    def __init__(self, vl: ViewLabel):
        self.vl = vl
        self.tables = vl.session()
        self.cycles = vl.cycles
        self.mults = 0

    def check(self, e: EdgeLabel) -> None:
        vl = self.vl
        if len(e) == 2:
            if e[0] not in vl.visible:
                raise NotVisibleError(f"production {e[0]} is hidden by the view")
            return
        s, t, i = e
        if not 1 <= s <= len(self.cycles):
            raise NotVisibleError(f"unknown cycle {s}")
        if i == 1 or s in vl.visible_cycles:
            return
        for a in range(i - 1):
            k = self.cycles.edge(s, t + a)[0]
            if k not in vl.visible:
                raise NotVisibleError(f"production {k} is hidden by the view")

    def _wrap(self, s: int, t: int) -> int:
        return (t - 1) % len(self.cycles.cycle(s)) + 1

    def _trip_factors(self, s: int, t: int, n: int, outputs: bool) -> list[BoolMatrix]:
        """Matrices whose product is ``n`` consecutive cycle factors from
        position ``t``; a full trip repeats, so whole trips collapse into one
        reduced power."""
        if n == 0:
            return []
        cycles = self.cycles
        l = len(cycles.cycle(s))
        table = self.tables.O if outputs else self.tables.I
        q, r = divmod(n, l)
        stored = (self.vl.out_powers if outputs else self.vl.in_powers).get((s, t))
        if stored is not None:
            cp = stored
            out = [cp.power.power(q)] if q else []
            if r:
                out.append(cp.partial[r - 1])
            return out
        if q == 0:
            return [table(*cycles.edge(s, t + a)) for a in range(r)]
        trip = [table(*cycles.edge(s, t + a)) for a in range(l)]
        x = product(trip)
        pt = PowerTable(x)
        self.mults += l - 1 + pt.multiplications
        return [pt.power(q)] + trip[:r]

    def factors(self, e: EdgeLabel, outputs: bool) -> list[BoolMatrix]:
        if len(e) == 2:
            return [self.tables.O(*e) if outputs else self.tables.I(*e)]
        s, t, i = e
        return self._trip_factors(s, t, i - 1, outputs)

    # vector pushes --------------------------------------------------------

    def push_inputs(self, vec: int, path) -> int:
        """Row vector over the inputs at the top of ``path`` -> inputs at its end."""
        for e in path:
            for m in self.factors(e, False):
                vec = m.row_vector_times(vec)
                self.mults += 1
            if not vec:
                return 0
        return vec

    def pull_outputs(self, vec: int, path) -> int:
        """Column vector over the outputs at the end of ``path`` -> outputs at its top."""
        for e in reversed(path):
            for m in reversed(self.factors(e, True)):
                vec = m.times_col_vector(vec)
                self.mults += 1
            if not vec:
                return 0
        return vec

    def push_trip_inputs(self, vec: int, s: int, t: int, n: int) -> int:
        for m in self._trip_factors(s, t, n, False):
            vec = m.row_vector_times(vec)
            self.mults += 1
        return vec

    def pull_trip_outputs(self, vec: int, s: int, t: int, n: int) -> int:
        for m in reversed(self._trip_factors(s, t, n, True)):
            vec = m.times_col_vector(vec)
            self.mults += 1
        return vec

    def between(self, vec: int, k: int, i: int, j: int) -> int:
        self.mults += 1
        return self.tables.Z(k, i, j).row_vector_times(vec)


def inputs_matrix(e: EdgeLabel, vl: ViewLabel) -> BoolMatrix:
    """Inputs of the parent side of ``e`` x inputs of the node below it."""
    q = _Query(vl)
    q.check(e)
    fs = q.factors(e, False)
    if fs:
        return product(fs)
    return BoolMatrix.identity(_first_member_arity(vl, q, e, False))


def outputs_matrix(e: EdgeLabel, vl: ViewLabel) -> BoolMatrix:
    """Outputs of the parent side of ``e`` x outputs of the node below it."""
    q = _Query(vl)
    q.check(e)
    fs = q.factors(e, True)
    if fs:
        return product(fs)
    return BoolMatrix.identity(_first_member_arity(vl, q, e, True))


def _first_member_arity(vl: ViewLabel, q: _Query, e: EdgeLabel, outputs: bool) -> int:
    s, t, _ = e
    k, i = vl.cycles.edge(s, t)
    m = q.tables.O(k, i) if outputs else q.tables.I(k, i)
    return m.nrows


def decode(d1: DataLabel, d2: DataLabel, vl: ViewLabel) -> QueryVerdict:
    """Does item ``d2`` depend on item ``d1`` under the view of ``vl``?"""
    q = _Query(vl)
    seen = vl.checked_edges
    for dl in (d1, d2):
        for part in (dl.prefix, dl.src_suffix or (), dl.dst_suffix or ()):
            for e in part:
                if e not in seen:
                    q.check(e)
                    seen.add(e)
    if d1 == d2:
        return QueryVerdict(True, 0)
    ok = _decode(q, d1, d2)
    return QueryVerdict(ok, q.mults)


def _decode(q: _Query, d1: DataLabel, d2: DataLabel) -> bool:
    if d1.has_src:
        p1, x = d1.src_path, d1.src_index
    else:
        p1, x = None, d1.dst_index
    if d2.has_dst:
        p2, y = d2.dst_path, d2.dst_index
    else:
        p2, y = None, d2.src_index
    bx, by = 1 << (x - 1), 1 << (y - 1)

    if p1 is None and p2 is None:
        return q.vl.lambda_star_S.get(x - 1, y - 1)
    if p1 is None:
        return bool(q.push_inputs(bx, p2) & by)
    if p2 is None:
        return bool(q.pull_outputs(bx, p1) & by)

    n = 0
    for a, b in zip(p1, p2):
        if a != b:
            break
        n += 1
    if n == len(p1) or n == len(p2):
        return False
    e1, e2 = p1[n], p2[n]

    if len(e1) == 2:
        k, i = e1
        j = e2[1]
        if i >= j:
            q.mults += 1
            return False
        vec = q.pull_outputs(bx, p1[n + 1 :])
        if not vec:
            return False
        vec = q.between(vec, k, i, j)
        return bool(vec and q.push_inputs(vec, p2[n + 1 :]) & by)

    s, t, i = e1
    j = e2[2]
    if i < j:
        if len(p1) == n + 1:
            return False
        k, i_branch = p1[n + 1]
        spine = q._wrap(s, t + i - 1)
        kc, c = q.cycles.edge(s, spine)
        assert kc == k, "recursive spine expanded by a production off its cycle"
        vec = q.pull_outputs(bx, p1[n + 2 :])
        if not vec:
            return False
        vec = q.between(vec, k, i_branch, c)
        vec = q.push_trip_inputs(vec, s, q._wrap(s, t + i), j - i - 1)
        return bool(vec and q.push_inputs(vec, p2[n + 1 :]) & by)

    if len(p2) == n + 1:
        return False
    k, j_branch = p2[n + 1]
    spine = q._wrap(s, t + j - 1)
    kc, c = q.cycles.edge(s, spine)
    assert kc == k, "recursive spine expanded by a production off its cycle"
    vec = q.pull_outputs(bx, p1[n + 1 :])
    vec = q.pull_trip_outputs(vec, s, q._wrap(s, t + j), i - j - 1)
    if not vec:
        return False
    vec = q.between(vec, k, c, j_branch)
    return bool(vec and q.push_inputs(vec, p2[n + 2 :]) & by)


def query_bound(n_composites: int) -> int:
    """Static cap on ``matrices_multiplied`` for the query variant."""
    return 8 * n_composites + 3
