"""View labels: reachability tables of a view's grammar.

For every production ``k`` of the restricted grammar and rhs positions
``i < j``:

* ``I(k, i)``: lhs inputs x inputs of occurrence ``i``;
* ``O(k, i)``: lhs outputs x outputs of occurrence ``i`` (true when the lhs
  output depends on that occurrence output);
* ``Z(k, i, j)``: outputs of ``i`` x inputs of ``j``.

Three variants trade size against query work:

``default``
    all tables materialized.
``space``
    only the full assignment is kept; tables are recomputed by port-graph
    search on demand, memoized for one query session.
``query``
    default plus, for each cycle and start position, the product of one trip
    around the cycle with its period and powers, and the partial products of
    shorter trips, in both directions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .analysis import CycleTable, masks_to_matrix, occurrence_matrices, propagate, compute_full_assignment
from .matrix import BoolMatrix, PowerTable
from .model import GrammarError, View, WorkflowGrammar, check_view

DEFAULT = "default"
SPACE = "space"
QUERY = "query"
VARIANTS = (DEFAULT, SPACE, QUERY)
_ALIASES = {"space_efficient": SPACE, "query_efficient": QUERY}


def variant_name(v: str) -> str:
    v = _ALIASES.get(v, v)
    if v not in VARIANTS:
        raise ValueError(f"unknown view label variant {v!r}")
    return v


def production_tables(cp, mats) -> tuple[list[BoolMatrix], list[BoolMatrix], dict[tuple[int, int], BoolMatrix]]:
    """I, O (indexed by position - 1) and Z (keyed ``(i, j)``, ``i < j``) of
    one compiled production under per-position matrices ``mats``."""
    n = len(cp.modules)
    ins, _ = propagate(cp, mats, 0)
    I = [masks_to_matrix(cp.n_inputs, ins[pos]) for pos in range(1, n + 1)]
    O = []
    Z = {}
    for i in range(1, n + 1):
        seeded_in, seeded_out = propagate(cp, mats, i)
        width = mats[i - 1].ncols
        O.append(BoolMatrix(cp.n_outputs, width, [seeded_out[pos][port - 1] for pos, port in cp.finals]))
        for j in range(i + 1, n + 1):
            Z[(i, j)] = masks_to_matrix(width, seeded_in[j])
    return I, O, Z


class _SearchTables:
    """Tables of the space variant, found by port-graph search on first use.

    One search from the lhs inputs serves every ``I(k, .)``; one search from
    the outputs of occurrence ``i`` serves ``O(k, i)`` and every ``Z(k, i, .)``.
    """

    def __init__(self, grammar: WorkflowGrammar, star: Mapping[str, BoolMatrix]):
        self.grammar = grammar
        self.star = star
        self._memo: dict[tuple[int, int], tuple] = {}
        self.searches = 0

    def _search(self, k: int, seed: int):
        got = self._memo.get((k, seed))
        if got is None:
            cp = self.grammar.compiled(k)
            mats = occurrence_matrices(cp, self.star)
            got = (cp, mats) + propagate(cp, mats, seed)
            self._memo[(k, seed)] = got
            self.searches += 1
        return got

    def I(self, k: int, i: int) -> BoolMatrix:
        cp, _, ins, _ = self._search(k, 0)
        return masks_to_matrix(cp.n_inputs, ins[i])

    def O(self, k: int, i: int) -> BoolMatrix:
        cp, mats, _, outs = self._search(k, i)
        return BoolMatrix(cp.n_outputs, mats[i - 1].ncols, [outs[pos][port - 1] for pos, port in cp.finals])

    def Z(self, k: int, i: int, j: int) -> BoolMatrix:
        cp, mats, ins, _ = self._search(k, i)
        if i < j:
            return masks_to_matrix(mats[i - 1].ncols, ins[j])
        return BoolMatrix.zeros(mats[i - 1].ncols, mats[j - 1].nrows)


class _StoredTables:
    def __init__(self, vl: ViewLabel):
        self.inputs = vl.inputs
        self.outputs = vl.outputs
        self.between = vl.between

    def I(self, k: int, i: int) -> BoolMatrix:
        return self.inputs[(k, i)]

    def O(self, k: int, i: int) -> BoolMatrix:
        return self.outputs[(k, i)]

    def Z(self, k: int, i: int, j: int) -> BoolMatrix:
        if i < j:
            return self.between[(k, i, j)]
        return BoolMatrix.zeros(self.outputs[(k, i)].ncols, self.inputs[(k, j)].ncols)


@dataclass
class CyclePowers:
    """One trip around a cycle starting at position ``t``: its product, the
    power table of that product, and the partial products of ``r < l``
    consecutive factors (``partial[r-1]``)."""

    power: PowerTable
    partial: tuple[BoolMatrix, ...]


@dataclass
class ViewLabel:
    variant: str
    lambda_star_S: BoolMatrix
    cycles: CycleTable
    visible: frozenset[int]
    inputs: dict[tuple[int, int], BoolMatrix] = field(default_factory=dict)
    outputs: dict[tuple[int, int], BoolMatrix] = field(default_factory=dict)
    between: dict[tuple[int, int, int], BoolMatrix] = field(default_factory=dict)
    in_powers: dict[tuple[int, int], CyclePowers] = field(default_factory=dict)
    out_powers: dict[tuple[int, int], CyclePowers] = field(default_factory=dict)
    grammar: WorkflowGrammar | None = None
    lambda_star: dict[str, BoolMatrix] | None = None
    expandable: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        # edge labels already found visible, shared by all queries
        self.checked_edges: set[tuple[int, ...]] = set()
        self.visible_cycles = frozenset(
            s
            for s in range(1, len(self.cycles) + 1)
            if all(k in self.visible for k, _ in self.cycles.cycle(s))
        )

    def session(self):
        """Table accessor for one query.  The space variant hands out a fresh
        memo per session so concurrent queries never share mutable state."""
        if self.variant == SPACE:
            return _SearchTables(self.grammar, self.lambda_star)
        return _StoredTables(self)

    # serialization ----------------------------------------------------------

    def to_json(self) -> dict:
        doc: dict = {
            "variant": self.variant,
            "lambda_star_S": self.lambda_star_S.to_lists(),
            "cycles": self.cycles.to_json(),
            "cycle_modules": [list(m) for m in self.cycles.modules],
            "productions": sorted(self.visible),
        }
        if self.variant == SPACE:
            doc["expandable"] = sorted(self.expandable)
            doc["lambda_star"] = {m: mat.to_lists() for m, mat in sorted(self.lambda_star.items())}
            return doc
        doc["I"] = {_key(k): m.to_lists() for k, m in sorted(self.inputs.items())}
        doc["O"] = {_key(k): m.to_lists() for k, m in sorted(self.outputs.items())}
        doc["Z"] = {_key(k): m.to_lists() for k, m in sorted(self.between.items())}
        if self.variant == QUERY:
            doc["in_powers"] = {_key(k): _powers_json(p) for k, p in sorted(self.in_powers.items())}
            doc["out_powers"] = {_key(k): _powers_json(p) for k, p in sorted(self.out_powers.items())}
        return doc

    def dumps(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))

    def byte_size(self) -> int:
        return len(self.dumps().encode())

    @classmethod
    def from_json(cls, doc: Mapping, grammar: WorkflowGrammar | None = None) -> ViewLabel:
        variant = variant_name(doc["variant"])
        cycles = CycleTable(
            tuple(tuple(tuple(e) for e in c) for c in doc["cycles"]),
            tuple(tuple(m) for m in doc["cycle_modules"]),
        )
        vl = dict(
            variant=variant,
            lambda_star_S=_mat(doc["lambda_star_S"]),
            cycles=cycles,
            visible=frozenset(doc["productions"]),
        )
        if variant == SPACE:
            if grammar is None:
                raise GrammarError("a space-efficient view label needs its grammar")
            keep = frozenset(doc["expandable"])
            from .model import restrict_grammar

            return cls(
                **vl,
                grammar=restrict_grammar(grammar, keep),
                lambda_star={m: _mat(rows) for m, rows in doc["lambda_star"].items()},
                expandable=keep,
            )
        out = cls(
            **vl,
            inputs={_unkey(k): _mat(v) for k, v in doc["I"].items()},
            outputs={_unkey(k): _mat(v) for k, v in doc["O"].items()},
            between={_unkey(k): _mat(v) for k, v in doc["Z"].items()},
        )
        if variant == QUERY:
            out.in_powers = _powers_from(doc["in_powers"])
            out.out_powers = _powers_from(doc["out_powers"])
        return out

    @classmethod
    def loads(cls, text: str, grammar: WorkflowGrammar | None = None) -> ViewLabel:
        return cls.from_json(json.loads(text), grammar)


def _key(t: tuple[int, ...]) -> str:
    return ",".join(map(str, t))


def _unkey(s: str) -> tuple[int, ...]:
    return tuple(int(x) for x in s.split(","))


def _mat(rows) -> BoolMatrix:
    if not rows:
        raise ValueError("empty matrix")
    return BoolMatrix.from_lists(rows)


def _powers_json(p: CyclePowers) -> dict:
    return {
        "period": list(p.power.period),
        "powers": [m.to_lists() for m in p.power.powers],
        "partial": [m.to_lists() for m in p.partial],
    }


def _powers_from(doc: Mapping) -> dict[tuple[int, int], CyclePowers]:
    return {
        _unkey(k): CyclePowers(
            PowerTable.from_stored([_mat(m) for m in v["powers"]], tuple(v["period"])),
            tuple(_mat(m) for m in v["partial"]),
        )
        for k, v in doc.items()
    }


def _cycle_powers(cycles: CycleTable, s: int, t: int, table) -> CyclePowers:
    l = len(cycles.cycle(s))
    acc = None
    partial = []
    for a in range(l):
        m = table(*cycles.edge(s, t + a))
        acc = m if acc is None else acc @ m
        if a < l - 1:
            partial.append(acc)
    return CyclePowers(PowerTable(acc), tuple(partial))


def label_view(
    g: WorkflowGrammar,
    cycles: CycleTable,
    view: View,
    variant: str = DEFAULT,
) -> ViewLabel:
    """Build the view label; raises ``UnsafeError`` if the view is unsafe."""
    variant = variant_name(variant)
    sub = check_view(g, view)
    star = compute_full_assignment(sub, view.assignment)
    visible = frozenset(p.id for p in sub.productions)
    base = dict(variant=variant, lambda_star_S=star[sub.start], cycles=cycles, visible=visible)
    if variant == SPACE:
        return ViewLabel(**base, grammar=sub, lambda_star=dict(star), expandable=frozenset(view.expandable))
    inputs, outputs, between = {}, {}, {}
    for p in sub.productions:
        cp = sub.compiled(p.id)
        I, O, Z = production_tables(cp, occurrence_matrices(cp, star))
        for i in range(1, len(cp.modules) + 1):
            inputs[(p.id, i)] = I[i - 1]
            outputs[(p.id, i)] = O[i - 1]
        for (i, j), m in Z.items():
            between[(p.id, i, j)] = m
    vl = ViewLabel(**base, inputs=inputs, outputs=outputs, between=between)
    if variant == QUERY:
        for s in vl.visible_cycles:
            for t in range(1, len(cycles.cycle(s)) + 1):
                vl.in_powers[(s, t)] = _cycle_powers(cycles, s, t, lambda k, i: inputs[(k, i)])
                vl.out_powers[(s, t)] = _cycle_powers(cycles, s, t, lambda k, i: outputs[(k, i)])
    return vl


def save_view_label(path: str | Path, vl: ViewLabel) -> None:
    Path(path).write_text(vl.dumps())


def load_view_label(path: str | Path, grammar: WorkflowGrammar | None = None) -> ViewLabel:
    return ViewLabel.loads(Path(path).read_text(), grammar)
