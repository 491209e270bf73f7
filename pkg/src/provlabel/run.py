"""Derivation of runs and their compressed parse trees.

A :class:`RunState` starts from one instance of the start module and grows
by applying productions to pending composite instances, one step at a time.
Alongside the run DAG it maintains the compressed parse tree: nested
unfoldings of a production-graph cycle hang as siblings under one recursive
node instead of forming a chain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Iterator

from .analysis import CycleTable
from .model import IN, OUT, GrammarError, View, WorkflowGrammar

COMPOSITE_NODE = "composite"
RECURSIVE_NODE = "recursive"
LEAF_NODE = "leaf"


class DerivationError(GrammarError):
    pass


class Node:
    __slots__ = ("index", "id", "kind", "module", "parent", "label", "path", "step", "children", "production", "cycle")

    def __init__(self, index, id, kind, module, parent, label, path, step, cycle=None):
        self.index = index
        self.id = id
        self.kind = kind
        self.module = module
        self.parent = parent
        self.label = label
        self.path = path
        self.step = step
        self.children: list[int] = []
        self.production: int | None = None
        self.cycle = cycle

    def __repr__(self) -> str:
        return f"Node({self.id}, {self.kind}, label={self.label})"


class DataItem:
    """One data edge of the run (or a boundary port of the start module).

    ``src_hist``/``dst_hist`` list every ``(node, port)`` the producing and
    consuming ports have been attached to; the first entry is the anchor the
    label is built from, the last one is the current attachment.
    """

    __slots__ = ("id", "src_hist", "dst_hist", "step", "origin", "label")

    def __init__(self, id, src, dst, step, origin):
        self.id = id
        self.src_hist = [src] if src is not None else None
        self.dst_hist = [dst] if dst is not None else None
        self.step = step
        self.origin = origin
        self.label = None

    @property
    def name(self) -> str:
        return f"d{self.id}"

    @property
    def src(self):
        return self.src_hist[-1] if self.src_hist else None

    @property
    def dst(self):
        return self.dst_hist[-1] if self.dst_hist else None

    @property
    def src_anchor(self):
        return self.src_hist[0] if self.src_hist else None

    @property
    def dst_anchor(self):
        return self.dst_hist[0] if self.dst_hist else None


@dataclass(frozen=True)
class Step:
    target: str
    production: int

    def to_json(self) -> str:
        return json.dumps({"target": self.target, "production": self.production})


class RunState:
    """Single-writer derivation state; see module docstring."""

    def __init__(self, g: WorkflowGrammar, cycles: CycleTable):
        self.grammar = g
        self.cycles = cycles
        self.nodes: list[Node] = []
        self.instances: dict[str, int] = {}
        self.items: list[DataItem] = []
        self.log: list[Step] = []
        self.pending: dict[int, None] = {}
        self._ports: dict[tuple[int, str, int], int] = {}
        self._counters: dict[str, int] = {}
        self._recursive_count = 0
        self._entries: dict[int, list[tuple[int, int]]] = {}
        self.depth = 0

    # tree construction ------------------------------------------------------

    def _new_node(self, kind, module, parent, label, step, cycle=None) -> Node:
        if kind == RECURSIVE_NODE:
            self._recursive_count += 1
            nid = f"R:{self._recursive_count}"
        else:
            n = self._counters.get(module, 0) + 1
            self._counters[module] = n
            nid = f"{module}:{n}"
        path = () if parent is None else self.nodes[parent].path + (label,)
        node = Node(len(self.nodes), nid, kind, module, parent, label, path, step, cycle)
        self.nodes.append(node)
        if parent is not None:
            self.nodes[parent].children.append(node.index)
        if kind != RECURSIVE_NODE:
            self.instances[nid] = node.index
            if kind == COMPOSITE_NODE:
                self.pending[node.index] = None
        if len(path) > self.depth:
            self.depth = len(path)
        return node

    def _instance(self, module, parent, label, step, cycle=None) -> Node:
        kind = COMPOSITE_NODE if module in self.grammar.composites else LEAF_NODE
        return self._new_node(kind, module, parent, label, step, cycle)

    def _new_item(self, src, dst, step, origin) -> DataItem:
        item = DataItem(len(self.items) + 1, src, dst, step, origin)
        self.items.append(item)
        idx = len(self.items) - 1
        if src is not None:
            self._ports[(src[0], OUT, src[1])] = idx
        if dst is not None:
            self._ports[(dst[0], IN, dst[1])] = idx
        return item

    @property
    def root(self) -> Node:
        return self.nodes[0]

    def node(self, node_id: str) -> Node:
        try:
            return self.nodes[self.instances[node_id]]
        except KeyError:
            raise DerivationError(f"unknown instance {node_id!r}") from None

    def item(self, name: str | int) -> DataItem:
        n = int(name[1:]) if isinstance(name, str) else name
        if not 1 <= n <= len(self.items):
            raise DerivationError(f"unknown data item {name!r}")
        return self.items[n - 1]

    # derivation -------------------------------------------------------------

    def start(self) -> list[DataItem]:
        if self.nodes:
            raise DerivationError("run already started")
        g = self.grammar
        s = g.start
        if s in self.cycles.module_index:
            cyc = self.cycles.module_index[s]
            root = self._new_node(RECURSIVE_NODE, None, None, None, 0, cyc)
            top = self._instance(s, root.index, (cyc[0], cyc[1], 1), 0)
        else:
            top = self._instance(s, None, None, 0)
        n_in, n_out = g.arity(s)
        new = [self._new_item(None, (top.index, x), 0, None) for x in range(1, n_in + 1)]
        new += [self._new_item((top.index, y), None, 0, None) for y in range(1, n_out + 1)]
        return new

    def _entry_ports(self, k: int) -> list[tuple[int, int]]:
        """(pos, port) that lhs input x of production k is wired to."""
        got = self._entries.get(k)
        if got is None:
            cp = self.grammar.compiled(k)
            got = [(0, 0)] * cp.n_inputs
            for pos, srcs in enumerate(cp.sources, start=1):
                for port, (sp, x) in enumerate(srcs, start=1):
                    if sp == 0:
                        got[x - 1] = (pos, port)
            self._entries[k] = got
        return got

    def apply(self, target: str, k: int) -> list[DataItem]:
        """Expand pending composite instance ``target`` with production ``k``."""
        g = self.grammar
        if not self.nodes:
            raise DerivationError("run not started")
        tnode = self.node(target)
        prod = g.production.get(k)
        if prod is None:
            raise DerivationError(f"unknown production {k}")
        if tnode.kind != COMPOSITE_NODE or tnode.index not in self.pending:
            raise DerivationError(f"{target} is not a pending composite instance")
        if prod.lhs != tnode.module:
            raise DerivationError(f"production {k} expands {prod.lhs!r}, not {tnode.module!r}")
        step = len(self.log) + 1
        self.log.append(Step(target, k))
        del self.pending[tnode.index]
        tnode.production = k
        cp = g.compiled(k)
        cycles = self.cycles
        children = [0]
        for pos, module in enumerate(cp.modules, start=1):
            eid = (k, pos)
            if eid in cycles.edge_index:
                rnode = self.nodes[tnode.parent]
                s, t = rnode.cycle
                assert rnode.kind == RECURSIVE_NODE and s == cycles.edge_index[eid][0]
                child = self._instance(module, rnode.index, (s, t, len(rnode.children) + 1), step)
            elif module in cycles.module_index:
                s, t = cycles.module_index[module]
                rnode = self._new_node(RECURSIVE_NODE, None, tnode.index, eid, step, (s, t))
                child = self._instance(module, rnode.index, (s, t, 1), step)
            else:
                child = self._instance(module, tnode.index, eid, step)
            children.append(child.index)

        ports = self._ports
        for x, (pos, port) in enumerate(self._entry_ports(k), start=1):
            idx = ports.pop((tnode.index, IN, x))
            dst = (children[pos], port)
            self.items[idx].dst_hist.append(dst)
            ports[(dst[0], IN, port)] = idx
        for y, (pos, port) in enumerate(cp.finals, start=1):
            idx = ports.pop((tnode.index, OUT, y))
            src = (children[pos], port)
            self.items[idx].src_hist.append(src)
            ports[(src[0], OUT, port)] = idx

        return [
            self._new_item((children[sp], sport), (children[dp], dport), step, tnode.index)
            for sp, sport, dp, dport in cp.internal_edges
        ]

    def apply_auto(self, k: int) -> list[DataItem]:
        """Expand the oldest pending instance of ``k``'s lhs."""
        lhs = self.grammar.production[k].lhs
        for idx in self.pending:
            if self.nodes[idx].module == lhs:
                return self.apply(self.nodes[idx].id, k)
        raise DerivationError(f"no pending instance of {lhs!r}")

    # views --------------------------------------------------------------------

    def project(self, view: View) -> ProjectedRun:
        """The run as seen through ``view``: only expansions of expandable
        composites (whose instances are themselves visible) take effect."""
        keep = view.expandable
        visible_step = [True] * (len(self.log) + 1)
        for n, st in enumerate(self.log, start=1):
            node = self.nodes[self.instances[st.target]]
            lhs = self.grammar.production[st.production].lhs
            visible_step[n] = lhs in keep and visible_step[node.step]
        modules: dict[int, str] = {}
        for node in self.nodes:
            if node.kind == RECURSIVE_NODE or not visible_step[node.step]:
                continue
            if node.production is None or not visible_step[self._expansion_step(node)]:
                modules[node.index] = node.module
        items = {}
        for it in self.items:
            if not visible_step[it.step]:
                continue
            src = _last_visible(it.src_hist, modules)
            dst = _last_visible(it.dst_hist, modules)
            items[it.id] = (src, dst)
        return ProjectedRun(self, view, modules, items)

    def _expansion_step(self, node: Node) -> int:
        if not hasattr(self, "_expanded_at"):
            self._expanded_at: dict[int, int] = {}
        got = self._expanded_at.get(node.index)
        if got is None:
            for n, st in enumerate(self.log, start=1):
                self._expanded_at.setdefault(self.instances[st.target], n)
            got = self._expanded_at[node.index]
        return got

    def __len__(self) -> int:
        return len(self.items)

    def iter_log(self) -> Iterator[Step]:
        return iter(self.log)


def _last_visible(hist, modules):
    if hist is None:
        return None
    found = None
    for node, port in hist:
        if node in modules:
            found = (node, port)
    return found


@dataclass
class ProjectedRun:
    """Modules and data items of a run under a view.

    ``modules`` maps node index -> module name for every instance that is a
    leaf of the projected run; ``items`` maps item id -> (src, dst) with
    ``(node, port)`` endpoints on those instances (``None`` on the start
    module's boundary).
    """

    run: RunState
    view: View
    modules: dict[int, str]
    items: dict[int, tuple]


def start_run(g: WorkflowGrammar, cycles: CycleTable) -> RunState:
    rs = RunState(g, cycles)
    rs.start()
    return rs


def replay(g: WorkflowGrammar, cycles: CycleTable, steps: Iterable[Step]) -> RunState:
    rs = start_run(g, cycles)
    for st in steps:
        rs.apply(st.target, st.production)
    return rs


def project_view(g: WorkflowGrammar, cycles: CycleTable, steps: Iterable[Step], view: View) -> ProjectedRun:
    return replay(g, cycles, steps).project(view)


def read_log(path) -> list[Step]:
    steps = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rec = json.loads(line)
                steps.append(Step(rec["target"], int(rec["production"])))
    return steps


def write_log(path, steps: Iterable[Step]) -> None:
    with open(path, "w") as fh:
        for st in steps:
            fh.write(st.to_json() + "\n")
