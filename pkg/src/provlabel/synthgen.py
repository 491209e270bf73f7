"""Seeded generators for grammars, runs and views.

Randomness comes from :class:`random.Random` (MT19937) seeded per purpose
with a 64-bit value derived from the user seed and a purpose tag through
SHA-256, so each stream is reproducible on any platform and independent of
how many numbers the other streams consumed.

Grammar shape
-------------
``S`` sits at level 0; levels ``1 .. nesting_depth-1`` each hold one cycle
of ``recursion_length`` composites sharing an arity and a target dependency
matrix ``T``.  Every production of a module realises its ``T`` exactly:

* lane ``r`` carries input ``r`` to the *core*, an occurrence whose full
  dependency matrix is ``T`` (an atomic with ``lambda = T``, or the next
  cycle member for a loop step);
* side channels leave lane ``r`` through a 1->2 fork and re-enter output lane
  ``c`` through a 2->1 join, only for pairs with ``T[r, c]`` true; whatever
  sits on a side channel (children of the next level, the next cycle member
  for a fork step, fillers) can add nothing outside ``T``;
* 1x1 identity fillers pad lanes up to ``workflow_size``.

Hence every production induces ``T`` and the grammar is safe by
construction; cycles of different levels never share a vertex, so it is
strictly linear-recursive.  Both properties are re-checked before returning.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

from .analysis import UnsafeError, analyze, compute_full_assignment
from .matrix import BoolMatrix
from .model import (
    ATOMIC,
    COMPOSITE,
    GrammarError,
    ModuleDecl,
    PortRef,
    Production,
    SimpleWorkflow,
    View,
    WorkflowGrammar,
    restrict_grammar,
)
from .run import RunState, Step, start_run

FORK = "fork1x2"
JOIN = "join2x1"
FILLER = "pass1x1"


def stream(seed: int, tag: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{tag}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


@dataclass(frozen=True)
class GenParams:
    workflow_size: int = 40
    module_degree: int = 4
    nesting_depth: int = 4
    recursion_length: int = 2
    seed: int = 1

    def __post_init__(self) -> None:
        for name in ("workflow_size", "module_degree", "nesting_depth", "recursion_length"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")


def random_covering(rng: random.Random, rows: int, cols: int, density: float = 0.4) -> BoolMatrix:
    """Random matrix, resampled until every row and column has a true entry."""
    while True:
        data = [[1 if rng.random() < density else 0 for _ in range(cols)] for _ in range(rows)]
        m = BoolMatrix.from_lists(data, cols)
        if m.covers_rows_and_cols():
            return m


class _Builder:
    """Accumulates the occurrences and edges of one rhs."""

    def __init__(self) -> None:
        self.occ: list[str] = []
        self.edges: list[tuple[PortRef, PortRef]] = []
        self.inputs: list[PortRef] = []
        self.outputs: list[PortRef] = []

    def add(self, name: str) -> int:
        self.occ.append(name)
        return len(self.occ)

    def link(self, src: tuple[int, int], dst: tuple[int, int]) -> None:
        self.edges.append((PortRef(src[0], "out", src[1]), PortRef(dst[0], "in", dst[1])))

    def workflow(self) -> SimpleWorkflow:
        return SimpleWorkflow(tuple(self.occ), tuple(self.edges), tuple(self.inputs), tuple(self.outputs))


class _Generator:
    def __init__(self, p: GenParams):
        self.p = p
        self.rng = stream(p.seed, "grammar")
        self.modules: dict[str, ModuleDecl] = {}
        self.deps: dict[str, BoolMatrix] = {}
        self.productions: list[tuple[str, SimpleWorkflow]] = []
        # side channels need 1->2 forks, so they exist only from degree 2 on
        self.compact = p.module_degree < 2 or p.workflow_size < 5

    def atomic(self, name: str, mat: BoolMatrix) -> str:
        if name not in self.modules:
            self.modules[name] = ModuleDecl(name, mat.nrows, mat.ncols, ATOMIC)
            self.deps[name] = mat
        return name

    def splitter(self, n: int) -> str:
        return self.atomic(f"split1x{n}", BoolMatrix.ones(1, n))

    def merger(self, n: int) -> str:
        return self.atomic(f"merge{n}x1", BoolMatrix.ones(n, 1))

    def build(self) -> tuple[WorkflowGrammar, dict[str, BoolMatrix]]:
        p, rng = self.p, self.rng
        deg = p.module_degree
        levels = []
        shape = None
        for level in range(p.nesting_depth):
            if shape is None or not self.compact:
                n, m = rng.randint(1, deg), rng.randint(1, deg)
                shape = (n, m, random_covering(rng, n, m))
            n, m, t = shape
            if level == 0:
                names = ["S"]
            else:
                names = [f"M{level}_{i}" for i in range(1, p.recursion_length + 1)]
            for name in names:
                self.modules[name] = ModuleDecl(name, n, m, COMPOSITE)
            core = self.atomic(f"core{level}", t)
            levels.append((names, t, core))

        for level, (names, t, core) in enumerate(levels):
            child = levels[level + 1][0][0] if level + 1 < len(levels) else None
            for idx, name in enumerate(names):
                nxt = names[(idx + 1) % len(names)] if level > 0 else None
                if nxt is not None:
                    mode = rng.choice(("loop", "fork")) if not self.compact else "loop"
                    self.productions.append((name, self.rhs(t, core, child, nxt, mode)))
                if self.compact and child is not None:
                    # the child shares this level's shape, so it can be the core
                    self.productions.append((name, self.rhs(t, child, None, None, "loop")))
                else:
                    self.productions.append((name, self.rhs(t, core, child, None, "loop")))

        used = {"S"} | {name for _, w in self.productions for name in w.occurrences}
        mods = tuple(self.modules[n] for n in ["S"] + sorted(k for k in self.modules if k != "S" and k in used))
        self.deps = {k: v for k, v in self.deps.items() if k in used}
        prods = tuple(Production(k, lhs, w) for k, (lhs, w) in enumerate(self.productions, start=1))
        g = WorkflowGrammar(mods, "S", prods)
        return g, dict(self.deps)

    def rhs(self, t: BoolMatrix, core: str, child: str | None, nxt: str | None, mode: str) -> SimpleWorkflow:
        """One production body; see the module docstring."""
        rng = self.rng
        n, m = t.nrows, t.ncols
        core_name = nxt if (nxt is not None and mode == "loop") else core
        side: list[str] = []
        if not self.compact:
            if child is not None:
                side.append(child)
            if nxt is not None and mode == "fork":
                side.append(nxt)

        channels: list[tuple[int, int]] = []
        if side:
            ones = [(r, c) for r in range(n) for c in range(m) if t.get(r, c)]
            rng.shuffle(ones)
            used_r: set[int] = set()
            used_c: set[int] = set()
            for r, c in ones:
                if r not in used_r and c not in used_c:
                    channels.append((r, c))
                    used_r.add(r)
                    used_c.add(c)
            channels = channels[: rng.randint(1, len(channels))]
        per_channel: list[list[str]] = [[] for _ in channels]
        for k, item in enumerate(side):
            per_channel[k % len(channels)].append(item)

        spare = self.p.workflow_size - 1 - 2 * len(channels) - sum(self._cost(c) for c in per_channel)
        if child is not None and channels:
            extra_cost = self._cost([child])
            while spare >= extra_cost and rng.random() < 0.3:
                per_channel[rng.randrange(len(channels))].append(child)
                spare -= extra_cost
        pre: list[int] = []
        post: list[int] = []
        for _ in range(max(0, spare)):
            if channels and rng.random() < 0.2:
                per_channel[rng.randrange(len(channels))].append(FILLER)
            elif rng.random() < 0.5:
                pre.append(rng.randrange(n))
            else:
                post.append(rng.randrange(m))

        b = _Builder()
        entry: list[tuple[int, int] | None] = [None] * n
        heads: list[tuple[int, int] | None] = [None] * n
        chain_tails = []
        for (r, _), items in zip(channels, per_channel):
            f = b.add(self.atomic(FORK, BoolMatrix.ones(1, 2)))
            entry[r] = heads[r] = (f, 1)
            cur = (f, 2)
            for item in items:
                cur = self._place(b, item, cur)
            chain_tails.append(cur)
        for r in pre:
            f = b.add(self.atomic(FILLER, BoolMatrix.identity(1)))
            if heads[r] is None:
                entry[r] = (f, 1)
            else:
                b.link(heads[r], (f, 1))
            heads[r] = (f, 1)
        core_occ = b.add(core_name)
        for r in range(n):
            if heads[r] is None:
                entry[r] = (core_occ, r + 1)
            else:
                b.link(heads[r], (core_occ, r + 1))
        tails = [(core_occ, c + 1) for c in range(m)]
        for c in post:
            f = b.add(self.atomic(FILLER, BoolMatrix.identity(1)))
            b.link(tails[c], (f, 1))
            tails[c] = (f, 1)
        for k, (_, c) in enumerate(channels):
            j = b.add(self.atomic(JOIN, BoolMatrix.ones(2, 1)))
            b.link(tails[c], (j, 1))
            b.link(chain_tails[k], (j, 2))
            tails[c] = (j, 1)
        b.inputs = [PortRef(occ, "in", port) for occ, port in entry]
        b.outputs = [PortRef(occ, "out", port) for occ, port in tails]
        return b.workflow()

    def _cost(self, items: list[str]) -> int:
        total = 0
        for item in items:
            total += 1
            if item != FILLER:
                a, c = self.modules[item].n_inputs, self.modules[item].n_outputs
                total += (a > 1) + (c > 1)
        return total

    def _place(self, b: _Builder, item: str, cur: tuple[int, int]) -> tuple[int, int]:
        """Append ``item`` to a single-wire side channel ending at ``cur``."""
        if item == FILLER:
            f = b.add(self.atomic(FILLER, BoolMatrix.identity(1)))
            b.link(cur, (f, 1))
            return (f, 1)
        decl = self.modules[item]
        if decl.n_inputs > 1:
            s = b.add(self.splitter(decl.n_inputs))
            b.link(cur, (s, 1))
            occ = b.add(item)
            for x in range(1, decl.n_inputs + 1):
                b.link((s, x), (occ, x))
        else:
            occ = b.add(item)
            b.link(cur, (occ, 1))
        if decl.n_outputs > 1:
            mg = b.add(self.merger(decl.n_outputs))
            for y in range(1, decl.n_outputs + 1):
                b.link((occ, y), (mg, y))
            return (mg, 1)
        return (occ, 1)


def gen_grammar(p: GenParams) -> tuple[WorkflowGrammar, dict[str, BoolMatrix]]:
    """Strictly linear-recursive, safe grammar plus atomic dependencies."""
    g, deps = _Generator(p).build()
    an = analyze(g, deps)
    if not an.recursion.strictly_linear:
        raise GrammarError("generator produced a grammar that is not strictly linear-recursive")
    return g, deps


# runs ----------------------------------------------------------------------------


@dataclass(frozen=True)
class RunOutcome:
    steps: list[Step]
    items: int
    reached_target: bool


def gen_run(g: WorkflowGrammar, cycles, n: int, seed: int) -> RunOutcome:
    """Random derivation aiming at ``n`` data items.

    A uniformly chosen pending instance is expanded each step.  Below the
    target, recursive modules keep recursing with probability 0.9, and always
    when at most two instances are pending so the run cannot die out.  Once
    at least ``0.9 n`` items exist the derivation stops (runs may stay
    partial).  A production is only applied if it keeps the count at
    most ``1.1 n``.
    """
    rng = stream(seed, "run")
    rs = start_run(g, cycles)
    return _drive(rs, n, rng)


def _drive(rs: RunState, n: int, rng: random.Random) -> RunOutcome:
    g = rs.grammar
    lo, hi = 0.9 * n, 1.1 * n
    cyc_prods = {k for s in range(1, len(rs.cycles) + 1) for k, _ in rs.cycles.cycle(s)}
    growth = {p.id: len(g.compiled(p.id).internal_edges) for p in g.productions}
    stuck: set[int] = set()
    while len(rs.items) < lo:
        pend = [i for i in rs.pending if i not in stuck]
        if not pend:
            break
        node = rs.nodes[rng.choice(pend)]
        options = [p.id for p in g.productions_of.get(node.module, ()) if len(rs.items) + growth[p.id] <= hi]
        if not options:
            stuck.add(node.index)
            continue
        rec = [k for k in options if k in cyc_prods or _has_composite(g, k)]
        plain = [k for k in options if k not in rec]
        if rec and (not plain or len(pend) <= 2 or rng.random() < 0.9):
            k = rng.choice(rec)
        else:
            k = rng.choice(plain)
        rs.apply(node.id, k)
    return RunOutcome(list(rs.log), len(rs.items), len(rs.items) >= lo)


def _has_composite(g: WorkflowGrammar, k: int) -> bool:
    return any(m in g.composites for m in g.compiled(k).modules)


# views ---------------------------------------------------------------------------


def gen_safe_view(
    g: WorkflowGrammar,
    deps: dict[str, BoolMatrix],
    size: int,
    grey: bool,
    seed: int,
    tries: int = 100,
) -> View:
    """Random view with ``size`` expandable composites (fewer if not that many
    can be derived), white-box or grey-box, always safe."""
    rng = stream(seed, "view")
    star = compute_full_assignment(g, deps)
    keep = {g.start} if size >= 1 else set()
    while len(keep) < size:
        frontier = sorted(
            {m for p in g.productions if p.lhs in keep for m in p.rhs.occurrences if m in g.composites} - keep
        )
        if not frontier:
            break
        keep.add(rng.choice(frontier))
    keep_f = frozenset(keep)
    sub = restrict_grammar(g, keep_f)
    white = {m: star[m] for m in sub.atomics}
    if not grey:
        return View(keep_f, white)
    leaves = sorted(sub.atomics)
    for _ in range(tries):
        cand = dict(white)
        for m in rng.sample(leaves, max(1, len(leaves) // 3)):
            mat = cand[m]
            rows = list(mat.rows)
            r, c = rng.randrange(mat.nrows), rng.randrange(mat.ncols)
            rows[r] |= 1 << c
            cand[m] = BoolMatrix(mat.nrows, mat.ncols, rows)
        if cand == white:
            continue
        try:
            compute_full_assignment(sub, cand)
        except UnsafeError:
            continue
        return View(keep_f, cand)
    return View(keep_f, white)
