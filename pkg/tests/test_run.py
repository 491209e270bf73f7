import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from provlabel.analysis import analyze
from provlabel.model import default_view
from provlabel.run import (
    RECURSIVE_NODE,
    DerivationError,
    Step,
    read_log,
    replay,
    start_run,
    write_log,
)
from provlabel.synthgen import GenParams, gen_grammar, gen_run


def test_fig2_run_shape(fig2, fig2_run):
    g = fig2[0]
    rs = fig2_run
    assert len(rs.items) == 42
    assert rs.depth == 6 <= 2 * len(g.composites)
    # partial run: three C instances are left unexpanded
    assert sorted(rs.nodes[i].module for i in rs.pending) == ["C", "C", "C"]
    kinds = [n.kind for n in rs.nodes]
    assert kinds.count(RECURSIVE_NODE) == 2
    assert rs.node("D:3").path == ((1, 3), (1, 1, 5), (3, 2), (5, 2), (2, 1, 3))


def test_recursive_children_are_siblings(fig2_run):
    r = next(n for n in fig2_run.nodes if n.kind == RECURSIVE_NODE and n.cycle == (1, 1))
    labels = [fig2_run.nodes[c].label for c in r.children]
    assert labels == [(1, 1, i) for i in range(1, 6)]
    assert [fig2_run.nodes[c].module for c in r.children] == ["A", "B", "A", "B", "A"]


def test_log_round_trip(fig2, fig2_run, tmp_path):
    g, _, an = fig2
    write_log(tmp_path / "run.jsonl", fig2_run.log)
    steps = read_log(tmp_path / "run.jsonl")
    assert steps == fig2_run.log
    again = replay(g, an.cycles, steps)
    assert [(i.src, i.dst) for i in again.items] == [(i.src, i.dst) for i in fig2_run.items]


@pytest.mark.parametrize(
    "step",
    [Step("S:1", 2), Step("S:1", 99), Step("a:1", 1), Step("Q:1", 1)],
)
def test_bad_steps_rejected(fig2, step):
    g, _, an = fig2
    rs = start_run(g, an.cycles)
    with pytest.raises(DerivationError):
        rs.apply(step.target, step.production)


def test_cannot_expand_twice(fig2):
    g, _, an = fig2
    rs = start_run(g, an.cycles)
    rs.apply("S:1", 1)
    with pytest.raises(DerivationError):
        rs.apply("S:1", 1)
    with pytest.raises(DerivationError):
        rs.start()


def test_items_keep_ids_and_endpoints_advance(fig2):
    g, _, an = fig2
    rs = start_run(g, an.cycles)
    assert [i.name for i in rs.items] == ["d1", "d2", "d3", "d4", "d5"]
    first = rs.items[0].dst
    rs.apply("S:1", 1)
    assert rs.items[0].dst_anchor == first
    assert rs.nodes[rs.items[0].dst[0]].module == "a"
    assert len(rs.items) == 5 + 10


def test_default_view_projects_everything(fig2, fig2_run):
    g, deps, _ = fig2
    pr = fig2_run.project(default_view(g, deps))
    assert set(pr.items) == {i.id for i in fig2_run.items}
    pending = {fig2_run.nodes[i].module for i in fig2_run.pending}
    assert set(pr.modules.values()) <= g.atomics | pending


def test_hidden_expansions_disappear(fig2, fig2_views, fig2_run):
    u2 = fig2_views[1]
    pr = fig2_run.project(u2)
    assert set(pr.modules.values()) <= {"a", "b", "c", "d", "e", "C"}
    assert len(pr.items) < len(fig2_run.items)
    # the top-level items survive any view
    assert {1, 2, 3, 4, 5} <= set(pr.items)


def _tree_depth(rs):
    return max(len(n.path) for n in rs.nodes)


@given(st.integers(0, 2**31), st.integers(1, 5), st.integers(1, 3), st.integers(20, 400))
@settings(max_examples=25, deadline=None)
def test_depth_bound_and_replay(seed, depth, rlen, n):
    g, deps = gen_grammar(GenParams(5, 3, depth, rlen, seed))
    an = analyze(g, deps)
    out = gen_run(g, an.cycles, n, seed)
    rs = replay(g, an.cycles, out.steps)
    assert rs.depth == _tree_depth(rs) <= 2 * len(g.composites)
    assert len(rs.items) == out.items
    for node in rs.nodes:
        if node.parent is not None:
            assert node.path == rs.nodes[node.parent].path + (node.label,)
    for it in rs.items:
        for end in (it.src, it.dst):
            if end is not None and rs.nodes[end[0]].module in g.atomics:
                assert rs.nodes[end[0]].kind != RECURSIVE_NODE
