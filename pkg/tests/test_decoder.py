import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from provlabel.analysis import analyze
from provlabel.decoder import NotVisibleError, decode, inputs_matrix, outputs_matrix, query_bound
from provlabel.io import load_grammar, load_view
from provlabel.labeling import label_run
from provlabel.matrix import product
from provlabel.model import default_view
from provlabel.oracle import oracle_graph
from provlabel.run import Step, replay
from provlabel.synthgen import GenParams, gen_grammar, gen_run, gen_safe_view
from provlabel.viewlabel import VARIANTS, label_view


def _check_all_pairs(g, an, rs, view, labels):
    pr = rs.project(view)
    og = oracle_graph(pr, g)
    vls = [label_view(g, an.cycles, view, v) for v in VARIANTS]
    bound = query_bound(len(view.expandable))
    checked = 0
    for a, b in itertools.product(sorted(pr.items), repeat=2):
        want = og.depends(a, b)
        for vl in vls:
            got = decode(labels[a], labels[b], vl)
            assert got.reachable == want, (vl.variant, a, b)
            if vl.variant == "query":
                assert got.matrices_multiplied <= bound
        checked += 1
    return checked


def test_fig1_hand_traced(fixtures_dir):
    g, deps = load_grammar(fixtures_dir / "fig1.json")
    an = analyze(g, deps)
    rs = replay(g, an.cycles, [Step("S:1", 1), Step("W:1", 2)])
    labels = label_run(rs)
    white = label_view(g, an.cycles, load_view(fixtures_dir / "fig1_view_white.json", g))
    grey = label_view(g, an.cycles, load_view(fixtures_dir / "fig1_view_grey.json", g))
    full = label_view(g, an.cycles, default_view(g, deps))
    # d1, d2 enter S; d3, d4 leave it; d5 runs M1 -> M2
    q = lambda a, b, vl: decode(labels[a], labels[b], vl).reachable  # noqa: E731
    assert q(1, 5, full) and not q(2, 5, full)
    assert q(1, 3, full) and q(2, 4, full) and not q(2, 3, full)
    assert q(5, 3, full) and not q(5, 4, full)
    assert [q(2, 3, white), q(2, 3, grey)] == [False, True]
    with pytest.raises(NotVisibleError):
        decode(labels[1], labels[5], white)


def test_fig2_all_pairs_both_views(fig2, fig2_views, fig2_run):
    g, _, an = fig2
    labels = label_run(fig2_run)
    total = sum(_check_all_pairs(g, an, fig2_run, v, labels) for v in fig2_views)
    assert total == 42 * 42 + len(fig2_run.project(fig2_views[1]).items) ** 2


def test_inputs_matrix_over_recursion(fig2, fig2_views):
    g, _, an = fig2
    for view in fig2_views[:1]:
        for variant in VARIANTS:
            vl = label_view(g, an.cycles, view, variant)
            t = vl.session()
            naive = product([t.I(2, 2), t.I(4, 2), t.I(2, 2), t.I(4, 2)])
            assert inputs_matrix((1, 1, 5), vl) == naive
            naive_out = product([t.O(2, 2), t.O(4, 2), t.O(2, 2)])
            assert outputs_matrix((1, 1, 4), vl) == naive_out
            assert inputs_matrix((1, 1, 1), vl).is_square()


def test_hidden_production_raises(fig2, fig2_views, fig2_run):
    g, _, an = fig2
    labels = label_run(fig2_run)
    vl = label_view(g, an.cycles, fig2_views[1])
    hidden = [i for i in labels if i not in fig2_run.project(fig2_views[1]).items]
    assert hidden
    with pytest.raises(NotVisibleError):
        decode(labels[1], labels[hidden[0]], vl)


def test_identical_items_reach_themselves(fig2, fig2_views, fig2_run):
    g, _, an = fig2
    labels = label_run(fig2_run)
    vl = label_view(g, an.cycles, fig2_views[0])
    assert decode(labels[7], labels[7], vl).matrices_multiplied == 0


@given(st.integers(0, 2**31), st.integers(1, 4), st.integers(1, 3), st.booleans())
@settings(max_examples=12, deadline=None)
def test_decode_matches_oracle_on_generated(seed, depth, rlen, grey):
    g, deps = gen_grammar(GenParams(4, 3, depth, rlen, seed))
    an = analyze(g, deps)
    rs = replay(g, an.cycles, gen_run(g, an.cycles, 60, seed).steps)
    labels = label_run(rs)
    view = gen_safe_view(g, deps, max(1, len(g.composites) // 2 + 1), grey, seed)
    _check_all_pairs(g, an, rs, view, labels)
    _check_all_pairs(g, an, rs, default_view(g, deps), labels)


@given(st.integers(0, 2**31), st.integers(2, 4))
@settings(max_examples=8, deadline=None)
def test_white_box_views_agree_with_default(seed, depth):
    g, deps = gen_grammar(GenParams(4, 3, depth, 2, seed))
    an = analyze(g, deps)
    rs = replay(g, an.cycles, gen_run(g, an.cycles, 80, seed).steps)
    labels = label_run(rs)
    full = label_view(g, an.cycles, default_view(g, deps))
    view = gen_safe_view(g, deps, len(g.composites) // 2 + 1, False, seed)
    coarse = label_view(g, an.cycles, view)
    vis = sorted(rs.project(view).items)
    for a, b in itertools.product(vis, repeat=2):
        assert decode(labels[a], labels[b], coarse).reachable == decode(labels[a], labels[b], full).reachable
