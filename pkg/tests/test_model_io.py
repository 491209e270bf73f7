import copy
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from provlabel.io import (
    FormatError,
    dumps_canonical,
    grammar_from_json,
    grammar_to_json,
    load_grammar,
    load_view,
    save_grammar,
    save_view,
    view_to_json,
)
from provlabel.model import (
    default_view,
    derivable_modules,
    restrict_grammar,
    topological_order,
    validate_grammar,
)
from provlabel.synthgen import GenParams, gen_grammar


def _doc(fixtures_dir, name):
    return json.loads((fixtures_dir / name).read_text())


@pytest.mark.parametrize("name", ["fig1.json", "fig2.json", "fig6.json", "fig8.json"])
def test_fixtures_validate(fixtures_dir, name):
    g, deps = load_grammar(fixtures_dir / name)
    report = validate_grammar(g, deps)
    assert report.ok, report


@pytest.mark.parametrize("name", ["fig1.json", "fig2.json", "fig6.json", "fig8.json"])
def test_canonical_round_trip_is_byte_exact(fixtures_dir, tmp_path, name):
    text = (fixtures_dir / name).read_text()
    g, deps = grammar_from_json(json.loads(text))
    assert dumps_canonical(grammar_to_json(g, deps)) == text
    save_grammar(tmp_path / "g.json", g, deps)
    assert (tmp_path / "g.json").read_text() == text


def test_view_round_trip(fixtures_dir, fig2, tmp_path):
    g = fig2[0]
    v = load_view(fixtures_dir / "fig2_view_u2.json", g)
    save_view(tmp_path / "v.json", v, g)
    again = load_view(tmp_path / "v.json", g)
    assert again == v
    assert view_to_json(again, g) == view_to_json(v, g)


def test_dangling_port_reported(fixtures_dir):
    doc = _doc(fixtures_dir, "fig1.json")
    p = next(p for p in doc["productions"] if p["edges"])
    p["edges"] = []
    g, deps = grammar_from_json(doc)
    assert "dangling-port" in validate_grammar(g, deps).codes()


def test_arity_mismatch_reported(fixtures_dir):
    doc = _doc(fixtures_dir, "fig6.json")
    doc["productions"][0]["initial_inputs"].pop()
    g, deps = grammar_from_json(doc)
    codes = validate_grammar(g, deps).codes()
    assert "arity-mismatch" in codes


def test_bad_lambda_reported(fixtures_dir):
    doc = _doc(fixtures_dir, "fig6.json")
    doc["dependencies"]["a"] = [[1, 1]]
    g, deps = grammar_from_json(doc)
    assert "dependency-coverage" in validate_grammar(g, deps).codes()
    del doc["dependencies"]["a"]
    g, deps = grammar_from_json(doc)
    assert "missing-dependency" in validate_grammar(g, deps).codes()


def test_unproductive_and_unreachable(fixtures_dir):
    doc = _doc(fixtures_dir, "fig8.json")
    doc["productions"] = [p for p in doc["productions"] if p["occurrences"] != ["k"]]
    g, deps = grammar_from_json(doc)
    codes = validate_grammar(g, deps).codes()
    assert "unproductive" in codes and "unreachable" in codes


def test_unknown_reference_is_a_format_error(fixtures_dir):
    doc = _doc(fixtures_dir, "fig6.json")
    doc["productions"][0]["initial_inputs"][0] = ["zz", 1, 1]
    with pytest.raises(FormatError):
        grammar_from_json(doc)
    with pytest.raises(FormatError):
        grammar_from_json({"start": "S"})


def test_topological_order_prefers_smallest_index(fig2):
    g = fig2[0]
    # a, b, A, C, c, d with c waiting on A and C
    assert topological_order(g.production[1].rhs) == [1, 2, 3, 4, 5, 6]
    assert topological_order(g.production[4].rhs) == [1, 2, 3, 4, 5]


def test_restrict_grammar_keeps_ids(fig2):
    g = fig2[0]
    sub = restrict_grammar(g, {"S", "A", "B"})
    assert [p.id for p in sub.productions] == [1, 2, 3, 4]
    assert "C" in sub.atomics and "D" not in sub.module
    assert derivable_modules(sub) == set(sub.module)


def test_restrict_to_everything_is_identity(fig2):
    g, deps, _ = fig2
    sub = restrict_grammar(g, default_view(g, deps).expandable)
    assert grammar_to_json(sub) == grammar_to_json(g)


@given(st.integers(1, 6), st.integers(1, 3), st.integers(1, 4), st.integers(0, 2**32))
@settings(max_examples=15, deadline=None)
def test_generated_grammars_round_trip(size, depth, degree, seed):
    g, deps = gen_grammar(GenParams(size, degree, depth, 2, seed))
    doc = grammar_to_json(g, deps)
    g2, deps2 = grammar_from_json(copy.deepcopy(doc))
    assert grammar_to_json(g2, deps2) == doc
    assert validate_grammar(g2, deps2).ok
