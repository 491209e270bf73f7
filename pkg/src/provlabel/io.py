"""JSON file formats for grammars, views and derivation logs.

Grammar file::

    {
      "modules": [{"name": "S", "inputs": 2, "outputs": 3, "kind": "composite"}, ...],
      "start": "S",
      "productions": [
        {"lhs": "S",
         "occurrences": ["a", "b", "A"],
         "edges": [[["a", 1, 1], ["b", 1, 1]], ...],
         "initial_inputs": [["a", 1, 1], ...],
         "final_outputs": [["A", 1, 2], ...],
         "input_map": [2, 1]}            # optional, lhs input x -> initial_inputs[map[x-1]]
      ],
      "dependencies": {"a": [[1, 1], [1, 2]], ...}
    }

Port references are ``[module, ordinal, port]``: the ordinal counts
occurrences of that module name inside the rhs, both 1-based.
Dependencies list the true ``[input, output]`` pairs of each matrix.

View file: ``{"expandable": [...], "dependencies": {...}}`` with the same
matrix encoding.

:func:`dumps_canonical` prints nested containers one element per line and
keeps lists of scalars inline, so canonical files round-trip byte for byte.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

from .matrix import BoolMatrix
from .model import (
    ATOMIC,
    COMPOSITE,
    IN,
    OUT,
    GrammarError,
    ModuleDecl,
    PortRef,
    Production,
    SimpleWorkflow,
    View,
    WorkflowGrammar,
)


class FormatError(GrammarError):
    pass


# canonical json --------------------------------------------------------------


def dumps_canonical(obj: Any, indent: int = 2) -> str:
    return _dump(obj, 0, indent) + "\n"


def _scalar(x: Any) -> bool:
    return not isinstance(x, (list, tuple, dict))


def _flat(x: Any) -> bool:
    """Scalars, or short lists of scalars / lists of scalars."""
    if _scalar(x):
        return True
    if isinstance(x, dict):
        return False
    return all(_scalar(v) or (isinstance(v, (list, tuple)) and all(_scalar(u) for u in v)) for v in x)


def _dump(obj: Any, level: int, indent: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [f"{pad}{json.dumps(str(k))}: {_dump(v, level + 1, indent)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(parts) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if _flat(obj):
            return json.dumps(obj, separators=(", ", ": "))
        parts = [pad + _dump(v, level + 1, indent) for v in obj]
        return "[\n" + ",\n".join(parts) + "\n" + end + "]"
    return json.dumps(obj)


# matrices ---------------------------------------------------------------------


def matrix_from_pairs(name: str, decl: ModuleDecl, pairs: Any) -> BoolMatrix:
    try:
        return BoolMatrix.from_pairs(decl.n_inputs, decl.n_outputs, [tuple(p) for p in pairs])
    except (TypeError, ValueError) as exc:
        raise FormatError(f"dependencies of {name!r}: {exc}") from None


def assignment_to_json(a: Mapping[str, BoolMatrix], order: list[str]) -> dict:
    return {m: a[m].pairs() for m in order if m in a}


# grammar ----------------------------------------------------------------------


def _ref_to_json(w: SimpleWorkflow, ref: PortRef) -> list:
    name = w.occurrences[ref.occurrence - 1]
    ordinal = w.occurrences[: ref.occurrence].count(name)
    return [name, ordinal, ref.port]


def _ref_from_json(occ: list[str], raw: Any, side: str, where: str) -> PortRef:
    try:
        name, ordinal, port = raw
        ordinal, port = int(ordinal), int(port)
    except (TypeError, ValueError):
        raise FormatError(f"{where}: bad port reference {raw!r}") from None
    seen = 0
    for idx, m in enumerate(occ, start=1):
        if m == name:
            seen += 1
            if seen == ordinal:
                return PortRef(idx, side, port)
    raise FormatError(f"{where}: no occurrence {name!r} #{ordinal}")


def grammar_from_json(doc: Mapping[str, Any]) -> tuple[WorkflowGrammar, dict[str, BoolMatrix]]:
    try:
        mods = tuple(
            ModuleDecl(str(m["name"]), int(m["inputs"]), int(m["outputs"]), str(m.get("kind", ATOMIC)))
            for m in doc["modules"]
        )
        start = str(doc["start"])
        raw_prods = doc["productions"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed grammar document: {exc}") from None
    prods = []
    for k, rp in enumerate(raw_prods, start=1):
        where = f"production {k}"
        try:
            occ = [str(m) for m in rp["occurrences"]]
            edges = tuple(
                (_ref_from_json(occ, a, OUT, where), _ref_from_json(occ, b, IN, where)) for a, b in rp.get("edges", [])
            )
            ins = tuple(_ref_from_json(occ, r, IN, where) for r in rp.get("initial_inputs", []))
            outs = tuple(_ref_from_json(occ, r, OUT, where) for r in rp.get("final_outputs", []))
            imap = tuple(int(x) for x in rp["input_map"]) if "input_map" in rp else None
            omap = tuple(int(x) for x in rp["output_map"]) if "output_map" in rp else None
            prods.append(Production(k, str(rp["lhs"]), SimpleWorkflow(tuple(occ), edges, ins, outs), imap, omap))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{where}: {exc}") from None
    g = WorkflowGrammar(mods, start, tuple(prods))
    deps = {}
    decls = {m.name: m for m in mods}
    for name, pairs in (doc.get("dependencies") or {}).items():
        if name not in decls:
            raise FormatError(f"dependencies for unknown module {name!r}")
        deps[name] = matrix_from_pairs(name, decls[name], pairs)
    return g, deps


def grammar_to_json(g: WorkflowGrammar, deps: Mapping[str, BoolMatrix] | None = None) -> dict:
    prods = []
    for p in g.productions:
        w = p.rhs
        rec: dict[str, Any] = {
            "lhs": p.lhs,
            "occurrences": list(w.occurrences),
            "edges": [[_ref_to_json(w, a), _ref_to_json(w, b)] for a, b in w.edges],
            "initial_inputs": [_ref_to_json(w, r) for r in w.initial_inputs],
            "final_outputs": [_ref_to_json(w, r) for r in w.final_outputs],
        }
        if p.input_map is not None:
            rec["input_map"] = list(p.input_map)
        if p.output_map is not None:
            rec["output_map"] = list(p.output_map)
        prods.append(rec)
    doc: dict[str, Any] = {
        "modules": [
            {"name": m.name, "inputs": m.n_inputs, "outputs": m.n_outputs, "kind": m.kind} for m in g.modules
        ],
        "start": g.start,
        "productions": prods,
    }
    if deps is not None:
        doc["dependencies"] = assignment_to_json(deps, [m.name for m in g.modules])
    return doc


def load_grammar(path: str | Path) -> tuple[WorkflowGrammar, dict[str, BoolMatrix]]:
    return grammar_from_json(_load(path))


def save_grammar(path: str | Path, g: WorkflowGrammar, deps: Mapping[str, BoolMatrix] | None = None) -> None:
    Path(path).write_text(dumps_canonical(grammar_to_json(g, deps)))


# views --------------------------------------------------------------------------


def view_from_json(doc: Mapping[str, Any], g: WorkflowGrammar) -> View:
    try:
        keep = frozenset(str(m) for m in doc["expandable"])
        raw = doc.get("dependencies") or {}
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed view document: {exc}") from None
    deps = {}
    for name, pairs in raw.items():
        if name not in g.module:
            raise FormatError(f"view dependencies for unknown module {name!r}")
        deps[name] = matrix_from_pairs(name, g.module[name], pairs)
    return View(keep, deps)


def view_to_json(v: View, g: WorkflowGrammar) -> dict:
    names = [m.name for m in g.modules]
    return {
        "expandable": [m for m in names if m in v.expandable],
        "dependencies": assignment_to_json(v.assignment, names),
    }


def load_view(path: str | Path, g: WorkflowGrammar) -> View:
    return view_from_json(_load(path), g)


def save_view(path: str | Path, v: View, g: WorkflowGrammar) -> None:
    Path(path).write_text(dumps_canonical(view_to_json(v, g)))


def _load(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None
