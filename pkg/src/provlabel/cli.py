"""Command-line interface.

Every command prints one JSON document on stdout.  Exit codes: 0 success,
2 bad input (missing or malformed files, unknown ids, replay errors), 3 the
grammar or view is unsafe or not strictly linear-recursive.  ``query`` uses
0 reachable / 1 not reachable / 2 error, and ``oracle-check`` exits 1 when
it finds a mismatch.
"""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path
from typing import Sequence

from .analysis import UnproductiveError, UnsafeError, analyze_recursion, compute_full_assignment
from .bench import DEFAULT_SIZES, BenchConfig, run_bench, threads_from_env, write_tables
from .decoder import NotVisibleError, decode
from .io import FormatError, dumps_canonical, load_grammar, load_view, save_grammar, save_view
from .labeling import LabelDecodeError, derive_labeled, encode_label, load_labels, save_labels
from .model import GrammarError, default_view, validate_grammar
from .oracle import oracle_graph
from .run import Step, read_log, replay, write_log
from .synthgen import GenParams, gen_grammar, gen_run, gen_safe_view
from .viewlabel import VARIANTS, label_view, load_view_label, save_view_label, variant_name

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_INPUT = 2
EXIT_UNSAFE = 3


class CommandError(Exception):
    def __init__(self, code: int, message: str, payload: dict | None = None):
        super().__init__(message)
        self.code = code
        self.payload = payload or {}


def _emit(doc: dict) -> None:
    sys.stdout.write(dumps_canonical(doc))


def _matrices(a) -> dict:
    return {m: mat.to_lists() for m, mat in sorted(a.items())}


def _grammar(args):
    if not args.grammar:
        raise CommandError(EXIT_INPUT, "--grammar is required")
    return load_grammar(args.grammar)


def _labelable(g):
    rec = analyze_recursion(g)
    if not rec.strictly_linear:
        raise CommandError(
            EXIT_UNSAFE,
            f"grammar is {rec.recursion_class}, labeling needs strictly linear recursion",
            {"recursion_class": rec.recursion_class},
        )
    return rec.cycles


def _view(args, g, deps):
    return load_view(args.view, g) if args.view else default_view(g, deps)


# commands ------------------------------------------------------------------------


def cmd_validate(args) -> int:
    g, deps = _grammar(args)
    report = validate_grammar(g, deps)
    doc = {"ok": report.ok, "issues": [{"code": i.code, "message": i.message} for i in report]}
    if report.ok and args.view:
        try:
            compute_full_assignment(g, deps)
            from .model import check_view

            check_view(g, load_view(args.view, g))
            doc["view_ok"] = True
        except UnsafeError as exc:
            doc["view_ok"] = False
            doc["witness"] = exc.witness.to_json()
            _emit(doc)
            return EXIT_UNSAFE
    _emit(doc)
    return EXIT_OK if report.ok else EXIT_INPUT


def cmd_analyze(args) -> int:
    g, deps = _grammar(args)
    rec = analyze_recursion(g)
    doc: dict = {"recursion_class": rec.recursion_class, "cycles": rec.cycles.to_json()}
    try:
        star = compute_full_assignment(g, deps)
        doc["safe"] = True
        doc["lambda_star"] = _matrices({m: star[m] for m in g.composites if m in star})
    except UnsafeError as exc:
        doc["safe"] = False
        doc["witness"] = exc.witness.to_json()
    _emit(doc)
    return EXIT_OK if doc["safe"] and rec.strictly_linear else EXIT_UNSAFE


def cmd_generate(args) -> int:
    params = GenParams(
        workflow_size=args.workflow_size,
        module_degree=args.module_degree,
        nesting_depth=args.nesting_depth,
        recursion_length=args.recursion_length,
        seed=args.seed,
    )
    g, deps = gen_grammar(params)
    cycles = _labelable(g)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_grammar(out / "grammar.json", g, deps)
    run = gen_run(g, cycles, args.size, args.seed)
    write_log(out / "run.jsonl", run.steps)
    size = len(g.composites) if args.view_size is None else args.view_size
    view = gen_safe_view(g, deps, size, args.grey, args.seed)
    save_view(out / "view.json", view, g)
    _emit(
        {
            "grammar": str(out / "grammar.json"),
            "log": str(out / "run.jsonl"),
            "view": str(out / "view.json"),
            "composites": len(g.composites),
            "productions": len(g.productions),
            "items": run.items,
            "reached_target": run.reached_target,
            "expandable": sorted(view.expandable),
        }
    )
    return EXIT_OK


def _parse_step(text: str) -> Step:
    target, sep, k = text.rpartition("=")
    if not sep or not target or not k.isdigit():
        raise CommandError(EXIT_INPUT, f"bad --step {text!r}, expected TARGET=PRODUCTION")
    return Step(target, int(k))


def cmd_derive(args) -> int:
    g, _ = _grammar(args)
    cycles = _labelable(g)
    if not args.log:
        raise CommandError(EXIT_INPUT, "--log is required")
    log = Path(args.log)
    if args.size is not None:
        steps = gen_run(g, cycles, args.size, args.seed).steps
    else:
        steps = read_log(log) if log.exists() else []
    steps += [_parse_step(s) for s in args.step or ()]
    rs = replay(g, cycles, steps)
    if args.size is not None or args.step:
        write_log(log, steps)
    _emit(
        {
            "log": str(log),
            "steps": len(rs.log),
            "items": len(rs.items),
            "pending": [rs.nodes[i].id for i in rs.pending],
            "depth": rs.depth,
            "depth_bound": 2 * len(g.composites),
        }
    )
    return EXIT_OK


def cmd_label_run(args) -> int:
    g, _ = _grammar(args)
    cycles = _labelable(g)
    if not args.log or not args.labels:
        raise CommandError(EXIT_INPUT, "--log and --labels are required")
    lr = derive_labeled(g, cycles, read_log(args.log))
    labels = lr.labels()
    save_labels(args.labels, labels)
    bits = [8 * len(encode_label(dl)) for dl in labels.values()]
    _emit(
        {
            "labels": args.labels,
            "items": len(labels),
            "max_label_bits": max(bits),
            "avg_label_bits": sum(bits) / len(bits),
        }
    )
    return EXIT_OK


def cmd_label_view(args) -> int:
    g, deps = _grammar(args)
    cycles = _labelable(g)
    if not args.out:
        raise CommandError(EXIT_INPUT, "--out is required")
    try:
        vl = label_view(g, cycles, _view(args, g, deps), args.variant)
    except UnsafeError as exc:
        raise CommandError(EXIT_UNSAFE, "view is unsafe", {"witness": exc.witness.to_json()}) from None
    save_view_label(args.out, vl)
    _emit({"view_label": args.out, "variant": vl.variant, "bytes": vl.byte_size()})
    return EXIT_OK


def _item_id(text: str) -> int:
    raw = text[1:] if text[:1] in ("d", "D") else text
    if not raw.isdigit():
        raise CommandError(EXIT_INPUT, f"bad data item id {text!r}")
    return int(raw)


def cmd_query(args) -> int:
    path = args.labels or args.run
    if not path or not args.view:
        raise CommandError(EXIT_INPUT, "--labels (or --run) and --view are required")
    labels = load_labels(path)
    grammar = load_grammar(args.grammar)[0] if args.grammar else None
    vl = load_view_label(args.view, grammar)
    a, b = _item_id(args.source), _item_id(args.target)
    for n in (a, b):
        if n not in labels:
            raise CommandError(EXIT_INPUT, f"no label for d{n}")
    verdict = decode(labels[a], labels[b], vl)
    _emit(
        {
            "from": f"d{a}",
            "to": f"d{b}",
            "reachable": verdict.reachable,
            "matrices_multiplied": verdict.matrices_multiplied,
        }
    )
    return EXIT_OK if verdict.reachable else EXIT_NEGATIVE


def cmd_oracle_check(args) -> int:
    g, deps = _grammar(args)
    cycles = _labelable(g)
    if not args.log:
        raise CommandError(EXIT_INPUT, "--log is required")
    view = _view(args, g, deps)
    try:
        vls = [label_view(g, cycles, view, v) for v in ([args.variant] if args.variant else VARIANTS)]
    except UnsafeError as exc:
        raise CommandError(EXIT_UNSAFE, "view is unsafe", {"witness": exc.witness.to_json()}) from None
    lr = derive_labeled(g, cycles, read_log(args.log))
    labels = lr.labels()
    pr = lr.run.project(view)
    og = oracle_graph(pr, g)
    visible = sorted(pr.items)
    if args.pairs is None:
        pairs = [(a, b) for a in visible for b in visible]
    else:
        rng = random.Random(args.seed)
        pairs = [(rng.choice(visible), rng.choice(visible)) for _ in range(args.pairs)]
    mismatches = []
    for a, b in pairs:
        expected = og.depends(a, b)
        for vl in vls:
            got = decode(labels[a], labels[b], vl).reachable
            if got != expected:
                mismatches.append({"from": f"d{a}", "to": f"d{b}", "variant": vl.variant, "decoded": got, "oracle": expected})
    _emit({"pairs": len(pairs), "variants": [vl.variant for vl in vls], "mismatches": mismatches})
    return EXIT_OK if not mismatches else EXIT_NEGATIVE


def _sizes(text: str) -> tuple[int, ...]:
    out = []
    for part in text.split(","):
        part = part.strip().lower()
        mult = 1000 if part.endswith("k") else 1
        digits = part[:-1] if mult > 1 else part
        if not digits.isdigit():
            raise argparse.ArgumentTypeError(f"bad size {part!r}")
        out.append(int(digits) * mult)
    return tuple(out)


def cmd_bench(args) -> int:
    cfg = BenchConfig(
        sizes=args.sizes,
        reps=args.reps,
        variants=(args.variant,) if args.variant else VARIANTS,
        seed=args.seed,
        query_samples=args.query_samples,
        sweep_n=args.sweep_n,
        threads=threads_from_env(),
    )
    tables = run_bench(cfg)
    paths = write_tables(args.out_dir, tables)
    _emit({"written": [str(p) for p in paths], "rows": {p.name: len(tables[p.name]) for p in paths}})
    return EXIT_OK


# parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="provlabel", description="View-adaptive provenance labeling for workflow runs.")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=fn)
        return p

    def variant(text: str) -> str:
        try:
            return variant_name(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    p = command("validate", cmd_validate, "check a grammar file (and optionally a view)")
    p.add_argument("--grammar")
    p.add_argument("--view")

    p = command("analyze", cmd_analyze, "recursion class, cycle table, safety and full assignment")
    p.add_argument("grammar_file", nargs="?")
    p.add_argument("--grammar")

    p = command("generate", cmd_generate, "write a synthetic grammar, run log and view")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workflow-size", type=int, default=40)
    p.add_argument("--module-degree", type=int, default=4)
    p.add_argument("--nesting-depth", type=int, default=4)
    p.add_argument("--recursion-length", type=int, default=2)
    p.add_argument("--size", type=int, default=1000, help="target data items of the run")
    p.add_argument("--view-size", type=int, help="expandable composites (default: all)")
    p.add_argument("--grey", action="store_true", help="add false-positive dependencies to the view")

    p = command("derive", cmd_derive, "replay, extend or randomly generate a derivation log")
    p.add_argument("--grammar")
    p.add_argument("--log")
    p.add_argument("--step", action="append", help="TARGET=PRODUCTION, appended to the log")
    p.add_argument("--size", type=int, help="generate a random run of about this many items")
    p.add_argument("--seed", type=int, default=1)

    p = command("label-run", cmd_label_run, "label every data item of a logged run")
    p.add_argument("--grammar")
    p.add_argument("--log")
    p.add_argument("--labels")

    p = command("label-view", cmd_label_view, "build a view label")
    p.add_argument("--grammar")
    p.add_argument("--view", help="view file (default: the grammar's own view)")
    p.add_argument("--variant", type=variant, default="default", help="default | space | query")
    p.add_argument("--out")

    p = command("query", cmd_query, "decide whether one data item depends on another")
    p.add_argument("--labels")
    p.add_argument("--run", help="alias of --labels")
    p.add_argument("--view", help="view label file")
    p.add_argument("--grammar", help="needed for space-variant view labels")
    p.add_argument("--from", dest="source", required=True)
    p.add_argument("--to", dest="target", required=True)

    p = command("oracle-check", cmd_oracle_check, "compare decoding against brute-force search")
    p.add_argument("--grammar")
    p.add_argument("--log")
    p.add_argument("--view")
    p.add_argument("--variant", type=variant, help="check one variant (default: all)")
    p.add_argument("--pairs", type=int, help="sample this many pairs instead of all")
    p.add_argument("--seed", type=int, default=1)

    p = command("bench", cmd_bench, "write benchmark CSV files")
    p.add_argument("--sizes", type=_sizes, default=DEFAULT_SIZES)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--variant", type=variant, help="time one variant (default: all)")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--query-samples", type=int, default=100_000)
    p.add_argument("--sweep-n", type=int, default=4000)
    p.add_argument("--out-dir", default="bench-out")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "grammar_file", None) and not args.grammar:
        args.grammar = args.grammar_file
    try:
        return args.func(args)
    except CommandError as exc:
        _emit({"error": str(exc), **exc.payload})
        return exc.code
    except (UnsafeError, UnproductiveError) as exc:
        _emit({"error": str(exc)})
        return EXIT_UNSAFE
    except (
        FormatError,
        GrammarError,
        LabelDecodeError,
        NotVisibleError,
        OSError,
        ValueError,
        KeyError,
    ) as exc:
        _emit({"error": f"{type(exc).__name__}: {exc}"})
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
