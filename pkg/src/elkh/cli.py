"""Command line: ``elkh sat|valid|check|trace|fuzz``.

Exit codes: 10 satisfiable / not valid, 20 unsatisfiable / valid,
2 usage or input error, 3 node budget exhausted, 1 fuzz violations.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .engine import BudgetExceeded, DEFAULT_BUDGET, assert_bounds, decide, to_dot
from .extract import extract
from .formula import KnowHow, ParseError, complement, parse, pretty
from .kripke import (
    ModelError, dump_model, evaluate, kh_classes, kh_witness, load_model, model_to_dict,
    model_to_dot, truth_set,
)
from .suite import check_formula, random_corpus

EXIT_SAT, EXIT_UNSAT, EXIT_USAGE, EXIT_BUDGET, EXIT_FAIL = 10, 20, 2, 3, 1


class _InputError(Exception):
    pass


def _formula_arg(args):
    if args.file:
        try:
            text = Path(args.file).read_text(encoding="utf-8")
        except OSError as exc:
            raise _InputError(f"cannot read {args.file}: {exc.strerror}") from None
    elif args.formula is not None:
        text = args.formula
    else:
        raise _InputError("a formula argument or -f FILE is required")
    try:
        return parse(text.strip())
    except ParseError as exc:
        raise _InputError(f"parse error: {exc}") from None


def _write(path, text):
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise _InputError(f"cannot write {path}: {exc.strerror}") from None


def _emit(args, report: dict, order: list):
    if args.json:
        print(json.dumps(report, ensure_ascii=False, sort_keys=False))
        return
    print(report["result"])
    for key in order:
        if key in report:
            value = report[key]
            if isinstance(value, bool):
                value = "ok" if value else "FAILED"
            print(f"{key}: {value}")


def _solve(args, phi, negate: bool) -> int:
    target = complement(phi) if negate else phi
    verdict = decide(target, budget=args.budget, know_first=not args.literal_order)
    st = verdict.stats
    if negate:
        result = "VALID" if verdict.closed else "NOT-VALID"
    else:
        result = "UNSAT" if verdict.closed else "SAT"
    report = {"result": result, "formula": pretty(phi), "m": st.m, "nodes": st.nodes,
              "max_depth": st.max_depth, "bounds": assert_bounds(st)}
    if args.stats:
        report.update(max_children=st.max_children, peak_path=st.peak_path)
    order = ["formula", "m", "nodes", "max_depth", "max_children", "peak_path", "bounds"]
    if verdict.open:
        induced = extract(verdict)
        report["designated"] = induced.designated
        report["worlds"] = len(induced.model.worlds)
        order += ["designated", "worlds"]
        if args.model:
            _write(args.model, dump_model(induced.model, induced.designated))
            report["model"] = args.model
            order.append("model")
        elif negate:
            report["countermodel"] = model_to_dict(induced.model, induced.designated)
        if getattr(args, "model_dot", None):
            _write(args.model_dot, model_to_dot(induced.model, induced.designated))
    _emit(args, report, order)
    if not args.json and "countermodel" in report:
        print("countermodel:")
        print(json.dumps(report["countermodel"], indent=2, ensure_ascii=False))
    return EXIT_UNSAT if verdict.closed else EXIT_SAT


def cmd_sat(args) -> int:
    return _solve(args, _formula_arg(args), negate=False)


def cmd_valid(args) -> int:
    return _solve(args, _formula_arg(args), negate=True)


def cmd_check(args) -> int:
    try:
        model, designated = load_model(args.model)
    except OSError as exc:
        raise _InputError(f"cannot read {args.model}: {exc.strerror}") from None
    except ModelError as exc:
        raise _InputError(f"invalid model: {exc}") from None
    world = args.world or designated
    if world is None:
        raise _InputError("no --world given and the model has no designated world")
    if args.formula_opt is not None:
        args.formula = args.formula_opt
    phi = _formula_arg(args)
    try:
        value = evaluate(model, world, phi)
        witness = _witness(model, world, phi) if args.witness else None
    except ModelError as exc:
        raise _InputError(str(exc)) from None
    if args.json:
        out = {"world": world, "formula": pretty(phi), "value": value}
        if args.witness:
            out["witness"] = witness
        print(json.dumps(out, ensure_ascii=False))
    else:
        print("true" if value else "false")
        if args.witness:
            if witness is None:
                print("witness: none")
            else:
                for cls, action in witness.items():
                    print(f"witness: {cls} -> {action}")
    return 0


def _witness(model, world, phi):
    """Class-to-action map of a winning strategy when ``phi`` is a true ``Kh`` formula."""
    if not isinstance(phi, KnowHow):
        raise _InputError("--witness needs a formula of the form Kh[i] psi")
    goal = truth_set(model, phi.sub)
    strategy = kh_witness(model, phi.agent, goal)
    if model.class_of(phi.agent, world) not in kh_classes(model, phi.agent, goal):
        return None
    return {"{" + ",".join(model.sort_worlds(c)) + "}": a
            for c, a in sorted(strategy.assignment.items(), key=lambda kv: model.sort_worlds(kv[0]))}


def cmd_trace(args) -> int:
    phi = _formula_arg(args)
    verdict = decide(phi, budget=args.budget, record=not args.open_only,
                     know_first=not args.literal_order)
    if args.open_only and verdict.closed:
        raise _InputError("the tableau is closed; there is no open subtree to draw")
    _write(args.dot, to_dot(verdict, open_only=args.open_only))
    st = verdict.stats
    print("UNSAT" if verdict.closed else "SAT")
    print(f"nodes: {st.nodes}")
    print(f"dot: {args.dot}")
    return EXIT_UNSAT if verdict.closed else EXIT_SAT


def cmd_fuzz(args) -> int:
    agents = [a for a in args.agents.split(",") if a]
    props = [p for p in args.props.split(",") if p]
    corpus = random_corpus(args.seed, args.count, args.size, agents, props)
    max_worlds = None if args.max_worlds == 0 else args.max_worlds
    failures = 0
    lines = []
    for k, phi in enumerate(corpus):
        rep = check_formula(phi, max_worlds=max_worlds, budget=args.budget)
        failures += not rep.ok
        lines.append({"case": k, "formula": pretty(phi), "closed": rep.closed,
                      "oracle_found": rep.oracle_found, "problems": rep.problems})
        if not args.json and (args.verbose or not rep.ok):
            print(f"{k:5d} {rep.line()}")
    sat = sum(not r["closed"] for r in lines)
    if args.json:
        print(json.dumps({"seed": args.seed, "count": args.count, "sat": sat,
                          "failures": failures, "cases": lines}))
    else:
        print(f"fuzz seed={args.seed} count={args.count} size={args.size}: "
              f"{sat} sat, {len(lines) - sat} unsat, {failures} violations")
    return EXIT_FAIL if failures else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="elkh", description="Tableau solver for knowing that / knowing how.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, formula=True):
        if formula:
            sp.add_argument("formula", nargs="?", help="formula text")
            sp.add_argument("-f", "--file", help="read the formula from a UTF-8 file")
        sp.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="node budget (default %(default)s)")
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        if formula:
            sp.add_argument("--literal-order", action="store_true",
                            help="explore ~K before K when splitting a Kh formula")

    for name, fn, text in (("sat", cmd_sat, "decide satisfiability"),
                           ("valid", cmd_valid, "decide validity")):
        sp = sub.add_parser(name, help=text)
        common(sp)
        sp.add_argument("--model", help="write the countermodel / model as JSON")
        sp.add_argument("--model-dot", help="write the countermodel as DOT")
        sp.add_argument("--stats", action="store_true", help="print search statistics")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("check", help="evaluate a formula in a JSON model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--world", help="world id (default: the model's designated world)")
    sp.add_argument("--formula", dest="formula_opt")
    sp.add_argument("-f", "--file")
    sp.add_argument("--json", action="store_true")
    sp.add_argument("--witness", action="store_true", help="print a winning strategy for a Kh formula")
    sp.set_defaults(func=cmd_check, formula=None)

    sp = sub.add_parser("trace", help="write the explored tableau as DOT")
    common(sp)
    sp.add_argument("--dot", required=True)
    sp.add_argument("--open-only", action="store_true", help="draw only the open complete subtree")
    sp.set_defaults(func=cmd_trace)

    sp = sub.add_parser("fuzz", help="random agreement tests against the oracle")
    common(sp, formula=False)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--count", type=int, default=100)
    sp.add_argument("--size", type=int, default=8)
    sp.add_argument("--agents", default="i,j")
    sp.add_argument("--props", default="p,q")
    sp.add_argument("--max-worlds", type=int, default=3, help="oracle bound; 0 disables the oracle")
    sp.add_argument("-v", "--verbose", action="store_true")
    sp.set_defaults(func=cmd_fuzz)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _InputError as exc:
        print(f"elkh: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceeded as exc:
        print(f"elkh: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
