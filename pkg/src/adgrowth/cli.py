"""Command-line entry point.

Exit codes: 0 success, 2 usage, 3 resource cap, 4 solver cap, 5 verification failure.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import covers, dynamics, growth, partitions
from .amenability import amenability_pipeline, check_amenability, dump_witness, exact_witness, pipeline_partition
from .errors import (
    InvalidSpecError,
    PreconditionError,
    ResourceCapError,
    SolverCapError,
    StageError,
    VerificationError,
)
from .groupoids import (
    FiniteGroup,
    build_pair_groupoid,
    build_transformation_groupoid,
    dihedral_action,
    direct_product,
    groupoid_from_dict,
    groupoid_to_dict,
    regular_action,
    rotation_action,
    trivial_action,
)
from .spaces import (
    DEFAULT_POINT_CAP,
    GROUPS,
    entourage,
    gen_space,
    random_connected_graph,
    space_from_dict,
    space_to_dict,
)

EXIT_OK, EXIT_USAGE, EXIT_RESOURCE, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4, 5


class UsageError(Exception):
    pass


# --- argument parsing helpers -------------------------------------------------------------


def length_arg(text: str):
    """Exact non-negative length: integer or p/q."""
    try:
        v = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a length: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("lengths must be non-negative")
    return v.numerator if v.denominator == 1 else v


def budget_arg(text: str):
    return float("inf") if text in ("inf", "unbounded") else length_arg(text)


def r_range(text: str) -> list:
    """Either a single length or an integer range lo..hi."""
    if ".." in text:
        lo, _, hi = text.partition("..")
        try:
            a, b = int(lo), int(hi)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad range {text!r}") from None
        if a > b or a < 0:
            raise argparse.ArgumentTypeError(f"bad range {text!r}")
        return list(range(a, b + 1))
    return [length_arg(text)]


def int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from None


def window_arg(text: str) -> tuple:
    a, b = int_list(text)
    return (a, b)


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def load_groupoid_input(path: str):
    """A groupoid document, or a space document read as its pair groupoid."""
    doc = _read_json(path)
    if "arrows" in doc:
        G, ell = groupoid_from_dict(doc)
        if ell is None:
            raise UsageError(f"{path}: groupoid has no length array")
        return G, ell
    if "points" in doc:
        return build_pair_groupoid(space_from_dict(doc))
    raise UsageError(f"{path}: neither a space nor a groupoid document")


def parse_action(text: str):
    """rotation:n[:m] | dihedral:n | regular:<group>:<arg> | trivial:<group>:<arg>:<k>."""
    parts = text.split(":")
    try:
        kind = parts[0]
        if kind == "rotation":
            return rotation_action(int(parts[1]), int(parts[2]) if len(parts) > 2 else None)
        if kind == "dihedral":
            return dihedral_action(int(parts[1]))
        if kind in ("regular", "trivial"):
            gname = parts[1]
            if gname == "klein":
                spec = direct_product(GROUPS["cyclic"](2), GROUPS["cyclic"](2))
            else:
                spec = GROUPS[gname](int(parts[2]))
            grp = FiniteGroup.from_spec(spec)
            if kind == "regular":
                return regular_action(grp)
            return trivial_action(grp, range(int(parts[-1])))
    except (IndexError, KeyError, ValueError) as exc:
        raise UsageError(f"bad action spec {text!r}: {exc}") from None
    raise UsageError(f"unknown action kind {text!r}")


# --- commands -----------------------------------------------------------------------------


def cmd_space_gen(args) -> int:
    params: dict = {}
    meta: dict = {"kind": args.kind}
    if args.kind in ("path", "cycle"):
        if args.n is None:
            raise UsageError("--n is required")
        if args.n < 1:
            raise UsageError("--n must be >= 1")
        params["n"] = args.n
    elif args.kind == "grid":
        if not args.dims:
            raise UsageError("--dims is required")
        params["dims"] = args.dims
    elif args.kind == "cayley_ball":
        if args.group is None or args.radius is None:
            raise UsageError("--group and --radius are required")
        params.update(group=args.group, radius=args.radius)
    elif args.kind == "dirsum":
        if args.weights is None or args.radius is None:
            raise UsageError("--weights and --radius are required")
        params.update(weights=args.weights, radius=args.radius)
    if args.kind == "random":
        if args.n is None or args.n < 1:
            raise UsageError("--n >= 1 is required")
        if args.n > args.cap:
            raise ResourceCapError(f"{args.n} points exceeds cap {args.cap}")
        rng = random.Random(args.seed)
        sp = random_connected_graph(args.n, args.extra, rng)
        meta.update(n=args.n, extra=args.extra)
    else:
        sp = gen_space(args.kind, cap=args.cap, **params)
        meta.update({k: v for k, v in params.items()})
    meta["seed"] = args.seed
    doc = space_to_dict(sp)
    doc["meta"] = meta
    _emit(json.dumps(doc), args.output)
    return EXIT_OK


def _solve_one(task):
    """Worker for one (definition, R) pair; module level so process pools can pickle it."""
    defn, doc, R, D, m_max, cap = task
    sp = space_from_dict(doc)
    q = covers.BudgetedDimensionQuery(R, D, m_max)
    witness = None
    if defn == "ad":
        value = covers.solve_ad(sp, q, cap)
    elif defn == "rmult":
        value = covers.solve_rmult(sp, q, cap)
    elif defn == "families":
        value, witness = covers.solve_families(sp, q, cap)
    elif defn == "coarse":
        value = covers.solve_coarse(sp, entourage(sp, R), entourage(sp, D), m_max, cap)
        witness = covers.coarse_witness(sp, entourage(sp, R), entourage(sp, D), m_max, cap)
    else:
        value, witness = covers.greedy_families(sp, R, D)
    wdoc = covers.cover_to_dict(sp, witness) if witness is not None else None
    return R, value, wdoc


def cmd_ad(args) -> int:
    doc = _read_json(args.space)
    sp = space_from_dict(doc)
    doc = space_to_dict(sp)
    tasks = [(args.definition, doc, R, args.D, args.m_max, args.cap) for R in args.R]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_solve_one, tasks))
    else:
        results = [_solve_one(t) for t in tasks]
    if len(results) == 1:
        R, value, wdoc = results[0]
        out = {"definition": args.definition, "R": str(R), "D": str(args.D), "value": value if value is not None else "inf"}
        if wdoc is not None:
            out["witness"] = wdoc
        _emit(json.dumps(out), args.output)
    else:
        curve = growth.DimensionCurve.of({R: v for R, v, _ in results})
        _emit(growth.curve_to_csv(curve), args.output)
    return EXIT_OK


def cmd_dad(args) -> int:
    if args.what == "crosscheck-pair":
        sp = space_from_dict(_read_json(args.input))
        rep = dynamics.crosscheck_pair(sp, args.R, args.D, args.m_max)
    elif args.what == "crosscheck-action":
        act = parse_action(args.action)
        rep = dynamics.crosscheck_action(act, args.R, args.B, args.m_max)
    elif args.what == "action":
        act = parse_action(args.action)
        grp = act.group
        E = [g for g in grp.elements if grp.length[g] < args.R]
        res = dynamics.dad_action(act, E, args.B, args.m_max)
        _emit(json.dumps({"value": res.value if res.value is not None else "inf",
                          "cover": [sorted(map(repr, U)) for U in res.cover]}), args.output)
        return EXIT_OK
    else:
        G, ell = load_groupoid_input(args.input)
        K = dynamics.threshold_generators(G, ell, args.R)
        res = dynamics.dad_groupoid(G, ell, dynamics.DadQuery(K, args.B, args.m_max, args.orbit))
        _emit(json.dumps({"value": res.value if res.value is not None else "inf",
                          "cover": [sorted(map(repr, U)) for U in res.cover]}), args.output)
        return EXIT_OK
    _emit(rep.summary() + ("\n" + "\n".join(rep.problems) if rep.problems else ""), args.output)
    return EXIT_OK if rep.passed else EXIT_VERIFY


def cmd_growth(args) -> int:
    f = growth.curve_from_csv(Path(args.f).read_text())
    if args.what == "classify":
        _emit(str(growth.classify(f, margin=args.margin)), args.output)
        return EXIT_OK
    g = growth.curve_from_csv(Path(args.g).read_text())
    fw = growth.preceq_witness(f, g, args.kmax, args.window)
    bw = growth.preceq_witness(g, f, args.kmax, args.window)
    show = lambda w: "none" if w is None else f"k={w.k} window={w.window[0]}..{w.window[1]}"  # noqa: E731
    _emit(f"f<=g: {show(fw)}\ng<=f: {show(bw)}", args.output)
    return EXIT_OK


def cmd_pou(args) -> int:
    G, ell = load_groupoid_input(args.input)
    part = pipeline_partition(G, ell, args.R, args.eps, args.alpha, args.m_max, args.B)
    doc = partitions.pou_to_dict(part.pou)
    doc["report"] = part.report
    _emit(json.dumps(doc, default=str), args.output)
    return EXIT_OK if part.report["pou"]["passed"] else EXIT_VERIFY


def cmd_amen(args) -> int:
    G, ell = load_groupoid_input(args.input)
    if args.what == "exact":
        w = exact_witness(G)
        w.report = check_amenability(G, w, G.arrows, Fraction(args.eps))
        _emit(dump_witness(G, w), args.output)
        return EXIT_OK if w.report.passed else EXIT_VERIFY
    res = amenability_pipeline(G, ell, args.R, args.eps, args.alpha, args.m_max, args.B)
    _emit(dump_witness(G, res.witness, res.report), args.output)
    return EXIT_OK if res.passed else EXIT_VERIFY


def cmd_groupoid(args) -> int:
    if args.kind == "pair":
        G, ell = build_pair_groupoid(space_from_dict(_read_json(args.input)))
    else:
        G, ell = build_transformation_groupoid(parse_action(args.action))
    _emit(json.dumps(groupoid_to_dict(G, ell)), args.output)
    return EXIT_OK


# --- parser -------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adgrowth", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0, help="seed for randomised generators")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for multi-scale runs")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("space", help="generate metric spaces")
    spsub = sp.add_subparsers(dest="space_cmd", required=True)
    gen = spsub.add_parser("gen")
    gen.add_argument("kind", choices=["path", "cycle", "grid", "cayley_ball", "dirsum", "random"])
    gen.add_argument("--n", type=int)
    gen.add_argument("--dims", type=int_list)
    gen.add_argument("--group", help="cyclic:n | zk:rank | free:rank | dihedral:n")
    gen.add_argument("--radius", type=int)
    gen.add_argument("--weights", type=int_list)
    gen.add_argument("--extra", type=int, default=0, help="extra random edges (random kind)")
    gen.add_argument("--cap", type=int, default=DEFAULT_POINT_CAP)
    gen.add_argument("-o", "--output")
    gen.set_defaults(func=cmd_space_gen)

    ad = sub.add_parser("ad", help="budgeted asymptotic dimension of a space")
    ad.add_argument("space")
    ad.add_argument("--def", dest="definition", default="families",
                    choices=["ad", "rmult", "families", "coarse", "greedy"])
    ad.add_argument("--R", type=r_range, required=True)
    ad.add_argument("--D", type=length_arg, required=True)
    ad.add_argument("--m-max", type=int, default=8)
    ad.add_argument("--cap", type=int, default=covers.DEFAULT_SOLVER_CAP)
    ad.add_argument("-o", "--output")
    ad.set_defaults(func=cmd_ad)

    dad = sub.add_parser("dad", help="dynamic asymptotic dimension and cross-checks")
    dadsub = dad.add_subparsers(dest="what", required=True)
    for what in ("groupoid", "action", "crosscheck-action", "crosscheck-pair"):
        d = dadsub.add_parser(what)
        if what in ("groupoid", "crosscheck-pair"):
            d.add_argument("input")
        else:
            d.add_argument("--action", required=True,
                           help="rotation:n[:m] | dihedral:n | regular:G:a | trivial:G:a:k")
        d.add_argument("--R", type=length_arg, required=True)
        if what == "crosscheck-pair":
            d.add_argument("--D", type=length_arg, required=True)
        else:
            d.add_argument("--B", type=budget_arg, default=float("inf"))
        if what == "groupoid":
            d.add_argument("--orbit", action="store_true")
        d.add_argument("--m-max", type=int, default=8)
        d.add_argument("-o", "--output")
        d.set_defaults(func=cmd_dad)

    gr = sub.add_parser("growth", help="compare or classify dimension curves")
    grsub = gr.add_subparsers(dest="what", required=True)
    cmp_ = grsub.add_parser("compare")
    cmp_.add_argument("f")
    cmp_.add_argument("g")
    cmp_.add_argument("--kmax", type=int, default=5)
    cmp_.add_argument("--window", type=window_arg)
    cls = grsub.add_parser("classify")
    cls.add_argument("f")
    cls.add_argument("--margin", type=float, default=0.2)
    for c in (cmp_, cls):
        c.add_argument("-o", "--output")
        c.set_defaults(func=cmd_growth)

    for name, fn in (("pou", cmd_pou), ("amen", cmd_amen)):
        c = sub.add_parser(name)
        if name == "amen":
            c.add_argument("what", choices=["pipeline", "exact"])
        c.add_argument("input")
        c.add_argument("--R", type=length_arg, default=1)
        c.add_argument("--eps", type=length_arg, default=Fraction(1, 2))
        c.add_argument("--alpha", type=float, help="growth exponent; omit for the finite-dimension route")
        c.add_argument("--m-max", type=int)
        c.add_argument("--B", type=budget_arg, default=float("inf"))
        c.add_argument("-o", "--output")
        c.set_defaults(func=fn)

    gp = sub.add_parser("groupoid", help="build groupoid documents")
    gpsub = gp.add_subparsers(dest="kind", required=True)
    pr = gpsub.add_parser("pair")
    pr.add_argument("input")
    ac = gpsub.add_parser("action")
    ac.add_argument("--action", required=True)
    for c in (pr, ac):
        c.add_argument("-o", "--output")
        c.set_defaults(func=cmd_groupoid)
    return p


def _validate(args) -> None:
    if getattr(args, "m_max", None) is not None and args.m_max < 0:
        raise UsageError("--m-max must be non-negative")
    if args.command in ("pou", "amen") and getattr(args, "what", "pipeline") == "pipeline":
        if args.R <= 0 or args.eps <= 0:
            raise UsageError("--R and --eps must be positive")
        if args.alpha is not None and not 0 < args.alpha < 1:
            raise UsageError("--alpha must lie in (0, 1)")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _validate(args)
        return args.func(args)
    except (UsageError, InvalidSpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except SolverCapError as exc:
        print(f"solver cap: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (VerificationError, StageError, PreconditionError) as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
