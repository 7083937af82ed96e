"""Command-line front end: ``bqpmc <command> [options]``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import families as fam
from . import hull, oracle, pooling
from . import separators as sep
from .core import (BqpError, Instance, Point, build_instance, load_instance, load_pool, save_instance,
                   save_pool)
from .simplex import mccormick_relaxation, solve_lp


def parse_sizes(text: str) -> list:
    """``"5x5"`` means five subsets of five nodes, ``"1,2,3"`` lists sizes."""
    text = text.strip()
    if "x" in text:
        k, n = text.split("x")
        sizes = [int(n)] * int(k)
    else:
        sizes = [int(t) for t in text.split(",")]
    if not sizes or any(s <= 0 for s in sizes):
        raise ValueError(f"bad subset sizes {text!r}")
    return sizes


def parse_shape(text: str) -> tuple:
    """``"5-5-10"`` (subsets-size-|Y|) or ``"10-*-25"`` for sizes 1..10."""
    k, n, y = text.split("-")
    sizes = list(range(1, int(k) + 1)) if n == "*" else [int(n)] * int(k)
    return sizes, int(y)


def parse_seeds(text: str) -> list:
    out = []
    for part in text.split(","):
        if "-" in part:
            a, b = part.split("-")
            out += list(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


def make_instance(sizes, y_count: int, seed: int | None = None, density: float = 1.0,
                  name: str = "") -> Instance:
    if density >= 1.0:
        return build_instance(sizes, y_count, "complete", name=name)
    rng = np.random.default_rng(np.random.SeedSequence(seed or 0))
    n_x = sum(sizes)
    edges = [(i, j) for i in range(n_x) for j in range(y_count) if rng.random() < density]
    return build_instance(sizes, y_count, edges, name=name)


def read_objective(spec: str, inst: Instance) -> dict:
    """``uniform:lo:hi:seed`` or a JSON file mapping variable names to coefficients."""
    if spec.startswith("uniform:"):
        _, lo, hi, seed = spec.split(":")
        return sep.random_objective(inst, int(seed), float(lo), float(hi))
    data = json.loads(Path(spec).read_text())
    return {inst.parse_var(k): Fraction(v) if isinstance(v, str) else v for k, v in data.items()}


def read_point(path, inst: Instance) -> Point:
    data = json.loads(Path(path).read_text())
    exact = any(isinstance(v, str) for v in data.values())
    vals = {inst.parse_var(k): Fraction(v) if exact else float(v) for k, v in data.items()}
    return Point.from_mapping(inst, vals, exact=exact)


def write_point(p: Point, path) -> None:
    out = {}
    for k, v in enumerate(p.inst.variables):
        a = p.values[k]
        out[p.inst.var_name(v)] = str(a) if isinstance(a, Fraction) else float(a)
    Path(path).write_text(json.dumps(out, indent=1) + "\n")


# ---- commands -----------------------------------------------------------------------

def cmd_gen(args) -> int:
    sizes = parse_sizes(args.subsets)
    name = args.name or f"{len(sizes)}-{args.subsets}-{args.y}"
    inst = make_instance(sizes, args.y, args.seed, args.density, name)
    save_instance(inst, args.out)
    print(f"{args.out}: {len(sizes)} subsets, |X|={inst.n_x}, |Y|={inst.y_count}, {inst.dim} variables")
    return 0


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    obj = read_objective(args.objective, inst)
    prob = mccormick_relaxation(inst, obj)
    extra = []
    for c in sep.expand_classes(args.classes.split(",")) if args.classes else []:
        if c == "rlt":
            extra += fam.rlt_inequalities(inst)
    if args.pool:
        extra += load_pool(args.pool, inst)
    prob = prob.with_constraints(extra)
    res = solve_lp(prob, exact=args.exact, backend="simplex" if args.exact else args.backend)
    print(f"status {res.status}")
    if res.status == "optimal":
        print(f"lp_value {res.value}")
        if args.out:
            write_point(res.point, args.out)
    return 0 if res.status == "optimal" else 1


def cmd_separate(args) -> int:
    inst = load_instance(args.instance)
    p = read_point(args.point, inst)
    cuts = []
    for c in sep.expand_classes(args.classes.split(",")):
        batch = sep.separate_class(inst, p, c, args.tol)
        print(f"{c}: {len(batch)} cuts, max violation {max(batch.violations, default=0):.6g}")
        cuts += batch.cuts
    if args.out:
        save_pool(cuts, inst, args.out)
    return 0


def _loop_instances(args) -> tuple:
    if args.instance:
        inst = load_instance(args.instance)
        return inst, inst.name or Path(args.instance).stem
    sizes, y = parse_shape(args.shape)
    return build_instance(sizes, y, "complete", name=args.shape), args.shape


def cmd_loop(args) -> int:
    inst, name = _loop_instances(args)
    classes = [c for c in args.classes.split(",") if c and c != "lp"]
    reports = []
    for seed in parse_seeds(args.seeds):
        obj = sep.random_objective(inst, seed, args.low, args.high)
        cfg = sep.LoopConfig(tol=args.tol, max_rounds=args.rounds, name=name, seed=seed)
        rep = sep.cutting_loop(inst, obj, classes, cfg)
        reports.append(rep)
        counts = " ".join(f"{k}={v}" for k, v in rep.cut_counts().items())
        print(f"seed {seed}: lp {rep.lp_value:.6f} ip {rep.ip_value:.6f} gap {rep.gap:.2f}% "
              f"rounds {len(rep.lp_values) - 1} {rep.status} {counts}".rstrip())
    gaps = [r.gap for r in reports]
    print(f"average gap {np.mean(gaps):.2f}% over {len(gaps)} seeds "
          f"({sum(1 for g in gaps if round(g, 2) == 0)} at 0.00%)")
    if args.out:
        write_loop_csv(reports, args.out)
    return 0


def write_loop_csv(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=sep.CSV_COLUMNS)
        w.writeheader()
        for rep in reports:
            w.writerows(rep.rows())
        if reports:
            first = reports[0]
            w.writerow({"instance": first.instance, "seed": "mean",
                        "classes": "+".join(first.classes) or "lp", "round": "final", "class": "total",
                        "cuts_added": f"{np.mean([len(r.cuts) for r in reports]):.1f}",
                        "lp_value": f"{np.mean([r.lp_value for r in reports]):.10g}",
                        "ip_value": f"{np.mean([r.ip_value for r in reports]):.10g}",
                        "gap_percent": f"{np.mean([r.gap for r in reports]):.6f}"})


def cmd_report(args) -> int:
    """Averages table (gap and cut counts per class list) from loop CSV files."""
    rows = []
    for path in args.csv:
        with open(path) as fh:
            rows += list(csv.DictReader(fh))
    table: dict = {}
    for r in rows:
        if r["seed"] == "mean":
            continue
        key = (r["instance"], r["classes"])
        table.setdefault(key, {}).setdefault(r["seed"], []).append(r)
    print(f"{'instance':<12} {'classes':<28} {'seeds':>5} {'gap%':>8} {'cuts':>9}")
    for (name, cls), seeds in sorted(table.items()):
        finals, cuts = [], []
        for recs in seeds.values():
            last = max(int(r["round"]) for r in recs)
            finals.append(float([r for r in recs if int(r["round"]) == last][0]["gap_percent"]))
            cuts.append(sum(int(r["cuts_added"]) for r in recs if int(r["round"]) > 0))
        print(f"{name:<12} {cls:<28} {len(finals):>5} {np.mean(finals):>8.2f} {np.mean(cuts):>9.1f}")
    return 0


def cmd_verify(args) -> int:
    inst = load_instance(args.instance)
    if args.pool:
        rows = load_pool(args.pool, inst)
    else:
        rows = {"rlt": fam.rlt_inequalities, "basic": fam.basic_inequalities}[args.family](inst)
    bad = 0
    for c in rows:
        if args.mode == "valid":
            ok, w = oracle.is_valid(inst, c)
            bad += not ok
            print(f"{'valid' if ok else 'INVALID'} {c!r}")
        else:
            ok, _ = oracle.is_valid(inst, c)
            if not ok:
                bad += 1
                print(f"INVALID {c!r}")
                continue
            r = oracle.facet_rank(inst, c)
            tag = "facet" if r == inst.dim - 1 else "face"
            print(f"rank {r} of {inst.dim - 1} {tag} {c!r}")
    return 1 if bad else 0


def cmd_hull(args) -> int:
    inst = load_instance(args.instance)
    if args.point:
        h = read_point(args.point, inst)
    else:
        h = hull.random_h_point(inst, np.random.default_rng(np.random.SeedSequence(args.seed)))
        if args.point_out:
            write_point(hull.exact_point(h), args.point_out)
    try:
        cert = hull.certify_membership(inst, h)
    except hull.NotInHull as e:
        print(f"refused: violated row {e.row!r} by {e.violation}")
        return 2
    ok, why = hull.verify_certificate(inst, h, cert)
    if args.out:
        Path(args.out).write_text(cert.to_text(inst))
    print("verified" if ok else f"certificate fails {why}")
    if args.lp_check:
        print("convex-combination LP: " + ("member" if hull.in_convex_hull(inst, h) else "not a member"))
    return 0 if ok else 1


def cmd_pool(args) -> int:
    if args.instance:
        pi = pooling.load_pooling(args.instance)
    elif args.random is not None:
        pi = pooling.random_pooling_instance(np.random.default_rng(np.random.SeedSequence(args.random)))
    else:
        pi = pooling.small_instance()
    build = pooling.build_qcuts if args.formulation == "qcuts" else pooling.build_q
    m = build(pi)
    kinds = dict.fromkeys([r.kind for r in m.rows] + (["bilinear"] if m.bilinear else []))
    print(" ".join(f"{k}:{m.count(k)}" for k in kinds) + f" variables:{len(m.variables)}")
    if args.out:
        pooling.export_lp(m, args.out)
    if args.relax:
        print(f"relaxation value {pooling.relaxation_value(m):.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bqpmc", description="Cutting planes for the bipartite boolean "
                                 "quadric polytope with multiple-choice constraints.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write an instance file")
    g.add_argument("--subsets", required=True, help='"5x5" or "1,2,3"')
    g.add_argument("--y", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--density", type=float, default=1.0, help="edge probability; 1 gives a complete graph")
    g.add_argument("--name", default="")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve the McCormick relaxation")
    s.add_argument("--instance", required=True)
    s.add_argument("--objective", required=True, help="uniform:lo:hi:seed or a JSON file")
    s.add_argument("--classes", default="", help="rlt adds all RLT rows")
    s.add_argument("--pool", help="extra constraint pool file")
    s.add_argument("--exact", action="store_true")
    s.add_argument("--backend", choices=["highs", "simplex"], default="highs")
    s.add_argument("--out", help="write the optimal point as JSON")
    s.set_defaults(func=cmd_solve)

    p = sub.add_parser("separate", help="separate a point")
    p.add_argument("--instance", required=True)
    p.add_argument("--point", required=True)
    p.add_argument("--classes", default="all")
    p.add_argument("--tol", type=float, default=sep.TOL)
    p.add_argument("--out", help="write the cuts as a pool file")
    p.set_defaults(func=cmd_separate)

    lp = sub.add_parser("loop", help="cutting-plane loop over seeded objectives")
    grp = lp.add_mutually_exclusive_group(required=True)
    grp.add_argument("--instance")
    grp.add_argument("--shape", help='"5-5-10" or "10-*-25"')
    lp.add_argument("--classes", default="cc", help=f"comma list of {','.join(sep.CLASSES)}, all or lp")
    lp.add_argument("--seeds", default="0-9")
    lp.add_argument("--low", type=float, default=-10.0)
    lp.add_argument("--high", type=float, default=10.0)
    lp.add_argument("--tol", type=float, default=sep.TOL)
    lp.add_argument("--rounds", type=int, default=200)
    lp.add_argument("--out", help="CSV report")
    lp.set_defaults(func=cmd_loop)

    v = sub.add_parser("verify", help="validity or facet rank of constraints")
    v.add_argument("--instance", required=True)
    v.add_argument("--mode", choices=["valid", "facet"], default="valid")
    v.add_argument("--pool")
    v.add_argument("--family", choices=["rlt", "basic"], default="rlt")
    v.set_defaults(func=cmd_verify)

    h = sub.add_parser("hull", help="interval-set membership certificate")
    h.add_argument("--instance", required=True)
    h.add_argument("--point")
    h.add_argument("--seed", type=int, default=0, help="random point of the basic+RLT polytope")
    h.add_argument("--point-out")
    h.add_argument("--certify", action="store_true", help="accepted for clarity; certification always runs")
    h.add_argument("--lp-check", action="store_true")
    h.add_argument("--out", help="certificate text file")
    h.set_defaults(func=cmd_hull)

    po = sub.add_parser("pool", help="pooling model export")
    po.add_argument("--instance", help="pooling instance text file")
    po.add_argument("--random", type=int, help="seed of a random pooling instance")
    po.add_argument("--formulation", choices=["q", "qcuts"], default="qcuts")
    po.add_argument("--relax", action="store_true", help="solve the LP without bilinear rows")
    po.add_argument("--out", help="LP file")
    po.set_defaults(func=cmd_pool)

    r = sub.add_parser("report", help="averages table from loop CSV files")
    r.add_argument("csv", nargs="+")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BqpError, ValueError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
