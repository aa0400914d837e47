"""Command-line entry point ``dirval``."""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import dirsens, polygeom
from .coneduals import ConicPair, interior_check, linear_system_feasible, solve_pair
from .lagmult import InfeasibleMultiplierPoint, extremize_xgrad, licq, multiplier_set, nlp_labels, nnamcq, robinson_cq
from .report import (ProblemError, ProblemFile, load_problem, make_document, render_machine, render_table,
                     validate_document)

COMMANDS = ("analyze", "value", "multipliers", "cq", "rs", "cones", "duality", "validate")
EXIT_OK, EXIT_ERROR, EXIT_HYPOTHESIS = 0, 1, 2


class UsageError(ValueError):
    pass


def _parse_vector(text: str, n: int, flag: str) -> np.ndarray:
    try:
        vals = [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError as err:
        raise UsageError(f"{flag}: cannot parse {text!r}") from err
    if len(vals) != n:
        raise UsageError(f"{flag}: expected {n} comma-separated numbers, got {len(vals)}")
    return np.array(vals)


def parse_directions(text: str | None, n: int, default: np.ndarray) -> list[np.ndarray]:
    """';' separates directions, ',' separates components; for n = 1 commas also list directions."""
    if text is None:
        return [default]
    groups = [g for g in text.split(";") if g.strip()]
    if n == 1 and len(groups) == 1:
        groups = [g for g in groups[0].split(",") if g.strip()]
    return [_parse_vector(g, n, "--dir") for g in groups]


def _point(prob: ProblemFile, args) -> tuple[np.ndarray, np.ndarray]:
    prog = prob.program
    x = prob.xbar if args.at_x is None else _parse_vector(args.at_x, prog.n, "--at-x")
    if args.at_y is not None:
        return x, _parse_vector(args.at_y, prog.m, "--at-y")
    res = dirsens.solve_value(prog, x)
    if not res.solved:
        raise UsageError(f"F(x) is empty at x={x.tolist()}; pass --at-y explicitly")
    return x, res.points[0]


def pu_pair(prog, x, y, u) -> ConicPair:
    """The linearized program in direction u whose dual value is -min grad_x L u over Clarke multipliers."""
    z = polygeom.snap(prog.C, prog.P_value(x, y), prog.tol["feas"])
    return ConicPair(-prog.grad_y_f(x, y), float(-prog.grad_x_f(x, y) @ u), -prog.jac_y_P(x, y),
                     -prog.jac_x_P(x, y) @ u, polygeom.regular_tangent_cone(prog.C, z))


# ---------------------------------------------------------------- commands

def cmd_validate(prob: ProblemFile, args):
    return {"validate": {"valid": True, **prob.summary()}}, EXIT_OK


def cmd_value(prob: ProblemFile, args):
    x = prob.xbar if args.at_x is None else _parse_vector(args.at_x, prob.program.n, "--at-x")
    res = dirsens.solve_value(prob.program, x)
    return {"solve_value": res.to_dict()}, EXIT_OK


def cmd_multipliers(prob: ProblemFile, args):
    prog = prob.program
    x, y = _point(prob, args)
    out = {"point": {"x": x.tolist(), "y": y.tolist()}, "multiplier_set": {}, "extremize_xgrad": []}
    sets = {kind: multiplier_set(prog, x, y, kind) for kind in ("clarke", "limiting")}
    for kind, ms in sets.items():
        out["multiplier_set"][kind] = ms.to_dict()
        single = ms.singleton()
        if single is not None:
            out["multiplier_set"][kind]["nlp_labels"] = nlp_labels(prog, single)
    for u in parse_directions(args.dir, prog.n, prob.direction):
        ms = sets["clarke"]
        out["extremize_xgrad"].append({"direction": u.tolist(),
                                       "clarke": extremize_xgrad(ms, u).to_dict() if not ms.empty else None})
    return out, EXIT_OK


def cmd_cq(prob: ProblemFile, args):
    prog = prob.program
    x, y = _point(prob, args)
    return {
        "point": {"x": x.tolist(), "y": y.tolist()},
        "robinson_cq": robinson_cq(prog, x, y).to_dict(),
        "nnamcq": nnamcq(prog, x, y).to_dict(),
        "licq": licq(prog, x, y),
    }, EXIT_OK


def cmd_rs(prob: ProblemFile, args):
    prog = prob.program
    x, y = _point(prob, args)
    oracle = dirsens.ValueOracle(prog)
    suff, probe = [], []
    for u in parse_directions(args.dir, prog.n, prob.direction):
        suff.append({"direction": u.tolist(), **dirsens.rs_sufficient(prog, x, y, u, args.seed, oracle).to_dict()})
        probe.append({"direction": u.tolist(), **dirsens.rs_numeric_probe(prog, x, y, u, seed=args.seed).to_dict()})
    return {"point": {"x": x.tolist(), "y": y.tolist()}, "rs_sufficient": suff, "rs_numeric_probe": probe}, EXIT_OK


def cmd_cones(prob: ProblemFile, args):
    prog = prob.program
    x, y = _point(prob, args)
    z = polygeom.snap(prog.C, prog.P_value(x, y), prog.tol["feas"])
    dirs = []
    for u in parse_directions(args.dir, prog.n, prob.direction):
        d = prog.jac_x_P(x, y) @ u
        dirs.append({"direction": u.tolist(), "d": d.tolist(), "cone": polygeom.dir_normal_cone(prog.C, z, d).to_dict()})
    return {
        "point": {"x": x.tolist(), "y": y.tolist(), "P": z.tolist()},
        "tangent_cone": polygeom.tangent_cone(prog.C, z).to_dict(),
        "regular_tangent_cone": polygeom.regular_tangent_cone(prog.C, z).to_dict(),
        "normal_cone": polygeom.normal_cone(prog.C, z).to_dict(),
        "clarke_normal_cone": polygeom.clarke_normal_cone(prog.C, z).to_dict(),
        "dir_normal_cone": dirs,
        "enumerate_cells": [c.to_dict() for c in polygeom.enumerate_cells(prog.C, z)],
    }, EXIT_OK


def cmd_duality(prob: ProblemFile, args):
    prog = prob.program
    x, y = _point(prob, args)
    z = polygeom.snap(prog.C, prog.P_value(x, y), prog.tol["feas"])
    That = polygeom.regular_tangent_cone(prog.C, z)
    M = prog.jac_y_P(x, y)
    pairs, inter, systems = [], [], []
    for u in parse_directions(args.dir, prog.n, prob.direction):
        for sign, s in (("+", 1.0), ("-", -1.0)):
            sol = solve_pair(pu_pair(prog, x, y, s * u))
            pairs.append({"direction": u.tolist(), "sign": sign, "primal_value": sol.primal_value,
                          "dual_value": sol.dual_value, "gap": sol.gap, "statuses": list(sol.statuses),
                          "dual_point": sol.dual.x.tolist() if sol.dual.optimal else None})
            sysres = linear_system_feasible(M, That, s * (prog.jac_x_P(x, y) @ u))
            systems.append({"direction": u.tolist(), "sign": sign, "feasible": sysres.feasible,
                            "witness": sysres.witness.tolist() if sysres.witness is not None else None})
        res = interior_check(np.zeros(prog.p), M, That, prog.jac_x_P(x, y) @ u)
        inter.append({"direction": u.tolist(), "holds": res.holds, "margin": res.margin})
    return {"point": {"x": x.tolist(), "y": y.tolist()}, "solve_pair": pairs, "interior_check": inter,
            "linear_system_feasible": systems}, EXIT_OK


def cmd_analyze(prob: ProblemFile, args):
    prog = prob.program
    x = prob.xbar if args.at_x is None else _parse_vector(args.at_x, prog.n, "--at-x")
    oracle = dirsens.ValueOracle(prog)
    refs = {tuple(r["direction"]): r["value"] for r in prob.references.get("derivatives", [])}
    analyses, code = [], EXIT_OK
    for u in parse_directions(args.dir, prog.n, prob.direction):
        res = dirsens.analyze(prog, x, u, args.seed, oracle)
        ref = refs.get(tuple(float(v) for v in u))
        res["reference_derivative"] = ref
        verdict = res["differentiability_verdict"]
        if verdict["verdict"] == "Inconclusive" or verdict["numeric_cross_check"] is False:
            code = EXIT_HYPOTHESIS
        analyses.append(res)
    return {"analyses": analyses}, code


HANDLERS = {
    "analyze": cmd_analyze, "value": cmd_value, "multipliers": cmd_multipliers, "cq": cmd_cq,
    "rs": cmd_rs, "cones": cmd_cones, "duality": cmd_duality, "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dirval", description="Directional sensitivity of optimal value functions.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("file", help="problem file (path or bundled name such as example41.prob)")
    ap.add_argument("--dir", help="direction(s): components separated by ',', directions by ';'")
    ap.add_argument("--at-x", dest="at_x", help="parameter point (comma-separated)")
    ap.add_argument("--at-y", dest="at_y", help="decision point (comma-separated)")
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--format", choices=("table", "machine"), default="table")
    ap.add_argument("--out", help="write the report to this path instead of stdout")
    return ap


def run(argv: list[str] | None = None) -> tuple[dict, int]:
    args = build_parser().parse_args(argv)
    prob = None
    try:
        prob = load_problem(args.file)
        results, code = HANDLERS[args.command](prob, args)
    except ProblemError as err:
        for d in err.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        key = "validate" if args.command == "validate" else "error"
        results = {key: {"valid": False, "diagnostics": err.diagnostics}}
        code = EXIT_ERROR
    except (UsageError, InfeasibleMultiplierPoint, polygeom.InfeasiblePointError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        results, code = {"error": {"message": str(err)}}, EXIT_ERROR
    doc = make_document(args.command, prob, args.seed, results, code)
    validate_document(doc)
    text = render_machine(doc) if args.format == "machine" else render_table(doc)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return doc, code


def main(argv: list[str] | None = None) -> int:
    return run(argv)[1]


if __name__ == "__main__":
    sys.exit(main())
