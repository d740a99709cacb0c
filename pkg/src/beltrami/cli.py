"""Command-line front end. Exit status is 0 exactly when every check passes."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import expr as ex
from .catalog import EXAMPLE_IDS, get_example
from .fields import divergence, sample_points
from .flow import StepControl, invariant_drift, trace_streamline
from .frames import (build_beltrami, check_construction_conditions, planar_frame,
                     ZeroCrossingError)
from .io import (FieldSpec, SpecError, dump_field_spec, load_field_spec, parse_box, sample_grid,
                 spec_from_entry, split_top_level, write_csv, write_vtk)
from .verify import beltrami_residual, eigenvalue_residual


def _vec(text: str) -> np.ndarray:
    parts = split_top_level(text)
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated values, got {text!r}")
    try:
        return np.array([ex.eval_point(ex.parse(p, ()), (0.0, 0.0, 0.0)) for p in parts])
    except ex.ExprSyntaxError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _box(text: str):
    try:
        return parse_box(text)
    except (ValueError, ex.ExprSyntaxError) as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _emit(args, payload: dict, text: str):
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2, default=float))
    else:
        print(text)


def _divergence_residual(w, expected, pts):
    d = divergence(w)(pts, check=False)
    e = expected(pts, check=False)
    return float(np.max(np.abs(d - e) / (1.0 + np.abs(e))))


def _verify_field(w, pts, tol, hhat=None, div=None):
    rep = beltrami_residual(w, pts, tol, expected_hhat=hhat)
    ok = rep.passed
    payload = rep.to_dict()
    lines = str(rep).splitlines()
    if div is not None:
        r = _divergence_residual(w, div, pts)
        payload["div_expected_residual"] = r
        ok = ok and r <= tol
        lines.insert(-1, f"div vs expected (rel)   {r:.3e}")
    payload["passed"] = ok
    return ok, payload, "\n".join(lines)


def cmd_verify(args) -> int:
    spec = load_field_spec(args.spec)
    w = spec.vector_field()
    pts = sample_points(args.points, args.box or spec.box, w.guard, args.seed)
    ok, payload, text = _verify_field(w, pts, args.tol, spec.expected_field("hhat"), spec.expected_field("div"))
    payload["name"] = spec.name
    _emit(args, payload, f"{spec.name}: {len(pts)} points\n{text}")
    return 0 if ok else 1


def cmd_construct(args) -> int:
    spec = load_field_spec(args.spec)
    t = spec.triple()
    c = build_beltrami(t)
    w, factor = (c.w_star, c.factor_star) if args.star else (c.w, c.factor)
    pts = t.samples(args.points, args.seed)
    r = eigenvalue_residual(w, factor, pts)
    out = FieldSpec(spec.name + ("_star" if args.star else ""), "vector_field",
                    dict(zip(("w_x", "w_y", "w_z"), w.components)), w.guard,
                    {"hhat": factor.expr}, spec.box)
    try:
        text = dump_field_spec(out)
    except SpecError:
        text = "\n".join(f"{k} = <tabulated>" for k in ("w_x", "w_y", "w_z")) + "\n"
    ok = r <= args.tol
    _emit(args, {"name": out.name, "sigma": c.sigma, "eigen_residual": r, "passed": ok,
                 "spec": text},
          f"{text}\n; sigma = {c.sigma:+d}, max |curl w - factor w| / |w| = {r:.3e} "
          f"({'PASS' if ok else 'FAIL'})")
    return 0 if ok else 1


def cmd_planar(args) -> int:
    try:
        t = planar_frame(args.n, args.g, args.G, interval=args.interval,
                         on_sign_change="allow" if args.allow_sign_change else "raise",
                         box=args.box or ((-1.0, 1.0),) * 3)
    except ZeroCrossingError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    rep = check_construction_conditions(t, t.alpha)
    lines = [f"e1 = {np.round(t.notes['e1'], 15).tolist()}", f"e2 = {np.round(t.notes['e2'], 15).tolist()}",
             f"ell   = {ex.to_string(t.ell.expr)}", f"psi   = {ex.to_string(t.psi.expr)}"]
    theta = ex.to_string(t.theta.expr) if ex.is_grammar_expr(t.theta.expr) else "<tabulated antiderivative>"
    lines.append(f"theta = {theta}")
    if t.notes["sign_changes"]:
        lines.append(f"profile changes sign near s = {t.notes['sign_changes'][:3]}")
    lines.append(str(rep))
    _emit(args, {"ell": ex.to_string(t.ell.expr), "psi": ex.to_string(t.psi.expr), "theta": theta,
                 "residuals": rep.residuals, "passed": rep.ok}, "\n".join(lines))
    return 0 if rep.ok else 1


def cmd_trace(args) -> int:
    spec = load_field_spec(args.spec)
    w = spec.vector_field()
    t = spec.triple() if spec.kind != "vector_field" else None
    ctrl = StepControl(rtol=args.rtol, atol=args.atol, max_step=args.max_step)
    s = trace_streamline(w, args.x0, args.t_end, ctrl, triple=t)
    payload = {"status": s.status, "t_final": s.times[-1], "x_final": [float(v) for v in s.points[-1]], **s.step_stats}
    ok = True
    if t is not None:
        d = invariant_drift(s)
        L0 = abs(s.L_theta_values[0])
        ok = d["theta_drift"] <= args.drift_tol and d["L_drift"] <= args.drift_tol * (1.0 + L0)
        payload.update(d)
    payload["passed"] = ok
    if args.csv:
        write_csv(s, args.csv)
    text = "\n".join(f"{k:16s}{v}" for k, v in payload.items())
    _emit(args, payload, text)
    return 0 if ok else 1


def cmd_sample(args) -> int:
    spec = load_field_spec(args.spec)
    w = spec.vector_field()
    t = spec.triple() if spec.kind != "vector_field" else None
    extras = [e for e in (args.extras.split(",") if args.extras else []) if e]
    res = [int(r) for r in args.res.split(",")]
    g = sample_grid(w, args.box or spec.box, res[0] if len(res) == 1 else res, extras, triple=t)
    if args.vtk:
        write_vtk(g, args.vtk)
    if args.csv:
        write_csv(g, args.csv)
    n_masked = int(g.mask.sum())
    _emit(args, {"nodes": g.n_nodes, "masked": n_masked, "res": list(g.res)},
          f"{g.n_nodes} nodes, {n_masked} masked")
    return 0


def _check_entry(e, n, seed, tol):
    pts = e.samples(n, seed)
    return _verify_field(e.field, pts, tol, e.expected_hhat, e.expected_div)


def cmd_catalog(args) -> int:
    if args.action == "list":
        for i in EXAMPLE_IDS:
            print(f"{i:5s} {get_example(i).notes}")
        return 0
    if args.action == "show":
        if not args.id:
            print("error: catalog show needs an id", file=sys.stderr)
            return 2
        e = get_example(args.id)
        print(dump_field_spec(spec_from_entry(e)), end="")
        if e.triple is not None:
            t = e.triple
            print(f"; triple: ell = {ex.to_string(t.ell.expr)}; psi = {ex.to_string(t.psi.expr)}; "
                  f"theta = {ex.to_string(t.theta.expr)}")
        print(f"; {e.notes}")
        return 0
    status = 0
    results = {}
    for i in EXAMPLE_IDS:
        ok, payload, _ = _check_entry(get_example(i), args.points, args.seed, args.tol)
        results[i] = payload
        status |= 0 if ok else 1
        if not args.json:
            print(f"{i:5s} {'PASS' if ok else 'FAIL'}  align {payload['max_alignment_residual']:.2e}  "
                  f"hhat {payload['hhat_expected_residual']:.2e}  div {payload['div_expected_residual']:.2e}")
    if args.json:
        print(json.dumps(results, indent=2, default=float))
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="beltrami", description="Construct, verify and trace Beltrami fields.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, points=200):
        sp.add_argument("--points", type=int, default=points)
        sp.add_argument("--seed", type=int, default=None, help="sampling seed (default: $BELTRAMI_SEED)")
        sp.add_argument("--tol", type=float, default=1e-10)
        sp.add_argument("--json", action="store_true", help="machine-readable output")

    sp = sub.add_parser("verify", help="check a field spec for the Beltrami property")
    sp.add_argument("spec")
    sp.add_argument("--box", type=_box, help="x0,x1,y0,y1,z0,z1")
    common(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("construct", help="build w (or w*) from a coordinate triple spec")
    sp.add_argument("spec")
    sp.add_argument("--star", action="store_true")
    common(sp, 64)
    sp.set_defaults(func=cmd_construct)

    sp = sub.add_parser("planar", help="triple for a factor depending on n . x")
    sp.add_argument("--n", type=_vec, required=True, help="unit normal, e.g. 1/sqrt(2),1/sqrt(2),0")
    sp.add_argument("--g", required=True, help="profile g(s)")
    sp.add_argument("--G", default=None, help="closed-form antiderivative of g")
    sp.add_argument("--interval", type=lambda s: tuple(float(v) for v in s.split(",")), default=(-2.0, 2.0))
    sp.add_argument("--allow-sign-change", action="store_true")
    sp.add_argument("--box", type=_box)
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_planar)

    sp = sub.add_parser("trace", help="integrate a streamline and report invariant drift")
    sp.add_argument("spec")
    sp.add_argument("--x0", type=_vec, required=True)
    sp.add_argument("--t-end", type=float, required=True)
    sp.add_argument("--rtol", type=float, default=1e-10)
    sp.add_argument("--atol", type=float, default=1e-10)
    sp.add_argument("--max-step", type=float, default=float("inf"))
    sp.add_argument("--drift-tol", type=float, default=1e-6)
    sp.add_argument("--csv")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_trace)

    sp = sub.add_parser("sample", help="evaluate a field on a grid")
    sp.add_argument("spec")
    sp.add_argument("--box", type=_box)
    sp.add_argument("--res", default="17", help="n or nx,ny,nz")
    sp.add_argument("--extras", default="", help="comma list from hhat, theta, L_theta")
    sp.add_argument("--vtk")
    sp.add_argument("--csv")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("catalog", help="built-in fields")
    sp.add_argument("action", choices=("list", "show", "verify-all"))
    sp.add_argument("id", nargs="?")
    common(sp)
    sp.set_defaults(func=cmd_catalog)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SpecError, ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
