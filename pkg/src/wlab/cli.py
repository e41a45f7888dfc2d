"""Command-line interface: ``wlab <subcommand> ...``.

Exit codes: 0 success, 2 tolerance not met, 3 invalid input,
4 construction precondition failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import harness, quad
from .errors import ParseError, WlabError

log = logging.getLogger("wlab")


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _complexes(text):
    return [complex(t.replace(" ", "").replace("i", "j")) for t in text.split(",") if t.strip()]


def _surface(ident, mobius=None):
    from .mobius import parse_mobius, transform_surface
    from .surfaces import parse_surface_id

    S = parse_surface_id(ident)
    if mobius:
        S = transform_surface(parse_mobius(mobius), S)
    return S


def _emit(args, text):
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _report_csv(rep):
    rows = ["functional,value,error,evals"]
    for k in harness.FUNCTIONALS:
        q = getattr(rep, k)
        rows.append(f"{k},{harness.fmt(q.value)},{harness.fmt(q.error_estimate)},{q.evaluations}")
    for c in rep.checks:
        rows.append(f"check:{c.name},{harness.fmt(c.residual)},{harness.fmt(c.budget)},{int(c.passed)}")
    return "\n".join(rows)


def cmd_energy(args):
    S = _surface(args.surface, args.mobius)
    rep = harness.energy_report(S, args.tol)
    _emit(args, rep.to_json() if args.format == "json" else _report_csv(rep))
    return 0 if rep.ok else 2


def cmd_gauss_bonnet(args):
    S = _surface(args.surface, args.mobius)
    if not S.closed:
        raise ValueError(f"{S.name} is not closed; Gauss–Bonnet needs a two-chart sphere")
    chi = args.chi if args.chi is not None else S.euler_char
    orders = _floats(args.branch_orders) if args.branch_orders else None
    rep = harness.energy_report(S, args.tol, checks=False)
    gb = harness.gauss_bonnet_check(S, rep, chi, orders)
    rep.checks = [gb.residual1, gb.residual2]
    if args.format == "json":
        d = rep.to_dict()
        d["expected_totK"] = gb.expected_totK
        _emit(args, json.dumps(d, indent=2, sort_keys=True))
    else:
        _emit(args, _report_csv(rep))
    return 0 if gb.passed and not rep.flagged else 2


def cmd_sweep(args):
    table = harness.sweep(args.construction, _floats(args.rhos), args.tol, m=args.m, delta=args.delta)
    _emit(args, table.to_json() if args.format == "json" else table.to_csv())
    ok = all(table.monotone_steps("W")) and all(r.ok for r in table.reports)
    return 0 if ok else 2


def cmd_weierstrass(args):
    from .geometry import conformal_factor, fundamental_forms
    from .surfaces import halton_disk
    from .weierstrass import (WeierstrassData, involution_check, period_check, weierstrass_forms,
                              weierstrass_immersion)

    try:
        d = WeierstrassData.from_strings(args.g, args.eta, _complexes(args.punctures) if args.punctures else (),
                                         complex(args.basepoint.replace("i", "j")), args.involution)
    except ParseError as exc:
        log.error("%s\n  %s\n  %s^", exc, exc.source, " " * exc.position)
        raise
    forms = weierstrass_forms(d)
    periods = {str(p): [period_check(phi, p, 0.5, mode="real") for phi in forms] for p in d.punctures}
    S = weierstrass_immersion(d, check_periods=False)
    pts = halton_disk(512, 2.0)
    pts = pts[np.hypot(pts[:, 0], pts[:, 1]) > 0.2]
    j = S.jet(pts)
    H = np.linalg.norm(fundamental_forms(j).H, axis=-1)
    out = {
        "g": args.g,
        "eta": args.eta,
        "periods": {k: [[v.real, v.imag] for v in vs] for k, vs in periods.items()},
        "max_abs_H": float(np.max(H)),
        "max_conformality_residual": float(np.max(conformal_factor(j)[1])),
    }
    if d.involution:
        out["involution_deviation"] = involution_check(d)
    if args.energies:
        res = quad.integrate_surface(S, ("willmore", "a2", "gauss"), tol=args.tol)
        out["functionals"] = {k: r.to_dict() for k, r in zip(("W", "a2", "totK"), res)}
        if d.involution:
            out["energy_convention"] = "orientable double cover (not halved)"
    text = json.dumps(out, indent=2, sort_keys=True)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text + "\n")
    _emit(args, text)
    return 0


def cmd_blowdown(args):
    from .weierstrass import meeks_triple_plane

    S = _surface(args.surface, args.mobius)
    if args.model == "meeks":
        model, power = meeks_triple_plane, 3
    else:
        name, _, m = args.model.partition(":")
        if name != "plane":
            raise ValueError(f"unknown blow-down model {args.model!r}")
        power = int(m)
        model = harness.branched_plane_model(power, S.ambient_dim)
    if args.power is not None:
        power = args.power
    table = harness.blow_down_check(S, _floats(args.rhos), model, power)
    _emit(args, json.dumps(table.to_dict(), indent=2))
    return 0


def cmd_confcompare(args):
    S1 = _surface(args.first)
    S2 = _surface(args.second)
    kind, _, vals = args.region.partition(":")
    region = (kind,) + tuple(_floats(vals))
    sup = harness.conformal_factor_compare(S1, S2, region, args.samples)
    _emit(args, json.dumps({"first": S1.name, "second": S2.name, "region": list(region), "sup_du": sup}))
    return 0


def cmd_export(args):
    S = _surface(args.surface, args.mobius)
    n1, _, n2 = args.grid.partition("x")
    nv, nf = harness.export_mesh(S, args.out or f"{S.name.replace(':', '_')}.obj", (int(n1), int(n2 or n1)),
                                 args.project, args.radius)
    sys.stderr.write(f"wrote {nv} vertices, {nf} faces\n")
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-8, help="relative quadrature tolerance")
    common.add_argument("--threads", type=int, default=1, help="evaluation pool size")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=None,
                        help="output format (default: csv for sweep, json otherwise)")
    common.add_argument("--max-depth", type=int, default=None, help="cap on cell refinement depth")
    common.add_argument("--rings", type=int, default=None, help="cap on outward dyadic rings")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="wlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("energy", parents=[common], help="W, ∫|A|², ∫|A⁰|², ∫K of a surface")
    e.add_argument("surface")
    e.add_argument("--mobius", help='e.g. "invert:0,0,0,4;r=1|dilate:2"')
    e.set_defaults(func=cmd_energy)

    g = sub.add_parser("gauss-bonnet", parents=[common], help="Gauss–Bonnet residuals of a closed surface")
    g.add_argument("surface")
    g.add_argument("--mobius")
    g.add_argument("--chi", type=int)
    g.add_argument("--branch-orders", help="comma-separated branch orders (default: declared ones)")
    g.set_defaults(func=cmd_gauss_bonnet)

    s = sub.add_parser("sweep", parents=[common], help="energies of a construction over a ρ list")
    s.add_argument("--construction", required=True,
                   help="chen-glue, enneper-glue, henneper-glue, *-model, *-bar, meeks-boy")
    s.add_argument("--m", type=int)
    s.add_argument("--rhos", required=True)
    s.add_argument("--delta", type=float, help="meeks-boy transition radius (default √ρ)")
    s.set_defaults(func=cmd_sweep, default_format="csv")

    w = sub.add_parser("weierstrass", parents=[common], help="check and integrate Weierstrass data")
    w.add_argument("--g", required=True)
    w.add_argument("--eta", required=True)
    w.add_argument("--punctures", default="0")
    w.add_argument("--basepoint", default="1")
    w.add_argument("--involution", choices=("minus-inv-conj", "identity"))
    w.add_argument("--report")
    w.add_argument("--energies", action="store_true", help="also integrate W, ∫|A|², ∫K")
    w.set_defaults(func=cmd_weierstrass)

    b = sub.add_parser("blowdown", parents=[common], help="blow-down deviations ρ^k S(z/ρ) vs a model")
    b.add_argument("surface")
    b.add_argument("--mobius")
    b.add_argument("--rhos", default="0.1,0.05,0.025")
    b.add_argument("--model", default="meeks", help="meeks or plane:m")
    b.add_argument("--power", type=int)
    b.set_defaults(func=cmd_blowdown)

    c = sub.add_parser("confcompare", parents=[common], help="sup |u₁ − u₂| of conformal factors")
    c.add_argument("first")
    c.add_argument("second")
    c.add_argument("--region", default="annulus:0.1,0.5", help="disk:R or annulus:a,b")
    c.add_argument("--samples", type=int, default=4096)
    c.set_defaults(func=cmd_confcompare)

    x = sub.add_parser("export", parents=[common], help="OBJ mesh on a polar parameter grid")
    x.add_argument("surface")
    x.add_argument("--mobius")
    x.add_argument("--grid", default="16x16")
    x.add_argument("--project", choices=("drop", "stereographic"), default="drop")
    x.add_argument("--radius", type=float)
    x.set_defaults(func=cmd_export)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.format is None:
        args.format = getattr(args, "default_format", "json")
    # caps are module-level, so put them back for callers that run main() in-process
    saved = (quad.MAX_DEPTH, quad.MAX_RINGS, quad._THREADS)
    quad.configure(max_depth=args.max_depth, max_rings=args.rings, threads=args.threads)
    try:
        return args.func(args)
    except WlabError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code
    except (ValueError, KeyError) as exc:
        log.error("invalid input: %s", exc)
        return 3
    except OSError as exc:
        log.error("%s", exc)
        return 3
    finally:
        quad.configure(*saved)


if __name__ == "__main__":
    sys.exit(main())
