"""Command-line surface: build families, verify identity suites, evolve the
closed ODE system, run the discrete bootstrap, and sweep parameters.

All reports are machine readable (JSON and CSV, rows sorted by suite, n,
identity).  Exit codes: 0 all pass, 1 a tolerance failed, 2 structural
error (singular matrices, divergent moments) with a diagnostic JSON on
stderr.  The environment variable MVOP_TOL_SCALE multiplies every
tolerance (CI slack, default 1).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import lax, mvop, special_family, systems, weight
from .errors import MvoplaxError
from .report import ResidualReport

SUITES = ("structural", "discrete", "continuous", "closed", "section-final")


def _load_spec(path: str) -> weight.WeightSpec:
    return weight.from_json(Path(path).read_text())


def _write(out_dir: str, name: str, text: str) -> Path:
    path = Path(out_dir) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def _structural_error(exc: MvoplaxError, out_dir: str) -> int:
    doc = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("condition", "last_s"):
        if getattr(exc, attr, None) is not None:
            doc[attr] = getattr(exc, attr)
    text = json.dumps(doc, indent=2)
    _write(out_dir, "error.json", text)
    print(text, file=sys.stderr)
    return 2


def run_suites(spec: weight.WeightSpec, suites: list[str], n_max: int,
               s_values: list[float]) -> ResidualReport:
    """Evaluate the requested identity suites over the (n, s) grid."""
    total = ResidualReport(context={"suites": suites, "n_max": n_max,
                                    "s_list": s_values, "spec": spec.digest})
    for s in s_values:
        spec_s = spec.with_s(s)
        fam = mvop.build_family(spec_s, n_max)
        chain = lax.lax_chain(fam)
        used_spec = fam.spec  # normalization may have replaced it
        if "structural" in suites:
            for n in range(n_max + 1):
                rep = lax.verify_structural(fam, chain[n])
                _tag(rep, "structural")
                total.extend(rep)
        if "discrete" in suites:
            for n in range(n_max):
                rep = systems.residual_dPsystem(
                    used_spec, chain[n - 1] if n else None, chain[n],
                    chain[n + 1], history=chain[:n])
                _tag(rep, "discrete")
                total.extend(rep)
        if "continuous" in suites:
            for n in range(n_max):
                rep = systems.residual_Psystem(used_spec, n, s)
                _tag(rep, "continuous")
                total.extend(rep)
        if "closed" in suites:
            for n in range(1, n_max):
                der = systems.s_derivatives(used_spec, n, s)
                rep = systems.residual_closed_systems(
                    used_spec, chain[n - 1], chain[n], chain[n + 1],
                    derivs=der, lq_prev2=chain[n - 2] if n >= 2 else None)
                _tag(rep, "closed")
                total.extend(rep)
        if "section-final" in suites:
            if spec.dg1_nu is None:
                raise ValueError("section-final suite needs a dg1 spec")
            dg1 = special_family.build_dg1(list(spec.dg1_nu), spec.alpha)
            for n in range(1, n_max):
                rep = special_family.verify_section_final(
                    dg1, chain[n - 1], chain[n], chain[n + 1])
                _tag(rep, "section-final")
                total.extend(rep)
    return total


def _tag(rep: ResidualReport, suite: str) -> None:
    for e in rep.entries:
        e.suite = suite


def cmd_moments(args) -> int:
    spec = _load_spec(args.spec)
    rows = [["k", "i", "j", "re", "im"]]
    k_lo = -1 if (spec.s > 0 or spec.alpha > 1) else 0
    for k in range(k_lo, args.kmax + 1):
        m = weight.matrix_moment(spec, k)
        for i in range(spec.dim):
            for j in range(spec.dim):
                rows.append([k, i, j, m[i, j].real, m[i, j].imag])
    text = "\n".join(",".join(str(v) for v in row) for row in rows) + "\n"
    path = _write(args.out, "moments.csv", text)
    print(f"wrote {path}")
    return 0


def cmd_family(args) -> int:
    spec = _load_spec(args.spec)
    fam = mvop.build_family(spec, args.nmax)
    path = _write(args.out, "family.json", mvop.family_to_json(fam))
    print(f"wrote {path}")
    return 0


def cmd_verify(args) -> int:
    spec = _load_spec(args.spec)
    suites = list(SUITES) if args.suite == "all" else [args.suite]
    s_values = [float(v) for v in args.s_list.split(",")]
    report = run_suites(spec, suites, args.nmax, s_values)
    _write(args.out, "verify_report.json", report.to_json())
    path = _write(args.out, "verify_report.csv", report.to_csv())
    fails = report.failures()
    checked = sum(1 for e in report.entries if not e.skipped)
    print(f"{checked} identities checked, {len(fails)} failed ({path})")
    for e in fails:
        print(f"  FAIL {e.suite}/{e.identity} n={e.n} s={e.s} "
              f"rel={e.rel_residual:.3e} tol={e.tolerance:.1e}")
    return 0 if not fails else 1


def cmd_evolve(args) -> int:
    spec = _load_spec(args.spec)
    final, traj = systems.evolve_ode(spec, args.n, args.s0, args.s1,
                                     keep_trajectory=args.dump_trajectory)
    ref = lax.compute_lax(mvop.build_family(spec.with_s(args.s1), args.n), args.n)
    from . import linalg
    errs = {name: linalg.rel_residual(
        linalg.frob(getattr(final, name) - getattr(ref, name)),
        getattr(ref, name)) for name in ("a", "b", "Bn", "Bhat")}
    tol = 1e-5 * float(os.environ.get("MVOP_TOL_SCALE", "1"))
    doc = {"n": args.n, "s0": args.s0, "s1": args.s1,
           "endpoint_rel_error": errs, "tolerance": tol,
           "pass": all(v <= tol for v in errs.values())}
    _write(args.out, "evolve.json", json.dumps(doc, indent=2))
    if traj is not None:
        rows = []
        header = ["s"]
        nn = spec.dim
        for name in ("a", "b", "Bn", "Bhat"):
            for i in range(nn):
                for j in range(nn):
                    header += [f"{name}[{i},{j}].re", f"{name}[{i},{j}].im"]
        rows.append(header)
        for st in traj:
            row = [f"{st.s:.12g}"]
            for mat in (st.a, st.b, st.Bn, st.Bhat):
                for z in np.asarray(mat).ravel():
                    row += [f"{z.real:.16e}", f"{z.imag:.16e}"]
            rows.append(row)
        _write(args.out, "trajectory.csv",
               "\n".join(",".join(map(str, r)) for r in rows) + "\n")
    print(json.dumps(doc["endpoint_rel_error"], indent=2))
    return 0 if doc["pass"] else 1


def cmd_bootstrap(args) -> int:
    spec = _load_spec(args.spec)
    steps = systems.bootstrap_discrete(spec, args.nmax, check=False)
    nspec = weight.normalized_spec(spec)
    fam = mvop.build_family(nspec, args.nmax)
    chain = lax.lax_chain(fam)
    from . import linalg
    tol = 1e-5 * float(os.environ.get("MVOP_TOL_SCALE", "1"))
    levels = []
    ok = True
    for st in steps:
        errs = {name: linalg.rel_residual(
            linalg.frob(getattr(st, name) - getattr(chain[st.n], name)),
            getattr(chain[st.n], name)) for name in ("a", "b", "Bn", "Bhat")}
        ok = ok and all(v <= tol for v in errs.values())
        levels.append({"n": st.n, "rel_error": errs})
    doc = {"n_max": args.nmax, "tolerance": tol, "levels": levels, "pass": ok}
    path = _write(args.out, "bootstrap.json", json.dumps(doc, indent=2))
    print(f"wrote {path}; pass = {ok}")
    return 0 if ok else 1


def cmd_piii(args) -> int:
    spec = _load_spec(args.spec)
    grid = np.arange(args.s0, args.s1 + 0.5 * args.ds, args.ds)
    r2 = systems.scalar_piii_residual(spec, args.n, grid)
    r1 = systems.scalar_p3_residual(spec, args.n, grid)
    scale = float(os.environ.get("MVOP_TOL_SCALE", "1"))
    doc = {"n": args.n, "s0": args.s0, "s1": args.s1, "ds": args.ds,
           "piii_residual": r2, "p3_residual": r1,
           "piii_tolerance": 1e-3 * scale, "p3_tolerance": 1e-6 * scale,
           "pass": bool(r2 <= 1e-3 * scale and r1 <= 1e-6 * scale)}
    path = _write(args.out, "piii.json", json.dumps(doc, indent=2))
    print(f"PIII residual {r2:.3e}, P3 residual {r1:.3e} ({path})")
    return 0 if doc["pass"] else 1


def _sweep_cell(spec_json: str, suite: str, nmax: int, s: float) -> list[dict]:
    spec = weight.from_json(spec_json)
    suites = list(SUITES) if suite == "all" else [suite]
    rep = run_suites(spec, suites, nmax, [s])
    return [vars(e) for e in rep.sorted_entries()]


def cmd_sweep(args) -> int:
    spec = _load_spec(args.spec)
    if args.param != "s":
        raise ValueError("only the deformation parameter s can be swept")
    values = np.linspace(getattr(args, "from"), args.to, args.steps)
    spec_json = spec.to_json()
    jobs = args.jobs or os.cpu_count() or 1
    rows: list[dict] = []
    if jobs == 1:
        for s in values:
            rows.extend(_sweep_cell(spec_json, args.suite, args.nmax, float(s)))
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_sweep_cell, spec_json, args.suite,
                                   args.nmax, float(s)) for s in values]
            for fut in futures:
                rows.extend(fut.result())
    rows.sort(key=lambda r: (r["suite"], r["n"] if r["n"] is not None else -1,
                             r["identity"], r["s"] if r["s"] is not None else -1))
    _write(args.out, "sweep.json", json.dumps(rows, indent=2, default=float))
    buf = [",".join(["suite", "n", "s", "identity", "abs_residual",
                     "rel_residual", "tolerance", "pass"])]
    fails = 0
    for r in rows:
        status = "skip" if r["skipped"] else ("pass" if r["passed"] else "FAIL")
        fails += status == "FAIL"
        buf.append(",".join(str(v) for v in [
            r["suite"], r["n"], r["s"], r["identity"], r["abs_residual"],
            r["rel_residual"], r["tolerance"], status]))
    path = _write(args.out, "sweep.csv", "\n".join(buf) + "\n")
    print(f"wrote {path}; {fails} failures over {len(values)} grid points")
    return 0 if fails == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvoplax",
        description="Verify the difference/differential systems of deformed "
                    "matrix Laguerre orthogonal polynomials.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--spec", required=True, help="weight spec JSON file")
        p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("moments", help="matrix moment table (CSV)")
    common(p)
    p.add_argument("--kmax", type=int, default=8)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("family", help="dump the monic family (JSON)")
    common(p)
    p.add_argument("--nmax", type=int, default=6)
    p.set_defaults(func=cmd_family)

    p = sub.add_parser("verify", help="run identity suites over an (n, s) grid")
    common(p)
    p.add_argument("--nmax", type=int, default=6)
    p.add_argument("--s-list", default="1.0", help="comma separated s values")
    p.add_argument("--suite", default="all", choices=SUITES + ("all",))
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("evolve", help="integrate the closed ODE system in s")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--s0", type=float, required=True)
    p.add_argument("--s1", type=float, required=True)
    p.add_argument("--dump-trajectory", action="store_true")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("bootstrap", help="4-step discrete recursion from a_0")
    common(p)
    p.add_argument("--nmax", type=int, default=4)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("piii", help="scalar Painleve III residual scan")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--s0", type=float, required=True)
    p.add_argument("--s1", type=float, required=True)
    p.add_argument("--ds", type=float, default=0.01)
    p.set_defaults(func=cmd_piii)

    p = sub.add_parser("sweep", help="parallel suite evaluation on an s grid")
    common(p)
    p.add_argument("--param", default="s")
    p.add_argument("--from", type=float, required=True)
    p.add_argument("--to", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--suite", default="structural", choices=SUITES + ("all",))
    p.add_argument("--nmax", type=int, default=4)
    p.add_argument("--jobs", type=int, default=None,
                   help="worker count (default: logical cores)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MvoplaxError as exc:
        return _structural_error(exc, getattr(args, "out", "."))


if __name__ == "__main__":
    sys.exit(main())
