"""Command-line entry points.

Subcommands mirror the library stages: ``theory`` (mass curve and records),
``rde`` (population dynamics), ``spectral`` (h-matrix), ``density``
(resolvent spectral density), ``simulate`` (graphs + exact kernel),
``rank`` (edge-list file rank) and ``pipeline`` (everything, with verdicts).

Exit codes: 0 ok, 1 a verdict failed, 2 error.  CSV outputs carry no
metadata; a JSON sidecar holds the run configuration.  Relative output
paths resolve against $DILURANK_OUTDIR when it is set.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .cavity import MCurve, er_q, find_records, ks_trajectory
from .degrees import DegreeModelError, is_phi2_logconcave, parse_model
from .graphs import from_edge_text, gen_configuration, gen_erdos_renyi, karp_sipser
from .linalg import DEFAULT_PRIMES, FAST_PRIMES, kernel_dim_exact
from .rde import root_mean, solve_rde
from .report import (PipelineConfig, emit_m_curve, out_path, parse_sim_model,
                     report_to_json, run_pipeline, simulate_seeds, theory_block)
from .trees import atom_at_zero_mc, resolvent_density


def _write_json(path: str, payload: dict) -> None:
    with open(out_path(path), "w") as fh:
        fh.write(report_to_json(payload))
        fh.write("\n")


def _cmd_theory(args) -> int:
    model = parse_model(args.model)
    rec = find_records(model)
    lc = is_phi2_logconcave(model)
    payload = {
        "model": args.model,
        "records": rec.to_dict(),
        "logconcave": {"ok": lc.ok, "vacuous": lc.vacuous,
                       "first_violation": lc.first_violation},
    }
    if args.model.startswith("poisson:"):
        c = model.mean
        q = er_q(c)
        payload["er_q"] = {"c": c, "q": q.q, "kernel_mass": q.kernel_mass}
    traj = ks_trajectory(model, args.rounds)
    payload["ks_trajectory"] = {"alpha": traj.alpha.tolist(),
                                "beta": traj.beta.tolist(),
                                "lr": traj.lr.tolist()}
    if args.json:
        _write_json(args.json, payload)
    if args.csv:
        curve = MCurve.build(model, args.grid)
        with open(out_path(args.csv), "w") as fh:
            fh.write("x,M,xbar,Mprime\n")
            for row in zip(curve.x, curve.m, curve.xbar, curve.mprime):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
    if args.m_curve:
        emit_m_curve(model, args.grid, out_path(args.m_curve))
    print(f"records at {rec.locations} values {rec.values}; "
          f"x0={rec.first_extremum:.12g} maxM={rec.global_max:.12g}")
    return 0


def _cmd_rde(args) -> int:
    model = parse_model(args.model)
    start = args.start_p
    if start.startswith("record:"):
        idx = int(start.split(":")[1])
        rec = find_records(model)
        start_p = rec.locations[idx]
    else:
        start_p = float(start)
    pop, diag = solve_rde(model, start_p, iters=args.iters, pool=args.pool,
                          seed=args.seed)
    rm = root_mean(pop, model, resamples=args.resamples, seed=args.seed)
    payload = {
        "model": args.model, "start_p": start_p, "pool": args.pool,
        "iters": args.iters, "seed": args.seed,
        "nonzero_mass_trace": diag.nonzero_mass.tolist(),
        "mean_trace": diag.mean.tolist(),
        "stationary_nonzero_mass": pop.nonzero_mass,
        "root_mean": rm.mean, "root_stderr": rm.stderr,
    }
    if args.json:
        _write_json(args.json, payload)
    print(f"stationary nonzero mass {pop.nonzero_mass:.6f}; "
          f"root mean {rm.mean:.6f} +- {rm.stderr:.6f}")
    return 0


def _cmd_spectral(args) -> int:
    model = parse_model(args.model)
    depths = [int(d) for d in args.depths.split(",")]
    if any(d % 2 for d in depths):
        print("error: truncation depths must be even", file=sys.stderr)
        return 2
    t_grid = [float(t) for t in args.t.split(",")]
    est = atom_at_zero_mc(model, depths, t_grid, args.samples, seed=args.seed,
                          node_cap=args.node_cap)
    payload = {
        "model": args.model, "depths": depths, "t_grid": t_grid,
        "samples": args.samples, "seed": args.seed,
        "mean": est.mean.tolist(), "stderr": est.stderr.tolist(),
        "headline": est.headline, "headline_stderr": est.headline_stderr,
        "discarded": est.discarded,
        "depth_violations": est.depth_violations,
        "t_violations": est.t_violations,
    }
    if args.json:
        _write_json(args.json, payload)
    print(f"headline estimate (depth {depths[-1]}, t {t_grid[-1]:g}): "
          f"{est.headline:.6f} +- {est.headline_stderr:.6f} "
          f"({est.discarded} discarded)")
    return 0


def _cmd_density(args) -> int:
    model = parse_model(args.model)
    energies = np.linspace(args.emin, args.emax, args.points)
    est = resolvent_density(model, energies, args.eta, args.depth,
                            args.samples, seed=args.seed)
    csv = args.csv or "density.csv"
    with open(out_path(csv), "w") as fh:
        fh.write("E,density\n")
        for e, d in zip(est.energies, est.density):
            fh.write(f"{e!r},{d!r}\n")
    _write_json(csv + ".json", {
        "model": args.model, "eta": args.eta, "depth": args.depth,
        "samples": args.samples, "seed": args.seed,
        "points": args.points, "emin": args.emin, "emax": args.emax,
        "discarded": est.discarded,
    })
    print(f"wrote {csv} ({args.points} points, {est.discarded} discarded)")
    return 0


def _cmd_simulate(args) -> int:
    model, generator, er_c = parse_sim_model(args.model)
    primes = FAST_PRIMES if args.fast_primes else DEFAULT_PRIMES
    rows = simulate_seeds(model, generator, er_c, args.n, args.seeds,
                          args.seed, primes=primes, strict=not args.fast_primes)
    theory = theory_block(model, er_c)
    payload = {"model": args.model, "n": args.n, "seeds": args.seeds,
               "seed": args.seed, "theory": theory, "per_seed": rows}
    fracs = [r["kernel_frac"] for r in rows]
    payload["kernel_frac_mean"] = float(np.mean(fracs))
    if args.json:
        _write_json(args.json, payload)
    print(f"kernel fraction mean {np.mean(fracs):.6f} over {args.seeds} seeds "
          f"(theory max M = {theory['max_m']:.6f})")
    return 0


def _cmd_rank(args) -> int:
    with open(args.edges) as fh:
        g = from_edge_text(fh.read())
    primes = (FAST_PRIMES if args.fast_primes else DEFAULT_PRIMES)[:args.primes]
    kdim, cert = kernel_dim_exact(g, primes=primes,
                                  use_ks_preprocess=not args.no_ks,
                                  strict=not args.fast_primes)
    payload = {"edges_file": args.edges, "n": g.n, "kernel_dim": kdim,
               "rank": g.n - kdim, "certificate": cert.to_dict()}
    if args.json:
        _write_json(args.json, payload)
    print(f"n={g.n} rank={g.n - kdim} dim_ker={kdim} "
          f"(lr={cert.lr}, core={cert.core_order}, agree={cert.agree})")
    return 0


def _cmd_pipeline(args) -> int:
    cfg = PipelineConfig(
        model=args.model, n=args.n, seeds=args.seeds, master_seed=args.seed,
        pool=args.pool, iters=args.iters,
        depths=tuple(int(d) for d in args.depths.split(",")),
        t_grid=tuple(float(t) for t in args.t.split(",")),
        spectral_samples=args.spectral_samples,
        run_rde=not args.no_rde, run_spectral=not args.no_spectral,
        run_simulation=not args.no_simulation,
        variance_check=args.variance_check,
        fast_primes=not args.exact_primes,
        workers=args.workers,
    )
    report, code = run_pipeline(cfg)
    if args.json:
        _write_json(args.json, report)
    for v in report["verdicts"]:
        status = "PASS" if v["passed"] else "FAIL"
        print(f"[{status}] {v['name']}: value={v['value']} tol={v['tolerance']}")
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dilurank",
                                 description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    t = sub.add_parser("theory", help="mass curve, records, trajectories")
    t.add_argument("--model", required=True)
    t.add_argument("--grid", type=int, default=1001)
    t.add_argument("--rounds", type=int, default=64)
    t.add_argument("--json")
    t.add_argument("--csv")
    t.add_argument("--m-curve", help="two-column x,M CSV")
    t.set_defaults(fn=_cmd_theory)

    r = sub.add_parser("rde", help="population dynamics fixed point")
    r.add_argument("--model", required=True)
    r.add_argument("--start-p", default="record:-1",
                   help="real in [0,1] or record:<i>")
    r.add_argument("--pool", type=int, default=100_000)
    r.add_argument("--iters", type=int, default=300)
    r.add_argument("--resamples", type=int, default=200_000)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--json")
    r.set_defaults(fn=_cmd_rde)

    s = sub.add_parser("spectral", help="h-recursion (depth, t) matrix")
    s.add_argument("--model", required=True)
    s.add_argument("--depths", default="8,12,16")
    s.add_argument("--t", default="1e-1,1e-2,1e-3")
    s.add_argument("--samples", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--node-cap", type=int, default=10_000_000)
    s.add_argument("--json")
    s.set_defaults(fn=_cmd_spectral)

    d = sub.add_parser("density", help="resolvent spectral density CSV")
    d.add_argument("--model", required=True)
    d.add_argument("--emin", type=float, default=-4.0)
    d.add_argument("--emax", type=float, default=4.0)
    d.add_argument("--points", type=int, default=401)
    d.add_argument("--eta", type=float, default=0.05)
    d.add_argument("--depth", type=int, default=12)
    d.add_argument("--samples", type=int, default=10_000)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--csv")
    d.set_defaults(fn=_cmd_density)

    m = sub.add_parser("simulate", help="graphs, leaf removal, exact kernel")
    m.add_argument("--model", required=True, help="degree DSL or er:c=<real>")
    m.add_argument("--n", type=int, default=10_000)
    m.add_argument("--seeds", type=int, default=4)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--fast-primes", action="store_true", default=True)
    m.add_argument("--exact-primes", dest="fast_primes", action="store_false",
                   help="use the >=2^31 prime battery (slower, strict)")
    m.add_argument("--json")
    m.set_defaults(fn=_cmd_simulate)

    k = sub.add_parser("rank", help="exact kernel of an edge-list file")
    k.add_argument("--edges", required=True, help="text file 'u v' per line")
    k.add_argument("--primes", type=int, default=3)
    k.add_argument("--no-ks", action="store_true")
    k.add_argument("--fast-primes", action="store_true")
    k.add_argument("--json")
    k.set_defaults(fn=_cmd_rank)

    p = sub.add_parser("pipeline", help="theory + rde + spectral + simulation")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--seeds", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pool", type=int, default=50_000)
    p.add_argument("--iters", type=int, default=150)
    p.add_argument("--depths", default="4,8")
    p.add_argument("--t", default="1e-1,1e-2")
    p.add_argument("--spectral-samples", type=int, default=2000)
    p.add_argument("--no-rde", action="store_true")
    p.add_argument("--no-spectral", action="store_true")
    p.add_argument("--no-simulation", action="store_true")
    p.add_argument("--variance-check", action="store_true")
    p.add_argument("--exact-primes", action="store_true")
    p.add_argument("--workers", type=int, default=1,
                   help="parallelism cap; results never depend on it")
    p.add_argument("--json")
    p.set_defaults(fn=_cmd_pipeline)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (DegreeModelError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
