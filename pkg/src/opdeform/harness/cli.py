"""Command-line interface: batch subcommands over the core library.

    opdeform eqmeasure   --potential "0 0 2"
    opdeform recurrence  --n 16 [--K 18]
    opdeform kernel      --n 32 --zeta 0.8 --xi -0.4
    opdeform model-rhp   [--method dense]
    opdeform predict     [--Q -6.78e-4]
    opdeform verify      A1 [A2 ...] | all
    opdeform report

Global flags (--precision, --config, --out, --threads) override the
corresponding config entries.  All numeric output goes through the
deterministic renderer, so repeated runs produce identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import mpmath
from mpmath import mpf

from .. import asymptotics, modelrhp, orthopoly
from ..equilibrium import PotentialSpec, effective_params, solve_equilibrium
from ..errors import OpdeformError
from ..precision import workdps
from .config import parse_config
from .experiments import CRITERION_TO_EXPERIMENT, run_experiment, verify_criterion
from .report import fmt


def _build_parser():
    p = argparse.ArgumentParser(prog="opdeform", description=__doc__.splitlines()[0])
    p.add_argument("--precision", type=int, default=None, help="working decimal digits (>= 50)")
    p.add_argument("--config", default=None, help="INI configuration file")
    p.add_argument("--out", default=None, help="output directory for CSV/JSON artifacts")
    p.add_argument("--threads", type=int, default=None, help="worker processes for n-grid fans")
    sub = p.add_subparsers(dest="command", required=True)

    eq = sub.add_parser("eqmeasure", help="solve the one-cut equilibrium problem")
    eq.add_argument("--potential", default=None, help='coefficients, e.g. "0 0 2"')

    rec = sub.add_parser("recurrence", help="recurrence table for the configured ensemble")
    rec.add_argument("--n", type=int, required=True)
    rec.add_argument("--K", type=int, default=None)
    rec.add_argument("--ground", action="store_true", help="drop the deformation factor")

    ker = sub.add_parser("kernel", help="rescaled kernel value against the limit kernel")
    ker.add_argument("--n", type=int, required=True)
    ker.add_argument("--zeta", required=True)
    ker.add_argument("--xi", required=True)

    mr = sub.add_parser("model-rhp", help="solve the model problem, report extractions")
    mr.add_argument("--method", choices=("dense", "neumann"), default=None)

    pr = sub.add_parser("predict", help="coefficient predictions on the configured n grid")
    pr.add_argument("--Q", default=None, help="oscillation amplitude override (else solve for it)")

    ver = sub.add_parser("verify", help="run acceptance criteria")
    ver.add_argument("criteria", nargs="+", help="criterion ids (A1..A9) or 'all'")

    sub.add_parser("report", help="run configured experiments, emit CSV/JSON")
    return p


def _load_config(args):
    overrides = {}
    if args.precision is not None:
        overrides.setdefault("run", {})["precision"] = args.precision
    if args.out is not None:
        overrides.setdefault("run", {})["out"] = args.out
    if args.threads is not None:
        overrides.setdefault("run", {})["threads"] = args.threads
    if args.config:
        return parse_config(path=args.config, overrides=overrides)
    return parse_config(text="", overrides=overrides)


def _emit(args, cfg, name, payload: dict):
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    sys.stdout.write(text)
    if args.out or cfg.get("run", "out") != "out" or os.path.isdir(cfg.out_dir()):
        out = cfg.out_dir()
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, name + ".json"), "w", encoding="utf-8") as fh:
            fh.write(text)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        dps = cfg.precision()
        with workdps(dps):
            if args.command == "eqmeasure":
                coeffs = (
                    tuple(mpf(v) for v in args.potential.split())
                    if args.potential
                    else cfg.potential_coeffs()
                )
                eq = solve_equilibrium(PotentialSpec(coeffs), dps)
                T, u = effective_params(eq, cfg.t())
                _emit(args, cfg, "eqmeasure", {
                    "a": fmt(eq.a), "b": fmt(eq.b),
                    "q": [fmt(c) for c in eq.q_coeffs],
                    "ell": fmt(eq.ell), "kappa": fmt(eq.kappa),
                    "phi_V0": fmt(eq.phiV0), "T": fmt(T), "u": fmt(u),
                    "mass_residual": fmt(eq.mass_residual),
                })
            elif args.command == "recurrence":
                eq = solve_equilibrium(PotentialSpec(cfg.potential_coeffs()), dps)
                defo = (
                    orthopoly.GROUND
                    if args.ground or mpmath.isinf(cfg.s())
                    else orthopoly.DeformationSpec(cfg.deformation_coeffs(), cfg.s())
                )
                spec = orthopoly.EnsembleSpec(PotentialSpec(cfg.potential_coeffs()), defo, args.n)
                tab = orthopoly.compute_recurrence(spec, K=args.K, dps=dps, eq=eq)
                _emit(args, cfg, f"recurrence_n{args.n}", {
                    "n": args.n, "K": tab.K, "nodes": tab.node_count,
                    "gamma_sq": [fmt(g) for g in tab.gamma_sq],
                    "beta": [fmt(b) for b in tab.beta],
                    "h_sq": [fmt(h) for h in tab.h_sq],
                })
            elif args.command == "kernel":
                eq = solve_equilibrium(PotentialSpec(cfg.potential_coeffs()), dps)
                defo = orthopoly.DeformationSpec(cfg.deformation_coeffs(), cfg.s())
                spec = orthopoly.EnsembleSpec(PotentialSpec(cfg.potential_coeffs()), defo, args.n)
                tab = orthopoly.compute_recurrence(spec, dps=dps, eq=eq)
                T, u = effective_params(eq, cfg.t())
                sol = modelrhp.solve_model(cfg.s(), u, M=cfg.modes(), dps=dps, tol=cfg.tol(), method=cfg.method())
                z, x = mpf(args.zeta), mpf(args.xi)
                _emit(args, cfg, f"kernel_n{args.n}", {
                    "zeta": fmt(z), "xi": fmt(x),
                    "scaled_kernel": fmt(orthopoly.scaled_kernel(tab, spec, eq, z, x)),
                    "limit_kernel": fmt(sol.k_infinity(z, x)),
                })
            elif args.command == "model-rhp":
                eq = solve_equilibrium(PotentialSpec(cfg.potential_coeffs()), dps)
                T, u = effective_params(eq, cfg.t())
                method = args.method or cfg.method()
                sol = modelrhp.solve_model(cfg.s(), u, M=cfg.modes(), dps=dps, tol=cfg.tol(), method=method)
                _emit(args, cfg, "model_rhp", {
                    "s": fmt(sol.s), "T": fmt(sol.T), "method": method,
                    "p": fmt(sol.p), "q": fmt(sol.q),
                    "P": fmt(sol.P_ct), "Q": fmt(sol.Q_osc),
                    "Q_integral_route": fmt(modelrhp.q_via_integral(sol)),
                    "jump_residual": fmt(sol.jump_residual()),
                    "sup_deviation": fmt(sol.sup_deviation()),
                })
            elif args.command == "predict":
                eq = solve_equilibrium(PotentialSpec(cfg.potential_coeffs()), dps)
                if args.Q is not None:
                    Q = mpf(args.Q)
                else:
                    T, u = effective_params(eq, cfg.t())
                    Q = modelrhp.solve_model(cfg.s(), u, M=cfg.modes(), dps=dps, tol=cfg.tol(), method=cfg.method()).Q_osc
                ps = asymptotics.build_predictions(eq, cfg.t(), cfg.s(), Q, cfg.n_list(), dps)
                _emit(args, cfg, "predict", {
                    "ns": list(ps.ns),
                    "gamma_sq_deformed": [fmt(v) for v in ps.gamma_sq_deformed],
                    "beta_deformed": [fmt(v) for v in ps.beta_deformed],
                    "gamma_sq_ground": [fmt(v) for v in ps.gamma_sq_ground],
                    "beta_ground": [fmt(v) for v in ps.beta_ground],
                    "ingredients": {k: fmt(v) for k, v in ps.ingredients.items()},
                })
            elif args.command == "verify":
                wanted = args.criteria
                if len(wanted) == 1 and wanted[0].lower() == "all":
                    wanted = sorted(CRITERION_TO_EXPERIMENT)
                all_ok = True
                for cid in wanted:
                    crit, rep = verify_criterion(cid.upper(), cfg)
                    print(crit.line())
                    all_ok &= crit.passed
                    if args.out:
                        rep.write(cfg.out_dir())
                return 0 if all_ok else 1
            elif args.command == "report":
                all_ok = True
                for exp in cfg.experiments():
                    rep = run_experiment(exp, cfg)
                    base = rep.write(cfg.out_dir())
                    for crit in rep.criteria:
                        print(crit.line())
                        all_ok &= crit.passed
                    print(f"wrote {base}.csv / .json")
                return 0 if all_ok else 1
    except OpdeformError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
