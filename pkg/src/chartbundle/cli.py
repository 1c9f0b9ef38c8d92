"""Command-line entry points.

Subcommands:
  run        execute an experiment config (or a named preset) over its seeds
  stability  evaluate the sign-cocycle stability bounds for given constants
  oracle     self-tests: coboundary vs brute force, analytic vs numerical
             Jacobians, and the cocycle-defect identity on random atlases
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from importlib import resources

import numpy as np

from . import stability
from .experiment import (
    ExperimentConfig,
    config_from_dict,
    emit_tables,
    load_config,
    run_experiment,
)

PRESETS = ("sphere", "mobius", "klein", "rp2")


def preset_config(name: str) -> ExperimentConfig:
    text = (
        resources.files("chartbundle").joinpath(f"presets/{name}.json").read_text()
    )
    return config_from_dict(json.loads(text))


def _cmd_run(args) -> int:
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = preset_config(args.preset)
    else:
        print("run: need --config PATH or --preset NAME", file=sys.stderr)
        return 2
    if args.seeds:
        cfg = dataclasses.replace(
            cfg, seeds=[int(s) for s in args.seeds.split(",")]
        )
    if args.epochs is not None:
        cfg = dataclasses.replace(
            cfg, train=dataclasses.replace(cfg.train, epochs=args.epochs)
        )
    out_dir = (
        args.output_dir
        or os.environ.get("CHARTBUNDLE_OUTPUT_DIR")
        or cfg.output_dir
    )
    cfg = dataclasses.replace(cfg, output_dir=out_dir)

    report = run_experiment(cfg, jobs=args.jobs)
    emit_tables(report, out_dir)

    for r in report.results:
        if r.error:
            print(f"seed {r.seed}: ERROR\n{r.error}", file=sys.stderr)
        else:
            d = r.diagnostics
            print(
                f"seed {r.seed}: verdict={r.verdict.verdict} "
                f"recon_sup={d.recon_sup:.4f} gap={d.gap} "
                f"cocycle_check={r.cocycle_check:.3f} "
                f"converged={r.train_converged}"
            )
    agg = report.aggregate
    print(
        f"gates passed: {agg['n_gates_passed']}/{agg['n_seeds']}, "
        f"accuracy over gated trials: {agg['accuracy_over_gated']}"
    )
    print(f"report written to {out_dir}/report.json")
    return 1 if agg["n_errors"] else 0


def _cmd_stability(args) -> int:
    b = stability.RegularityBounds(
        enc_lip=args.enc_lip,
        enc_dlip=args.enc_dlip,
        dec_lip=args.dec_lip,
        dec_dlip=args.dec_dlip,
        recon_err=args.recon_err,
        diff_err=args.diff_err,
        gap=args.gap,
        dim=args.dim,
    )
    check = stability.stability_check(b)
    out = {
        "effective_differential_error": (
            stability.effective_differential_error(b) if b.diff_err < 1 else None
        ),
        "perturbation_magnitude": (
            stability.perturbation_magnitude(b) if b.diff_err < 1 else None
        ),
        "det_lipschitz": stability.det_lipschitz(b),
        "det_perturbation_branch": check.det_perturbation,
        "eval_shift_branch": check.eval_shift,
        "margin": check.margin,
        "holds": check.holds,
    }
    if args.mu is not None:
        if args.gap_exact is None or args.c0 is None:
            print("--mu needs --gap-exact and --c0", file=sys.stderr)
            return 2
        out["perturbation_within_margin"] = stability.perturbation_within_margin(
            args.mu, args.gap_exact, args.c0
        )
    print(json.dumps(out, indent=2))
    return 0


def _cmd_oracle(args) -> int:
    from . import net
    from .cohomology import coboundary_test, coboundary_test_bruteforce
    from .oracles import finite_difference_jacobian, random_sign_multigraph

    rng = np.random.default_rng(args.seed)
    failures = 0

    n_agree = 0
    for _ in range(args.cases):
        g = random_sign_multigraph(rng)
        if coboundary_test(g).is_coboundary == coboundary_test_bruteforce(g):
            n_agree += 1
    ok = n_agree == args.cases
    failures += not ok
    print(f"coboundary vs brute force: {n_agree}/{args.cases} "
          f"{'PASS' if ok else 'FAIL'}")

    worst = 0.0
    for _ in range(args.nets):
        dims = [int(rng.integers(2, 6)) for _ in range(int(rng.integers(2, 5)))]
        mlp = net.init_mlp(dims, int(rng.integers(1 << 31)))
        x = rng.standard_normal(dims[0])
        ja = net.jacobian(mlp, x)
        jn = finite_difference_jacobian(lambda v: net.forward(mlp, v), x)
        scale = max(1e-12, float(np.abs(jn).max()))
        worst = max(worst, float(np.abs(ja - jn).max()) / scale)
    ok = worst < 1e-4
    failures += not ok
    print(f"analytic vs numerical Jacobian: max rel err {worst:.3e} "
          f"{'PASS' if ok else 'FAIL'}")

    worst = 0.0
    for _ in range(20):
        n_amb, d = 4, 2
        charts = [
            net.ChartAutoencoder(
                encoder=net.init_mlp([n_amb, 8, d], int(rng.integers(1 << 31))),
                decoder=net.init_mlp([d, 8, n_amb], int(rng.integers(1 << 31))),
                chart_index=c,
            )
            for c in range(3)
        ]
        x = rng.standard_normal(n_amb)
        e_i, e_j, e_k = charts
        zi = net.forward(e_i.encoder, x)
        direct = net.forward(e_k.encoder, net.forward(e_i.decoder, zi))
        zj = net.forward(e_j.encoder, net.forward(e_i.decoder, zi))
        composed = net.forward(e_k.encoder, net.forward(e_j.decoder, zj))
        defect = np.linalg.norm(direct - composed)
        y = net.forward(e_i.decoder, zi)
        middle = np.linalg.norm(
            net.forward(e_k.encoder, y)
            - net.forward(
                e_k.encoder, net.forward(e_j.decoder, net.forward(e_j.encoder, y))
            )
        )
        worst = max(worst, abs(defect - middle))
    ok = worst < 1e-12
    failures += not ok
    print(f"cocycle defect identity: max |diff| {worst:.3e} "
          f"{'PASS' if ok else 'FAIL'}")
    return 1 if failures else 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="chartbundle",
        description="Learned chart atlases and sign-cocycle orientability detection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config over its seeds")
    p.add_argument("--config", help="path to an experiment JSON config")
    p.add_argument("--preset", choices=PRESETS, help="built-in experiment")
    p.add_argument("--output-dir", help="overrides config (and is itself "
                   "overridden by $CHARTBUNDLE_OUTPUT_DIR)")
    p.add_argument("--seeds", help="comma-separated seed list override")
    p.add_argument("--epochs", type=int, help="override training epochs")
    p.add_argument("--jobs", type=int, default=1,
                   help="seeds to run concurrently")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("stability", help="evaluate the stability bounds")
    p.add_argument("--enc-lip", type=float, required=True)
    p.add_argument("--enc-dlip", type=float, required=True)
    p.add_argument("--dec-lip", type=float, required=True)
    p.add_argument("--dec-dlip", type=float, required=True)
    p.add_argument("--recon-err", type=float, required=True)
    p.add_argument("--diff-err", type=float, required=True)
    p.add_argument("--gap", type=float, required=True)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--mu", type=float, help="perturbation size for the "
                   "exact-atlas margin check")
    p.add_argument("--gap-exact", type=float)
    p.add_argument("--c0", type=float)
    p.set_defaults(func=_cmd_stability)

    p = sub.add_parser("oracle", help="run the built-in self-tests")
    p.add_argument("--cases", type=int, default=1000,
                   help="random multigraphs for the coboundary check")
    p.add_argument("--nets", type=int, default=100,
                   help="random networks for the Jacobian check")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_oracle)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
