"""Command-line driver.

Exit codes: 0 success, 1 a verification check failed, 2 configuration
error, 3 I/O error.
"""

import argparse
import json
import sys

import numpy as np

from rkm import analysis, verify
from rkm.errors import ConfigError
from rkm.experiment import ExperimentConfig, build_system, compare, export_csv, run_experiment, write_compare_csv
from rkm.linalg import spectral_constants
from rkm.problems import export_system_csv
from rkm.solvers import METHODS

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

# flag name -> ExperimentConfig field
_CONFIG_FLAGS = {
    "problem": "problem",
    "n": "n",
    "delta": "delta",
    "method": "method",
    "iters": "iters",
    "runs": "runs",
    "seed": "seed",
    "level": "level",
    "bands": "bands",
    "epoch": "epoch",
    "tau": "tau",
    "stride": "stride",
    "dp": "dp",
    "solution": "solution",
    "x0": "x0",
    "out": "out",
}


def _int_list(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _add_config_flags(p, method=True):
    p.add_argument("--config", help="flat JSON file of config keys; flags override it")
    p.add_argument("--problem", help="phillips, gravity, shaw or circle")
    p.add_argument("--n", type=int, help="problem size")
    p.add_argument("--delta", type=float, help="relative noise level")
    if method:
        p.add_argument("--method", choices=METHODS)
    p.add_argument("--iters", type=int, help="iteration cap K")
    p.add_argument("--runs", type=int, help="independent runs to average")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--level", type=int, help="truncation level L")
    p.add_argument("--bands", type=_int_list, help="band boundaries, e.g. 3,6,9")
    p.add_argument("--epoch", type=int, help="RKMVR epoch s (default n)")
    p.add_argument("--tau", type=float, help="discrepancy factor (default 1.1)")
    p.add_argument("--stride", type=int, help="record every j-th iteration")
    p.add_argument("--dp", action="store_true", default=None, help="stop by the discrepancy principle")
    p.add_argument("--solution", choices=("smooth", "random"))
    p.add_argument("--x0", type=_float_list, help="initial guess, comma-separated")
    p.add_argument("--out", help="output CSV path")


def _config_from_args(args, **override):
    data = {}
    if getattr(args, "config", None):
        data.update(ExperimentConfig.from_file(args.config).to_dict())
    for flag, name in _CONFIG_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[name] = value
    data.update(override)
    cfg = ExperimentConfig.from_mapping(data)
    cfg.validate()
    return cfg


def build_parser():
    parser = argparse.ArgumentParser(prog="rkm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write A, b and x_true as CSV files")
    p.add_argument("--problem", default="phillips")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--solution", choices=("smooth", "random"), default="smooth")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("run", help="run one configuration and write its averaged trace")
    _add_config_flags(p)
    p.add_argument("--summary", help="also write a JSON summary here")

    p = sub.add_parser("compare", help="run several methods on common data, aligned by cost")
    _add_config_flags(p, method=False)
    p.add_argument("--methods", default="rkm,lm", help="comma-separated methods")

    p = sub.add_parser("verify", help="run verification suites")
    p.add_argument("--suite", default="all")
    p.add_argument("--problem", help="restrict to one matrix: " + ", ".join(verify.MATRICES))
    p.add_argument("--n", type=int, help="size of the restricted matrix")

    p = sub.add_parser("bounds", help="print c1, c2, kappa and propagation eigenvalues")
    _add_config_flags(p)
    return parser


def cmd_generate(args):
    cfg = ExperimentConfig(problem=args.problem, n=args.n, solution=args.solution, seed=args.seed)
    cfg.validate()
    system, _ = build_system(cfg)
    paths = export_system_csv(system, args.out)
    for p in paths.values():
        print(p)
    return EXIT_OK


def cmd_run(args):
    cfg = _config_from_args(args)
    res = run_experiment(cfg)
    if cfg.out:
        export_csv(res.mean, cfg.out)
    final = res.mean
    print(f"problem={cfg.problem} n={cfg.n} method={cfg.method} runs={cfg.effective_runs} delta_abs={res.delta_abs:.6g}")
    print(
        f"final k={int(final.k[-1])} cost={final.cost_units[-1]:.6g} e_total={final.e_total[-1]:.6g} "
        f"e_low={final.e_low[-1]:.6g} e_high={final.e_high[-1]:.6g} residual_sq={final.residual_sq[-1]:.6g}"
    )
    stopped = sum(r.stop_reason == "discrepancy" for r in res.runs)
    if cfg.dp:
        print(f"discrepancy stops: {stopped}/{len(res.runs)}; mean stop cost {np.mean(res.stop_costs):.6g}")
    if args.summary:
        summary = {
            "config": cfg.to_dict(),
            "delta_abs": res.delta_abs,
            "stops": [
                {"run": j, "iteration": r.stop_iteration, "reason": r.stop_reason, "cost_units": r.stop_cost}
                for j, r in enumerate(res.runs)
            ],
            "final": {
                "k": int(final.k[-1]),
                "cost_units": float(final.cost_units[-1]),
                "e_total": float(final.e_total[-1]),
                "e_low": float(final.e_low[-1]),
                "e_high": float(final.e_high[-1]),
                "residual_sq": float(final.residual_sq[-1]),
            },
        }
        with open(args.summary, "w") as fh:
            json.dump(summary, fh, indent=2)
    return EXIT_OK


def cmd_compare(args):
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise ConfigError("no methods given", field="methods")
    configs = [_config_from_args(args, method=m) for m in methods]
    header, rows, _ = compare(configs)
    out = configs[0].out
    if out:
        write_compare_csv(header, rows, out)
    else:
        print(",".join(header))
        for row in rows:
            print(",".join(row))
    return EXIT_OK


def cmd_verify(args):
    systems = None
    if args.problem:
        systems = [verify.fixture_system(args.problem, args.n)]
    checks = verify.run_suite(args.suite, systems)
    print(verify.format_report(checks))
    return EXIT_OK if all(c.passed for c in checks) else EXIT_CHECK


def cmd_bounds(args):
    cfg = _config_from_args(args)
    system, noise = build_system(cfg)
    cfg.validate(m=system.m)
    basis = system.basis
    consts = spectral_constants(basis, system.frob)
    level = cfg.effective_level(system.m)
    c = analysis.bound_constants(basis, system.frob, level)
    pm, _ = analysis.propagation(c, 0, 0.0, 0.0)
    print(f"problem={cfg.problem} n={cfg.n} L={level}")
    print(f"frob_norm={consts.frob_norm:.12g} sigma_max={consts.sigma_max:.12g} sigma_min={consts.sigma_min:.12g}")
    print(f"kappa={consts.kappa:.12g} numeric_rank={consts.numeric_rank}")
    alpha = "undefined" if c.alpha is None else f"{c.alpha:.12g}"
    print(f"c1={c.c1:.12g} c2={c.c2:.12g} alpha={alpha}")
    print(f"lambda_plus={pm.lambda_plus:.15g} lambda_minus={pm.lambda_minus:.15g}")
    if pm.approx_deviation is not None:
        dp, dm = pm.approx_deviation
        print(f"first-order approximations deviate by {dp:.3e} (plus) and {dm:.3e} (minus)")
    print(f"delta_abs={noise.delta_abs:.12g}")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "run": cmd_run,
    "compare": cmd_compare,
    "verify": cmd_verify,
    "bounds": cmd_bounds,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        field = f" [{exc.field}]" if exc.field else ""
        print(f"configuration error{field}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"configuration error [config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
