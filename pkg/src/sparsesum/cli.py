# Command-line interface.  One binary, six subcommands:
#
#   rates        rate/threshold table for a (d, s-range, sigma) grid
#   estimate     run an estimator on an observation JSON file
#   simulate     run a declarative experiment grid, emit the results CSV
#   tailcheck    tail-constant scan and testing-bound dominance suite
#   lower-bound  analytic testing bound (optionally with a Monte Carlo run)
#   sigma-demo   risk of the fully adaptive estimator under dense Gaussian signals
#
# stdout carries machine output only (CSV or decimals); anything human-readable
# goes to stderr.  Exit codes: 0 success, 1 usage error, 2 check failure,
# 3 runtime error.

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from . import __version__, rates, tailbounds
from .estimators import (
    EstimatorConfig,
    adaptive_estimator,
    adaptive_estimator_unknown_sigma,
    collection_estimator,
    sigma_hat,
)
from .harness import (
    ExperimentSpec,
    ThetaFamily,
    lower_bound_consistency,
    run_experiment,
    sigma_impossibility_demo,
    write_csv,
)
from .model import ObservationVector

_TAIL_OPERATIVE_X = 1.5  # scan restart point safely inside the regime where the 1.1 constant holds


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _version_string() -> str:
    th = EstimatorConfig.theoretical()
    pr = EstimatorConfig.practical()
    return (f"sparsesum {__version__} "
            f"(theoretical: alpha={th.alpha:g} beta={th.beta:.6f}; "
            f"practical: alpha={pr.alpha:g} beta={pr.beta:g})")


def _parse_s_range(text: str) -> list[int]:
    values: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            values.extend(range(int(lo), int(hi) + 1))
        else:
            values.append(int(part))
    return values


def _config_from_args(args) -> EstimatorConfig:
    if getattr(args, "alpha", None) is not None or getattr(args, "beta", None) is not None:
        if args.alpha is None or args.beta is None:
            raise SystemExit(_usage_error("--alpha and --beta must be given together"))
        return EstimatorConfig.custom(args.alpha, args.beta)
    return EstimatorConfig.from_preset(args.preset)


def _usage_error(message: str) -> int:
    print(f"sparsesum: error: {message}", file=sys.stderr)
    return 1


def _stdout_csv():
    return csv.writer(sys.stdout, lineterminator="\n")


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_rates(args) -> int:
    writer = _stdout_csv()
    writer.writerow(["d", "s", "sigma", "phi_L", "psi_star", "phi_ratio", "omega_beta16", "s_zero"])
    s0 = rates.s_zero(args.d)
    for s in _parse_s_range(args.s):
        writer.writerow([
            args.d, s, repr(args.sigma),
            repr(rates.phi_L(args.d, s, args.sigma)),
            repr(rates.psi_star(args.d, s, args.sigma)),
            repr(rates.phi_ratio(args.d, s)),
            repr(rates.omega(s, args.d, args.sigma, 16.0)),
            s0,
        ])
    return 0


def _cmd_estimate(args) -> int:
    with open(args.input, "r", encoding="utf-8") as f:
        obs = ObservationVector.from_json_dict(json.load(f))
    cfg = _config_from_args(args)
    trace = None
    sigma_estimate = None
    if args.sigma is not None and args.s is not None:
        if args.trace:
            return _usage_error("--trace is only available for the adaptive paths (omit --s)")
        estimate = collection_estimator(obs, args.s, args.sigma, cfg)
    elif args.sigma is not None:
        estimate, trace = adaptive_estimator(obs, args.sigma, cfg)
    else:
        if args.s is not None:
            return _usage_error("--s without --sigma is not a supported mode")
        estimate, trace, sigma_estimate = adaptive_estimator_unknown_sigma(obs, cfg)
    if args.trace and trace is not None:
        payload = trace.to_json_dict()
        if sigma_estimate is not None:
            payload["sigma_hat"] = sigma_estimate
        with open(args.trace, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
    print(repr(float(estimate)))
    if sigma_estimate is not None:
        print(repr(float(sigma_estimate)))
    return 0


def _cmd_simulate(args) -> int:
    with open(args.spec, "r", encoding="utf-8") as f:
        spec = ExperimentSpec.from_json_dict(json.load(f))
    rows = run_experiment(spec, threads=args.threads)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            write_csv(rows, f)
    else:
        write_csv(rows, sys.stdout)
    failures = [r for r in rows if "error" in r.extra or r.extra.get("budget_ok") is False]
    print(f"simulate: {len(rows)} rows, {len(failures)} failed checks", file=sys.stderr)
    if args.assert_checks and failures:
        return 2
    return 0


def _tail_ratio(x: np.ndarray) -> np.ndarray:
    from scipy.special import erfc

    pdf = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    sf = 0.5 * erfc(x / math.sqrt(2.0))
    return 2.0 * (x * pdf + sf) / (x * np.exp(-0.5 * x * x))


def _cmd_tailcheck(args) -> int:
    writer = _stdout_csv()
    writer.writerow(["check", "status", "observed", "target", "detail"])
    failed = False

    x = np.arange(1.0, 10.0 + args.step / 2, args.step)
    ratio = _tail_ratio(x)
    k = int(np.argmax(ratio))
    ok = ratio[k] <= 1.1
    failed |= not ok
    writer.writerow(["tail_ratio_scan_full", "PASS" if ok else "FAIL",
                     repr(float(ratio[k])), "<=1.1", f"argmax x={x[k]:.3f}"])

    mask = x >= _TAIL_OPERATIVE_X
    k2 = int(np.argmax(np.where(mask, ratio, -np.inf)))
    ok2 = ratio[k2] <= 1.1
    failed |= not ok2
    writer.writerow([f"tail_ratio_scan_x_ge_{_TAIL_OPERATIVE_X:g}", "PASS" if ok2 else "FAIL",
                     repr(float(ratio[k2])), "<=1.1", f"argmax x={x[k2]:.3f}"])

    sub = x[:: max(1, args.quad_stride)]
    worst = 0.0
    for xv in sub:
        closed = tailbounds.truncated_gaussian_moment(1, float(xv))
        quad = _quad_moment(float(xv))
        worst = max(worst, abs(closed - quad))
    ok3 = worst <= 1e-10
    failed |= not ok3
    writer.writerow(["closed_form_vs_quadrature", "PASS" if ok3 else "FAIL",
                     repr(worst), "<=1e-10", f"{sub.size} points"])

    gen = np.random.default_rng(args.seed)
    worst_margin = math.inf
    for _ in range(args.pairs):
        n = int(gen.integers(2, 21))
        p = gen.random(n) + 1e-12
        q_ = gen.random(n) + 1e-12
        pair = tailbounds.DiscreteMeasurePair(p / p.sum(), q_ / q_.sum())
        chi2 = tailbounds.chi2_discrete(pair)
        for q in (0.1, 1.0, 10.0):
            margin = tailbounds.min_risk_oracle(pair, q) - tailbounds.min_risk_bound(q, chi2)
            worst_margin = min(worst_margin, margin)
    ok4 = worst_margin >= 0.0
    failed |= not ok4
    writer.writerow(["min_risk_dominance", "PASS" if ok4 else "FAIL",
                     repr(worst_margin), ">=0", f"{args.pairs} pairs x 3 weights"])

    return 2 if failed else 0


def _quad_moment(x: float) -> float:
    from scipy import integrate

    val, _ = integrate.quad(lambda t: t * t * math.exp(-0.5 * t * t), x, np.inf,
                            epsabs=1e-13, epsrel=1e-13, limit=200)
    return 2.0 * val / math.sqrt(2.0 * math.pi)


def _cmd_lower_bound(args) -> int:
    value = rates.lower_bound_value(args.d, args.a, args.s)
    floor = (0.5 - args.a) / 40.0
    writer = _stdout_csv()
    header = ["d", "a", "s", "sigma", "q_weight", "tau", "chi2_bound", "bound", "floor"]
    row = [args.d, repr(args.a), args.s, repr(args.sigma), repr(value.q_weight),
           repr(value.tau), repr(value.chi2_bound), repr(value.bound), repr(floor)]
    if args.estimator:
        cfg = EstimatorConfig.from_preset(args.preset)
        res = lower_bound_consistency(args.d, args.a, args.s, args.sigma,
                                      args.estimator, cfg, args.reps, args.seed)
        header += ["estimator", "reps", "seed", "r_hat", "std_error", "margin"]
        row += [args.estimator, args.reps, args.seed, repr(res.r_hat),
                repr(res.std_error), repr(res.margin)]
    writer.writerow(header)
    writer.writerow(row)
    return 0


def _cmd_sigma_demo(args) -> int:
    a_grid = [float(v) for v in args.a_grid.split(",")]
    rows = sigma_impossibility_demo(args.d, a_grid, args.reps, args.seed)
    writer = _stdout_csv()
    writer.writerow(["a", "risk", "risk_ratio", "mean_observed", "var_observed",
                     "var_expected", "reps"])
    for r in rows:
        writer.writerow([repr(r["a"]), repr(r["risk"]), repr(r["risk_ratio"]),
                         repr(r["mean_observed"]), repr(r["var_observed"]),
                         repr(r["var_expected"]), r["reps"]])
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparsesum",
                     description="Adaptive estimation of the coordinate sum of a "
                                 "sparse vector in Gaussian noise.")
    parser.add_argument("--version", action="version", version=_version_string())
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("rates", help="print the rate/threshold table as CSV")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--s", type=str, required=True, help="int, range a..b, or comma list")
    p.add_argument("--sigma", type=float, default=1.0)
    p.set_defaults(handler=_cmd_rates)

    p = sub.add_parser("estimate", help="run an estimator on an observation JSON file")
    p.add_argument("--input", required=True)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--s", type=int, default=None)
    p.add_argument("--preset", choices=("theoretical", "practical"), default="practical")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--trace", default=None, help="write the selection trace JSON here")
    p.set_defaults(handler=_cmd_estimate)

    p = sub.add_parser("simulate", help="run an experiment grid from a JSON spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", default=None, help="results CSV path (default stdout)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--assert", dest="assert_checks", action="store_true",
                   help="exit 2 if any row records a failed check")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("tailcheck", help="tail-constant scan and dominance suite")
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--quad-stride", type=int, default=10)
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=_cmd_tailcheck)

    p = sub.add_parser("lower-bound", help="analytic testing bound (optionally Monte Carlo)")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--estimator",
                   choices=("oracle", "collection", "adaptive", "adaptive_unknown_sigma", "zero"),
                   default=None)
    p.add_argument("--preset", choices=("theoretical", "practical"), default="practical")
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=_cmd_lower_bound)

    p = sub.add_parser("sigma-demo", help="adaptive-estimator risk under dense Gaussian signals")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--a-grid", type=str, default="0,1,10,100")
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=_cmd_sigma_demo)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"sparsesum: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
