"""Command-line front end.

One verb per computation; results go to stdout as JSON or to ``--output``
(in which case a ``<output>.manifest.json`` echoing the fully resolved
configuration, seed and wall time is written next to it).  Exit codes:
0 success, 2 usage error, 3 numerical failure.

Test functions are given either as the JSON wire format or as shortcuts:
``x``, ``x2``, ``x3``, ``x4``, ``call:K``, ``put:K``, ``abs:p``,
``ind:t:w``, ``absind:c[:w]``, ``(x1+x2)^k``, ``(x1-x2)^k`` and
``x1^p*x2^q``.  No expression language beyond these.
"""

from __future__ import annotations

import argparse
import csv
import json
import re
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, testfuncs as tf
from .acceptance import run_all
from .capacity import (
    ConfidenceQuery,
    capacity_curve,
    classical_critical_value,
    coverage_simulation,
    robust_critical_value,
    weighted_sum_capacity,
)
from .cltcheck import (
    NOISE_LAWS,
    gnormal_clt_check,
    max_mean_demo,
    semi_g_clt_lhs,
    third_moment_emergence,
)
from .config import TOLERANCES
from .errors import NumericError
from .gheat import PdeConfig, solve_gheat
from .griddp import IterationSchedule, gem_weighted_sum, gnormal_expectation_iterative
from .joint import SkeletonSet, joint_expectation, skeleton_expectation
from .maximal import MaximalDist, VarianceBand, lower_expectation, maximal_expectation
from .quadrature import RngStream
from .semignormal import SemiGNormal, upper_expectation

_PHI_SHORTCUTS = {
    "x": lambda: tf.polynomial([0.0, 1.0]),
    "x2": lambda: tf.polynomial([0.0, 0.0, 1.0], convexity=tf.CONVEX),
    "x3": lambda: tf.polynomial([0.0, 0.0, 0.0, 1.0]),
    "x4": lambda: tf.polynomial([0.0, 0.0, 0.0, 0.0, 1.0], convexity=tf.CONVEX),
}
_SUM_POWER_RE = re.compile(r"^\(x1(\+|-)x2\)\^(\d+)$")
_MONOMIAL_RE = re.compile(r"^x1\^(\d+)\*x2\^(\d+)$")


def parse_phi(text: str):
    text = text.strip()
    if text.startswith("{"):
        return tf.TestFunction.from_json(text)
    if text in _PHI_SHORTCUTS:
        return _PHI_SHORTCUTS[text]()
    head, _, tail = text.partition(":")
    if head == "call":
        return tf.call(float(tail))
    if head == "put":
        return tf.put(float(tail))
    if head == "abs":
        return tf.abs_power(float(tail))
    if head == "ind":
        t, _, w = tail.partition(":")
        return tf.indicator_above(float(t), float(w) if w else 0.01 * max(abs(float(t)), 1.0))
    if head == "absind":
        t, _, w = tail.partition(":")
        return tf.indicator_abs_above(float(t), float(w) if w else 0.01 * max(abs(float(t)), 1.0))
    m = _SUM_POWER_RE.match(text)
    if m:
        sign = 1.0 if m.group(1) == "+" else -1.0
        k = int(m.group(2))
        return tf.power_of_sum([1.0, sign], k, convexity=tf.CONVEX if k % 2 == 0 else tf.UNKNOWN)
    m = _MONOMIAL_RE.match(text)
    if m:
        return tf.monomial([int(m.group(1)), int(m.group(2))])
    raise ValueError(f"cannot parse test function {text!r}")


def parse_band(text: str) -> VarianceBand:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"band must be 'lo,hi', got {text!r}")
    return VarianceBand(*parts)


def parse_floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


@dataclass
class RunConfig:
    """Fully resolved per-run configuration, echoed into the manifest."""

    command: str
    params: dict
    output: str | None = None
    seed: int = 0
    threads: int = 1
    tolerance_overrides: dict = field(default_factory=dict)

    def tolerances(self) -> dict:
        resolved = dict(TOLERANCES)
        for key, value in self.tolerance_overrides.items():
            if key not in resolved:
                raise ValueError(f"unknown tolerance {key!r}; known: {sorted(resolved)}")
            resolved[key] = value
        return resolved


def _emit(config: RunConfig, payload: dict, started: float) -> None:
    body = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    manifest = {
        "command": config.command,
        "params": config.params,
        "seed": config.seed,
        "threads": config.threads,
        "tolerance_overrides": config.tolerance_overrides,
        "package_version": __version__,
        "wall_time_s": round(time.perf_counter() - started, 3),
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    if config.output:
        with open(config.output, "w") as fh:
            fh.write(body)
        with open(config.output + ".manifest.json", "w") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=2)
            fh.write("\n")
    else:
        sys.stdout.write(body)


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _add_common(parser) -> None:
    parser.add_argument("--output", help="write the result JSON here (plus a manifest)")
    parser.add_argument("--seed", type=int, default=0, help="random seed for Monte Carlo parts")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker cap (computations are vectorised; recorded in the manifest)")
    parser.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE",
                        help="override a named tolerance (repeatable)")


def _config_from(args, command: str, params: dict) -> RunConfig:
    overrides = {}
    for item in args.tol:
        name, _, value = item.partition("=")
        if not value:
            raise ValueError(f"--tol expects NAME=VALUE, got {item!r}")
        overrides[name] = float(value)
    config = RunConfig(
        command=command,
        params=params,
        output=args.output,
        seed=args.seed,
        threads=args.threads,
        tolerance_overrides=overrides,
    )
    config.tolerances()  # reject unknown keys up front
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gexpect",
        description="Sublinear expectations, capacities and robust confidence intervals "
        "for maximal, semi-G-normal and G-normal distributions.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("maximal", help="deterministic maximum over a support rectangle")
    p.add_argument("--phi", required=True)
    p.add_argument("--support", required=True,
                   help="semicolon-separated intervals, e.g. '1,2' or '1,2;0,1'")
    p.add_argument("--lower", action="store_true", help="return the minimum instead")
    _add_common(p)

    p = sub.add_parser("semignormal", help="band maximum of the classical expectation")
    p.add_argument("--phi", required=True)
    p.add_argument("--band", required=True)
    _add_common(p)

    p = sub.add_parser("gnormal-iter", help="iterative G-normal upper expectation")
    p.add_argument("--phi", required=True)
    p.add_argument("--band", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sigma-set", default="two-point")
    p.add_argument("--policy-out", help="write the extracted policy JSON here")
    _add_common(p)

    p = sub.add_parser("gem", help="weighted-sum upper expectation with policy extraction")
    p.add_argument("--phi", required=True)
    p.add_argument("--band", required=True)
    p.add_argument("--weights", required=True, help="comma-separated weights")
    p.add_argument("--sigma-set", default="two-point")
    p.add_argument("--policy-out")
    _add_common(p)

    p = sub.add_parser("joint", help="joint expectation under an independence mode")
    p.add_argument("--phi", required=True)
    p.add_argument("--band", required=True)
    p.add_argument("--mode", required=True,
                   help="semi-sequential | sequential | fully-sequential")
    p.add_argument("--method", default="auto", choices=("auto", "nested", "gem", "closed"))
    _add_common(p)

    p = sub.add_parser("skeleton", help="finite-policy enumeration for two variables")
    p.add_argument("--phi", required=True)
    p.add_argument("--band", required=True)
    p.add_argument("--set", dest="skeleton_set", required=True, choices=("S2", "L2"))
    _add_common(p)

    p = sub.add_parser("capacity", help="upper/lower cdf curve of a band variable")
    p.add_argument("--band", required=True)
    p.add_argument("--thresholds", required=True, help="comma-separated thresholds")
    p.add_argument("--curve-csv", help="also write the curve as CSV")
    _add_common(p)

    p = sub.add_parser("robust-ci", help="robust critical value and coverage table")
    p.add_argument("--query", help="JSON file {weights|design_x, band, alpha, family}")
    p.add_argument("--design-x", help="comma-separated regressor values")
    p.add_argument("--weights", help="comma-separated weights (alternative to --design-x)")
    p.add_argument("--band")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--family", default="L")
    p.add_argument("--reps", type=int, default=100_000)
    p.add_argument("--curve-csv", help="write the exceedance-probability curve here")
    _add_common(p)

    p = sub.add_parser("pde", help="finite-difference nonlinear heat solve")
    p.add_argument("--phi", required=True)
    p.add_argument("--band", required=True)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--points", type=int, default=1601)
    p.add_argument("--csv-out", help="dump the terminal (x, u) slice as CSV")
    _add_common(p)

    p = sub.add_parser("clt", help="central-limit experiment cells")
    p.add_argument("--experiment", required=True,
                   choices=("semi-clt", "gnormal-clt", "third-moment"))
    p.add_argument("--phi", default="x3")
    p.add_argument("--band", required=True)
    p.add_argument("--n-list", default="2,4,8", help="comma-separated sizes")
    p.add_argument("--noise", default="standard-normal", choices=NOISE_LAWS)
    p.add_argument("--csv-out", help="write one row per experiment cell")
    _add_common(p)

    p = sub.add_parser("demo-notgnormal", help="blocked max-mean demo")
    p.add_argument("--phi", default="x3")
    p.add_argument("--band", required=True)
    p.add_argument("--m", type=int, default=17)
    p.add_argument("--samples", type=int, default=100_000)
    _add_common(p)

    p = sub.add_parser("verify", help="run the full acceptance suite")
    _add_common(p)

    return parser


def _run_verb(args) -> int:
    started = time.perf_counter()
    command = args.command

    if command == "verify":
        results = run_all(stream=sys.stdout)
        failed = [r.cid for r in results if not r.passed]
        if args.output:
            config = _config_from(args, command, {})
            payload = {
                "criteria": [asdict(r) for r in results],
                "failed": failed,
            }
            _emit(config, payload, started)
        return 1 if failed else 0

    if command == "maximal":
        phi = parse_phi(args.phi)
        intervals = [tuple(parse_floats(chunk)) for chunk in args.support.split(";")]
        dist = MaximalDist.from_intervals(intervals)
        op = lower_expectation if args.lower else maximal_expectation
        value, point = op(dist, phi)
        config = _config_from(args, command, {"phi": args.phi, "support": args.support,
                                              "lower": args.lower})
        _emit(config, {"value": value, "argmax": list(map(float, point))}, started)
        return 0

    if command == "semignormal":
        phi = parse_phi(args.phi)
        band = parse_band(args.band)
        value, sigma = upper_expectation(SemiGNormal(band), phi)
        config = _config_from(args, command, {"phi": args.phi, "band": args.band})
        _emit(config, {"value": value, "argmax_sigma": sigma}, started)
        return 0

    if command == "gnormal-iter":
        phi = parse_phi(args.phi)
        band = parse_band(args.band)
        schedule = IterationSchedule(n_steps=args.n, sigma_set=args.sigma_set)
        result = gnormal_expectation_iterative(phi, band, schedule)
        if args.policy_out:
            with open(args.policy_out, "w") as fh:
                fh.write(result.policy.to_json())
        config = _config_from(args, command, {"phi": args.phi, "band": args.band,
                                              "n": args.n, "sigma_set": args.sigma_set})
        _emit(config, {"value": result.value, "n": args.n}, started)
        return 0

    if command == "gem":
        phi = parse_phi(args.phi)
        band = parse_band(args.band)
        weights = parse_floats(args.weights)
        result = gem_weighted_sum(phi, band, weights, sigma_set=args.sigma_set)
        if args.policy_out:
            with open(args.policy_out, "w") as fh:
                fh.write(result.policy.to_json())
        config = _config_from(args, command, {"phi": args.phi, "band": args.band,
                                              "weights": weights, "sigma_set": args.sigma_set})
        _emit(config, {"value": result.value}, started)
        return 0

    if command == "joint":
        phi = parse_phi(args.phi)
        band = parse_band(args.band)
        value, info = joint_expectation(phi, band, args.mode, method=args.method,
                                        return_info=True)
        config = _config_from(args, command, {"phi": args.phi, "band": args.band,
                                              "mode": args.mode, "method": args.method})
        payload = {"value": value, "mode": info["mode"],
                   "diagnostics": {k: (list(map(float, v)) if isinstance(v, (list, np.ndarray)) else v)
                                   for k, v in info.items() if k not in ("mode", "n")}}
        _emit(config, payload, started)
        return 0

    if command == "skeleton":
        phi = parse_phi(args.phi)
        band = parse_band(args.band)
        skeleton = SkeletonSet(args.skeleton_set, band)
        value, best = skeleton_expectation(phi, skeleton)
        config = _config_from(args, command, {"phi": args.phi, "band": args.band,
                                              "set": args.skeleton_set})
        policy = skeleton.policies()[best]
        _emit(config, {"value": value, "best_policy_index": best,
                       "best_policy": list(map(float, policy))}, started)
        return 0

    if command == "capacity":
        band = parse_band(args.band)
        thresholds = parse_floats(args.thresholds)
        curve = capacity_curve(SemiGNormal(band), thresholds)
        if args.curve_csv:
            _write_csv(args.curve_csv, ("threshold", "upper_cdf", "lower_cdf"), curve.rows())
        config = _config_from(args, command, {"band": args.band, "thresholds": thresholds})
        _emit(config, {"thresholds": list(curve.thresholds), "upper": list(curve.upper),
                       "lower": list(curve.lower),
                       "curve_csv": args.curve_csv}, started)
        return 0

    if command == "robust-ci":
        if args.query:
            with open(args.query) as fh:
                spec = json.load(fh)
            band = VarianceBand(*spec["band"])
            alpha = spec.get("alpha", 0.05)
            family = spec.get("family", "L")
            if "weights" in spec:
                query = ConfidenceQuery(weights=tuple(spec["weights"]), band=band,
                                        alpha=alpha, family=family)
            else:
                query = ConfidenceQuery.from_design(spec["design_x"], band, alpha, family)
        else:
            if not args.band:
                raise ValueError("robust-ci needs --query or --band with --design-x/--weights")
            band = parse_band(args.band)
            if args.design_x:
                query = ConfidenceQuery.from_design(parse_floats(args.design_x), band,
                                                    args.alpha, args.family)
            elif args.weights:
                query = ConfidenceQuery(weights=tuple(parse_floats(args.weights)), band=band,
                                        alpha=args.alpha, family=args.family)
            else:
                raise ValueError("robust-ci needs --design-x or --weights")
        cv = robust_critical_value(query)
        rng = RngStream(args.seed)
        policies = ("const-lo", "const-hi", "iid-uniform", "sign-feedback")
        if cv.policy is not None:
            policies = policies + ("dp-replay",)
        rows = coverage_simulation(query, cv.c, policies=policies, reps=args.reps,
                                   rng=rng, dp_policy=cv.policy)
        if args.curve_csv:
            cs = np.linspace(0.2 * cv.c, 2.0 * cv.c, 19)
            curve_rows = [(float(c), weighted_sum_capacity(query, float(c)).value) for c in cs]
            _write_csv(args.curve_csv, ("c", "upper_exceedance"), curve_rows)
        config = _config_from(args, command, {
            "weights": list(query.weights), "band": [query.band.sigma_lo, query.band.sigma_hi],
            "alpha": query.alpha, "family": query.family, "reps": args.reps,
        })
        payload = {
            "c": cv.c,
            "achieved_prob": cv.achieved_prob,
            "classical_c_at_band_top": classical_critical_value(query, query.band.sigma_hi),
            "coverage_table": [asdict(r) for r in rows],
            "curve_csv": args.curve_csv,
        }
        _emit(config, payload, started)
        return 0

    if command == "pde":
        phi = parse_phi(args.phi)
        band = parse_band(args.band)
        pde_config = PdeConfig.for_band(band, t_final=args.t, points=args.points)
        slice_ = solve_gheat(phi, pde_config)
        if args.csv_out:
            _write_csv(args.csv_out, ("x", "u"), zip(slice_.grid, slice_.values))
        config = _config_from(args, command, {"phi": args.phi, "band": args.band,
                                              "t": args.t, "points": args.points})
        _emit(config, {"value_at_zero": float(slice_(0.0)), "csv": args.csv_out}, started)
        return 0

    if command == "clt":
        phi = parse_phi(args.phi)
        band = parse_band(args.band)
        n_list = [int(v) for v in args.n_list.split(",")]
        rows = []
        if args.experiment == "semi-clt":
            reference, _ = upper_expectation(SemiGNormal(band), phi, use_shortcut=False)
            for n in n_list:
                value, _ = semi_g_clt_lhs(phi, band, n, noise=args.noise)
                rows.append(("semi-clt", f"n={n},noise={args.noise}", value, reference,
                             abs(value - reference)))
        elif args.experiment == "gnormal-clt":
            for row in gnormal_clt_check(phi, band, n_list):
                rows.append(("gnormal-clt", f"n={row.n}", row.dp_value, row.pde_value,
                             row.abs_error))
        else:
            for n in n_list:
                semi, seq = third_moment_emergence(band, n)
                rows.append(("third-moment", f"n={n},mode=semi-sequential", semi, 0.0, abs(semi)))
                rows.append(("third-moment", f"n={n},mode=sequential", seq, 0.0, abs(seq)))
        if args.csv_out:
            _write_csv(args.csv_out, ("experiment", "parameters", "value", "reference",
                                      "abs_error"), rows)
        config = _config_from(args, command, {"experiment": args.experiment, "phi": args.phi,
                                              "band": args.band, "n_list": n_list,
                                              "noise": args.noise})
        _emit(config, {"rows": [list(r) for r in rows], "csv": args.csv_out}, started)
        return 0

    if command == "demo-notgnormal":
        phi = parse_phi(args.phi)
        band = parse_band(args.band)
        report = max_mean_demo(phi, band, m=args.m, samples_per_block=args.samples,
                               rng=RngStream(args.seed))
        config = _config_from(args, command, {"phi": args.phi, "band": args.band,
                                              "m": args.m, "samples": args.samples})
        _emit(config, {
            "max_mean": report.max_mean,
            "argmax_sigma": report.argmax_sigma,
            "std_error": report.std_error,
            "band_value": report.band_value,
            "pde_value": report.pde_value,
        }, started)
        return 0

    raise ValueError(f"unknown command {command!r}")


def cli_dispatch(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run_verb(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(cli_dispatch())
