"""Command-line front end.

Subcommands: bounds, threshold, curve, scenarios, steering-check, simulate.
JSON output wraps results in a schema-versioned envelope whose inputs are
sufficient to reproduce the outputs exactly.  Exit codes: 0 on success
(negative rates are results, not errors), 2 on invalid flags, 3 when a
simulation tally cannot support a requested estimate.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .rates import (
    BOUND_FAMILIES,
    ChannelParams,
    bounds_report,
    scenario_table,
    steering_margin_s1,
    steering_margin_two_setting,
    model_error_rates,
    rate_1sdi_nops,
    rate_1sdi_ps,
    rate_di_mpa,
    rate_di_ps_r2,
)
from .simulate import (
    SCENARIOS,
    SUBSTITUTIONS,
    InsufficientStatisticsError,
    SimConfig,
    estimate_rates,
    extract_key,
    run_rounds,
    tally_to_csv,
)
from .thresholds import FREE_VARIABLES, CurveSpec, ThresholdQuery, curve, curve_to_csv, find_threshold

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INSUFFICIENT_STATS = 3
SCHEMA_VERSION = 1

THREADS_ENV_VAR = "STEERKEY_THREADS"


def _unit_interval(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{value} is outside [0, 1]")
    return value


def _open_unit_interval(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"{value} is outside (0, 1)")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{value} is not a positive integer")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0.0:
        raise argparse.ArgumentTypeError(f"{value} is not positive")
    return value


def _add_channel_flags(sub) -> None:
    sub.add_argument("--V", type=_unit_interval, default=1.0, help="channel visibility in [0, 1]")
    sub.add_argument("--eta-a", dest="eta_a", type=_unit_interval, default=1.0,
                     help="Alice's detection (or preparation) efficiency")
    sub.add_argument("--eta-b", dest="eta_b", type=_unit_interval, default=1.0,
                     help="Bob's detection efficiency")
    sub.add_argument("--q", type=_unit_interval, default=1.0,
                     help="incompatibility of Bob's measurements (1 = mutually unbiased)")


def _add_format_flag(sub, choices=("human", "json")) -> None:
    sub.add_argument("--format", choices=list(choices), default="human", help="output format")


def _round6(value):
    if value is None:
        return None
    return round(float(value), 6)


def _emit_json(command: str, inputs: dict, outputs: dict) -> None:
    envelope = {"schema": SCHEMA_VERSION, "command": command, "inputs": inputs, "outputs": outputs}
    print(json.dumps(envelope, sort_keys=True))


def _channel_inputs(args) -> dict:
    return {"V": args.V, "eta_a": args.eta_a, "eta_b": args.eta_b, "q": args.q}


def _params(args) -> ChannelParams:
    return ChannelParams(V=args.V, eta_a=args.eta_a, eta_b=args.eta_b, q=args.q)


def cmd_bounds(args) -> int:
    report = bounds_report(_params(args))
    outputs = {
        "normalization": report.normalization,
        "rates": {name: _round6(rate) for name, rate in report.rates.items()},
        "secure": {name: rate > 0.0 for name, rate in report.rates.items()},
        "steering_margin_s1": _round6(report.steering_margin_s1),
        "steering_margin_two_setting": _round6(report.steering_margin_two_setting),
    }
    if args.format == "json":
        _emit_json("bounds", _channel_inputs(args), outputs)
    else:
        print(f"normalization: {report.normalization}")
        for name in BOUND_FAMILIES:
            rate = outputs["rates"][name]
            flag = "secure" if outputs["secure"][name] else "insecure"
            print(f"{name:<16} {rate: .6f}  {flag}")
        print(f"{'steering_margin_s1':<28} {outputs['steering_margin_s1']: .6f}")
        print(f"{'steering_margin_two_setting':<28} {outputs['steering_margin_two_setting']: .6f}")
    return EXIT_OK


def cmd_threshold(args) -> int:
    query = ThresholdQuery(
        family=args.family, params=_params(args), free=args.free, tolerance=args.tolerance
    )
    root = find_threshold(query)
    value = None if root is None else round(root, 4)
    inputs = {**_channel_inputs(args), "family": args.family, "free": args.free,
              "tolerance": args.tolerance}
    if args.format == "json":
        _emit_json("threshold", inputs, {"threshold": value})
    elif value is None:
        print(f"threshold {args.free}: none (rate never positive)")
    else:
        print(f"threshold {args.free} = {value:.4f}")
    return EXIT_OK


def cmd_curve(args) -> int:
    v_list = args.V if args.V else [1.0]
    spec = CurveSpec(
        family=args.family,
        v_list=tuple(v_list),
        eta_grid=(args.eta_min, args.eta_max, args.eta_step),
        q=args.q,
    )
    rows = curve(spec)
    inputs = {"family": args.family, "V": list(spec.v_list), "eta_min": args.eta_min,
              "eta_max": args.eta_max, "eta_step": args.eta_step, "q": args.q}
    if args.format == "csv":
        sys.stdout.write(curve_to_csv(rows))
    elif args.format == "json":
        outputs = {"rows": [[_round6(v), _round6(eta), _round6(rate)] for v, eta, rate in rows]}
        _emit_json("curve", inputs, outputs)
    else:
        print("V        eta      rate")
        for v, eta, rate in rows:
            print(f"{v:.6f} {eta:.6f} {rate: .6f}")
    return EXIT_OK


def cmd_scenarios(args) -> int:
    rows = scenario_table(_params(args))
    if args.format == "json":
        outputs = {
            "normalization": "per_pair",
            "rows": [
                {
                    "row": r.row,
                    "label": r.label,
                    "trust": list(r.trust),
                    "family": r.family,
                    "rate": _round6(r.rate),
                    "threshold_id": r.threshold_id,
                }
                for r in rows
            ],
        }
        _emit_json("scenarios", _channel_inputs(args), outputs)
    else:
        print("row  label     AD  CA  S   CB  BD  family  rate       threshold")
        for r in rows:
            trust = "   ".join(r.trust)
            print(f"{r.row:<4} {r.label:<9} {trust}   {r.family:<7} {r.rate: .6f}  {r.threshold_id}")
    return EXIT_OK


def cmd_steering_check(args) -> int:
    m = model_error_rates(_params(args), "onesided")
    s1 = steering_margin_s1(m.q1_ps, m.q2, args.eta_a, args.q)
    two = steering_margin_two_setting(m.q1_ps, m.q2_ps, args.eta_a)
    outputs = {
        "steering_margin_s1": _round6(s1),
        "steering_margin_two_setting": _round6(two),
        "steering_s1": s1 > 0.0,
        "steering_two_setting": two > 0.0,
    }
    if args.format == "json":
        _emit_json("steering-check", _channel_inputs(args), outputs)
    else:
        print(f"steering_margin_s1          {outputs['steering_margin_s1']: .6f}  "
              f"({'steering' if outputs['steering_s1'] else 'no steering'})")
        print(f"steering_margin_two_setting {outputs['steering_margin_two_setting']: .6f}  "
              f"({'steering' if outputs['steering_two_setting'] else 'no steering'})")
    return EXIT_OK


def _effective_workers(requested: int) -> int:
    cap = os.environ.get(THREADS_ENV_VAR)
    if cap is None:
        return requested
    try:
        cap_value = int(cap)
    except ValueError as exc:
        raise ValueError(f"{THREADS_ENV_VAR} must be an integer, got {cap!r}") from exc
    return max(1, min(requested, cap_value))


def cmd_simulate(args) -> int:
    workers = _effective_workers(args.workers)
    config = SimConfig(
        params=_params(args),
        rounds=args.rounds,
        seed=args.seed,
        basis_bias=args.basis_bias,
        scenario=args.scenario,
        dark_click_prob=args.dark_click,
        alice_substitution=args.substitution,
        workers=workers,
    )
    tally, strings = run_rounds(config)
    if args.format == "csv":
        sys.stdout.write(tally_to_csv(tally))
        return EXIT_OK

    rates = estimate_rates(tally)
    outputs = {
        "rounds": args.rounds,
        "retained": tally.total_rounds(),
        "N": tally.N,
        "n": tally.n,
        "rates": {
            "q1_ps": _round6(rates.q1_ps),
            "q2": _round6(rates.q2),
            "q1": _round6(rates.q1),
            "q2_ps": _round6(rates.q2_ps),
            "S": _round6(rates.s),
        },
    }
    if config.scenario == "onesided":
        outputs["bounds"] = {
            "onesided_ps_r1": _round6(rate_1sdi_ps(rates.q1_ps, rates.q2, args.eta_a, args.q)),
            "onesided_nops": _round6(rate_1sdi_nops(rates.q1, rates.q2)),
        }
        key = extract_key(strings, rates, config.params, seed=args.seed)
        outputs["key"] = {"length": key.length, "status": key.status, "hex": key.hex}
    else:
        outputs["bounds"] = {
            "di_mpa": _round6(rate_di_mpa(rates.q1, rates.s)),
            "di_ps_r2": _round6(rate_di_ps_r2(rates.q1_ps, rates.s, args.eta_a, args.eta_b)),
        }

    inputs = {
        **_channel_inputs(args),
        "rounds": args.rounds,
        "seed": args.seed,
        "scenario": args.scenario,
        "dark_click": args.dark_click,
        "basis_bias": args.basis_bias,
        "substitution": args.substitution,
        "workers": workers,
    }
    if args.format == "json":
        _emit_json("simulate", inputs, outputs)
    else:
        print(f"rounds    {outputs['rounds']}")
        print(f"retained  {outputs['retained']}")
        print(f"N         {outputs['N']}")
        print(f"n         {outputs['n']}")
        for name in ("q1_ps", "q2", "q1", "q2_ps", "S"):
            value = outputs["rates"][name]
            shown = "n/a" if value is None else f"{value: .6f}"
            print(f"{name:<9} {shown}")
        for name, value in outputs["bounds"].items():
            print(f"bound {name:<15} {value: .6f}")
        if "key" in outputs:
            print(f"key length  {outputs['key']['length']}")
            print(f"key status  {outputs['key']['status']}")
            print(f"key hex     {outputs['key']['hex']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="steerkey",
        description="Key-rate bounds, steering thresholds and protocol simulation "
        "for one-sided device-independent QKD.",
    )
    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    sub = subparsers.add_parser("bounds", help="evaluate every bound family at a channel model")
    _add_channel_flags(sub)
    _add_format_flag(sub)
    sub.set_defaults(handler=cmd_bounds)

    sub = subparsers.add_parser("threshold", help="find the efficiency threshold of a bound")
    _add_channel_flags(sub)
    sub.add_argument("--family", choices=list(BOUND_FAMILIES), required=True)
    sub.add_argument("--free", choices=list(FREE_VARIABLES), default="eta_a",
                     help="variable scanned over [0, 1]; 'eta' ties eta_a = eta_b")
    sub.add_argument("--tolerance", type=_positive_float, default=1e-6)
    _add_format_flag(sub)
    sub.set_defaults(handler=cmd_threshold)

    sub = subparsers.add_parser("curve", help="rate-vs-efficiency table for plotting")
    sub.add_argument("--family", choices=list(BOUND_FAMILIES), required=True)
    sub.add_argument("--V", type=_unit_interval, action="append",
                     help="visibility; repeat for several curves (default 1.0)")
    sub.add_argument("--q", type=_unit_interval, default=1.0)
    sub.add_argument("--eta-min", dest="eta_min", type=_unit_interval, default=0.0)
    sub.add_argument("--eta-max", dest="eta_max", type=_unit_interval, default=1.0)
    sub.add_argument("--eta-step", dest="eta_step", type=_positive_float, default=0.005)
    _add_format_flag(sub, choices=("human", "json", "csv"))
    sub.set_defaults(handler=cmd_curve)

    sub = subparsers.add_parser("scenarios", help="per-pair bounds for the seven trust scenarios")
    _add_channel_flags(sub)
    _add_format_flag(sub)
    sub.set_defaults(handler=cmd_scenarios)

    sub = subparsers.add_parser("steering-check", help="evaluate the steering margins")
    _add_channel_flags(sub)
    _add_format_flag(sub)
    sub.set_defaults(handler=cmd_steering_check)

    sub = subparsers.add_parser("simulate", help="Monte Carlo protocol simulation")
    _add_channel_flags(sub)
    sub.add_argument("--rounds", type=_positive_int, default=100_000)
    sub.add_argument("--seed", type=int, required=True, help="RNG seed (required for reproducibility)")
    sub.add_argument("--scenario", choices=list(SCENARIOS), default="onesided")
    sub.add_argument("--dark-click", dest="dark_click", type=_unit_interval, default=0.0,
                     help="per-counter dark-click probability on Bob's side")
    sub.add_argument("--basis-bias", dest="basis_bias", type=_open_unit_interval, default=0.5,
                     help="probability of choosing the key basis, per party")
    sub.add_argument("--substitution", choices=list(SUBSTITUTIONS), default="predetermined_list",
                     help="Alice's bit rule on missed detections")
    sub.add_argument("--workers", type=_positive_int, default=1,
                     help=f"simulation workers (capped by ${THREADS_ENV_VAR})")
    _add_format_flag(sub, choices=("human", "json", "csv"))
    sub.set_defaults(handler=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except InsufficientStatisticsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT_STATS
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
