"""Command-line front end: validate, family, value, policy, table, certify, verify."""

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any

from pydantic import ValidationError

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from fsccert.certificates import (
    ThresholdQuery,
    certificate_search,
    certificate_to_record,
    limsup_slack_audit,
    render_certificate,
    verify_certificate,
    write_certificate,
)
from fsccert.channel import (
    DelayedActivationSpec,
    UnifilarChannel,
    Variant,
    closed_form_normalized_value,
    format_rational,
    make_delayed_activation,
    to_rational,
)
from fsccert.config import LOG_LEVEL, REPORT_PRECISION_BITS, RunConfig, resolve_config
from fsccert.encoding import MAGIC, channel_hash, decode_channel, parse_channel_text, render_channel_text
from fsccert.errors import (
    BudgetExceededError,
    CertificateMismatchError,
    ChannelValidationError,
    FsccertError,
    MalformedEncodingError,
)
from fsccert.heuristic import heuristic_value
from fsccert.law import induced_joint_law, render_law_text, trajectory_probability
from fsccert.measures import directed_information, dyadic
from fsccert.policy import (
    histories_at,
    l1_distance,
    nearest_grid_point,
    parse_policy_text,
    reachable_histories,
    render_policy_text,
    to_policy,
)
from fsccert.records import value_to_record
from fsccert.solver import approx_normalized, approx_value, evaluate_net, normalize, sandwich_check

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2
EXIT_BUDGET = 3


def load_channel(path: str | Path) -> UnifilarChannel:
    """Read a channel file in the fscv1 text format or the binary encoding."""
    data = Path(path).read_bytes()
    if data.startswith(MAGIC):
        return decode_channel(data)
    return parse_channel_text(data.decode("utf-8"))


def emit(record: dict[str, Any]) -> None:
    """Print one machine-readable record as a JSON line."""
    print(json.dumps(record, sort_keys=True))


def emit_config(config: RunConfig, command: str) -> None:
    emit({"record": "config", "command": command, **config.result_fields()})


def budget_message(e: BudgetExceededError) -> str:
    message = f"Budget exceeded: {e.required_expr} policies required, budget {e.budget}"
    if e.feasible_k is not None:
        message += f"; largest feasible k is {e.feasible_k}"
    return message


# ============ Subcommands ============

def cmd_validate(args: argparse.Namespace) -> int:
    """Validate a channel file; exit 0 iff valid."""
    try:
        channel = load_channel(args.path)
    except ChannelValidationError as e:
        print(f"INVALID: {args.path}")
        for violation in e.violations:
            print(f"  - {violation}")
        return EXIT_INVALID
    except MalformedEncodingError as e:
        print(f"INVALID: {args.path}: {e}")
        return EXIT_INVALID
    print(f"VALID: {args.path} ({channel.num_states} states)")
    print(f"  hash: {channel_hash(channel)}")
    return EXIT_OK


def cmd_family(args: argparse.Namespace) -> int:
    """Write a delayed-activation channel file and print its hash."""
    if args.N < 1:
        print(f"Error: N must be >= 1, got {args.N}", file=sys.stderr)
        return EXIT_USAGE
    spec = DelayedActivationSpec(args.N, Variant(args.variant))
    channel = make_delayed_activation(spec)
    text = render_channel_text(channel)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"Wrote {spec.variant.value} N={spec.N} channel ({channel.num_states} states) to {args.out}")
    else:
        print(text, end="")
    print(f"hash: {channel_hash(channel)}", file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def _compute_value(channel: UnifilarChannel, config: RunConfig):
    n = config.n
    if config.mode == "report":
        bits = _precision_bits(config)
        value = evaluate_net(channel, n, config.M, dyadic(bits), config.budget,
                             config.workers, config.wall_time)
        return normalize(value, bits) if config.normalized else value
    solve = approx_normalized if config.normalized else approx_value
    return solve(
        channel, n, config.k, config.budget,
        strategy=config.strategy, workers=config.workers, wall_time=config.wall_time,
        seed=config.seed, restarts=config.restarts, iterations=config.iterations,
    )


def _precision_bits(config: RunConfig) -> int:
    return config.k if config.k is not None else REPORT_PRECISION_BITS


def cmd_value(args: argparse.Namespace) -> int:
    """Certified (target or report-bound) or heuristic value of one channel."""
    config = args.config_resolved
    if config.n is None:
        print("Error: --n is required", file=sys.stderr)
        return EXIT_USAGE
    if config.mode == "target" and config.k is None:
        print("Error: target mode needs --k", file=sys.stderr)
        return EXIT_USAGE
    if config.mode == "report" and config.M is None:
        print("Error: report mode needs --M", file=sys.stderr)
        return EXIT_USAGE
    channel = load_channel(args.path)
    records = config.output == "records"
    if records:
        emit_config(config, "value")

    if config.mode == "heuristic":
        result = heuristic_value(channel, config.n, config.restarts, config.iterations, config.seed)
        if records:
            emit({
                "record": "heuristic",
                "channel_hash": channel_hash(channel),
                "horizon": config.n,
                "value": format_rational(result.value),
                "float_value": result.float_value,
                "iterations": result.iterations,
                "restarts": result.restarts,
                "seed": result.seed,
                "policy": render_policy_text(result.policy),
            })
        else:
            print(f"Heuristic lower bound on V_{config.n}: {result.value} (~{float(result.value):.6f})")
            print(f"  float objective: {result.float_value:.9f}")
            print(f"  sweeps: {result.iterations}, restarts: {result.restarts}, seed: {result.seed}")
        return EXIT_OK

    value = _compute_value(channel, config)
    if records:
        emit({"record": "value", **value_to_record(value).model_dump()})
    else:
        label = f"a_{config.n}" if value.normalized else f"V_{config.n}"
        interval = value.interval
        print(f"{label} = {format_rational(value.estimate)} +/- {format_rational(value.radius)}")
        print(f"  interval: [{format_rational(interval.lower)}, {format_rational(interval.upper)}]"
              f" (~[{float(interval.lower):.6f}, {float(interval.upper):.6f}])")
        p = value.provenance
        print(f"  strategy: {p.strategy}, policies evaluated: {p.policies_evaluated}")
        if p.M is not None:
            print(f"  M={p.M}, eta={p.eta}, delta={p.delta}, sum omega={p.modulus_sum}")
    if args.sandwich:
        _sandwich(channel, value, config, records)
    return EXIT_OK


def _sandwich(channel: UnifilarChannel, value, config: RunConfig, records: bool) -> None:
    """Heuristic <= certified (<= closed form) gate; raises ConsistencyError on failure."""
    heuristic = heuristic_value(channel, config.n, config.restarts, config.iterations, config.seed)
    verdict = sandwich_check(channel, config.n, heuristic, value)
    if records:
        emit({
            "record": "sandwich",
            "consistent": verdict.consistent,
            "heuristic": format_rational(heuristic.value),
            "checks": list(verdict.checks),
        })
    else:
        print(f"  sandwich: heuristic {float(heuristic.value):.6f}; " + ", ".join(verdict.checks))


def cmd_table(args: argparse.Namespace) -> int:
    """Closed-form a_n for good and bad family channels, with optional certified brackets."""
    config = args.config_resolved
    n_min, n_max = config.n_range or (1, 6)
    records = config.output == "records"
    if records:
        emit_config(config, "table")
    for N in args.N:
        good = DelayedActivationSpec(N, Variant.GOOD)
        bad = DelayedActivationSpec(N, Variant.BAD)
        if not records:
            print(f"\n{'='*60}")
            print(f"Delayed activation N={N} (indistinguishable for n <= {N + 1})")
            print(f"{'='*60}")
            print(f"  {'n':>3}  {'good a_n':>10}  {'bad a_n':>10}")
        for n in range(n_min, n_max + 1):
            row = {
                "record": "table",
                "N": N,
                "n": n,
                "good": format_rational(closed_form_normalized_value(good, n)),
                "bad": format_rational(closed_form_normalized_value(bad, n)),
                "indistinguishable": n <= N + 1,
            }
            if args.brackets:
                for name, spec in (("good_bracket", good), ("bad_bracket", bad)):
                    row[name] = _bracket_cell(spec, n, config)
            if records:
                emit(row)
            else:
                marker = "  *" if row["indistinguishable"] else ""
                extra = ""
                if args.brackets:
                    extra = f"  {row['good_bracket']}  {row['bad_bracket']}"
                print(f"  {n:>3}  {row['good']:>10}  {row['bad']:>10}{extra}{marker}")
    if not records:
        print("\n  * prefix region: both variants give a_n = 0")
    if args.audit is not None:
        return _audit(args.N, to_rational(args.audit), args.k_max, n_max, records)
    return EXIT_OK


def _audit(N_values: list[int], q, k_max: int, n_max: int, records: bool) -> int:
    """Limsup-with-slack audit on the closed forms; exit 1 if any scan disagrees."""
    consistent = True
    for N in N_values:
        for variant in Variant:
            audit = limsup_slack_audit(DelayedActivationSpec(N, variant), q, k_max, n_max)
            consistent = consistent and audit.status != "closed-form-mismatch"
            if records:
                emit({
                    "record": "audit",
                    "N": N,
                    "variant": variant.value,
                    "q": format_rational(q),
                    "status": audit.status,
                    "least_n": [row.least_n for row in audit.rows],
                })
            else:
                least = " ".join("-" if row.least_n is None else str(row.least_n) for row in audit.rows)
                print(f"  audit {variant.value} N={N} q={format_rational(q)}: {audit.status} (least n per k: {least})")
    return EXIT_OK if consistent else EXIT_INVALID


def _bracket_cell(spec: DelayedActivationSpec, n: int, config: RunConfig) -> str:
    k = config.k if config.k is not None else 10
    try:
        value = approx_normalized(make_delayed_activation(spec), n, k, config.budget,
                                  strategy=config.strategy, seed=config.seed,
                                  restarts=config.restarts, iterations=config.iterations)
    except BudgetExceededError:
        return "over-budget"
    interval = value.interval
    return f"[{format_rational(interval.lower)}, {format_rational(interval.upper)}]"


def cmd_policy(args: argparse.Namespace) -> int:
    """Replay a policy file: certified directed information and optional law details."""
    config = args.config_resolved
    channel = load_channel(args.path)
    policy = parse_policy_text(Path(args.policy).read_text(encoding="utf-8"))
    n = policy.horizon
    precision = dyadic(_precision_bits(config))
    enclosure = directed_information(channel, policy, n, precision)
    if config.normalized:
        enclosure = enclosure.scale(Fraction(1, n))
    unreachable = sum(histories_at(t) - len(reachable_histories(channel, t)) for t in range(1, n + 1))
    records = config.output == "records"
    if records:
        emit_config(config, "policy")

    row: dict[str, Any] = {
        "record": "policy",
        "channel_hash": channel_hash(channel),
        "horizon": n,
        "normalized": bool(config.normalized),
        "lower": format_rational(enclosure.lower),
        "upper": format_rational(enclosure.upper),
        "unreachable_coordinates": unreachable,
    }
    if args.grid is not None:
        nearest = nearest_grid_point(policy, args.grid)
        grid_enclosure = directed_information(channel, to_policy(nearest), n, precision)
        row["grid"] = {
            "M": args.grid,
            "l1_distance": format_rational(l1_distance(policy, nearest)),
            "lower": format_rational(grid_enclosure.lower),
            "upper": format_rational(grid_enclosure.upper),
        }
    if args.trajectory is not None:
        xs, ys = (tuple(int(c) for c in bits) for bits in args.trajectory)
        mass = sum(
            (trajectory_probability(channel, policy, xs, ys, s1) for s1 in channel.states), Fraction(0)
        )
        row["trajectory"] = {"x": args.trajectory[0], "y": args.trajectory[1], "mass": format_rational(mass)}
    if args.law and records:
        row["law"] = render_law_text(induced_joint_law(channel, policy, n))

    if records:
        emit(row)
    else:
        label = f"I(X^{n} -> Y^{n})" + (f" / {n}" if config.normalized else "")
        print(f"{label} in {enclosure}")
        print(f"  coordinates at unreachable histories: {unreachable}")
        if "grid" in row:
            grid = row["grid"]
            print(f"  nearest 1/{grid['M']} grid point at l1 distance {grid['l1_distance']}: "
                  f"[{grid['lower']}, {grid['upper']}]")
        if "trajectory" in row:
            print(f"  P(x={args.trajectory[0]}, y={args.trajectory[1]}) = {row['trajectory']['mass']}")
    if args.law and not records:
        print(render_law_text(induced_joint_law(channel, policy, n)), end="")
    return EXIT_OK


def cmd_certify(args: argparse.Namespace) -> int:
    """Search for a holding threshold certificate; exit 0 iff one is found."""
    config = args.config_resolved
    if config.k is None:
        print("Error: --k is required", file=sys.stderr)
        return EXIT_USAGE
    channel = load_channel(args.path)
    q = to_rational(args.q)
    query = ThresholdQuery.of(channel, q)
    records = config.output == "records"
    if records:
        emit_config(config, "certify")

    outcome = certificate_search(
        query, config.k, args.n_max, args.M_max, config.budget,
        mode=config.approx_mode, strategy=config.strategy, workers=config.workers,
        seed=config.seed, restarts=config.restarts, iterations=config.iterations,
    )
    if not outcome.found:
        if records:
            emit({"record": "exhausted", "frontier": [list(cell) for cell in outcome.frontier]})
        else:
            print(f"No certificate within n <= {args.n_max}, M <= {args.M_max} "
                  f"({len(outcome.frontier)} cells examined); this proves nothing about the capacity")
        return EXIT_USAGE

    certificate = outcome.certificate
    if args.out:
        write_certificate(certificate, args.out)
    if records:
        emit({"record": "certificate", **certificate_to_record(certificate).model_dump()})
    else:
        print(f"Certificate found: n={certificate.n}, M={certificate.M}, r={format_rational(certificate.r)}")
        print(f"  proves a_{certificate.n} > {format_rational(q)} - 2^-{config.k}")
        if args.out:
            print(f"  written to {args.out}")
        else:
            print(render_certificate(certificate), end="")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    """Replay a certificate file; exit 0 iff the replay matches."""
    raw = Path(args.certificate).read_bytes()
    channel = load_channel(args.channel) if args.channel else None
    try:
        replayed = verify_certificate(raw, channel, workers=args.config_resolved.workers)
    except CertificateMismatchError as e:
        print(f"REJECTED: {e}")
        return EXIT_INVALID
    print(f"VERIFIED: n={replayed.n}, M={replayed.M}, verdict={replayed.verdict.value}")
    return EXIT_OK


# ============ Argument parsing ============

def _bit_string(value: str) -> str:
    if not value or set(value) - {"0", "1"}:
        raise argparse.ArgumentTypeError(f"expected a bit string, got {value!r}")
    return value


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return number


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--budget", type=int, help="Maximum number of policies to evaluate")
    parser.add_argument("--wall-time", dest="wall_time", type=float, help="Wall-time budget in seconds")
    parser.add_argument("--workers", type=int, help="Worker processes for net evaluation")
    parser.add_argument("--seed", type=int, help="Seed for the heuristic optimizer")
    parser.add_argument("--restarts", type=int, help="Heuristic restarts")
    parser.add_argument("--iterations", type=int, help="Heuristic coordinate sweeps")
    parser.add_argument("--strategy", choices=["auto", "grid", "bracket"], help="Certified solver route")
    parser.add_argument("--records", action="store_const", const="records", dest="output",
                        help="Emit JSON-lines records instead of tables")
    parser.add_argument("--config", help="JSON config file (overrides FSCCERT_CONFIG)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fscv", description="Certified finite-horizon directed-information values"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="Validate a channel file")
    p.add_argument("path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("family", help="Generate a delayed-activation channel")
    p.add_argument("N", type=int)
    p.add_argument("variant", choices=[v.value for v in Variant])
    p.add_argument("--out", help="Output channel file (default: stdout)")
    p.set_defaults(func=cmd_family)

    p = sub.add_parser("value", help="Certified or heuristic finite-horizon value")
    p.add_argument("path")
    p.add_argument("--n", type=int, required=True, help="Horizon")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--k", type=int, help="Target precision exponent (certified target mode)")
    mode.add_argument("--M", type=int, help="Grid resolution (certified report-bound mode)")
    mode.add_argument("--heuristic", action="store_true", help="Heuristic lower bound only")
    p.add_argument("--normalized", action="store_true", default=None, help="Report a_n = V_n / n")
    p.add_argument("--sandwich", action="store_true",
                   help="Check a heuristic lower bound against the certified value")
    _add_run_options(p)
    p.set_defaults(func=cmd_value)

    p = sub.add_parser("policy", help="Replay a policy file on a channel")
    p.add_argument("path", help="Channel file")
    p.add_argument("policy", help="Policy file (t <t> x <bits> y <bits> p1 <rat> lines)")
    p.add_argument("--k", type=int, help="Enclosure width exponent (default 20)")
    p.add_argument("--normalized", action="store_true", default=None, help="Divide by the horizon")
    p.add_argument("--grid", type=_positive_int, metavar="M", help="Also evaluate the nearest 1/M grid policy")
    p.add_argument("--trajectory", nargs=2, type=_bit_string, metavar=("X", "Y"),
                   help="Probability of one input/output trajectory, e.g. 010 011")
    p.add_argument("--law", action="store_true", help="Dump the induced joint law")
    _add_run_options(p)
    p.set_defaults(func=cmd_policy)

    p = sub.add_parser("table", help="Closed-form family table")
    p.add_argument("--N", type=int, nargs="+", default=[1, 2])
    p.add_argument("--n-min", dest="n_min", type=int, default=1)
    p.add_argument("--n-max", dest="n_max", type=int, default=6)
    p.add_argument("--brackets", action="store_true", help="Add certified brackets next to the closed form")
    p.add_argument("--k", type=int, help="Precision exponent for brackets")
    p.add_argument("--audit", metavar="Q", help="Limsup-with-slack audit of the closed forms at threshold Q")
    p.add_argument("--k-max", dest="k_max", type=int, default=6, help="Largest slack exponent for --audit")
    _add_run_options(p)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("certify", help="Search for a threshold certificate")
    p.add_argument("path")
    p.add_argument("--q", required=True, help="Threshold rational, e.g. 1/4")
    p.add_argument("--k", type=int, required=True, help="Slack exponent")
    p.add_argument("--n-max", dest="n_max", type=int, default=8)
    p.add_argument("--M-max", dest="M_max", type=int, default=12)
    p.add_argument("--mode", choices=["target", "report"], dest="approx_mode")
    p.add_argument("--out", help="Certificate output file")
    _add_run_options(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("verify", help="Replay a certificate file")
    p.add_argument("certificate")
    p.add_argument("--channel", help="Channel file the certificate must match")
    _add_run_options(p)
    p.set_defaults(func=cmd_verify)
    return parser


def _flags(args: argparse.Namespace) -> dict[str, Any]:
    flags = {
        key: getattr(args, key, None)
        for key in ("k", "M", "n", "budget", "wall_time", "workers", "seed", "restarts",
                    "iterations", "strategy", "output", "approx_mode", "normalized")
    }
    if args.command == "value":
        if getattr(args, "heuristic", False):
            flags["mode"] = "heuristic"
        elif args.M is not None:
            flags["mode"] = "report"
        else:
            flags["mode"] = "target"
    if args.command == "table":
        flags["n_range"] = (args.n_min, args.n_max)
    return flags


def main(argv: list[str] | None = None) -> int:
    """Run one subcommand and return its exit code."""
    logging.basicConfig(
        level=LOG_LEVEL,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.config_resolved = resolve_config(_flags(args), config_file=getattr(args, "config", None))
    except (ValidationError, ValueError) as e:
        print(f"Error: invalid configuration: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        return args.func(args)
    except BudgetExceededError as e:
        print(budget_message(e), file=sys.stderr)
        return EXIT_BUDGET
    except (ChannelValidationError, MalformedEncodingError) as e:
        print(f"Error: invalid input: {e}", file=sys.stderr)
        return EXIT_INVALID
    except FsccertError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
