"""Command-line surface.

Subcommands: keyrate, scan, deviation, simulate, reproduce, optimize.
Flags mirror the run configuration; a key=value config file (``--config`` or
the ``PMQKD_CONFIG`` environment variable) supplies defaults that explicit
flags override.  Outputs are data only (CSV or JSON), never rendered plots.

Every command exits nonzero on error with a one-line diagnostic of the form
``pmqkd: error [<code>] <message>``; codes are listed in ``--help``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import defaults
from .channel import ChannelSpec
from .errors import DomainError, PmqkdError
from .ingest import (
    load_bundled_record,
    parse_tally_csv,
    reproduce_key_rate,
    result_to_json,
)
from .optimizer import SearchBounds, optimize
from .pipeline import expected_key_rate
from .security import SecurityBudget
from .simulator import ProtocolParams, simulate, write_tally_csv

EXIT_CODES = {
    "usage": 2,
    "domain": 3,
    "schema": 4,
    "no-data": 5,
    "undefined-rate": 6,
    "internal": 70,
}

_EPILOG = (
    "error codes: "
    + ", ".join(f"{code}={num}" for code, num in EXIT_CODES.items())
    + "\nconfig file: key=value lines (long option names with dashes or "
    "underscores); flags override it.  Default path: $PMQKD_CONFIG."
)


def _add_channel_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("channel")
    loss = g.add_mutually_exclusive_group()
    loss.add_argument("--loss-db", type=float, default=None,
                      help="total channel loss in dB (split over both arms)")
    loss.add_argument("--distance-km", type=float, default=None,
                      help="total fiber length; converted at --alpha dB/km")
    g.add_argument("--alpha", type=float, default=defaults.ALPHA_DB_PER_KM,
                   help="attenuation coefficient in dB/km")
    g.add_argument("--eta-d", type=float, default=defaults.ETA_D,
                   help="detector efficiency")
    g.add_argument("--p-d", type=float, default=defaults.P_D,
                   help="dark count probability per pulse per detector")
    g.add_argument("--e-d", type=float, default=defaults.E_D,
                   help="misalignment error probability")


def _add_protocol_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("protocol")
    g.add_argument("--mu", type=float, default=None,
                   help="total pulse intensity (mu_a = mu_b = mu/2)")
    g.add_argument("--m-slices", type=int, default=defaults.M_SLICES,
                   help="number of random phase slices (6 or 8)")
    g.add_argument("--n-rounds", type=float, default=defaults.N_ROUNDS,
                   help="number of rounds N")
    g.add_argument("--p-s", type=float, default=defaults.P_S,
                   help="sampling fraction for parameter estimation")
    g.add_argument("--f-ec", type=float, default=defaults.F_EC,
                   help="error correction efficiency factor")


def _add_budget_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("security budget")
    g.add_argument("--eps", type=float, default=defaults.EPS_CHERNOFF,
                   help="Chernoff failure probability per application")
    g.add_argument("--eps-ka", type=float, default=defaults.EPS_KATO,
                   help="Kato bound failure probability")
    g.add_argument("--xi", type=float, default=defaults.XI,
                   help="privacy amplification surplus bits")
    g.add_argument("--xi-prime", type=float, default=defaults.XI_PRIME,
                   help="error verification bits")


def _add_output_args(p: argparse.ArgumentParser, fmt_default: str = "json") -> None:
    g = p.add_argument_group("output")
    g.add_argument("--output", "-o", default=None,
                   help="output path (default: stdout)")
    g.add_argument("--format", choices=("csv", "json"), default=fmt_default,
                   help="serialization format")


def _channel_from(args) -> ChannelSpec:
    if args.loss_db is None and args.distance_km is None:
        raise DomainError("one of --loss-db / --distance-km is required")
    return ChannelSpec(
        eta_d=args.eta_d, p_d=args.p_d, e_d=args.e_d,
        total_loss_db=args.loss_db, distance_km=args.distance_km,
        alpha_db_per_km=args.alpha,
    )


def _budget_from(args) -> SecurityBudget:
    return SecurityBudget(eps=args.eps, eps_ka=args.eps_ka, xi=args.xi,
                          xi_prime=args.xi_prime)


def _require(args, *names) -> None:
    for name in names:
        if getattr(args, name) is None:
            raise DomainError(f"--{name.replace('_', '-')} is required")


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(path, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def _result_lines(result) -> str:
    return (
        f"rate      R   = {result.rate:.6e}\n"
        f"key bits  ell = {result.ell:.6e}\n"
        f"sifted    n   = {result.n_mu:.6e}\n"
        f"QBER      E_b = {result.e_b:.6e}\n"
        f"phase err     = {result.ep_m:.6e} (with concentration: {result.ep_m_bar:.6e})"
    )


def _flatten(prefix: str, value, rows: list[tuple[str, str]]) -> None:
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, rows)
    elif isinstance(value, (list, tuple)):
        for i, v in enumerate(value):
            _flatten(f"{prefix}[{i}]", v, rows)
    else:
        rows.append((prefix, repr(value)))


def _serialize_result(result, fmt: str) -> str:
    if fmt == "json":
        return result_to_json(result)
    rows: list[tuple[str, str]] = []
    _flatten("", result.to_dict(), rows)
    return "key,value\n" + "\n".join(f"{k},{v}" for k, v in rows)


def cmd_keyrate(args) -> int:
    _require(args, "mu")
    channel = _channel_from(args)
    result = expected_key_rate(
        channel, args.mu, m_slices=args.m_slices, n_rounds=args.n_rounds,
        p_s=args.p_s, f=args.f_ec, budget=_budget_from(args),
    )
    print(_result_lines(result))
    if args.output:
        _emit(_serialize_result(result, args.format), args.output)
    return 0


def _scan_point(payload):
    (d_km, alpha, eta_d, p_d, e_d, n_rounds, m, p_s, f, budget, mu_fixed,
     optimize_ps, seed) = payload
    channel = ChannelSpec(eta_d=eta_d, p_d=p_d, e_d=e_d, distance_km=d_km,
                          alpha_db_per_km=alpha)
    if mu_fixed is not None:
        res = expected_key_rate(channel, mu_fixed, m_slices=m,
                                n_rounds=n_rounds, p_s=p_s, f=f, budget=budget)
        return d_km, mu_fixed, p_s, res.rate
    opt = optimize(channel, n_rounds, m, budget=budget, f=f,
                   fixed_p_s=None if optimize_ps else p_s, seed=seed)
    return d_km, opt.mu_opt, opt.p_s_opt, opt.rate_opt


def cmd_scan(args) -> int:
    if args.step <= 0:
        raise DomainError("--step must be positive")
    budget = _budget_from(args)
    distances = []
    d = args.d_min
    while d <= args.d_max + 1e-9:
        distances.append(round(d, 9))
        d += args.step
    payloads = [
        (d, args.alpha, args.eta_d, args.p_d, args.e_d, args.n_rounds,
         args.m_slices, args.p_s, args.f_ec, budget, args.mu,
         args.optimize_ps, args.seed)
        for d in distances
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_scan_point, payloads))
    else:
        results = [_scan_point(p) for p in payloads]
    lines = ["distance_km,loss_db,mu,p_s,rate"]
    for d_km, mu, p_s, rate in results:  # map preserves submission order
        lines.append(f"{d_km!r},{d_km * args.alpha!r},{mu!r},{p_s!r},{rate!r}")
    _emit("\n".join(lines), args.output)
    return 0


def cmd_deviation(args) -> int:
    if args.step <= 0:
        raise DomainError("--step must be positive")
    budget = _budget_from(args)
    m = args.m_slices
    header = ["loss_db", "mu"] + [f"delta_{k}" for k in range(0, m, 2)]
    header += ["sum_delta", "ep_m", "sum_delta_over_ep_m"]
    lines = [",".join(header)]
    loss = args.loss_min
    while loss <= args.loss_max + 1e-9:
        channel = ChannelSpec(eta_d=args.eta_d, p_d=args.p_d, e_d=args.e_d,
                              total_loss_db=loss)
        if args.mu is not None:
            mu = args.mu
        else:
            opt = optimize(channel, args.n_rounds, m, budget=budget,
                           f=args.f_ec, fixed_p_s=args.p_s, seed=args.seed)
            mu = opt.mu_opt
        res = expected_key_rate(channel, mu, m_slices=m,
                                n_rounds=args.n_rounds, p_s=args.p_s,
                                f=args.f_ec, budget=budget)
        devs = res.breakdown.deviations
        total = sum(devs)
        row = [repr(loss), repr(mu)] + [repr(v) for v in devs]
        row += [repr(total), repr(res.ep_m), repr(total / res.ep_m)]
        lines.append(",".join(row))
        loss = round(loss + args.step, 9)
    _emit("\n".join(lines), args.output)
    return 0


def cmd_simulate(args) -> int:
    _require(args, "mu", "output")
    channel = _channel_from(args)
    params = ProtocolParams(
        mu=args.mu, m_slices=args.m_slices, n_rounds=int(args.n_rounds),
        p_s=args.p_s, channel=channel, f=args.f_ec, budget=_budget_from(args),
    )
    tally = simulate(params, args.seed, batch_size=args.batch_size,
                     n_jobs=args.jobs)
    write_tally_csv(tally, args.output, loss_db=channel.loss_db())
    q = tally.n_det / tally.n_rounds
    print(f"simulated {tally.n_rounds} rounds: n_det={tally.n_det} "
          f"(gain {q:.3e}), doubles={tally.n_double}, "
          f"sifted={tally.n_sifted}, sampled errors={tally.m_s}")
    print(f"tally written to {args.output}")
    return 0


def cmd_reproduce(args) -> int:
    if args.input is None and args.bundled is None:
        raise DomainError("one of --input / --bundled is required")
    if args.input is not None:
        record = parse_tally_csv(args.input)
    else:
        record = load_bundled_record(args.bundled)
    result = reproduce_key_rate(
        record, budget=_budget_from(args), q_source=args.q_source,
        f=args.f_ec, eta_d=args.eta_d, p_d=args.p_d,
    )
    print(f"dataset: {record.source} ({record.loss_db} dB, mu={record.mu})")
    if result.m_s_reconstructed:
        print(f"note: sampled error count reconstructed from the QBER "
              f"(m_s = {result.m_s:.0f})")
    print(_result_lines(result))
    if args.output:
        _emit(_serialize_result(result, args.format), args.output)
    return 0


def cmd_optimize(args) -> int:
    channel = _channel_from(args)
    bounds = SearchBounds(mu=(args.mu_min, args.mu_max))
    opt = optimize(
        channel, args.n_rounds, args.m_slices, budget=_budget_from(args),
        bounds=bounds, f=args.f_ec,
        fixed_p_s=None if args.optimize_ps else args.p_s,
        method=args.method, seed=args.seed,
    )
    print(f"mu_opt   = {opt.mu_opt:.6e}")
    print(f"p_s_opt  = {opt.p_s_opt:.6f}")
    print(f"rate_opt = {opt.rate_opt:.6e}")
    print(f"evaluations = {opt.evaluations}, feasible = {opt.feasible}")
    if args.output:
        payload = {
            "mu_opt": opt.mu_opt, "p_s_opt": opt.p_s_opt,
            "rate_opt": opt.rate_opt, "evaluations": opt.evaluations,
            "feasible": opt.feasible,
            "trace": [list(t) for t in opt.trace] if args.trace else None,
        }
        _emit(json.dumps(payload, indent=2), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pmqkd",
        description="Finite-key analysis, Monte Carlo simulation and data "
                    "reproduction for phase-matching QKD without intensity "
                    "modulation.",
        epilog=_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--config", default=None,
                        help="key=value config file (default: $PMQKD_CONFIG)")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("keyrate", help="single-point finite-key rate with "
                                       "full breakdown")
    _add_channel_args(p); _add_protocol_args(p); _add_budget_args(p)
    _add_output_args(p)
    p.set_defaults(func=cmd_keyrate)

    p = sub.add_parser("scan", help="rate vs distance curve "
                                    "(CSV: distance_km,loss_db,mu,p_s,rate)")
    _add_channel_args(p); _add_protocol_args(p); _add_budget_args(p)
    _add_output_args(p, fmt_default="csv")
    p.add_argument("--d-min", type=float, required=True, help="start distance, km")
    p.add_argument("--d-max", type=float, required=True, help="end distance, km")
    p.add_argument("--step", type=float, required=True, help="distance step, km")
    p.add_argument("--optimize-ps", action="store_true",
                   help="co-optimize p_s instead of keeping --p-s fixed")
    p.add_argument("--jobs", type=int, default=1, help="parallel scan workers")
    p.add_argument("--seed", type=int, default=0, help="optimizer seed")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser(
        "deviation",
        help="discretization penalties vs loss (CSV: loss_db,mu,"
             "delta_0,delta_2,...,sum_delta,ep_m,sum_delta_over_ep_m)",
    )
    _add_channel_args(p); _add_protocol_args(p); _add_budget_args(p)
    _add_output_args(p, fmt_default="csv")
    p.add_argument("--loss-min", type=float, default=10.0)
    p.add_argument("--loss-max", type=float, default=50.0)
    p.add_argument("--step", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0, help="optimizer seed")
    p.set_defaults(func=cmd_deviation)

    p = sub.add_parser("simulate", help="Monte Carlo run; writes a tally CSV")
    _add_channel_args(p); _add_protocol_args(p); _add_budget_args(p)
    p.add_argument("--seed", type=int, default=0, help="simulation seed")
    p.add_argument("--batch-size", type=int, default=2_000_000,
                   help="rounds per RNG batch (part of the deterministic "
                        "stream layout)")
    p.add_argument("--jobs", type=int, default=1, help="parallel batch workers")
    p.add_argument("--output", "-o", required=False, default=None,
                   help="tally CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reproduce", help="key rate from an ingested tally CSV")
    _add_budget_args(p)
    p.add_argument("--input", "-i", default=None, help="tally CSV path")
    p.add_argument("--bundled", type=int, choices=sorted(defaults.BUNDLED_TALLIES),
                   default=None, help="use a packaged reference dataset (dB)")
    p.add_argument("--q-source", choices=("channel-model", "counts"),
                   default="channel-model",
                   help="gain entering the phase-error denominators")
    p.add_argument("--f-ec", type=float, default=defaults.F_EC)
    p.add_argument("--eta-d", type=float, default=defaults.ETA_D)
    p.add_argument("--p-d", type=float, default=defaults.P_D)
    _add_output_args(p)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("optimize", help="best (mu, p_s) at one channel point")
    _add_channel_args(p); _add_protocol_args(p); _add_budget_args(p)
    p.add_argument("--mu-min", type=float, default=defaults.MU_BOUNDS[0])
    p.add_argument("--mu-max", type=float, default=defaults.MU_BOUNDS[1])
    p.add_argument("--optimize-ps", action="store_true",
                   help="co-optimize p_s instead of keeping --p-s fixed")
    p.add_argument("--method", choices=("evolution", "pattern"),
                   default="evolution")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", action="store_true",
                   help="include the evaluation trace in the JSON output")
    p.add_argument("--output", "-o", default=None, help="JSON output path")
    p.set_defaults(func=cmd_optimize)

    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Turn config-file entries into leading CLI tokens (flags override)."""
    path = None
    if "--config" in argv:
        idx = argv.index("--config")
        if idx + 1 >= len(argv):
            return argv
        path = argv[idx + 1]
    else:
        path = os.environ.get("PMQKD_CONFIG")
    if not path:
        return argv
    if not os.path.exists(path):
        raise DomainError(f"config file not found: {path}")
    extra: list[str] = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            flag = "--" + key.strip().replace("_", "-")
            extra.extend([flag, value.strip()])
    # Config tokens go right after the subcommand so explicit flags win.
    for i, tok in enumerate(argv):
        if not tok.startswith("-") and tok != path:
            return argv[: i + 1] + extra + argv[i + 1 :]
    return argv + extra


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    try:
        argv = _apply_config(parser, list(argv))
        args = parser.parse_args(argv)
        return args.func(args)
    except PmqkdError as exc:
        sys.stderr.write(f"pmqkd: error [{exc.code}] {exc}\n")
        return EXIT_CODES.get(exc.code, EXIT_CODES["internal"])
    except ArithmeticError as exc:
        sys.stderr.write(f"pmqkd: error [internal] {exc}\n")
        return EXIT_CODES["internal"]


if __name__ == "__main__":
    sys.exit(main())
