"""Command-line front end.

Reports go to stdout as JSON (or CSV where noted); logs go to stderr.
Every JSON report carries a ``manifest`` recording the command, domain,
parameters, seed, tool version and a timestamp.  The timestamp comes from
``SOURCE_DATE_EPOCH`` when set and is the Unix epoch otherwise, so repeated
runs print byte-identical output.

Exit codes:

    0  success; compact-consistent; constant-consistent
    1  usage error, bad parameters or input outside the domain
    2  not-compact
    3  inconclusive, bounded-only or inconsistent
    4  unbounded-suspected or divergence-suspected
    5  the map failed self-map validation
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__, compop, mc as mcmod
from .domains import (
    WeightParams,
    as_points,
    check_inside,
    domain_beta_int,
    domain_beta_min,
    format_number,
    format_point,
    parse_domain,
    parse_point,
    structure_of,
    weighted_kernel,
)
from .errors import BergcompError, ImageOutsideDomain
from .geometry import bergman_distance
from .maps import parse_map
from .sampling import McConfig

log = logging.getLogger("bergcomp")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOT_COMPACT = 2
EXIT_INCONCLUSIVE = 3
EXIT_UNBOUNDED = 4
EXIT_NOT_SELF_MAP = 5

VERDICT_EXIT = {
    compop.COMPACT_CONSISTENT: EXIT_OK,
    compop.NOT_COMPACT: EXIT_NOT_COMPACT,
    compop.INCONCLUSIVE: EXIT_INCONCLUSIVE,
    compop.BOUNDED_ONLY: EXIT_INCONCLUSIVE,
    compop.UNBOUNDED_SUSPECTED: EXIT_UNBOUNDED,
    mcmod.CONSTANT_CONSISTENT: EXIT_OK,
    mcmod.INCONSISTENT: EXIT_INCONCLUSIVE,
    mcmod.DIVERGENCE_SUSPECTED: EXIT_UNBOUNDED,
}

SEED_ENV = "BERGCOMP_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which would collide with not-compact
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    command: str
    domain: str
    parameters: dict = field(default_factory=dict)
    seed: int = 0
    tool_version: str = __version__
    timestamp: str = ""

    def __post_init__(self):
        if not self.timestamp:
            self.timestamp = _timestamp()


def _timestamp() -> str:
    epoch = int(os.environ.get("SOURCE_DATE_EPOCH", "0") or 0)
    return datetime.fromtimestamp(epoch, timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _mc(args) -> McConfig:
    seed = args.seed if args.seed is not None else _default_seed()
    samples = args.samples if args.samples is not None else 100_000
    try:
        return McConfig(samples=samples, seed=seed, workers=args.workers,
                        tolerance=args.tolerance)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _manifest(args, domain: str, **params) -> dict:
    mc = _mc(args)
    params = {"samples": mc.samples, "workers": mc.workers, "tolerance": mc.tolerance, **params}
    return asdict(RunManifest(args.command, domain, params, mc.seed))


def _emit_json(obj: dict, out):
    out.write(json.dumps(obj, indent=2, allow_nan=False))
    out.write("\n")


def _write_csv(path: str, header: list, rows: list, out):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    if path == "-":
        out.write(buf.getvalue())
    else:
        with open(path, "w", newline="") as fh:
            fh.write(buf.getvalue())


def _point(spec, text: str) -> np.ndarray:
    try:
        z = parse_point(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return check_inside(spec, as_points(z, spec.dimension))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_constants(args, out) -> int:
    text = args.domain_pos or args.domain
    if not text:
        raise UsageError("constants needs a domain spec")
    spec = parse_domain(text)
    report = {
        "manifest": asdict(RunManifest("constants", str(spec), {}, 0)),
        "beta_min": format_number(domain_beta_min(spec)),
        "beta_int": format_number(domain_beta_int(spec)),
        "dimension": spec.dimension,
        "structure": structure_of(spec).to_dict(),
    }
    _emit_json(report, out)
    return EXIT_OK


def cmd_kernel(args, out) -> int:
    spec = parse_domain(args.domain)
    spec.require_kernel()
    z, w = _point(spec, args.z), _point(spec, args.w)
    wp = WeightParams.for_domain(spec, args.beta)
    k = complex(weighted_kernel(spec, wp, z, w))
    report = {
        "manifest": asdict(RunManifest("kernel", str(spec), {"z": args.z, "w": args.w,
                                                               "beta": args.beta}, 0)),
        "z": format_point(z), "w": format_point(w), "beta": wp.beta, "c_beta": wp.c_beta,
        "kernel": {"re": k.real, "im": k.imag},
    }
    _emit_json(report, out)
    return EXIT_OK


def cmd_distance(args, out) -> int:
    spec = parse_domain(args.domain)
    z, w = _point(spec, args.z), _point(spec, args.w)
    report = {
        "manifest": asdict(RunManifest("distance", str(spec), {"z": args.z, "w": args.w}, 0)),
        "z": format_point(z), "w": format_point(w),
        "distance": float(bergman_distance(spec, z, w)),
    }
    _emit_json(report, out)
    return EXIT_OK


def cmd_verify_identity(args, out) -> int:
    spec = parse_domain(args.domain)
    spec.require_kernel()
    mc = _mc(args)
    probes = None
    if args.probes:
        probes = [_point(spec, p) for p in args.probes.split(";")]
    rep = mcmod.verify_identity(spec, args.alpha, args.beta, probes, mc,
                                 divergence_probe=args.divergence_probe, shells=args.shells)
    report = {"manifest": _manifest(args, str(spec), alpha=args.alpha, beta=args.beta,
                                    probes=args.probes, divergence_probe=args.divergence_probe,
                                    shells=args.shells),
              **rep.to_dict()}
    if args.csv and rep.shell_sums:
        rows = [[format_point(rep.probe_points[i]), lo, hi, e.value, e.std_error]
                for i, lo, hi, e in rep.shell_sums]
        _write_csv(args.csv, ["probe", "depth_lo", "depth_hi", "partial_sum", "std_error"], rows, out)
    elif args.csv:
        rows = [[format_point(p), r.value, r.std_error] for p, r in zip(rep.probe_points, rep.ratios)]
        _write_csv(args.csv, ["probe", "ratio", "std_error"], rows, out)
    if args.csv != "-":
        _emit_json(report, out)
    return VERDICT_EXIT[rep.verdict]


def _parse_map_for(spec, text):
    return parse_map(text, spec.dimension)


def cmd_compactness(args, out) -> int:
    spec = parse_domain(args.domain)
    spec.require_kernel()
    mc = _mc(args)
    phi = _parse_map_for(spec, args.map)
    manifest = _manifest(args, str(spec), map=args.map, beta0=args.beta0, beta=args.beta,
                         shells=args.shells, radius=args.radius,
                         points_per_shell=args.points_per_shell,
                         theta_lo=args.theta_lo, theta_hi=args.theta_hi)
    val = compop.validate_self_map(spec, phi, mc.with_samples(min(mc.samples, 20000)))
    if not val.passed:
        log.error("map is not a self-map of %s: phi(%s) = %s", spec,
                  format_point(val.witness), format_point(val.image))
        _emit_json({"manifest": manifest, "validation": val.to_dict()}, out)
        return EXIT_NOT_SELF_MAP
    rep = compop.diagnose(spec, phi, args.beta0, args.beta, args.shells, args.radius, mc,
                          points_per_shell=args.points_per_shell, theta_lo=args.theta_lo,
                          theta_hi=args.theta_hi, validate=False)
    if args.csv:
        rows = [[s.depth, s.max_ratio, s.mean_mu_hat, s.mean_mu_tilde, s.mean_f]
                for s in rep.shell_profile]
        _write_csv(args.csv, ["depth", "max_ratio", "mean_mu_hat", "mean_mu_tilde", "mean_F"],
                   rows, out)
    if args.csv != "-":
        _emit_json({"manifest": manifest, **rep.to_dict()}, out)
    return VERDICT_EXIT[rep.verdict]


def cmd_carleson(args, out) -> int:
    spec = parse_domain(args.domain)
    spec.require_kernel()
    mc = _mc(args)
    phi = _parse_map_for(spec, args.map)
    manifest = _manifest(args, str(spec), map=args.map, beta=args.beta, radius=args.radius,
                         shells=args.shells, points_per_shell=args.points_per_shell)
    val = compop.validate_self_map(spec, phi, mc.with_samples(min(mc.samples, 20000)))
    if not val.passed:
        log.error("map is not a self-map of %s: phi(%s) = %s", spec,
                  format_point(val.witness), format_point(val.image))
        _emit_json({"manifest": manifest, "validation": val.to_dict()}, out)
        return EXIT_NOT_SELF_MAP
    wp = WeightParams.for_domain(spec, args.beta)
    depths = compop.default_depths(args.shells)
    rng = compop.substream(mc.seed, compop.stream_key("carleson-points", str(spec), str(phi)))
    rows = []
    for t in depths:
        for z in compop.shell_points(spec, float(t), args.points_per_shell, rng):
            est = compop.pullback_functionals(spec, wp, phi, z, args.radius, mc)
            rows.append((format_point(z), float(t), est))
    header = ["point", "depth", "mu_tilde", "mu_tilde_se", "mu_hat", "mu_hat_se", "F", "F_se"]
    table = [[p, t, e.mu_tilde.value, e.mu_tilde.std_error, e.mu_hat.value, e.mu_hat.std_error,
              e.f_r_beta.value, e.f_r_beta.std_error] for p, t, e in rows]
    if args.json:
        report = {"manifest": manifest, "beta": wp.beta, "radius": args.radius,
                  "rows": [{"point": p, "depth": t, "mu_tilde": e.mu_tilde.to_dict(),
                            "mu_hat": e.mu_hat.to_dict(), "F": e.f_r_beta.to_dict()}
                           for p, t, e in rows]}
        if args.csv and args.csv != "-":
            _write_csv(args.csv, header, table, out)
        _emit_json(report, out)
    else:
        _write_csv(args.csv or "-", header, table, out)
    return EXIT_OK


def cmd_selftest(args, out) -> int:
    from .selftest import format_table, run_selftest

    seed = args.seed if args.seed is not None else _default_seed()
    results = run_selftest(seed=seed, fast=args.fast, workers=args.workers)
    ok = all(r.passed for r in results)
    if args.json:
        _emit_json({"manifest": asdict(RunManifest("selftest", "", {"fast": args.fast}, seed)),
                    "passed": ok, "results": [r.to_dict() for r in results]}, out)
    else:
        out.write(format_table(results) + "\n")
    return EXIT_OK if ok else EXIT_INCONCLUSIVE


def cmd_schema(args, out) -> int:
    from .schemas import SCHEMAS

    _emit_json(SCHEMAS[args.name], out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # registered on the main parser and on every subcommand; the subcommand
    # copies use SUPPRESS so they only override when actually given
    p = argparse.ArgumentParser(add_help=False)
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    g = p.add_argument_group("global options")
    g.add_argument("--samples", type=int, default=d(None),
                   help="Monte Carlo samples (per shell for compactness; default 100000)")
    g.add_argument("--seed", type=int, default=d(None),
                   help=f"master seed (default ${SEED_ENV} or 0)")
    g.add_argument("--workers", type=int, default=d(1), help="worker threads")
    g.add_argument("--tolerance", type=float, default=d(0.03),
                   help="coefficient-of-variation threshold for verify-identity")
    g.add_argument("--json", action="store_true", default=d(False),
                   help="emit JSON (the default except for carleson and selftest)")
    g.add_argument("--csv", metavar="PATH", default=d(None),
                   help="also write the tabular part as CSV to PATH ('-' for stdout)")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bergcomp", parents=[_global_flags(False)],
                     description="Bergman kernels, weighted Bergman spaces and "
                                 "composition-operator diagnostics.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = [_global_flags(True)]

    p = sub.add_parser("constants", parents=common, help="beta_min, beta_int and Siegel data")
    p.add_argument("domain_pos", nargs="?", metavar="DOMAIN")
    p.add_argument("--domain")
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("kernel", parents=common, help="evaluate the weighted Bergman kernel")
    p.add_argument("--domain", required=True)
    p.add_argument("--z", required=True, help="point, e.g. '0.5+0.1i,0'")
    p.add_argument("--w", required=True)
    p.add_argument("--beta", type=float, default=0.0)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("distance", parents=common, help="Bergman distance between two points")
    p.add_argument("--domain", required=True)
    p.add_argument("--z", required=True)
    p.add_argument("--w", required=True)
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("verify-identity", parents=common,
                       help="Monte Carlo check of the transported integral identity")
    p.add_argument("--domain", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--probes", help="';'-separated probe points")
    p.add_argument("--divergence-probe", action="store_true",
                   help="accept alpha <= beta + beta_int and look for divergence")
    p.add_argument("--shells", type=int, default=12)
    p.set_defaults(func=cmd_verify_identity)

    for name, func, helptext in (("compactness", cmd_compactness, "composition-operator verdict"),
                                 ("carleson", cmd_carleson, "per-point pull-back functionals")):
        p = sub.add_parser(name, parents=common, help=helptext)
        p.add_argument("--domain", required=True)
        p.add_argument("--map", required=True, help="e.g. 'z1^2 + 0.1' or 'z1, 0'")
        if name == "compactness":
            p.add_argument("--beta0", type=float, default=0.0)
            p.add_argument("--theta-lo", type=float, default=compop.THETA_LO)
            p.add_argument("--theta-hi", type=float, default=compop.THETA_HI)
        p.add_argument("--beta", type=float, default=1.0)
        p.add_argument("--shells", type=int, default=8)
        p.add_argument("--radius", type=float, default=1.0)
        p.add_argument("--points-per-shell", type=int, default=4)
        p.set_defaults(func=func)

    p = sub.add_parser("selftest", parents=common, help="run the built-in invariant suites")
    p.add_argument("--fast", action="store_true", help="reduced suite")
    p.set_defaults(func=cmd_selftest)

    from .schemas import SCHEMAS

    p = sub.add_parser("schema", parents=common, help="print the JSON Schema of a report")
    p.add_argument("name", choices=sorted(SCHEMAS))
    p.set_defaults(func=cmd_schema)
    return parser


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING,
                        format="bergcomp: %(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out)
    except ImageOutsideDomain as exc:
        log.error("%s", exc)
        return EXIT_NOT_SELF_MAP
    except (BergcompError, UsageError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
