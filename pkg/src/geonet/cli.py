"""Command-line entry point: ``geonet <command> --config <path> [--out <dir>] [--seed <u64>]``.

Exit codes: 0 when at least one converged, verified network was produced (or
every oracle passed), 1 on total failure, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, config as cfgmod, report as rep
from .errors import ConfigError, GeonetError

log = logging.getLogger("geonet")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
COMMANDS = ("oracle-check", "solve-ball", "solve-sphere", "verify", "export")


def _seed(text):
    try:
        value = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value <= cfgmod.U64_MAX:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def build_parser():
    p = argparse.ArgumentParser(prog="geonet", description="Minimal triods in the ball and theta-networks "
                                "on the sphere for near-standard metrics.")
    p.add_argument("--version", action="version", version=f"geonet {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="run configuration (JSON)")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--seed", type=_seed, help="multistart seed (overrides multistart.seed)")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-start progress")
    return p


def _paths(config, out):
    base = Path(out) if out else Path(config.output.dir)
    return base, base / config.output.report, base / config.output.networks


def _print_table(reports):
    print(f"{'start':>5}  {'status':<9} {'class':>5}  {'value':>18}  {'|grad|':>9}  {'inertia':>9}  verified")
    for r in sorted(reports, key=lambda r: r.start):
        if not r.converged:
            print(f"{r.start:>5}  {'failed':<9} {'-':>5}  {'-':>18}  {'-':>9}  {'-':>9}  {r.message}")
            continue
        ine = f"{r.inertia['negative']}/{r.inertia['zero']}/{r.inertia['positive']}"
        ok = "yes" if r.verification.passed else f"no ({r.verification.worst:.1e})"
        print(f"{r.start:>5}  {'converged':<9} {r.class_id:>5}  {r.value:>18.12f}  {r.grad_norm:>9.2e}  "
              f"{ine:>9}  {ok}")


def cmd_solve(args, config, command):
    from . import ball, sphere

    space = "ball" if command == "solve-ball" else "sphere"
    if config.space != space:
        raise ConfigError(f"{command} needs space {space!r}, config has {config.space!r}", "space")
    metric = config.build_metric()
    opts = config.search_options()
    if space == "ball":
        reports, count = ball.search_critical(metric, opts, config.mesh_steps, config.ode.rtol, config.ode.atol)
    else:
        reports, count = sphere.search_critical_sphere(metric, opts, config.mesh_steps,
                                                       fd_step=config.bvp.fd_step,
                                                       bvp_max_iters=config.bvp.max_iters)
    for r in reports:
        if not r.converged:
            log.warning("start %d failed: %s", r.start, r.message)
    out_dir, report_path, csv_path = _paths(config, args.out)
    data = rep.build_report(command, config, reports, count)
    rep.write_report(data, report_path)
    good = [r for r in reports if r.converged and r.verification.passed]
    if good:
        csv_path.write_text(rep.export_polylines(data, metric, config.output.resolution))
    _print_table(reports)
    print(f"{len(good)} verified of {len(reports)} starts, {count} S3 classes -> {report_path}")
    return EXIT_OK if good else EXIT_FAIL


def cmd_oracle(args, config):
    from . import oracles

    results = [check(dim=config.dim, seed=config.multistart.seed) for check in oracles.SUITE]
    for r in results:
        print(r.line())
    out_dir, report_path, _ = _paths(config, args.out)
    data = {"schema": rep.SCHEMA, "tool": {"name": "geonet", "version": __version__},
            "command": "oracle-check", "config": config.to_dict(),
            "oracles": [{"name": r.name, "passed": r.passed, "error": r.error, "tol": r.tol,
                         "detail": r.detail} for r in results]}
    rep.write_report(data, report_path)
    passed = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} oracles passed")
    return EXIT_OK if passed else EXIT_FAIL


def _load_existing(config, args):
    _, report_path, csv_path = _paths(config, args.out)
    if not report_path.exists():
        raise GeonetError(f"no report at {report_path}; run solve-ball or solve-sphere first")
    return rep.load_report(report_path), report_path, csv_path


def cmd_verify(args, config):
    from .ball import verify_triod
    from .sphere import verify_theta

    data, report_path, _ = _load_existing(config, args)
    metric = config.build_metric()
    check = verify_triod if config.space == "ball" else verify_theta
    ok = 0
    for r in data["results"]:
        if r["status"] != "converged":
            continue
        try:
            v = check(metric, rep.rebuild_network(metric, r, config.mesh_steps), config.verify.tol)
        except GeonetError as exc:
            print(f"{r['start']:>5}  FAIL  rebuild failed: {exc}")
            continue
        ok += v.passed
        print(f"{r['start']:>5}  {'PASS' if v.passed else 'FAIL'}  worst residual {v.worst:.3e}")
    print(f"{ok} networks verified from {report_path}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_export(args, config):
    data, _, csv_path = _load_existing(config, args)
    text = rep.export_polylines(data, config.build_metric(), config.output.resolution)
    csv_path.write_text(text)
    print(f"wrote {text.count(chr(10)) - 1} rows to {csv_path}")
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("numba").setLevel(logging.WARNING)
    try:
        config = cfgmod.load(args.config)
        if args.seed is not None:
            config = config.with_seed(args.seed)
    except ConfigError as exc:
        print(f"config error in {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command in ("solve-ball", "solve-sphere"):
            return cmd_solve(args, config, args.command)
        if args.command == "oracle-check":
            return cmd_oracle(args, config)
        if args.command == "verify":
            return cmd_verify(args, config)
        return cmd_export(args, config)
    except ConfigError as exc:
        print(f"config error in {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GeonetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
