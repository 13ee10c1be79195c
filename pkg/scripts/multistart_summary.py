"""Run the multistart search for a config and summarise the classes found.

Prints one row per S3 class (value, inertia, member count) and a histogram of
failure messages. Unlike ``geonet solve-*`` it writes nothing to disk unless
``--out`` is given.

    python3 scripts/multistart_summary.py --config configs/sphere_d2_conformal.json --starts 16
"""

import argparse
import collections
import dataclasses
import time
from pathlib import Path

from geonet import ball, config, report, sphere


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", required=True)
    p.add_argument("--starts", type=int, help="override multistart.count")
    p.add_argument("--seed", type=int, help="override multistart.seed")
    p.add_argument("--out", help="also write report.json here")
    args = p.parse_args(argv)

    cfg = config.load(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    opts = cfg.search_options()
    if args.starts:
        opts = dataclasses.replace(opts, starts=args.starts)
    metric = cfg.build_metric()
    t0 = time.perf_counter()
    if cfg.space == "ball":
        reports, count = ball.search_critical(metric, opts, cfg.mesh_steps, cfg.ode.rtol, cfg.ode.atol)
    else:
        reports, count = sphere.search_critical_sphere(metric, opts, cfg.mesh_steps, fd_step=cfg.bvp.fd_step,
                                                       bvp_max_iters=cfg.bvp.max_iters)
    secs = time.perf_counter() - t0
    print(f"{cfg.space} d={cfg.dim}: {len(reports)} starts in {secs:.1f}s ({secs / len(reports):.2f}s/start)")
    print(f"{'class':>5}  {'value':>18}  {'inertia -/0/+':>13}  members")
    for c in report.class_table(reports):
        ine = c["inertia"]
        print(f"{c['class_id']:>5}  {c['value']:18.12f}  {ine['negative']:>4}/{ine['zero']}/{ine['positive']:<6}  "
              f"{c['members']}")
    fails = collections.Counter(r.message.split(" at ")[0] for r in reports if not r.converged)
    for msg, n in fails.most_common():
        print(f"failed x{n}: {msg}")
    unverified = [r.start for r in reports if r.converged and not r.verification.passed]
    if unverified:
        print(f"converged but not verified: {unverified}")
    if args.out:
        path = Path(args.out) / cfg.output.report
        report.write_report(report.build_report(f"solve-{cfg.space}", cfg, reports, count), path)
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
