"""Junction displacement versus epsilon.

For a fixed set of frames, solves the inner problem (junction x in the ball,
second junction y on the sphere) at a ladder of epsilons and prints the
displacement from the standard position together with successive ratios.
Linear dependence on epsilon shows up as ratios close to the epsilon ratio.

    python3 scripts/scaling_study.py --config configs/ball_d2_conformal.json
"""

import argparse
import json

import numpy as np

from geonet import ball, config, sphere
from geonet.metrics import metric_from_spec
from geonet.search import start_frames


def displacement(metric, frame):
    if metric.space == "ball":
        return float(np.linalg.norm(ball.inner_solve_x(metric, frame).junction))
    y = sphere.inner_solve_y(metric, frame).junction
    return float(np.arccos(np.clip(-y @ frame[0], -1.0, 1.0)))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", required=True)
    p.add_argument("--eps", type=float, nargs="+", default=[3e-2, 1e-2, 3e-3, 1e-3, 3e-4])
    p.add_argument("--frames", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true", help="print a JSON table instead of text")
    args = p.parse_args(argv)

    cfg = config.load(args.config)
    n, k = (cfg.dim, 2) if cfg.space == "ball" else (cfg.dim + 1, 3)
    frames = start_frames(n, k, args.frames, args.seed)
    table = []
    for eps in args.eps:
        metric = metric_from_spec(dict(cfg.metric, epsilon=eps))
        table.append([displacement(metric, f) for f in frames])
    table = np.array(table)
    if args.json:
        print(json.dumps({"eps": args.eps, "displacement": table.tolist()}, indent=2))
        return
    print(f"{'eps':>9}  " + "  ".join(f"frame {i:<5}" for i in range(len(frames))))
    for i, eps in enumerate(args.eps):
        print(f"{eps:9.1e}  " + "  ".join(f"{v:11.4e}" for v in table[i]))
    print("ratios between consecutive epsilons:")
    for i in range(1, len(args.eps)):
        r = table[i - 1] / table[i]
        print(f"{args.eps[i - 1]:.0e}/{args.eps[i]:.0e}  expected {args.eps[i - 1] / args.eps[i]:5.2f}  "
              + "  ".join(f"{v:5.2f}" for v in r))


if __name__ == "__main__":
    main()
