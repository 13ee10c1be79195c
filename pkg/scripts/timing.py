"""Cost of the building blocks: one functional evaluation, one inner solve, one full start.

    python3 scripts/timing.py --config configs/sphere_d3_conformal.json
"""

import argparse
import time

import numpy as np

from geonet import ball, config, sphere
from geonet.search import find_critical, start_frames


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", required=True)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--starts", type=int, default=2)
    args = p.parse_args(argv)

    cfg = config.load(args.config)
    metric = cfg.build_metric()
    opts = cfg.search_options()
    if cfg.space == "ball":
        fun = ball.BallFunctional(metric, cfg.mesh_steps)
        n, k = cfg.dim, 2

        def center(frame):
            return np.zeros(cfg.dim)
    else:
        fun = sphere.SphereFunctional(metric, cfg.mesh_steps, fd_step=cfg.bvp.fd_step, max_iters=cfg.bvp.max_iters)
        n, k = cfg.dim + 1, 3

        def center(frame):
            return -frame[0]

    frames = start_frames(n, k, args.starts, cfg.multistart.seed)
    f = frames[0]
    fun.evaluate(center(f), f)  # compile / load cached kernels
    _, warm = fun.evaluate(center(f), f)
    cold = best_of(lambda: fun.evaluate(center(f), f), args.repeat)
    hot = best_of(lambda: fun.evaluate(center(f), f, warm), args.repeat)
    print(f"evaluate: cold {cold * 1e3:.2f} ms, warm {hot * 1e3:.2f} ms (mesh {cfg.mesh_steps})")
    for frame in frames:
        fun.calls = 0
        t0 = time.perf_counter()
        try:
            cp = find_critical(fun, frame, opts, center, center)
            status = f"|grad|={cp.grad_norm:.1e} value={cp.value:.10f} {cp.iterations}"
        except Exception as exc:  # report and continue timing the other starts
            status = f"failed: {exc}"
        secs = time.perf_counter() - t0
        print(f"start: {secs:6.2f}s  {fun.calls} evaluations  {status}")


if __name__ == "__main__":
    main()
