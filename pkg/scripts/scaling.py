"""Wall time per stage against n on plane-plane scenes, with a log-log fit."""

import argparse

import numpy as np

from acev.config import AcevConfig
from acev.synthetic import plane_plane
from acev.traversal import segment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[500, 1000, 2000, 4000])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rows = []
    print("n,graph,spectrum,split,traversal")
    for n in args.sizes:
        t = segment(plane_plane(n, 0.01, args.seed).points, AcevConfig()).timings
        rows.append(t)
        print(f"{n},{t['graph']:.3f},{t['spectrum']:.3f},{t['split']:.3f},{t['traversal']:.3f}", flush=True)
    logn = np.log(args.sizes)
    for stage in ("graph", "spectrum", "traversal"):
        slope = np.polyfit(logn, np.log([max(r[stage], 1e-6) for r in rows]), 1)[0]
        print(f"# {stage}: exponent {slope:.2f}")


if __name__ == "__main__":
    main()
