"""Spread of the friendliness ratio and path-A share across seeds and send-jitter settings."""

import argparse
from dataclasses import replace
from multiprocessing import Pool

from mptcpsim.cc_core import Algorithm
from mptcpsim.metrics import summarize
from mptcpsim.scenarios import congestion_balance, friendliness, run_simulation


def measure(job):
    kind, alg, seed, jitter = job
    build = friendliness if kind == "friendliness" else congestion_balance
    s = summarize(run_simulation(replace(build(alg, seed=seed), send_jitter=jitter)))
    if kind == "friendliness":
        return s.flow_goodput_bps[0] / s.flow_goodput_bps[1]
    a, b = s.subflow_goodput_bps[0]
    return a / (a + b)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kind", choices=["friendliness", "balance"], default="friendliness")
    ap.add_argument("--seeds", type=int, default=8)
    ap.add_argument("--jitter", type=float, nargs="+", default=[0.0, 0.005])
    ap.add_argument("--algs", nargs="+", default=["Reno", "LIA", "OLIA", "BALIA"])
    ap.add_argument("--procs", type=int, default=4)
    args = ap.parse_args()

    algs = [Algorithm.parse(a) for a in args.algs]
    jobs = [(args.kind, a, s, j) for j in args.jitter for a in algs for s in range(1, args.seeds + 1)]
    with Pool(args.procs) as pool:
        values = pool.map(measure, jobs)
    results = dict(zip(jobs, values))
    for j in args.jitter:
        for a in algs:
            xs = [results[(args.kind, a, s, j)] for s in range(1, args.seeds + 1)]
            print(f"jitter {j * 1e3:4.1f} ms  {a.value:7s} min {min(xs):.3f}  max {max(xs):.3f}  "
                  f"mean {sum(xs) / len(xs):.3f}")


if __name__ == "__main__":
    main()
