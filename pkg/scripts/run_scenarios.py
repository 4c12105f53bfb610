"""Run the friendliness, congestion-balance and bufferbloat scenarios and print a table."""

import argparse
import time

from mptcpsim.cc_core import Algorithm
from mptcpsim.metrics import summarize
from mptcpsim.scenarios import bufferbloat, congestion_balance, friendliness, run_simulation

ALGS = [Algorithm.RENO, Algorithm.LIA, Algorithm.OLIA, Algorithm.BALIA, Algorithm.WVEGAS]


def timed(spec):
    t0 = time.perf_counter()
    s = summarize(run_simulation(spec))
    return s, time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--duration", type=float, default=60.0)
    args = ap.parse_args()
    kw = dict(seed=args.seed, duration=args.duration)

    print("friendliness: MPTCP / Reno goodput ratio")
    for alg in ALGS:
        s, wall = timed(friendliness(alg, **kw))
        mp, reno = s.flow_goodput_bps
        print(f"  {alg.value:7s} {mp / 1e6:6.2f} / {reno / 1e6:6.2f} Mb/s = {mp / reno:5.2f}x   ({wall:.1f} s)")

    print("congestion balance: share of MPTCP goodput on path A")
    for alg in ALGS:
        s, wall = timed(congestion_balance(alg, **kw))
        a, b = s.subflow_goodput_bps[0]
        print(f"  {alg.value:7s} A {a / 1e6:5.2f}  B {b / 1e6:5.2f} Mb/s  share {a / (a + b):.3f}   ({wall:.1f} s)")

    print("bufferbloat: queue = 2x BDP, one MPTCP flow")
    for alg in (Algorithm.LIA, Algorithm.WVEGAS):
        s, wall = timed(bufferbloat(alg, **kw))
        print(f"  {alg.value:7s} queue delay {s.link_mean_queue_delay_s['bottleneck'] * 1e3:6.1f} ms  "
              f"loss events {s.flow_loss_events[0]:3d}  goodput {s.flow_goodput_bps[0] / 1e6:5.2f} Mb/s   "
              f"({wall:.1f} s)")


if __name__ == "__main__":
    main()
