"""Print wVegas per-round decisions on an idle path to show when the drain backoff fires."""

import argparse
from dataclasses import replace

from mptcpsim import cc_core
from mptcpsim.cc_core import Algorithm
from mptcpsim.scenarios import Simulation, symmetric_disjoint


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--duration", type=float, default=8.0)
    ap.add_argument("--jitter", type=float, default=0.0)
    ap.add_argument("--rounds", type=int, default=40)
    args = ap.parse_args()

    rows = []
    original = cc_core.wvegas_on_round

    def traced(conn, r):
        before = conn.subflows[r]
        after = original(conn, r)
        if r == 0:
            rows.append((before, after))
        return after

    cc_core.wvegas_on_round = traced
    try:
        spec = replace(symmetric_disjoint(Algorithm.WVEGAS, duration=args.duration), send_jitter=args.jitter)
        Simulation(spec).run()
    finally:
        cc_core.wvegas_on_round = original

    print("cwnd    excursion_ms  q_ms     delta  -> cwnd   backoff")
    for before, after in rows[: args.rounds]:
        exc = (before.rtt_round_avg - before.rtt_min) * 1e3
        q = "-" if before.queue_delay_est is None else f"{before.queue_delay_est * 1e3:.3f}"
        fired = after.cwnd < before.cwnd - 1.0 - 1e-9
        print(f"{before.cwnd:6.2f}  {exc:11.3f}  {q:>7s}  {cc_core.wvegas_delta(before):6.2f}  "
              f"{after.cwnd:6.2f}   {'yes' if fired else ''}")


if __name__ == "__main__":
    main()
