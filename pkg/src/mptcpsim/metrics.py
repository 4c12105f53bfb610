"""Fairness and throughput metrics over simulation traces."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Iterable, Optional

from .scenarios import RunResult


class MetricError(ValueError):
    pass


def jain_index(rates: Iterable[float]) -> float:
    xs = [float(x) for x in rates]
    if not xs:
        raise MetricError("Jain index of an empty set")
    if any(x < 0 or math.isnan(x) for x in xs):
        raise MetricError("rates must be non-negative")
    sq = sum(x * x for x in xs)
    if sq == 0:
        raise MetricError("Jain index is undefined when every rate is zero")
    return sum(xs) ** 2 / (len(xs) * sq)


def _bin(t: float, interval: float) -> int:
    # 0.3 / 0.1 is 2.9999999999999996
    return math.floor(t / interval + 1e-9)


def throughput_series(trace, interval: float, duration: Optional[float] = None) -> dict:
    """Per-flow rate samples in bits/s.

    ``trace`` holds ``(time, flow, bits)`` or ``(time, flow, subflow, bits)``
    records. Bin ``k`` covers ``[k*interval, (k+1)*interval)``; with
    ``duration`` the series length is fixed, otherwise it ends at the last
    non-empty bin.
    """
    if not interval > 0:
        raise MetricError("interval must be positive")
    rows = list(trace)
    if not rows:
        return {}
    if duration is not None:
        nbins = max(1, math.ceil(duration / interval - 1e-9))
    else:
        nbins = _bin(max(r[0] for r in rows), interval) + 1
    bins: dict = defaultdict(lambda: [0.0] * nbins)
    for row in rows:
        t, flow, bits = row[0], row[1], row[-1]
        k = min(_bin(t, interval), nbins - 1)
        bins[flow][k] += bits
    return {flow: [b / interval for b in series] for flow, series in sorted(bins.items())}


@dataclass
class RunSummary:
    flow_names: list
    flow_goodput_bps: list
    subflow_goodput_bps: list
    subflow_mean_cwnd: list
    fairness_flows: list
    jain_index: Optional[float]
    link_mean_queue_delay_s: dict
    link_drops: dict
    link_delivered_bits: dict
    link_capacity_bits: dict
    flow_loss_events: list
    flow_timeouts: list
    sim_time: float
    warmup_s: float
    seed: int
    rng_algorithm: str
    events: int

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(result: RunResult) -> RunSummary:
    spec = result.spec
    warm = spec.warmup_fraction * spec.duration
    span = spec.duration - warm

    flow_bits = [0.0] * len(result.connections)
    sub_bits = [[0.0] * len(c.txs) for c in result.connections]
    for t, fid, r, bits in result.deliveries():
        if t >= warm:
            flow_bits[fid] += bits
            sub_bits[fid][r] += bits
    goodput = [b / span for b in flow_bits]
    sub_goodput = [[b / span for b in row] for row in sub_bits]

    cw_sum = [[0.0] * len(c.txs) for c in result.connections]
    cw_n = [[0] * len(c.txs) for c in result.connections]
    for t, fid, r, cwnd, *_ in result.trace:
        if t >= warm:
            cw_sum[fid][r] += cwnd
            cw_n[fid][r] += 1
    mean_cwnd = [[s / n if n else 0.0 for s, n in zip(srow, nrow)] for srow, nrow in zip(cw_sum, cw_n)]

    fair = list(spec.fairness_flows) if spec.fairness_flows is not None else list(range(len(goodput)))
    try:
        jain = jain_index([goodput[i] for i in fair])
    except MetricError:
        jain = None

    links = result.links
    return RunSummary(
        flow_names=[spec.flow_name(i) for i in range(len(spec.flows))],
        flow_goodput_bps=goodput,
        subflow_goodput_bps=sub_goodput,
        subflow_mean_cwnd=mean_cwnd,
        fairness_flows=fair,
        jain_index=jain,
        link_mean_queue_delay_s={n: l.mean_queue_delay() for n, l in links.items()},
        link_drops={n: l.drops for n, l in links.items()},
        link_delivered_bits={n: l.delivered_bytes * 8 for n, l in links.items()},
        link_capacity_bits={n: l.rate * result.sim_time for n, l in links.items()},
        flow_loss_events=[sum(tx.loss_events for tx in c.txs) for c in result.connections],
        flow_timeouts=[sum(tx.timeouts for tx in c.txs) for c in result.connections],
        sim_time=result.sim_time,
        warmup_s=warm,
        seed=spec.seed,
        rng_algorithm=result.rng_algorithm,
        events=result.events,
    )
