"""Coupled congestion-avoidance laws for multipath subflows.

Every function here is pure: states are frozen dataclasses and updates return
new values. Windows are real-valued, in segments. Subflow ids are 0-based
positions in ``ConnectionCcState.subflows``.

Subflows with no RTT sample yet are left out of the coupled sums.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

MIN_CWND = 1.0
MIN_SSTHRESH = 2.0
SRTT_GAIN = 1.0 / 8.0
BALIA_MAX_DECREASE = 1.5
DEFAULT_ALPHA_TOTAL = 10.0


class Phase(enum.Enum):
    SLOW_START = "SlowStart"
    CONGESTION_AVOIDANCE = "CongestionAvoidance"
    FAST_RECOVERY = "FastRecovery"


class Algorithm(enum.Enum):
    RENO = "Reno"
    LIA = "LIA"
    OLIA = "OLIA"
    BALIA = "BALIA"
    WVEGAS = "WVegas"

    @classmethod
    def parse(cls, name: str) -> "Algorithm":
        for alg in cls:
            if alg.value.lower() == name.lower():
                return alg
        raise ValueError(f"unknown algorithm {name!r}")


class CcInputError(ValueError):
    """Raised for invalid samples or calls made in an invalid state."""


@dataclass(frozen=True, slots=True)
class SubflowCcState:
    cwnd: float = 2.0
    ssthresh: float = 1e6
    srtt: Optional[float] = None
    rtt_min: Optional[float] = None
    # running sum/count of the current round; ``last_round_avg`` keeps the
    # mean of the round that just finished
    rtt_round_sum: float = 0.0
    rtt_round_count: int = 0
    last_round_avg: Optional[float] = None
    bytes_since_last_loss: int = 0
    bytes_between_last_two_losses: int = 0
    queue_delay_est: Optional[float] = None
    vegas_alpha: float = DEFAULT_ALPHA_TOTAL / 2
    phase: Phase = Phase.SLOW_START
    round_marker: int = 0

    @property
    def rtt_round_avg(self) -> Optional[float]:
        if self.rtt_round_count:
            return self.rtt_round_sum / self.rtt_round_count
        return self.last_round_avg

    @property
    def loss_interval_bytes(self) -> int:
        """Bytes used to rank subflows for OLIA's best set."""
        return max(self.bytes_since_last_loss, self.bytes_between_last_two_losses)

    @property
    def measured(self) -> bool:
        return self.srtt is not None


@dataclass(frozen=True, slots=True)
class ConnectionCcState:
    subflows: tuple[SubflowCcState, ...]
    algorithm: Algorithm = Algorithm.LIA
    alpha_total: float = DEFAULT_ALPHA_TOTAL

    def __post_init__(self):
        if len(self.subflows) < 1:
            raise CcInputError("a connection needs at least one subflow")

    @property
    def w_total(self) -> float:
        return sum(s.cwnd for s in self.subflows)

    def with_subflow(self, r: int, state: SubflowCcState) -> "ConnectionCcState":
        subs = list(self.subflows)
        subs[r] = state
        return replace(self, subflows=tuple(subs))


@dataclass(frozen=True)
class OliaSets:
    W: frozenset = field(default_factory=frozenset)
    B: frozenset = field(default_factory=frozenset)
    C: frozenset = field(default_factory=frozenset)


def _clamp_cwnd(w: float) -> float:
    return w if w > MIN_CWND else MIN_CWND


def _measured(conn: ConnectionCcState) -> list[SubflowCcState]:
    subs = [s for s in conn.subflows if s.srtt is not None]
    if not subs:
        raise CcInputError("no subflow has an RTT sample")
    return subs


def _require_measured(state: SubflowCcState, r: int):
    if state.srtt is None:
        raise CcInputError(f"subflow {r} has no RTT sample")


# -- RTT bookkeeping ---------------------------------------------------------

def update_rtt(state: SubflowCcState, sample: float) -> SubflowCcState:
    if not sample > 0 or math.isinf(sample):
        raise CcInputError(f"RTT sample must be positive and finite, got {sample!r}")
    if state.srtt is None:
        srtt = sample
    else:
        srtt = (1 - SRTT_GAIN) * state.srtt + SRTT_GAIN * sample
    rtt_min = sample if state.rtt_min is None else min(state.rtt_min, sample)
    return replace(
        state,
        srtt=srtt,
        rtt_min=rtt_min,
        rtt_round_sum=state.rtt_round_sum + sample,
        rtt_round_count=state.rtt_round_count + 1,
    )


def end_round(state: SubflowCcState, marker: int) -> SubflowCcState:
    """Close the current transmission round and start a new one at ``marker``."""
    return replace(
        state,
        last_round_avg=state.rtt_round_avg,
        rtt_round_sum=0.0,
        rtt_round_count=0,
        round_marker=marker,
    )


# -- standard TCP responses --------------------------------------------------

def slow_start_ack(state: SubflowCcState) -> SubflowCcState:
    cwnd = state.cwnd
    if cwnd < state.ssthresh:
        cwnd += 1.0
    phase = Phase.CONGESTION_AVOIDANCE if cwnd >= state.ssthresh else Phase.SLOW_START
    return replace(state, cwnd=cwnd, phase=phase)


def reno_on_ack(state: SubflowCcState) -> float:
    return state.cwnd + 1.0 / state.cwnd


def _rotate_loss_epoch(state: SubflowCcState) -> dict:
    return dict(
        bytes_between_last_two_losses=state.bytes_since_last_loss,
        bytes_since_last_loss=0,
    )


def standard_loss_halve(state: SubflowCcState) -> SubflowCcState:
    cwnd = _clamp_cwnd(state.cwnd / 2.0)
    return replace(
        state,
        cwnd=cwnd,
        ssthresh=max(MIN_SSTHRESH, cwnd),
        **_rotate_loss_epoch(state),
    )


def timeout_collapse(state: SubflowCcState) -> SubflowCcState:
    """Retransmission-timeout response: back to one segment in slow start."""
    return replace(
        state,
        ssthresh=max(MIN_SSTHRESH, state.cwnd / 2.0),
        cwnd=MIN_CWND,
        phase=Phase.SLOW_START,
        **_rotate_loss_epoch(state),
    )


# -- LIA ---------------------------------------------------------------------

def lia_alpha(conn: ConnectionCcState) -> float:
    subs = _measured(conn)
    w_total = sum(s.cwnd for s in subs)
    best = max(s.cwnd / (s.srtt * s.srtt) for s in subs)
    rate_sum = sum(s.cwnd / s.srtt for s in subs)
    return w_total * best / (rate_sum * rate_sum)


def lia_on_ack(conn: ConnectionCcState, r: int) -> float:
    me = conn.subflows[r]
    _require_measured(me, r)
    w_total = sum(s.cwnd for s in _measured(conn))
    return me.cwnd + min(lia_alpha(conn) / w_total, 1.0 / me.cwnd)


# -- OLIA --------------------------------------------------------------------

def _argmax(values: dict[int, float]) -> frozenset:
    top = max(values.values())
    return frozenset(k for k, v in values.items() if v == top)


def olia_classify(conn: ConnectionCcState) -> OliaSets:
    ids = [i for i, s in enumerate(conn.subflows) if s.measured] or list(range(len(conn.subflows)))
    W = _argmax({i: conn.subflows[i].cwnd for i in ids})
    B = _argmax({i: conn.subflows[i].loss_interval_bytes for i in ids})
    return OliaSets(W=W, B=B, C=B - W)


def olia_alpha(conn: ConnectionCcState, r: int, sets: OliaSets) -> float:
    n_paths = sum(1 for s in conn.subflows if s.measured) or len(conn.subflows)
    if r in sets.C:
        return (1.0 / n_paths) / len(sets.C)
    if r in sets.W and sets.C:
        return -(1.0 / n_paths) / len(sets.W)
    return 0.0


def olia_on_ack(conn: ConnectionCcState, r: int) -> float:
    me = conn.subflows[r]
    _require_measured(me, r)
    rate_sum = sum(s.cwnd / s.srtt for s in _measured(conn))
    alpha = olia_alpha(conn, r, olia_classify(conn))
    inc = (me.cwnd / (me.srtt * me.srtt)) / (rate_sum * rate_sum) + alpha / me.cwnd
    return _clamp_cwnd(me.cwnd + inc)


# -- BALIA -------------------------------------------------------------------

def balia_alpha(conn: ConnectionCcState, r: int) -> float:
    me = conn.subflows[r]
    _require_measured(me, r)
    x_max = max(s.cwnd / s.srtt for s in _measured(conn))
    return x_max / (me.cwnd / me.srtt)


def balia_on_ack(conn: ConnectionCcState, r: int) -> float:
    me = conn.subflows[r]
    _require_measured(me, r)
    rates = [s.cwnd / s.srtt for s in _measured(conn)]
    x_r = me.cwnd / me.srtt
    a = max(rates) / x_r
    x_sum = sum(rates)
    inc = (x_r / me.srtt) / (x_sum * x_sum) * ((1 + a) / 2) * ((4 + a) / 5)
    return me.cwnd + inc


def balia_on_loss(conn: ConnectionCcState, r: int) -> float:
    me = conn.subflows[r]
    a = balia_alpha(conn, r) if me.measured else 1.0
    return _clamp_cwnd(me.cwnd - (me.cwnd / 2) * min(a, BALIA_MAX_DECREASE))


def balia_loss_state(conn: ConnectionCcState, r: int) -> SubflowCcState:
    """``balia_on_loss`` plus the ssthresh and loss-epoch bookkeeping."""
    me = conn.subflows[r]
    cwnd = balia_on_loss(conn, r)
    return replace(
        me,
        cwnd=cwnd,
        ssthresh=max(MIN_SSTHRESH, cwnd),
        **_rotate_loss_epoch(me),
    )


# -- wVegas ------------------------------------------------------------------

def wvegas_delta(state: SubflowCcState) -> float:
    base, avg = state.rtt_min, state.rtt_round_avg
    if base is None or avg is None:
        raise CcInputError("wVegas needs both a base RTT and a round-average RTT")
    return (state.cwnd / base - state.cwnd / avg) * base


def wvegas_weights(conn: ConnectionCcState) -> list[float]:
    rates = []
    for i, s in enumerate(conn.subflows):
        avg = s.rtt_round_avg
        rates.append(0.0 if avg is None else s.cwnd / avg)
    total = sum(rates)
    if total <= 0:
        raise CcInputError("no subflow has a round-average RTT")
    return [x / total for x in rates]


def wvegas_on_round(conn: ConnectionCcState, r: int) -> SubflowCcState:
    """One transmission round of wVegas on subflow ``r``.

    A queueing-delay estimate of zero counts as unmeasured, and the drain
    backoff only fires on a strictly positive queueing excursion. A backoff
    clears the estimate so the next round re-learns it.
    """
    me = conn.subflows[r]
    if me.rtt_min is None or me.rtt_round_avg is None:
        raise CcInputError(f"subflow {r} finished a round without RTT samples")
    base, avg = me.rtt_min, me.rtt_round_avg
    cwnd, alpha, q = me.cwnd, me.vegas_alpha, me.queue_delay_est

    delta = wvegas_delta(me)
    if delta > alpha:
        alpha = wvegas_weights(conn)[r] * conn.alpha_total

    if delta > alpha:
        cwnd -= 1.0
    elif delta < alpha:
        cwnd += 1.0
    cwnd = _clamp_cwnd(cwnd)

    excursion = avg - base
    if not q or q > excursion:
        q = excursion
    if excursion > 0 and excursion >= 2 * q:
        cwnd = _clamp_cwnd(cwnd * base / (2 * avg))
        q = None

    return replace(me, cwnd=cwnd, vegas_alpha=alpha, queue_delay_est=q)


# -- dispatch used by the transport ------------------------------------------

def coupled_on_ack(conn: ConnectionCcState, r: int) -> float:
    """Congestion-avoidance window after one ACKed segment on subflow ``r``."""
    alg = conn.algorithm
    me = conn.subflows[r]
    if alg is Algorithm.RENO or not me.measured:
        return reno_on_ack(me)
    if alg is Algorithm.LIA:
        return lia_on_ack(conn, r)
    if alg is Algorithm.OLIA:
        return olia_on_ack(conn, r)
    if alg is Algorithm.BALIA:
        return balia_on_ack(conn, r)
    # wVegas adjusts once per round, not per ACK
    return me.cwnd


def on_loss(conn: ConnectionCcState, r: int) -> SubflowCcState:
    if conn.algorithm is Algorithm.BALIA:
        return balia_loss_state(conn, r)
    return standard_loss_halve(conn.subflows[r])
