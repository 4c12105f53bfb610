"""Bulk-transfer multipath sender and cumulative-ACK receiver.

Slow start, fast retransmit/recovery (NewReno partial ACKs) and RTO follow
standard TCP. Only congestion avoidance goes through the coupled laws in
:mod:`mptcpsim.cc_core`. Sequence numbers count segments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from . import cc_core
from .cc_core import Algorithm, ConnectionCcState, Phase, SubflowCcState
from .engine import ACK_SIZE, DATA_SIZE, MSS, EventKind, Packet, Simulator, send

DUPACK_THRESHOLD = 3
INITIAL_RTO = 1.0
MIN_RTO = 0.2
MAX_RTO = 60.0
RTTVAR_GAIN = 0.25


class TransportInvariantError(AssertionError):
    pass


@dataclass
class SubflowTx:
    index: int
    route: tuple = ()
    ack_route: tuple = ()
    next_seq: int = 0
    # one past the highest sequence ever sent; go-back-N rewinds next_seq below it
    high_water: int = 0
    highest_acked: int = 0
    dup_ack_count: int = 0
    rto: float = INITIAL_RTO
    rttvar: Optional[float] = None
    recovery_point: Optional[int] = None
    # duplicate ACKs seen in the current recovery; each one means a segment
    # has left the network
    sacked: int = 0
    timer_deadline: Optional[float] = None
    timer_pending: bool = False
    active: bool = False
    sent: int = 0
    retransmits: int = 0
    loss_events: int = 0
    timeouts: int = 0
    window_reductions: list = field(default_factory=list)

    @property
    def outstanding(self) -> int:
        return self.next_seq - self.highest_acked

    @property
    def in_flight(self) -> int:
        return max(0, self.outstanding - self.sacked)

    def observe_rtt(self, sample: float, srtt_before: Optional[float]):
        if srtt_before is None or self.rttvar is None:
            self.rttvar = sample / 2.0
            srtt = sample
        else:
            self.rttvar = (1 - RTTVAR_GAIN) * self.rttvar + RTTVAR_GAIN * abs(srtt_before - sample)
            srtt = (1 - cc_core.SRTT_GAIN) * srtt_before + cc_core.SRTT_GAIN * sample
        self.rto = min(MAX_RTO, max(MIN_RTO, srtt + 4.0 * self.rttvar))


@dataclass
class SubflowRx:
    rcv_next: int = 0
    out_of_order: set = field(default_factory=set)
    delivered: int = 0


class MpConnection:
    """One bulk-transfer connection made of one or more subflows.

    A single-path TCP flow is just a connection with one subflow and the
    Reno algorithm.
    """

    def __init__(self, sim: Simulator, flow_id: int, algorithm: Algorithm, routes, ack_routes,
                 alpha_total: float = cc_core.DEFAULT_ALPHA_TOTAL, initial_cwnd: float = 2.0,
                 initial_ssthresh: float = 1e6, check_invariants: bool = False,
                 send_jitter: float = 0.0, rng=None):
        if not routes:
            raise ValueError("a connection needs at least one subflow route")
        self.sim = sim
        self.flow_id = flow_id
        n = len(routes)
        self.txs = [SubflowTx(i, tuple(routes[i]), tuple(ack_routes[i])) for i in range(n)]
        self.rxs = [SubflowRx() for _ in range(n)]
        init = SubflowCcState(cwnd=initial_cwnd, ssthresh=initial_ssthresh, vegas_alpha=alpha_total / n)
        self.cc = ConnectionCcState(subflows=(init,) * n, algorithm=algorithm, alpha_total=alpha_total)
        self.backlogged = True
        self.delivered_segments = 0
        # (time, subflow, segments) each time a receiver's cumulative point moves
        self.delivery_log: list[tuple[float, int, int]] = []
        self.check_invariants = check_invariants
        self.rounds_completed = [0] * n
        # random per-packet sender delay that breaks droptail phase locking
        self.send_jitter = send_jitter
        self.rng = rng
        self._last_departure = [0.0] * n

    # -- helpers -------------------------------------------------------------

    def _set_cc(self, r: int, state: SubflowCcState):
        self.cc = self.cc.with_subflow(r, state)

    def subflow_cc(self, r: int) -> SubflowCcState:
        return self.cc.subflows[r]

    def start_subflow(self, r: int):
        self.txs[r].active = True
        self.try_send()

    # -- sending -------------------------------------------------------------

    def schedule_next(self, now: float = 0.0) -> Optional[int]:
        """Subflow with window space and the smallest srtt; ties go to the lowest id."""
        best, best_rtt = None, math.inf
        subs = self.cc.subflows
        for tx in self.txs:
            if not tx.active:
                continue
            if not self.backlogged and tx.next_seq >= tx.high_water:
                continue
            cc = subs[tx.index]
            if tx.in_flight < cc.cwnd:
                rtt = cc.srtt if cc.srtt is not None else math.inf
                if best is None or rtt < best_rtt:
                    best, best_rtt = tx.index, rtt
        return best

    def try_send(self):
        while True:
            r = self.schedule_next(self.sim.now)
            if r is None:
                return
            tx = self.txs[r]
            self._transmit(r, tx.next_seq)
            tx.next_seq += 1
            tx.high_water = max(tx.high_water, tx.next_seq)
            if self.check_invariants and tx.in_flight > math.ceil(self.cc.subflows[r].cwnd) + 1:
                raise TransportInvariantError(f"subflow {r}: in_flight {tx.in_flight} exceeds window")

    def _transmit(self, r: int, seq: int, retransmission: bool = False):
        tx = self.txs[r]
        now = self.sim.now
        pkt = Packet(DATA_SIZE, self.flow_id, r, seq, False, now, tx.route, self.receiver_arrival)
        tx.sent += 1
        if retransmission:
            tx.retransmits += 1
        if self.send_jitter > 0:
            # per-subflow departures stay in order
            at = max(now + self.rng.random() * self.send_jitter, self._last_departure[r])
            self._last_departure[r] = at
            pkt.timestamp_sent = at
            self.sim.schedule(at, send, self.sim, pkt, kind=EventKind.TRANSMIT_COMPLETE)
        else:
            send(self.sim, pkt)
        if tx.timer_deadline is None:
            self._arm_timer(r)

    # -- retransmission timer -------------------------------------------------

    def _arm_timer(self, r: int):
        tx = self.txs[r]
        tx.timer_deadline = self.sim.now + tx.rto
        if not tx.timer_pending:
            tx.timer_pending = True
            self.sim.schedule(tx.timer_deadline, self._timer_fired, r, kind=EventKind.TIMER)

    def _timer_fired(self, r: int):
        tx = self.txs[r]
        tx.timer_pending = False
        if tx.timer_deadline is None:
            return
        if self.sim.now < tx.timer_deadline:
            tx.timer_pending = True
            self.sim.schedule(tx.timer_deadline, self._timer_fired, r, kind=EventKind.TIMER)
            return
        self.on_rto(r)

    def on_rto(self, r: int):
        tx = self.txs[r]
        cc = cc_core.timeout_collapse(self.cc.subflows[r])
        tx.timeouts += 1
        tx.window_reductions.append(self.sim.now)
        tx.rto = min(MAX_RTO, 2.0 * tx.rto)
        tx.recovery_point = tx.next_seq - 1
        tx.sacked = 0
        tx.dup_ack_count = 0
        # go-back-N from the first hole
        tx.next_seq = tx.highest_acked
        self._set_cc(r, cc_core.end_round(cc, tx.highest_acked))
        tx.timer_deadline = None
        self._transmit(r, tx.next_seq, retransmission=True)
        tx.next_seq += 1
        tx.high_water = max(tx.high_water, tx.next_seq)
        self.try_send()

    # -- receiver ------------------------------------------------------------

    def receiver_on_data(self, packet: Packet) -> Packet:
        """Cumulative ACK for ``packet``; out-of-order data re-ACKs the current point."""
        rx = self.rxs[packet.subflow]
        seq = packet.seq
        if seq == rx.rcv_next:
            nxt = seq + 1
            ooo = rx.out_of_order
            while nxt in ooo:
                ooo.discard(nxt)
                nxt += 1
            advanced = nxt - rx.rcv_next
            rx.rcv_next = nxt
            rx.delivered += advanced
            self.delivered_segments += advanced
            self.delivery_log.append((self.sim.now, packet.subflow, advanced))
        elif seq > rx.rcv_next:
            rx.out_of_order.add(seq)
        tx = self.txs[packet.subflow]
        return Packet(ACK_SIZE, self.flow_id, packet.subflow, rx.rcv_next, True,
                      packet.timestamp_sent, tx.ack_route, self.sender_arrival)

    def receiver_arrival(self, packet: Packet):
        send(self.sim, self.receiver_on_data(packet))

    def sender_arrival(self, packet: Packet):
        self.on_ack_receipt(packet.subflow, packet.seq, self.sim.now - packet.timestamp_sent)

    # -- ACK processing ------------------------------------------------------

    def on_ack_receipt(self, r: int, ack_seq: int, rtt_sample: float):
        tx = self.txs[r]
        if ack_seq > tx.highest_acked:
            self._on_new_ack(r, ack_seq, rtt_sample)
        elif ack_seq == tx.highest_acked and tx.outstanding > 0:
            self._on_dup_ack(r)
        # anything older is stale and ignored
        self.try_send()

    def _on_new_ack(self, r: int, ack_seq: int, rtt_sample: float):
        tx = self.txs[r]
        newly = ack_seq - tx.highest_acked
        tx.highest_acked = ack_seq
        if tx.next_seq < ack_seq:
            tx.next_seq = ack_seq
        tx.high_water = max(tx.high_water, tx.next_seq)

        cc = self.cc.subflows[r]
        tx.observe_rtt(rtt_sample, cc.srtt)
        cc = cc_core.update_rtt(cc, rtt_sample)
        cc = replace(cc, bytes_since_last_loss=cc.bytes_since_last_loss + newly * MSS)

        if cc.phase is Phase.FAST_RECOVERY:
            if ack_seq > tx.recovery_point:
                phase = Phase.CONGESTION_AVOIDANCE if cc.cwnd >= cc.ssthresh else Phase.SLOW_START
                cc = replace(cc, phase=phase)
                tx.sacked = 0
                tx.dup_ack_count = 0
                self._set_cc(r, cc)
            else:
                tx.sacked = max(0, tx.sacked - (newly - 1))
                self._set_cc(r, cc)
                self._transmit(r, ack_seq, retransmission=True)
        else:
            tx.dup_ack_count = 0
            for _ in range(newly):
                if cc.phase is Phase.SLOW_START:
                    cc = cc_core.slow_start_ack(cc)
                    self._set_cc(r, cc)
                else:
                    self._set_cc(r, cc)
                    cc = replace(cc, cwnd=cc_core.coupled_on_ack(self.cc, r))
            self._set_cc(r, cc)

        if ack_seq > cc.round_marker:
            self._end_round(r)

        if tx.outstanding > 0:
            tx.timer_deadline = self.sim.now + tx.rto
            if not tx.timer_pending:
                self._arm_timer(r)
        else:
            tx.timer_deadline = None

    def _end_round(self, r: int):
        cc = self.cc.subflows[r]
        self.rounds_completed[r] += 1
        if (self.cc.algorithm is Algorithm.WVEGAS and cc.phase is Phase.CONGESTION_AVOIDANCE
                and cc.rtt_round_count > 0):
            cc = cc_core.wvegas_on_round(self.cc, r)
        self._set_cc(r, cc_core.end_round(cc, self.txs[r].next_seq - 1))

    def _on_dup_ack(self, r: int):
        tx = self.txs[r]
        tx.dup_ack_count += 1
        cc = self.cc.subflows[r]
        if cc.phase is Phase.FAST_RECOVERY:
            tx.sacked = min(tx.sacked + 1, tx.outstanding)
            return
        if tx.dup_ack_count != DUPACK_THRESHOLD:
            return
        if tx.recovery_point is not None and tx.highest_acked <= tx.recovery_point:
            # this window was already reduced
            return
        cc = cc_core.on_loss(self.cc, r)
        self._set_cc(r, replace(cc, phase=Phase.FAST_RECOVERY))
        tx.loss_events += 1
        tx.window_reductions.append(self.sim.now)
        tx.recovery_point = tx.next_seq - 1
        tx.sacked = min(DUPACK_THRESHOLD, tx.outstanding)
        self._transmit(r, tx.highest_acked, retransmission=True)

    # -- invariants ----------------------------------------------------------

    def check(self):
        for tx in self.txs:
            cc = self.cc.subflows[tx.index]
            if cc.cwnd < cc_core.MIN_CWND or cc.ssthresh < cc_core.MIN_SSTHRESH:
                raise TransportInvariantError(f"subflow {tx.index}: window floor violated")
            if tx.in_flight > 0 and not (tx.timer_pending and tx.timer_deadline is not None):
                raise TransportInvariantError(f"subflow {tx.index}: data in flight with no RTO timer")
