"""Discrete-event kernel, droptail links and the seeded RNG."""

from __future__ import annotations

import enum
import heapq
import math
from collections import deque
from typing import Callable, NamedTuple, Optional

DATA_SIZE = 1500
ACK_SIZE = 40
MSS = 1460

RNG_ALGORITHM = "xorshift64*"


class SchedulingError(RuntimeError):
    pass


class EventKind(enum.Enum):
    PACKET_ARRIVAL = "PacketArrival"
    TRANSMIT_COMPLETE = "TransmitComplete"
    TIMER = "Timer"
    ROUND_PROBE = "RoundProbe"


class Event(NamedTuple):
    time: float
    sequence: int
    kind: EventKind
    callback: Callable
    args: tuple


class Simulator:
    """Time-ordered event queue. Ties on time fire in insertion order."""

    def __init__(self):
        self.now = 0.0
        self._heap: list[Event] = []
        self._seq = 0
        self._cancelled: set[int] = set()
        self.events_fired = 0

    def schedule(self, at: float, callback: Callable, *args, kind: EventKind = EventKind.TIMER) -> int:
        if at < self.now:
            raise SchedulingError(f"cannot schedule at {at!r}, clock is already {self.now!r}")
        seq = self._seq
        self._seq += 1
        heapq.heappush(self._heap, Event(at, seq, kind, callback, args))
        return seq

    def cancel(self, handle: int):
        self._cancelled.add(handle)

    def pending(self) -> int:
        return len(self._heap) - len(self._cancelled)

    def run_until(self, t_end: float) -> float:
        heap = self._heap
        cancelled = self._cancelled
        pop = heapq.heappop
        while heap and heap[0][0] <= t_end:
            ev = pop(heap)
            if cancelled and ev[1] in cancelled:
                cancelled.discard(ev[1])
                continue
            self.now = ev[0]
            self.events_fired += 1
            ev[3](*ev[4])
        if t_end > self.now:
            self.now = t_end
        return self.now


class Packet:
    __slots__ = ("size", "flow", "subflow", "seq", "is_ack", "timestamp_sent", "route", "hop", "sink")

    def __init__(self, size, flow, subflow, seq, is_ack, timestamp_sent, route=(), sink=None):
        self.size = size
        self.flow = flow
        self.subflow = subflow
        self.seq = seq
        self.is_ack = is_ack
        self.timestamp_sent = timestamp_sent
        self.route = route
        self.hop = 0
        self.sink = sink

    def __repr__(self):
        kind = "ack" if self.is_ack else "data"
        return f"Packet({kind} flow={self.flow} sub={self.subflow} seq={self.seq})"


class Link:
    """Point-to-point link with a finite droptail FIFO.

    Only the finish times of packets still in the system are stored; the head
    of that deque is the packet in service, the rest are queued.
    """

    def __init__(self, name: str, rate: float, prop_delay: float, queue_capacity: int):
        if rate <= 0 or prop_delay < 0 or queue_capacity < 0:
            raise ValueError(f"bad link parameters for {name!r}")
        self.name = name
        self.rate = float(rate)
        self.prop_delay = float(prop_delay)
        self.queue_capacity = int(queue_capacity)
        self._finish = deque()
        self.drops = 0
        self.accepted = 0
        self.delivered_bytes = 0
        self.queue_delay_sum = 0.0
        self.queue_delay_samples = 0
        # samples taken after the metrics warm-up
        self.warm_queue_delay_sum = 0.0
        self.warm_queue_delay_samples = 0
        self.warmup_end = math.inf

    def serialization(self, size: int) -> float:
        return 8.0 * size / self.rate

    @property
    def busy_until(self) -> float:
        return self._finish[-1] if self._finish else 0.0

    def queue_length(self, now: float) -> int:
        fin = self._finish
        while fin and fin[0] <= now:
            fin.popleft()
        return len(fin) - 1 if fin else 0

    def enqueue(self, sim: Simulator, packet: Packet, now: float) -> bool:
        fin = self._finish
        while fin and fin[0] <= now:
            fin.popleft()
        if fin and len(fin) - 1 >= self.queue_capacity:
            self.drops += 1
            return False
        start = fin[-1] if fin else now
        done = start + 8.0 * packet.size / self.rate
        fin.append(done)
        self.accepted += 1
        wait = start - now
        self.queue_delay_sum += wait
        self.queue_delay_samples += 1
        if now >= self.warmup_end:
            self.warm_queue_delay_sum += wait
            self.warm_queue_delay_samples += 1
        sim.schedule(done + self.prop_delay, _arrive, sim, self, packet, kind=EventKind.PACKET_ARRIVAL)
        return True

    def mean_queue_delay(self, warm_only: bool = True) -> float:
        if warm_only:
            n, s = self.warm_queue_delay_samples, self.warm_queue_delay_sum
        else:
            n, s = self.queue_delay_samples, self.queue_delay_sum
        return s / n if n else 0.0


def _arrive(sim: Simulator, link: Link, packet: Packet):
    link.delivered_bytes += packet.size
    packet.hop += 1
    if packet.hop < len(packet.route):
        packet.route[packet.hop].enqueue(sim, packet, sim.now)
    else:
        packet.sink(packet)


def send(sim: Simulator, packet: Packet) -> bool:
    """Inject ``packet`` at the first hop of its route."""
    packet.hop = 0
    return packet.route[0].enqueue(sim, packet, sim.now)


class XorShift64Star:
    """64-bit xorshift* generator; draws are reals in [0, 1)."""

    MASK = (1 << 64) - 1
    MULT = 0x2545F4914F6CDD1D

    def __init__(self, seed: int):
        # splitmix64 scramble so small seeds still give well-mixed state
        z = (seed + 0x9E3779B97F4A7C15) & self.MASK
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self.MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self.MASK
        z ^= z >> 31
        self.state = z or 0x1

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & self.MASK
        x ^= x >> 27
        self.state = x
        return (x * self.MULT) & self.MASK

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def __iter__(self):
        return self

    def __next__(self) -> float:
        return self.random()


def seeded_rng(seed: int) -> XorShift64Star:
    return XorShift64Star(seed)


def default_queue_capacity(rate: float, rtt: float, packet_size: int = DATA_SIZE, minimum: int = 10) -> int:
    """Bandwidth-delay product in packets, rounded up, never below ``minimum``."""
    bdp = rate * rtt / (8.0 * packet_size)
    return max(minimum, math.ceil(bdp - 1e-9))
