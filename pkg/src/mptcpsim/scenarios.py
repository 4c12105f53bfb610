"""Experiment records, topology builders and the simulation runner."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

from .cc_core import DEFAULT_ALPHA_TOTAL, Algorithm
from .engine import DATA_SIZE, MSS, RNG_ALGORITHM, EventKind, Link, Simulator, default_queue_capacity, seeded_rng
from .transport import MpConnection


class ConfigError(ValueError):
    """Inconsistent experiment description. ``path`` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class TopologyKind(enum.Enum):
    SHARED_BOTTLENECK = "SharedBottleneck"
    DISJOINT_PATHS = "DisjointPaths"
    PARTIALLY_SHARED = "PartiallyShared"


class FlowKind(enum.Enum):
    MPTCP = "MPTCP"
    SPTCP = "SPTCP"


@dataclass(frozen=True)
class LinkSpec:
    name: str
    rate: float  # bits/s
    prop_delay: float  # one-way, seconds
    queue_capacity: Optional[int] = None  # packets; None -> BDP rule


@dataclass(frozen=True)
class FlowSpec:
    kind: FlowKind
    algorithm: Algorithm
    paths: tuple[str, ...]
    start_time: float = 0.0
    name: Optional[str] = None


@dataclass(frozen=True)
class ExperimentSpec:
    topology: TopologyKind
    links: tuple[LinkSpec, ...]
    flows: tuple[FlowSpec, ...]
    duration: float = 60.0
    seed: int = 1
    trace_interval: float = 0.1
    alpha_total: float = DEFAULT_ALPHA_TOTAL
    # route name -> ordered link names; by default every link is a route
    routes: Optional[dict] = None
    warmup_fraction: float = 0.2
    start_jitter: float = 0.1
    send_jitter: float = 0.005
    fairness_flows: Optional[tuple[int, ...]] = None
    access_rate_factor: float = 10.0
    ack_queue_capacity: int = 100_000

    def route_table(self) -> dict[str, tuple[str, ...]]:
        if self.routes:
            return {k: tuple(v) for k, v in self.routes.items()}
        return {l.name: (l.name,) for l in self.links}

    def flow_name(self, i: int) -> str:
        return self.flows[i].name or f"flow{i}"


@dataclass
class Topology:
    kind: TopologyKind
    links: dict[str, LinkSpec]
    routes: dict[str, tuple[str, ...]]
    queue_capacity: dict[str, int]

    def base_rtt(self, route: str) -> float:
        return 2.0 * sum(self.links[l].prop_delay for l in self.routes[route])

    def route_rate(self, route: str) -> float:
        return min(self.links[l].rate for l in self.routes[route])


# -- validation / builders ---------------------------------------------------

def _validate_common(spec: ExperimentSpec) -> Topology:
    if not spec.duration > 0:
        raise ConfigError("must be positive", "duration")
    if not spec.trace_interval > 0:
        raise ConfigError("must be positive", "trace_interval")
    if not 0 <= spec.warmup_fraction < 1:
        raise ConfigError("must be in [0, 1)", "warmup_fraction")
    if not spec.links:
        raise ConfigError("at least one link is required", "links")
    if not spec.flows:
        raise ConfigError("at least one flow is required", "flows")
    links = {}
    for i, l in enumerate(spec.links):
        if l.name in links:
            raise ConfigError(f"duplicate link name {l.name!r}", f"links[{i}].name")
        if not l.rate > 0:
            raise ConfigError("must be positive", f"links[{i}].rate")
        if l.prop_delay < 0:
            raise ConfigError("must be non-negative", f"links[{i}].prop_delay")
        links[l.name] = l
    routes = spec.route_table()
    for name, hops in routes.items():
        if not hops:
            raise ConfigError("route has no links", f"routes.{name}")
        for h in hops:
            if h not in links:
                raise ConfigError(f"unknown link {h!r}", f"routes.{name}")
    for i, f in enumerate(spec.flows):
        if not f.paths:
            raise ConfigError("flow has no subflows", f"flows[{i}].paths")
        if f.kind is FlowKind.SPTCP and len(f.paths) != 1:
            raise ConfigError("a single-path flow takes exactly one path", f"flows[{i}].paths")
        if f.start_time < 0:
            raise ConfigError("must be non-negative", f"flows[{i}].start_time")
        for j, p in enumerate(f.paths):
            if p not in routes:
                raise ConfigError(f"unknown path {p!r}", f"flows[{i}].paths[{j}]")
    if spec.fairness_flows is not None:
        for j, k in enumerate(spec.fairness_flows):
            if not 0 <= k < len(spec.flows):
                raise ConfigError(f"no flow with index {k}", f"fairness_flows[{j}]")

    caps = {}
    for name, l in links.items():
        if l.queue_capacity is not None:
            if l.queue_capacity < 1:
                raise ConfigError("must be at least 1", f"links.{name}.queue_capacity")
            caps[name] = l.queue_capacity
        else:
            rtts = [2.0 * sum(links[h].prop_delay for h in hops) for hops in routes.values() if name in hops]
            caps[name] = default_queue_capacity(l.rate, max(rtts, default=2.0 * l.prop_delay))
    return Topology(spec.topology, links, routes, caps)


def build_shared_bottleneck(spec: ExperimentSpec) -> Topology:
    topo = _validate_common(spec)
    used = [set(topo.routes[p]) for f in spec.flows for p in f.paths]
    common = set.intersection(*used)
    if not common:
        raise ConfigError("no link is shared by every subflow", "flows")
    return topo


def build_disjoint_paths(spec: ExperimentSpec) -> Topology:
    topo = _validate_common(spec)
    for i, f in enumerate(spec.flows):
        if f.kind is not FlowKind.MPTCP:
            continue
        seen: set = set()
        for j, p in enumerate(f.paths):
            hops = set(topo.routes[p])
            if hops & seen:
                raise ConfigError(f"path {p!r} shares a link with another subflow", f"flows[{i}].paths[{j}]")
            seen |= hops
    return topo


def build_partially_shared(spec: ExperimentSpec) -> Topology:
    return _validate_common(spec)


BUILDERS = {
    TopologyKind.SHARED_BOTTLENECK: build_shared_bottleneck,
    TopologyKind.DISJOINT_PATHS: build_disjoint_paths,
    TopologyKind.PARTIALLY_SHARED: build_partially_shared,
}


def build_topology(spec: ExperimentSpec) -> Topology:
    return BUILDERS[spec.topology](spec)


# -- running -----------------------------------------------------------------

@dataclass
class RunResult:
    spec: ExperimentSpec
    topology: Topology
    links: dict[str, Link]
    connections: list[MpConnection]
    # (time, flow, subflow, cwnd, ssthresh, srtt_ms, phase)
    trace: list[tuple] = field(default_factory=list)
    # (time, link, queued packets)
    queue_trace: list[tuple] = field(default_factory=list)
    sim_time: float = 0.0
    events: int = 0
    rng_algorithm: str = RNG_ALGORITHM

    def deliveries(self) -> list[tuple[float, int, int, int]]:
        """(time, flow, subflow, payload bits) for every advance of a receiver."""
        out = []
        for conn in self.connections:
            fid = conn.flow_id
            out.extend((t, fid, r, n * MSS * 8) for t, r, n in conn.delivery_log)
        out.sort(key=lambda row: (row[0], row[1], row[2]))
        return out


class Simulation:
    def __init__(self, spec: ExperimentSpec, check_invariants: bool = False):
        self.spec = spec
        self.topology = build_topology(spec)
        self.sim = Simulator()
        self.rng = seeded_rng(spec.seed)
        self.check_invariants = check_invariants
        warm = spec.warmup_fraction * spec.duration
        self.links = {}
        for name, ls in self.topology.links.items():
            link = Link(name, ls.rate, ls.prop_delay, self.topology.queue_capacity[name])
            link.warmup_end = warm
            self.links[name] = link
        self.connections: list[MpConnection] = []
        self._private_links: list[Link] = []
        for i, f in enumerate(spec.flows):
            routes, acks = [], []
            for j, p in enumerate(f.paths):
                hops = self.topology.routes[p]
                fast = spec.access_rate_factor * self.topology.route_rate(p)
                access = Link(f"access.{i}.{j}", fast, 0.0, spec.ack_queue_capacity)
                reverse = Link(f"reverse.{i}.{j}", fast, sum(self.links[h].prop_delay for h in hops),
                               spec.ack_queue_capacity)
                self._private_links += [access, reverse]
                routes.append((access,) + tuple(self.links[h] for h in hops))
                acks.append((reverse,))
            alg = Algorithm.RENO if f.kind is FlowKind.SPTCP else f.algorithm
            conn = MpConnection(self.sim, i, alg, routes, acks, alpha_total=spec.alpha_total,
                                check_invariants=check_invariants, send_jitter=spec.send_jitter,
                                rng=self.rng)
            self.connections.append(conn)
            for j in range(len(f.paths)):
                start = f.start_time + self.rng.random() * spec.start_jitter
                self.sim.schedule(start, conn.start_subflow, j)
        self.result = RunResult(spec, self.topology, self.links, self.connections)
        self._sample_index = 0
        self.sim.schedule(0.0, self._sample, kind=EventKind.ROUND_PROBE)

    def _sample(self):
        res = self.result
        t = self.sim.now
        for conn in self.connections:
            for r, cc in enumerate(conn.cc.subflows):
                srtt_ms = cc.srtt * 1000.0 if cc.srtt is not None else math.nan
                res.trace.append((t, conn.flow_id, r, cc.cwnd, cc.ssthresh, srtt_ms, cc.phase.value))
            if self.check_invariants:
                conn.check()
        for name, link in self.links.items():
            res.queue_trace.append((t, name, link.queue_length(t)))
        self._sample_index += 1
        nxt = self._sample_index * self.spec.trace_interval
        if nxt < self.spec.duration - 1e-9:
            self.sim.schedule(nxt, self._sample, kind=EventKind.ROUND_PROBE)

    def run(self) -> RunResult:
        self.result.sim_time = self.sim.run_until(self.spec.duration)
        self.result.events = self.sim.events_fired
        return self.result


def run_simulation(spec: ExperimentSpec, check_invariants: bool = False) -> RunResult:
    return Simulation(spec, check_invariants=check_invariants).run()


# -- canned desk-scale scenarios ---------------------------------------------

MBPS = 1e6


def bdp_packets(rate: float, rtt: float) -> float:
    return rate * rtt / (8.0 * DATA_SIZE)


def friendliness(algorithm: Algorithm, duration: float = 60.0, seed: int = 1,
                 rate: float = 10 * MBPS, rtt: float = 0.040) -> ExperimentSpec:
    """Two-subflow connection against one single-path Reno flow on one bottleneck."""
    return ExperimentSpec(
        topology=TopologyKind.SHARED_BOTTLENECK,
        links=(LinkSpec("bottleneck", rate, rtt / 2),),
        flows=(
            FlowSpec(FlowKind.MPTCP, algorithm, ("bottleneck", "bottleneck"), name=f"mptcp-{algorithm.value}"),
            FlowSpec(FlowKind.SPTCP, Algorithm.RENO, ("bottleneck",), name="reno"),
        ),
        duration=duration,
        seed=seed,
    )


def congestion_balance(algorithm: Algorithm, duration: float = 60.0, seed: int = 1,
                       rate: float = 10 * MBPS, rtt: float = 0.040) -> ExperimentSpec:
    """Two disjoint paths; a background Reno flow loads path B only."""
    return ExperimentSpec(
        topology=TopologyKind.DISJOINT_PATHS,
        links=(LinkSpec("A", rate, rtt / 2), LinkSpec("B", rate, rtt / 2)),
        flows=(
            FlowSpec(FlowKind.MPTCP, algorithm, ("A", "B"), name=f"mptcp-{algorithm.value}"),
            FlowSpec(FlowKind.SPTCP, Algorithm.RENO, ("B",), name="background"),
        ),
        duration=duration,
        seed=seed,
        fairness_flows=(0,),
    )


def bufferbloat(algorithm: Algorithm, duration: float = 60.0, seed: int = 1,
                rate: float = 10 * MBPS, rtt: float = 0.040, buffer_bdps: float = 2.0) -> ExperimentSpec:
    """One two-subflow connection alone on a bottleneck with an oversized buffer."""
    cap = math.ceil(buffer_bdps * bdp_packets(rate, rtt) - 1e-9)
    return ExperimentSpec(
        topology=TopologyKind.SHARED_BOTTLENECK,
        links=(LinkSpec("bottleneck", rate, rtt / 2, queue_capacity=cap),),
        flows=(FlowSpec(FlowKind.MPTCP, algorithm, ("bottleneck", "bottleneck"), name=f"mptcp-{algorithm.value}"),),
        duration=duration,
        seed=seed,
    )


def symmetric_competitors(algorithm: Algorithm = Algorithm.RENO, n: int = 2, duration: float = 60.0,
                          seed: int = 1, rate: float = 10 * MBPS, rtt: float = 0.040,
                          subflows: Optional[int] = None) -> ExperimentSpec:
    """``n`` identical connections sharing one bottleneck.

    Reno competitors are single-path; the others get two subflows each unless
    ``subflows`` says otherwise.
    """
    if algorithm is Algorithm.RENO:
        kind, k = FlowKind.SPTCP, 1
    else:
        kind, k = FlowKind.MPTCP, subflows or 2
    return ExperimentSpec(
        topology=TopologyKind.SHARED_BOTTLENECK,
        links=(LinkSpec("bottleneck", rate, rtt / 2),),
        flows=tuple(FlowSpec(kind, algorithm, ("bottleneck",) * k, name=f"flow{i}") for i in range(n)),
        duration=duration,
        seed=seed,
    )


def symmetric_disjoint(algorithm: Algorithm, duration: float = 60.0, seed: int = 1,
                       rate: float = 10 * MBPS, rtt: float = 0.040) -> ExperimentSpec:
    """Bandwidth aggregation over two identical private paths."""
    return ExperimentSpec(
        topology=TopologyKind.DISJOINT_PATHS,
        links=(LinkSpec("A", rate, rtt / 2), LinkSpec("B", rate, rtt / 2)),
        flows=(FlowSpec(FlowKind.MPTCP, algorithm, ("A", "B"), name=f"mptcp-{algorithm.value}"),),
        duration=duration,
        seed=seed,
    )


def heterogeneous_paths(algorithm: Algorithm, duration: float = 60.0, seed: int = 1,
                        rate: float = 10 * MBPS, rtts=(0.020, 0.050, 0.100)) -> ExperimentSpec:
    links = tuple(LinkSpec(f"P{i}", rate, rtt / 2) for i, rtt in enumerate(rtts))
    return ExperimentSpec(
        topology=TopologyKind.DISJOINT_PATHS,
        links=links,
        flows=(FlowSpec(FlowKind.MPTCP, algorithm, tuple(l.name for l in links), name=f"mptcp-{algorithm.value}"),),
        duration=duration,
        seed=seed,
    )
