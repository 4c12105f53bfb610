"""JSON experiment documents: schema validation, defaults, conversion."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Optional

import jsonschema

from .cc_core import Algorithm
from .scenarios import (
    ConfigError,
    ExperimentSpec,
    FlowKind,
    FlowSpec,
    LinkSpec,
    TopologyKind,
    build_topology,
)

DEFAULTS = {
    "seed": 1,
    "duration": 60.0,
    "trace_interval": 0.1,
    "alpha_total": 10.0,
}


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("mptcpsim").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def _field_path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


@dataclass
class OutputOptions:
    dir: Optional[str] = None
    trace: bool = True
    throughput: bool = True
    queue: bool = True
    summary: bool = True


@dataclass
class ConfigDocument:
    spec: ExperimentSpec
    output: OutputOptions = field(default_factory=OutputOptions)


def parse_config_document(text: str) -> ConfigDocument:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})") from exc

    validator = jsonschema.Draft202012Validator(load_schema("config"))
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(err.message, _field_path(err.absolute_path))

    flows = []
    for f in doc["flows"]:
        kind = FlowKind(f["kind"])
        alg = Algorithm(f.get("algorithm", "Reno" if kind is FlowKind.SPTCP else "LIA"))
        flows.append(FlowSpec(kind, alg, tuple(f["paths"]), float(f.get("start_time", 0.0)), f.get("name")))
    links = tuple(
        LinkSpec(l["name"], float(l["rate"]), float(l["prop_delay"]), l.get("queue_capacity")) for l in doc["links"]
    )
    optional = {}
    for key in ("warmup_fraction", "start_jitter", "send_jitter", "access_rate_factor"):
        if key in doc:
            optional[key] = float(doc[key])
    if "ack_queue_capacity" in doc:
        optional["ack_queue_capacity"] = doc["ack_queue_capacity"]
    if "fairness_flows" in doc:
        optional["fairness_flows"] = tuple(doc["fairness_flows"])
    if "routes" in doc:
        optional["routes"] = {k: tuple(v) for k, v in doc["routes"].items()}

    spec = ExperimentSpec(
        topology=TopologyKind(doc["topology"]),
        links=links,
        flows=tuple(flows),
        duration=float(doc.get("duration", DEFAULTS["duration"])),
        seed=int(doc.get("seed", DEFAULTS["seed"])),
        trace_interval=float(doc.get("trace_interval", DEFAULTS["trace_interval"])),
        alpha_total=float(doc.get("alpha_total", DEFAULTS["alpha_total"])),
        **optional,
    )
    # semantic checks live with the topology builders
    build_topology(spec)
    return ConfigDocument(spec, OutputOptions(**doc.get("output", {})))


def parse_config(text: str) -> ExperimentSpec:
    return parse_config_document(text).spec


def spec_to_document(spec: ExperimentSpec) -> dict:
    """Inverse of :func:`parse_config`, for writing canned scenarios to disk."""
    doc = {
        "topology": spec.topology.value,
        "links": [],
        "flows": [],
        "duration": spec.duration,
        "seed": spec.seed,
        "trace_interval": spec.trace_interval,
        "alpha_total": spec.alpha_total,
        "warmup_fraction": spec.warmup_fraction,
        "start_jitter": spec.start_jitter,
        "send_jitter": spec.send_jitter,
    }
    for l in spec.links:
        d = {"name": l.name, "rate": l.rate, "prop_delay": l.prop_delay}
        if l.queue_capacity is not None:
            d["queue_capacity"] = l.queue_capacity
        doc["links"].append(d)
    for f in spec.flows:
        d = {"kind": f.kind.value, "algorithm": f.algorithm.value, "paths": list(f.paths), "start_time": f.start_time}
        if f.name:
            d["name"] = f.name
        doc["flows"].append(d)
    if spec.routes:
        doc["routes"] = {k: list(v) for k, v in spec.routes.items()}
    if spec.fairness_flows is not None:
        doc["fairness_flows"] = list(spec.fairness_flows)
    return doc
