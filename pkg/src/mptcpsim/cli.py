"""Command-line entry point: JSON config in, CSV traces and a JSON summary out.

Exit codes: 0 ok, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional

import jsonschema

from .config import ConfigDocument, OutputOptions, load_schema, parse_config_document
from .metrics import RunSummary, summarize, throughput_series
from .scenarios import ConfigError, ExperimentSpec, RunResult, run_simulation
from .transport import TransportInvariantError

log = logging.getLogger("mptcpsim")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

TRACE_HEADER = ("time", "flow", "subflow", "cwnd", "ssthresh", "srtt_ms", "phase")
THROUGHPUT_HEADER = ("time", "flow", "goodput_bps")
QUEUE_HEADER = ("time", "link", "queue_packets")


class RunError(RuntimeError):
    pass


def fmt(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.9g}"
    return str(value)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def check_capacity(result: RunResult):
    for name, link in result.links.items():
        if link.delivered_bytes * 8 > link.rate * result.sim_time * (1 + 1e-9):
            raise TransportInvariantError(f"link {name} delivered more than its capacity")


def run_experiment(spec: ExperimentSpec, out_dir, output: Optional[OutputOptions] = None) -> RunSummary:
    """Run ``spec`` and write its artifacts into ``out_dir``."""
    output = output or OutputOptions()
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise RunError(f"output directory {out} is not writable: {exc}") from exc

    result = run_simulation(spec, check_invariants=True)
    check_capacity(result)
    summary = summarize(result)

    if output.trace:
        _write_csv(out / "trace.csv", TRACE_HEADER, result.trace)
    if output.throughput:
        series = throughput_series(
            ((t, f, bits) for t, f, _, bits in result.deliveries()), spec.trace_interval, spec.duration
        )
        rows = []
        nbins = max((len(s) for s in series.values()), default=0)
        for k in range(nbins):
            for flow in range(len(spec.flows)):
                vals = series.get(flow)
                rows.append((k * spec.trace_interval, flow, vals[k] if vals else 0.0))
        _write_csv(out / "throughput.csv", THROUGHPUT_HEADER, rows)
    if output.queue:
        _write_csv(out / "queue.csv", QUEUE_HEADER, result.queue_trace)
    if output.summary:
        doc = summary.to_dict()
        jsonschema.validate(doc, load_schema("summary"))
        with open(out / "summary.json", "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return summary


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mptcpsim", description="Run a multipath congestion-control experiment.")
    p.add_argument("--config", required=True, help="JSON experiment document")
    p.add_argument("--seed", type=int, default=None, help="override the document's seed")
    p.add_argument("--out", default=None, help="output directory (default: document's output.dir or ./out)")
    p.add_argument("--repeat", type=int, default=1, help="run N consecutive seeds, one subdirectory each")
    p.add_argument("--quiet", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")

    try:
        doc: ConfigDocument = parse_config_document(Path(args.config).read_text())
    except OSError as exc:
        log.error("cannot read config: %s", exc)
        return EXIT_CONFIG
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    if args.seed is not None and not 0 <= args.seed < 2**64:
        log.error("config error: --seed must be an unsigned 64-bit integer")
        return EXIT_CONFIG
    if args.repeat < 1:
        log.error("config error: --repeat must be at least 1")
        return EXIT_CONFIG

    spec = doc.spec
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    out = Path(args.out or doc.output.dir or "out")

    try:
        for k in range(args.repeat):
            run_spec = dataclasses.replace(spec, seed=spec.seed + k)
            target = out if args.repeat == 1 else out / f"seed-{run_spec.seed}"
            summary = run_experiment(run_spec, target, doc.output)
            goodput = ", ".join(
                f"{n}={g / 1e6:.3f} Mb/s" for n, g in zip(summary.flow_names, summary.flow_goodput_bps)
            )
            log.info("seed %d -> %s: %s", run_spec.seed, target, goodput)
    except RunError as exc:
        log.error("runtime error: %s", exc)
        return EXIT_RUNTIME
    except (TransportInvariantError, jsonschema.ValidationError) as exc:
        log.error("internal invariant violated: %s", exc)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
