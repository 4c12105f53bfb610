"""Packet-level simulator for coupled multipath congestion control."""

from .cc_core import Algorithm, ConnectionCcState, Phase, SubflowCcState
from .scenarios import ExperimentSpec, FlowKind, FlowSpec, LinkSpec, TopologyKind, run_simulation
from .metrics import RunSummary, jain_index, summarize, throughput_series

__version__ = "0.1.0"
