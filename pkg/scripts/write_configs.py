"""Dump the canned scenarios as JSON documents under configs/."""

import argparse
import json
from pathlib import Path

from mptcpsim.cc_core import Algorithm
from mptcpsim.config import spec_to_document
from mptcpsim.scenarios import (
    bufferbloat,
    congestion_balance,
    friendliness,
    heterogeneous_paths,
    symmetric_competitors,
    symmetric_disjoint,
)

SCENARIOS = {
    "friendliness_lia": friendliness(Algorithm.LIA),
    "friendliness_olia": friendliness(Algorithm.OLIA),
    "friendliness_balia": friendliness(Algorithm.BALIA),
    "friendliness_uncoupled": friendliness(Algorithm.RENO),
    "balance_lia": congestion_balance(Algorithm.LIA),
    "balance_olia": congestion_balance(Algorithm.OLIA),
    "balance_balia": congestion_balance(Algorithm.BALIA),
    "balance_wvegas": congestion_balance(Algorithm.WVEGAS),
    "balance_uncoupled": congestion_balance(Algorithm.RENO),
    "bufferbloat_wvegas": bufferbloat(Algorithm.WVEGAS),
    "bufferbloat_lia": bufferbloat(Algorithm.LIA),
    "competitors_reno": symmetric_competitors(Algorithm.RENO),
    "aggregation_lia": symmetric_disjoint(Algorithm.LIA),
    "heterogeneous_olia": heterogeneous_paths(Algorithm.OLIA),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=Path(__file__).resolve().parent.parent / "configs", type=Path)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name, spec in SCENARIOS.items():
        doc = spec_to_document(spec)
        doc["output"] = {"dir": f"out/{name}"}
        (args.out / f"{name}.json").write_text(json.dumps(doc, indent=2) + "\n")
        print(args.out / f"{name}.json")


if __name__ == "__main__":
    main()
