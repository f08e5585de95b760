"""End to end: a pcap with benign traffic followed by a SYN-style flood.

Writes a capture, runs the full pipeline, and compares execute-mode scores
before and during the flood.
"""

import csv
import json
import tempfile
from pathlib import Path

import numpy as np

from kitsune import PipelineConfig, run, write_pcap
from kitsune.synthetic import benign_traffic, flood

work = Path(tempfile.mkdtemp())
benign = benign_traffic(30_000, seed=0)
attack = flood(3_000, start=benign[-1].timestamp + 0.01)
write_pcap(work / "trace.pcap", benign + attack)

config = PipelineConfig(pcap=str(work / "trace.pcap"), fm_grace=3_000, ad_grace=20_000,
                        scores=str(work / "scores.csv"), alerts=str(work / "alerts.jsonl"))
summary = run(config)
print(json.dumps({k: summary[k] for k in ("instances", "k", "phi", "executed", "alerts", "seconds")}, indent=2))

with open(work / "scores.csv", newline="") as fh:
    rows = [(int(r["index"]), float(r["rmse"])) for r in csv.DictReader(fh)]
idx, s = map(np.array, zip(*rows))
execute = idx >= config.fm_grace + config.ad_grace
print(f"mean score before flood: {s[execute & (idx < len(benign))].mean():.4f}")
print(f"mean score during flood: {s[idx >= len(benign)].mean():.4f}")
first = json.loads(open(work / "alerts.jsonl").readline())
print(f"first alert: {first}")
print(f"outputs in {work}")
