"""
NMSE against the number of pilot slots
======================================

Sweeps P = 2..20 at 20 dB on the clustered channel (N = 128, M = 4) for
S-BAR and the three baselines, then reports how many slots each method
needs to reach -15 dB.  Pass a trial count to trade accuracy for time
(500 trials takes a bit over a minute on one core).

    python3 demos/02_pilot_sweep.py [trials]
"""

import math
import sys
from dataclasses import replace
from pathlib import Path

from fasbar.analysis import run_experiment
from fasbar.config import load_config

config = load_config(Path(__file__).with_name("configs") / "pilot_sweep_ssc.cfg")
if len(sys.argv) > 1:
    config = replace(config, trials=int(sys.argv[1]))

results = run_experiment(config, progress=lambda i, p, snr: print(f"  P = {p} done", file=sys.stderr))

names = [e.name for e in config.estimators]
table = {(r.estimator, r.pilots): r.nmse_db for r in results}
print("P    " + "".join(f"{n:>14}" for n in names))
for p in config.pilots:
    print(f"{p:<5}" + "".join(f"{table[n, p]:>14.2f}" for n in names))

print("\nfirst P reaching -15 dB:")
for n in names:
    hits = [p for p in config.pilots if table[n, p] <= -15]
    print(f"  {n:<12} {min(hits) if hits else math.inf}")
