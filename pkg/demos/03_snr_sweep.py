"""
NMSE against SNR, and the data-driven prior
===========================================

At P = 10 the Bessel prior needs no training data, while the sample
covariance of 100 channels is learned.  This script compares both S-BAR
variants with the baselines over 0..30 dB, on the clustered channel or on
the rich-scattering proxy (23 clusters x 20 rays).

    python3 demos/03_snr_sweep.py [ssc|rich] [trials]
"""

import sys
from dataclasses import replace
from pathlib import Path

from fasbar.analysis import run_experiment
from fasbar.config import load_config

channel = sys.argv[1] if len(sys.argv) > 1 else "ssc"
config = load_config(Path(__file__).with_name("configs") / f"snr_sweep_{channel}.cfg")
if len(sys.argv) > 2:
    config = replace(config, trials=int(sys.argv[2]))

results = run_experiment(config)
names = [e.name for e in config.estimators]
table = {(r.estimator, r.snr_db): r for r in results}
print(f"channel = {channel}, P = {config.pilots[0]}, {config.trials} trials")
print("SNR  " + "".join(f"{n:>14}" for n in names))
for snr in config.snr_db:
    print(f"{snr:<5g}" + "".join(f"{table[n, snr].nmse_db:>14.2f}" for n in names))
