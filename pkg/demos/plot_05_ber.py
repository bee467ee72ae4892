"""
Uplink bit error rate with estimated channels
=============================================

Eight single-antenna users send 16-QAM to a 64-antenna array with few-bit
converters. The receiver equalizes with LMMSE using each channel
estimate. The SNR at which BER reaches 1e-2 summarizes each curve.
"""

import numpy as np

from beamdenoise import harness

snrs = tuple(float(s) for s in np.arange(-10, 21, 2.5))
cfg = harness.SimConfig(trials=60, bits=(3,), snr_db=snrs, seed=11, estimators=("proposed-blind", "ls"))
rows = harness.run_ber_experiment(cfg)

# %%
# Curves and crossings
# --------------------

by = {}
for r in rows:
    by.setdefault(r.estimator, []).append((r.snr_db, r.ber))
for est, pts in by.items():
    pts.sort()
    s = np.array([p[0] for p in pts])
    b = np.array([p[1] for p in pts])
    print(f"{est:<16} " + " ".join(f"{x:.1e}" for x in b))
    print(f"{'':<16} SNR at BER 1e-2: {harness.snr_at_ber(s, b):.2f} dB")
