"""
Channel-estimation error versus SNR
===================================

Compare the blind denoiser with least squares, a diagonal LMMSE that is
given the true statistics, and the denoiser fed the true noise power.
"""

from beamdenoise import harness

cfg = harness.SimConfig(trials=400, bits=(2, 3, 4), snr_db=(-10.0, 0.0, 10.0, 20.0), seed=7)
rows = harness.run_mse_experiment(cfg)

# %%
# Results
# -------
# Each line is one (resolution, estimator) curve in dB.

curves = {}
for r in rows:
    curves.setdefault((r.bits, r.estimator), []).append(r.mse_db)
print("bits  estimator        " + "".join(f"{s:>8.0f}" for s in cfg.snr_db))
for (b, e), v in sorted(curves.items(), key=lambda kv: (str(kv[0][0]), kv[0][1])):
    print(f"{b!s:>4}  {e:<16}" + "".join(f"{x:8.2f}" for x in v))
