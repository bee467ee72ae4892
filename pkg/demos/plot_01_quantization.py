"""
Few-bit quantization as gain plus uncorrelated noise
====================================================

A Lloyd-Max quantizer applied to a Gaussian input behaves like a scaled
copy of the input plus a distortion term that is uncorrelated with it.
This script builds the quantizers, reports the gain ``alpha`` for each
resolution and checks the linear model on a simulated channel.
"""

import numpy as np

from beamdenoise import alpha_for, composite_noise_variance, distortion, make_quantizer, quantize
from beamdenoise.chanmodel import complex_normal

rng = np.random.default_rng(0)

# %%
# Codebooks and gains
# -------------------
# ``alpha = 1 - rho`` where ``rho`` is the normalized mean-square distortion.

for b in (1, 2, 3, 4):
    qm = make_quantizer(b)
    print(f"{b}-bit: rho={distortion(qm):.5f}  alpha={alpha_for(qm):.5f}  levels={np.round(qm.levels, 3)}")

# %%
# Checking the linear model
# -------------------------
# Regress the quantized output on its input. The fitted gain should match
# ``alpha`` and the residual should be uncorrelated with the input.

M, trials = 64, 4000
x = complex_normal(rng, (trials, M))
for b in (1, 2, 3):
    qm = make_quantizer(b)
    y = quantize(x, qm).entries
    gain = np.vdot(x, y).real / np.vdot(x, x).real
    resid = y - gain * x
    corr = abs(np.vdot(x, resid)) / np.sqrt(np.vdot(x, x).real * np.vdot(resid, resid).real)
    print(f"{b}-bit: fitted gain {gain:.4f} vs alpha {alpha_for(qm):.4f}, |corr(x, e)| = {corr:.1e}")

# %%
# Composite noise seen by the estimator
# -------------------------------------
# With thermal noise ``E0`` and channel power ``P_h`` per antenna, the
# quantized observation carries ``alpha*E0 + alpha*(1-alpha)*P_h`` of noise.

for b in (2, 3, 4):
    a = alpha_for(make_quantizer(b))
    for snr in (0, 10, 20):
        E0 = 10 ** (-snr / 10)
        print(f"{b}-bit, {snr:2d} dB: D0 = {composite_noise_variance(a, E0, 1.0):.4f}")
