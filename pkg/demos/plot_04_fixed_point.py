"""
Bit-true model of the denoising datapath
========================================

The fixed-point model mirrors a hardware implementation: integer sorting
and prefix sums for the noise estimator, a piecewise-linear logarithm for
the threshold and saturating Q-format arithmetic throughout. This script
compares it with the floating-point reference and writes a test vector.
"""

import tempfile
from pathlib import Path

import numpy as np

from beamdenoise import ChannelVector, DenoiserParams, alpha_for, denoise_pipeline, make_quantizer, quantize
from beamdenoise.chanmodel import complex_normal, geometric_channels
from beamdenoise.fixedpoint import (BEAMSPACE, POWER, default_pwl_table, fx_denoise_pipeline, fx_quantize, pwl_ln,
                                    read_hex, saturation_monitor, write_hex)

rng = np.random.default_rng(4)
M = 64
params = DenoiserParams()
qm = make_quantizer(3)
alpha = alpha_for(qm)

# %%
# The logarithm approximation
# ---------------------------

table = default_pwl_table()
x = np.linspace(0.01, 100.0, 2000)
approx = np.array([pwl_ln(fx_quantize(v, POWER), table).to_float() for v in x])
err = np.max(np.abs(approx - np.log(fx_quantize(x, POWER).to_float())))
print(f"PWL ln over [0.01, 100]: {table.segments} segments, max error {err:.2e}")

# %%
# Float versus fixed point
# ------------------------
# A handful of saturations at the magnitude stage are expected: strong
# on-grid beams exceed the range of the squared-magnitude word, and the
# clipped value still lies far above any threshold.

errs_float, errs_fx = [], []
with saturation_monitor() as sat:
    for _ in range(300):
        h = geometric_channels(rng, (), M, on_grid=True)
        hp = quantize(h + complex_normal(rng, h.shape, 0.1), qm).entries
        ref, _ = denoise_pipeline(ChannelVector(hp), params, alpha)
        fx, _ = fx_denoise_pipeline(hp, params, alpha)
        errs_float.append(np.sum(np.abs(ref.entries - h) ** 2) / M)
        errs_fx.append(np.sum(np.abs(fx - h) ** 2) / M)
print(f"MSE float {10 * np.log10(np.mean(errs_float)):.2f} dB, fixed {10 * np.log10(np.mean(errs_fx)):.2f} dB")
print("saturation events:", dict(sat) or "none")

# %%
# Test vectors
# ------------
# Words are written as two's complement hex, one per line.

_, _, trace = fx_denoise_pipeline(hp, params, alpha, return_trace=True)
with tempfile.TemporaryDirectory() as d:
    path = Path(d) / "beamspace_re.hex"
    write_hex(path, trace.beam_re)
    back = read_hex(path, BEAMSPACE)
    print(path.name, "->", path.read_text().splitlines()[:4], "...")
    print("round trip exact:", np.array_equal(back.raw, trace.beam_re.raw))
