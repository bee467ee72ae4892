"""Low-complexity beamspace channel denoising for quantized massive-MIMO
observations: blind composite-noise estimation, hypothesis-test hard
thresholding, a fixed-point datapath model and a Monte-Carlo harness.
"""

from .beamspace import dft_matrix, from_beamspace, magnitudes_squared, to_beamspace
from .chanmodel import (BernoulliGaussianConfig, SteeringConfig, add_awgn, generate_bg_beamspace_channel,
                        generate_geometric_channel, steering_vector)
from .denoiser import (DenoiseResult, EstimationReport, compute_threshold, compute_threshold_hw_form, denoise,
                       denoise_beamspace, denoise_pipeline, likelihood_ratio)
from .estimators import (AuxEstimates, DenoiserParams, NoiseEstimate, estimate_activity, estimate_all,
                         estimate_channel_power, estimate_noise_power, estimate_sdnr, kappa, mad_init)
from .quantizer import (AqnmParams, LloydMaxConvergenceError, QuantizerModel, alpha_for, build_lloyd_max,
                        composite_noise_variance, distortion, make_quantizer, quantize)
from .types import BeamspaceVector, ChannelVector

__version__ = "0.1.0"
