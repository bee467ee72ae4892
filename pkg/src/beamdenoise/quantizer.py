"""Scalar I/Q ADC model and its additive-quantization-noise linearization."""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, linalg, special

from .types import ChannelVector

_SQRT2 = np.sqrt(2.0)


def _gauss_pdf(x):
    return np.exp(-0.5 * np.square(x)) / np.sqrt(2 * np.pi)


def _gauss_cdf(x):
    return 0.5 * special.erfc(-np.asarray(x) / _SQRT2)


class LloydMaxConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuantizerModel:
    """Symmetric scalar codebook applied independently to I and Q.

    ``bits=None`` denotes an ideal (infinite-resolution) converter.
    ``input_scale`` is the per-dimension standard deviation the codebook is
    matched to; ``None`` selects ideal AGC, i.e. the RMS of each realization.
    """

    bits: int | None
    levels: np.ndarray = field(repr=False)
    thresholds: np.ndarray = field(repr=False)
    input_scale: float | None = None

    def __post_init__(self):
        if self.bits is None:
            return
        levels = np.asarray(self.levels, dtype=float)
        thresholds = np.asarray(self.thresholds, dtype=float)
        if levels.shape != (2**self.bits,) or thresholds.shape != (2**self.bits - 1,):
            raise ValueError("codebook size does not match bit depth")
        if np.any(np.diff(levels) <= 0):
            raise ValueError("levels must be strictly increasing")
        if np.any(thresholds <= levels[:-1]) or np.any(thresholds >= levels[1:]):
            raise ValueError("thresholds must interleave the levels")
        if self.input_scale is not None and not self.input_scale > 0:
            raise ValueError("input_scale must be positive")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "thresholds", thresholds)

    @classmethod
    def ideal(cls):
        return cls(None, np.empty(0), np.empty(0))

    @property
    def is_ideal(self):
        return self.bits is None


def _lloyd_step(thresholds):
    """Centroids of N(0,1) over the cells cut by ``thresholds``."""
    edges = np.concatenate(([-np.inf], thresholds, [np.inf]))
    a, b = edges[:-1], edges[1:]
    mass = _gauss_cdf(b) - _gauss_cdf(a)
    # Tail cells: use complementary forms so 8-bit outer cells keep precision.
    mass = np.where(a >= 0, 0.5 * special.erfc(a / _SQRT2) - 0.5 * special.erfc(b / _SQRT2), mass)
    return (_gauss_pdf(a) - _gauss_pdf(b)) / mass


def _lloyd_residual(thresholds):
    levels = _lloyd_step(thresholds)
    return thresholds - 0.5 * (levels[:-1] + levels[1:])


def _newton_step(thresholds):
    """One Newton step on the Lloyd fixed-point equation (tridiagonal Jacobian)."""
    edges = np.concatenate(([-np.inf], thresholds, [np.inf]))
    a, b = edges[:-1], edges[1:]
    levels = _lloyd_step(thresholds)
    mass = _gauss_cdf(b) - _gauss_cdf(a)
    mass = np.where(a >= 0, 0.5 * special.erfc(a / _SQRT2) - 0.5 * special.erfc(b / _SQRT2), mass)
    with np.errstate(invalid="ignore"):
        dc_da = np.nan_to_num(_gauss_pdf(a) * (levels - a) / mass)
        dc_db = np.nan_to_num(_gauss_pdf(b) * (b - levels) / mass)
    # r_i = t_i - (c_i + c_{i+1}) / 2 with c_i = c(t_{i-1}, t_i)
    diag = 1.0 - 0.5 * (dc_db[:-1] + dc_da[1:])
    lower = -0.5 * dc_da[1:-1]    # d r_i / d t_{i-1}
    upper = -0.5 * dc_db[1:-1]    # d r_i / d t_{i+1}
    ab = np.zeros((3, thresholds.size))
    ab[0, 1:] = upper
    ab[1] = diag
    ab[2, :-1] = lower
    r = thresholds - 0.5 * (levels[:-1] + levels[1:])
    return thresholds - linalg.solve_banded((1, 1), ab, r)


@lru_cache(maxsize=None)
def _lloyd_max_codebook(bits, tol, max_iter):
    n = 2**bits
    if bits == 1:
        levels = np.array([-np.sqrt(2 / np.pi), np.sqrt(2 / np.pi)])
        return levels, np.zeros(1)
    # Compander start: optimal high-resolution point density ~ pdf**(1/3).
    thresholds = np.sqrt(3.0) * special.ndtri(np.arange(1, n) / n)
    # Plain Lloyd converges linearly with a rate near one for many levels.
    # After a short warm-up the same fixed point is approached with Newton
    # steps; convergence is still judged by the Lloyd update itself.
    warmup = 50
    for it in range(max_iter):
        if it >= warmup:
            candidate = _newton_step(thresholds)
            if np.all(np.diff(candidate) > 0):
                thresholds = candidate
        levels = _lloyd_step(thresholds)
        new_thresholds = 0.5 * (levels[:-1] + levels[1:])
        delta = np.max(np.abs(new_thresholds - thresholds))
        thresholds = new_thresholds
        if delta < tol:
            break
    else:
        raise LloydMaxConvergenceError(
            f"Lloyd-Max failed to converge after {max_iter} iterations for {bits} bits")
    levels = _lloyd_step(thresholds)
    # Enforce exact symmetry left over from floating rounding.
    levels = 0.5 * (levels - levels[::-1])
    thresholds = 0.5 * (thresholds - thresholds[::-1])
    return levels, thresholds


def build_lloyd_max(bits: int, tol: float = 1e-11, max_iter: int = 10_000) -> QuantizerModel:
    """MSE-optimal codebook for a zero-mean unit-variance Gaussian input.

    The Lloyd iteration alternates the centroid and nearest-neighbour
    conditions until the thresholds move by less than ``tol``.
    """
    if int(bits) != bits or not 1 <= bits <= 8:
        raise ValueError("bits must be an integer in [1, 8]")
    levels, thresholds = _lloyd_max_codebook(int(bits), tol, max_iter)
    return QuantizerModel(int(bits), levels.copy(), thresholds.copy())


def make_quantizer(bits) -> QuantizerModel:
    """Lloyd-Max quantizer, or the ideal one for ``None``/``"inf"``."""
    if bits is None or (isinstance(bits, str) and bits.lower() in ("inf", "infinite")):
        return QuantizerModel.ideal()
    if isinstance(bits, float) and np.isinf(bits):
        return QuantizerModel.ideal()
    return build_lloyd_max(int(bits))


def agc_scale(v):
    """Per-dimension RMS along the last axis (ideal AGC)."""
    v = np.asarray(v)
    return np.sqrt(np.mean(np.abs(v) ** 2, axis=-1, keepdims=True) / 2)


def quantize_real(x, qm: QuantizerModel):
    """Map normalized real samples onto the codebook levels."""
    idx = np.searchsorted(qm.thresholds, x, side="left")
    return qm.levels[idx]


def quantize(v, qm: QuantizerModel, scale=None) -> ChannelVector:
    """Quantize real and imaginary parts independently.

    ``scale`` overrides ``qm.input_scale``; it may be an array broadcastable
    against ``v`` (one scale per realization). With neither given, the AGC
    scale of each realization along the last axis is used.
    """
    arr = np.asarray(v.entries if isinstance(v, ChannelVector) else v, dtype=np.complex128)
    if not np.all(np.isfinite(arr)):
        raise ValueError("cannot quantize non-finite input")
    if qm.is_ideal:
        return ChannelVector(arr.copy())
    if scale is None:
        scale = qm.input_scale if qm.input_scale is not None else agc_scale(arr)
    scale = np.asarray(scale, dtype=float)
    # An all-zero realization has no scale; map it to zero-scale output.
    safe = np.where(scale > 0, scale, 1.0)
    re = quantize_real(arr.real / safe, qm) * scale
    im = quantize_real(arr.imag / safe, qm) * scale
    return ChannelVector(re + 1j * im)


def distortion(qm: QuantizerModel) -> float:
    """Per-dimension MSE of the codebook for unit-variance Gaussian input.

    Adaptive quadrature per cell; the integrand is smooth inside each cell.
    """
    if qm.is_ideal:
        return 0.0
    edges = np.concatenate(([-np.inf], qm.thresholds, [np.inf]))
    total = 0.0
    for lo, hi, level in zip(edges[:-1], edges[1:], qm.levels):
        val, _ = integrate.quad(lambda x, c=level: (x - c) ** 2 * _gauss_pdf(x), lo, hi,
                                epsabs=0.0, epsrel=1e-11, limit=200)
        total += val
    return total


def alpha_for(qm: QuantizerModel) -> float:
    """Bussgang gain ``1 - rho`` of a Lloyd-Max codebook."""
    if qm.is_ideal:
        return 1.0
    return 1.0 - distortion(qm)


def composite_noise_variance(alpha: float, E0: float, P_h: float) -> float:
    """Thermal plus quantization noise variance ``a E0 + a (1 - a) P_h``."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if E0 < 0 or P_h < 0:
        raise ValueError("E0 and P_h must be nonnegative")
    return alpha * E0 + alpha * (1 - alpha) * P_h


@dataclass(frozen=True)
class AqnmParams:
    alpha: float
    E0: float
    P_h: float

    @property
    def D0(self):
        return composite_noise_variance(self.alpha, self.E0, self.P_h)
