"""Unitary DFT between the antenna and beamspace domains.

Forward kernel ``exp(-j 2 pi m k / M) / sqrt(M)``; the 1/sqrt(M) factor sits
entirely in the forward and inverse transforms so that norms are preserved.
"""

import numpy as np

from .types import BeamspaceVector, ChannelVector


def _is_pow2(n):
    return n > 0 and n & (n - 1) == 0


def dft_matrix(M: int) -> np.ndarray:
    """Unitary DFT matrix ``F`` with ``F[k, m] = exp(-2j pi k m / M) / sqrt(M)``."""
    k = np.arange(M)
    return np.exp(-2j * np.pi * np.outer(k, k) / M) / np.sqrt(M)


def direct_dft(x, inverse=False):
    """Matrix-product DFT along the last axis (reference path, any M)."""
    x = np.asarray(x, dtype=np.complex128)
    F = dft_matrix(x.shape[-1])
    if inverse:
        F = F.conj().T
    return x @ F.T


def _forward(x, method):
    if method == "fft" or (method == "auto" and _is_pow2(x.shape[-1])):
        return np.fft.fft(x, axis=-1, norm="ortho")
    return direct_dft(x)


def _inverse(x, method):
    if method == "fft" or (method == "auto" and _is_pow2(x.shape[-1])):
        return np.fft.ifft(x, axis=-1, norm="ortho")
    return direct_dft(x, inverse=True)


def to_beamspace(h: ChannelVector, method: str = "auto") -> BeamspaceVector:
    """``F h``. ``method`` is ``"auto"`` (FFT for powers of two), ``"fft"`` or ``"direct"``."""
    if isinstance(h, BeamspaceVector):
        raise TypeError("input is already in the beamspace domain")
    if not isinstance(h, ChannelVector):
        h = ChannelVector(h)
    return BeamspaceVector(_forward(h.entries, method))


def from_beamspace(hb: BeamspaceVector, method: str = "auto") -> ChannelVector:
    """``F^H hb``, the exact inverse of :func:`to_beamspace`."""
    if isinstance(hb, ChannelVector):
        raise TypeError("input is an antenna-domain vector")
    if not isinstance(hb, BeamspaceVector):
        hb = BeamspaceVector(hb)
    return ChannelVector(_inverse(hb.entries, method))


def magnitudes_squared(hb) -> np.ndarray:
    x = np.asarray(hb.entries if isinstance(hb, BeamspaceVector) else hb)
    return x.real**2 + x.imag**2
