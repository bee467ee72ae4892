"""Ground-truth sparse mmWave channels and thermal noise.

Steering convention: the m-th antenna (0-indexed) sees ``exp(-j 2 pi m phi)``
with ``phi`` in [-1/2, 1/2). On-grid frequencies ``phi = k/M`` then land on a
single bin of the unitary DFT used by :mod:`beamdenoise.beamspace`.
"""

from dataclasses import dataclass

import numpy as np

from .types import BeamspaceVector, ChannelVector


def _check_phi(phi):
    phi = np.asarray(phi, dtype=float)
    if np.any(phi < -0.5) or np.any(phi >= 0.5) or not np.all(np.isfinite(phi)):
        raise ValueError("spatial frequency must lie in [-1/2, 1/2)")
    return phi


@dataclass(frozen=True)
class SteeringConfig:
    """Geometric multipath description: ``h = sum_l g_l a(phi_l)``."""

    M: int
    phis: tuple
    gains: tuple

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 2:
            raise ValueError("M must be an integer >= 2")
        phis = tuple(float(p) for p in np.atleast_1d(self.phis))
        gains = tuple(complex(g) for g in np.atleast_1d(self.gains))
        if len(phis) < 1:
            raise ValueError("at least one path is required")
        if len(phis) != len(gains):
            raise ValueError("phis and gains must have the same length")
        _check_phi(phis)
        object.__setattr__(self, "phis", phis)
        object.__setattr__(self, "gains", gains)

    @property
    def L(self) -> int:
        return len(self.phis)


@dataclass(frozen=True)
class BernoulliGaussianConfig:
    M: int
    q: float
    P_h: float = 1.0

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError("M must be a positive integer")
        if not 0.0 < self.q <= 1.0:
            raise ValueError("activity rate q must lie in (0, 1]")
        if round(self.q * self.M) < 1:
            raise ValueError("q * M must round to at least one active entry")
        if not (np.isfinite(self.P_h) and self.P_h > 0):
            raise ValueError("P_h must be finite and positive")


def steering_vector(phi: float, M: int) -> ChannelVector:
    """Array response ``a(phi)``; unit-modulus entries, norm ``sqrt(M)``."""
    if int(M) != M or M < 1:
        raise ValueError("M must be a positive integer")
    phi = float(_check_phi(phi))
    m = np.arange(M)
    return ChannelVector(np.exp(-2j * np.pi * m * phi))


def generate_geometric_channel(cfg: SteeringConfig) -> ChannelVector:
    m = np.arange(cfg.M)
    phis = np.asarray(cfg.phis)
    gains = np.asarray(cfg.gains)
    A = np.exp(-2j * np.pi * np.outer(m, phis))
    return ChannelVector(A @ gains)


def path_power_profile(L: int, decay: float = 0.5) -> np.ndarray:
    """Per-path mean powers ``decay**l`` normalized to unit total."""
    powers = decay ** np.arange(L, dtype=float)
    return powers / powers.sum()


def random_steering_config(M, rng, L=3, decay=0.5, on_grid=False) -> SteeringConfig:
    """Draw a geometric channel with ``E||h||^2 = M``.

    Path gains are circular Gaussian with exponentially decaying mean power
    (first path strongest, playing the LoS role). Frequencies are uniform on
    [-1/2, 1/2), or uniform over the DFT grid when ``on_grid`` is set.
    """
    if on_grid:
        phis = rng.choice(M, size=L, replace=False) / M
        phis = np.where(phis >= 0.5, phis - 1.0, phis)
    else:
        phis = rng.uniform(-0.5, 0.5, size=L)
    sigma = np.sqrt(path_power_profile(L, decay) / 2)
    gains = sigma * (rng.standard_normal(L) + 1j * rng.standard_normal(L))
    return SteeringConfig(M, tuple(phis), tuple(gains))


def generate_bg_beamspace_channel(cfg: BernoulliGaussianConfig, rng, size=None) -> BeamspaceVector:
    """Bernoulli-complex-Gaussian beamspace channel.

    Each entry is active with probability ``q`` and then drawn from
    ``CN(0, P_h/q)``, so the expected per-entry power is ``P_h``. ``size``
    prepends batch axes.
    """
    shape = (cfg.M,) if size is None else tuple(np.atleast_1d(size)) + (cfg.M,)
    active = rng.random(shape) < cfg.q
    sigma = np.sqrt(cfg.P_h / cfg.q / 2)
    g = sigma * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return BeamspaceVector(np.where(active, g, 0.0))


def complex_normal(rng, shape, variance=1.0):
    """Circular complex Gaussian samples with the given per-entry variance."""
    s = np.sqrt(variance / 2)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def add_awgn(h: ChannelVector, N0: float, rng) -> ChannelVector:
    """Add ``CN(0, N0 I)`` noise (``N0/2`` per real dimension)."""
    if N0 < 0:
        raise ValueError("N0 must be nonnegative")
    if N0 == 0:
        return ChannelVector(h.entries.copy())
    return ChannelVector(h.entries + complex_normal(rng, h.entries.shape, N0))


def geometric_channels(rng, shape, M, L=3, decay=0.5, on_grid=False) -> np.ndarray:
    """Batch of geometric channels, array of shape ``shape + (M,)``.

    Same distribution as :func:`random_steering_config` followed by
    :func:`generate_geometric_channel`, drawn in one vectorized pass.
    """
    shape = tuple(np.atleast_1d(shape)) if shape != () else ()
    if on_grid:
        keys = rng.random(shape + (M,))
        bins = np.argsort(keys, axis=-1)[..., :L]
        phis = bins / M
        phis = np.where(phis >= 0.5, phis - 1.0, phis)
    else:
        phis = rng.uniform(-0.5, 0.5, size=shape + (L,))
    gains = complex_normal(rng, shape + (L,)) * np.sqrt(path_power_profile(L, decay))
    m = np.arange(M)
    A = np.exp(-2j * np.pi * phis[..., None, :] * m[:, None])
    return np.einsum("...ml,...l->...m", A, gains)
