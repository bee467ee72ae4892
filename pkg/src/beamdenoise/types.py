"""Domain-tagged channel containers.

Both containers hold a complex array whose last axis has length ``M``; any
leading axes are treated as a batch of independent realizations.
"""

from dataclasses import dataclass

import numpy as np


def _as_complex(entries):
    arr = np.asarray(entries, dtype=np.complex128)
    if arr.ndim == 0:
        raise ValueError("channel entries must have at least one axis")
    if not np.all(np.isfinite(arr)):
        raise ValueError("channel entries must be finite")
    return arr


@dataclass(frozen=True)
class ChannelVector:
    """Antenna-domain channel (true, noisy or denoised)."""

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _as_complex(self.entries))

    domain = "antenna"

    @property
    def M(self) -> int:
        return self.entries.shape[-1]

    def __len__(self):
        return self.M

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclass(frozen=True)
class BeamspaceVector:
    """DFT-domain channel. Only produced by :func:`to_beamspace` or generators."""

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _as_complex(self.entries))

    domain = "beamspace"

    @property
    def M(self) -> int:
        return self.entries.shape[-1]

    def __len__(self):
        return self.M

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)
