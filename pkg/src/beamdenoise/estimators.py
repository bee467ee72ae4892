"""Blind estimation of the composite noise power, channel power, SDNR and
activity rate from beamspace squared magnitudes.

All estimators work along the last axis of ``p`` so a batch of independent
realizations can be processed in one call. Scalars come back as Python
floats for 1-D input and as arrays otherwise.
"""

from dataclasses import dataclass, field

import numpy as np

LN2 = np.log(2.0)


def _out(x):
    x = np.asarray(x)
    return x.item() if x.ndim == 0 else x


def kappa(k):
    """Truncated-mean factor: ``E[X | X <= k lam] = lam * kappa(k)`` for ``X ~ Exp(lam)``."""
    k = np.asarray(k, dtype=float)
    if np.any(k <= 0):
        raise ValueError("kappa is defined for k > 0")
    with np.errstate(over="ignore", invalid="ignore"):
        num = -np.expm1(-k) - k * np.exp(-k)
        val = num / -np.expm1(-k)
    return _out(np.where(np.isinf(k), 1.0, val))


@dataclass(frozen=True)
class DenoiserParams:
    """Tuning constants of the blind denoiser.

    ``rho_min=None`` resolves to ``max(8, M // 8)`` for the array at hand.
    ``strict_kappa`` keeps the ``1/kappa(c)`` correction even when the
    retained set was rebuilt with the enlarged confidence ``c_prime``.
    """

    C: float = 4.0
    c: float = 2.0
    c_prime: float = 4.0
    rho_min: int | None = None
    T: int = 3
    strict_kappa: bool = False

    def __post_init__(self):
        if not self.C > 0 or not self.c > 0:
            raise ValueError("C and c must be positive")
        if not self.c_prime > self.c:
            raise ValueError("c_prime must exceed c")
        if int(self.T) != self.T or self.T < 1:
            raise ValueError("T must be a positive integer")
        if self.rho_min is not None and (int(self.rho_min) != self.rho_min or self.rho_min < 1):
            raise ValueError("rho_min must be a positive integer")

    def rho_min_for(self, M):
        rho = max(8, M // 8) if self.rho_min is None else int(self.rho_min)
        if rho > M:
            raise ValueError(f"rho_min={rho} exceeds M={M}")
        return rho


@dataclass
class NoiseEstimate:
    trajectory: np.ndarray
    retained: np.ndarray
    enlarged: np.ndarray = field(repr=False)

    @property
    def D0(self):
        return _out(self.trajectory[..., -1])


def mad_init(p):
    """Median-based starting value ``median(p) / ln 2``.

    For even ``M`` the median is the mean of the two middle order statistics.
    """
    p = np.asarray(p, dtype=float)
    if p.size == 0 or p.shape[-1] == 0:
        raise ValueError("mad_init needs at least one sample")
    return _out(np.median(p, axis=-1) / LN2)


def estimate_noise_power(p, params: DenoiserParams = DenoiserParams()) -> NoiseEstimate:
    """Iterated truncated-mean estimate of the composite noise power.

    Starting from :func:`mad_init`, each iteration keeps the samples not
    above ``c * D``, falls back to ``c_prime * D`` when fewer than
    ``rho_min`` survive, and rescales the retained mean by ``1/kappa``.
    """
    p = np.asarray(p, dtype=float)
    M = p.shape[-1]
    rho_min = params.rho_min_for(M)
    k_c = kappa(params.c)
    k_cp = k_c if params.strict_kappa else kappa(params.c_prime)

    D = np.asarray(mad_init(p), dtype=float)
    trajectory = [D]
    retained, enlarged = [], []
    for _ in range(params.T):
        mask = p <= (params.c * D)[..., None]
        n = mask.sum(axis=-1)
        small = n < rho_min
        if np.any(small):
            wide = p <= (params.c_prime * D)[..., None]
            mask = np.where(small[..., None], wide, mask)
            n = mask.sum(axis=-1)
        total = np.where(mask, p, 0.0).sum(axis=-1)
        mean = np.where(n > 0, total / np.maximum(n, 1), 0.0)
        D = mean / np.where(small, k_cp, k_c)
        trajectory.append(D)
        retained.append(n)
        enlarged.append(small)
    return NoiseEstimate(np.stack(trajectory, axis=-1), np.stack(retained, axis=-1),
                         np.stack(enlarged, axis=-1))


def estimate_channel_power(p, D0):
    """``max(mean(p) - D0, 0)``: received signal power above the noise floor."""
    p = np.asarray(p, dtype=float)
    return _out(np.maximum(p.mean(axis=-1) - np.asarray(D0), 0.0))


def estimate_sdnr(p, D0):
    """``max(mean(p)/D0 - 1, 0)``; ``inf`` when ``D0 == 0`` and ``p`` is not all zero."""
    p = np.asarray(p, dtype=float)
    D0 = np.asarray(D0, dtype=float)
    mean = p.mean(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.maximum(mean / D0 - 1.0, 0.0)
    s = np.where(D0 > 0, s, np.where(mean > 0, np.inf, 0.0))
    return _out(s)


@dataclass
class AuxEstimates:
    P_h: object
    sdnr: object
    q: object
    qM: object
    clamped: object = False


def _round_half_up(x):
    return np.floor(x + 0.5)


def estimate_activity(p, D0, sdnr=None, P_h=None):
    """Active-beam count ``qM`` and rate ``q = qM / M``.

    Integer form ``round(2 M^2 P^2 / (sum p^2 - 2 M D0^2 - 4 M D0 P))`` with
    ``P = sdnr * D0`` (pass ``P_h`` directly to avoid the product when
    ``D0 == 0``). The result is clamped to ``[1, M]``; a nonpositive
    denominator yields ``M`` and sets the ``clamped`` flag.

    Returns ``(q, qM, clamped)``.
    """
    p = np.asarray(p, dtype=float)
    M = p.shape[-1]
    D0 = np.asarray(D0, dtype=np.longdouble)
    if P_h is None:
        if sdnr is None:
            raise ValueError("either sdnr or P_h is required")
        P = np.asarray(sdnr, dtype=np.longdouble) * D0
    else:
        P = np.asarray(P_h, dtype=np.longdouble)
    # Fourth moment in extended precision: the denominator is a difference of
    # nearly equal terms when the channel is dense.
    s4 = np.sum(np.square(p.astype(np.longdouble)), axis=-1)
    den = s4 - 2 * M * D0**2 - 4 * M * D0 * P
    num = 2 * M**2 * P**2
    bad = ~(den > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bad, M, num / np.where(bad, 1, den))
    qM = np.clip(_round_half_up(ratio), 1, M).astype(np.int64)
    return _out(qM / M), _out(qM), _out(bad)


def activity_rate_grid(p, D0, sdnr):
    """Grid search ``argmin_{q' in {1/M, ..., 1}} |2 S^2 / (m4 - 2 - 4 S) - q'|``.

    ``m4`` is the normalized fourth moment ``sum p^2 / (M D0^2)``; a
    nonpositive denominator selects ``q' = 1``. This is the normalized form of
    :func:`estimate_activity` and serves as its cross-check.
    """
    p = np.asarray(p, dtype=float)
    M = p.shape[-1]
    D0 = np.asarray(D0, dtype=np.longdouble)
    S = np.asarray(sdnr, dtype=np.longdouble)
    m4 = np.sum(np.square(p.astype(np.longdouble)), axis=-1) / (M * D0**2)
    den = m4 - 2 - 4 * S
    bad = ~(den > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        target = np.where(bad, 1.0, 2 * S**2 / np.where(bad, 1, den))
    grid = np.arange(1, M + 1) / M
    idx = np.argmin(np.abs(np.asarray(target, dtype=float)[..., None] - grid), axis=-1)
    return _out(grid[idx])


def estimate_all(p, params: DenoiserParams = DenoiserParams(), known_D0=None):
    """Run the noise, power, SDNR and activity estimators in sequence.

    With ``known_D0`` the iterative noise estimator is skipped.
    Returns ``(noise_estimate_or_None, D0, AuxEstimates)``.
    """
    p = np.asarray(p, dtype=float)
    if known_D0 is None:
        noise = estimate_noise_power(p, params)
        D0 = noise.D0
    else:
        noise = None
        D0 = _out(np.broadcast_to(np.asarray(known_D0, dtype=float), p.shape[:-1]))
    P = estimate_channel_power(p, D0)
    S = estimate_sdnr(p, D0)
    q, qM, clamped = estimate_activity(p, D0, P_h=P)
    return noise, D0, AuxEstimates(P, S, q, qM, clamped)
