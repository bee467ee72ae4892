"""Bayesian hard-threshold denoising in the beamspace domain."""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .beamspace import from_beamspace, magnitudes_squared, to_beamspace
from .estimators import DenoiserParams, _out, estimate_all
from .types import BeamspaceVector, ChannelVector

# Returned in place of a threshold when D0 == 0 (noise-free observation):
# every nonzero entry passes, exact zeros do not.
NOISE_FREE_ETA = np.finfo(float).tiny


def compute_threshold(D0, sdnr, q, C):
    """Decision threshold on ``|h'_m|^2``.

    ``eta = D0 (1 + q/S) ln((1 + S/q) (1 - q)/q C)``, the point where the
    signal-plus-noise and noise-only exponential densities, weighted by the
    prior odds and the cost ratio ``C``, balance. Degenerate inputs map to
    fail-safe sentinels: ``S == 0`` gives ``+inf`` (reject everything),
    ``q >= 1`` gives ``-inf`` (keep everything), ``D0 == 0`` gives
    :data:`NOISE_FREE_ETA`.
    """
    D0, S, q, C = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (D0, sdnr, q, C)))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        eta = D0 * (1 + q / S) * np.log((1 + S / q) * (1 - q) / q * C)
    eta = np.where(q >= 1, -np.inf, eta)
    eta = np.where(D0 == 0, NOISE_FREE_ETA, eta)
    eta = np.where(S == 0, np.inf, eta)
    return _out(eta)


def compute_threshold_hw_form(D0, sdnr, qM, M, C):
    """Same threshold from the integer active-beam count, with the log split as
    ``ln(1 + M S / qM) + ln(M - qM) - ln(qM) + ln C``.
    """
    D0, S, qM, C = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (D0, sdnr, qM, C)))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        log_sum = np.log1p(M * S / qM) + np.log(M - qM) - np.log(qM) + np.log(C)
        eta = D0 * (1 + qM / (M * S)) * log_sum
    eta = np.where(qM >= M, -np.inf, eta)
    eta = np.where(D0 == 0, NOISE_FREE_ETA, eta)
    eta = np.where(S == 0, np.inf, eta)
    return _out(eta)


def likelihood_ratio(x, D0, sdnr, q):
    """Density ratio of the active and noise-only components at ``|h'|^2 = x``.

    Active entries are ``CN(0, D0 (1 + S/q))``, noise-only ones ``CN(0, D0)``.
    Evaluated in the log domain to stay finite for large arguments.
    """
    x, D0, S, q = (np.asarray(a, dtype=float) for a in (x, D0, sdnr, q))
    v1 = D0 * (1 + S / q)
    log_lr = np.log(D0 / v1) - x / v1 + x / D0
    return _out(np.exp(log_lr))


@dataclass
class DenoiseResult:
    h_star: BeamspaceVector
    decisions: np.ndarray
    eta: object


def denoise(hb: BeamspaceVector, eta, alpha: float) -> DenoiseResult:
    """Keep entries with ``|h'_m|^2 >= eta`` (rescaled by ``1/alpha``), zero the rest."""
    if not 0 < np.min(alpha) <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    x = hb.entries if isinstance(hb, BeamspaceVector) else np.asarray(hb, dtype=complex)
    eta_b = np.asarray(eta, dtype=float)[..., None]
    keep = magnitudes_squared(x) >= eta_b
    out = np.where(keep, x / np.asarray(alpha, dtype=float)[..., None], 0.0)
    return DenoiseResult(BeamspaceVector(out), keep, eta)


@dataclass
class EstimationReport:
    """Everything the blind pipeline estimated for one (or a batch of) observation(s).

    ``D0_trajectory`` is empty when the noise power was supplied.
    """

    D0_trajectory: np.ndarray
    D0: object
    P_h: object
    sdnr: object
    q: object
    qM: object
    eta: object
    decisions: np.ndarray = field(repr=False)
    activity_clamped: object = False
    known_D0: bool = False

    CSV_FIELDS = ("trial", "snr_db", "bits", "D0_trajectory", "P_h", "sdnr", "q")

    def rows(self, snr_db=None, bits=None, first_trial=0):
        traj = np.atleast_2d(self.D0_trajectory) if np.size(self.D0_trajectory) else None
        P, S, q = (np.atleast_1d(v) for v in (self.P_h, self.sdnr, self.q))
        for i in range(P.size):
            t = "" if traj is None else ";".join(repr(float(v)) for v in traj[i])
            yield {"trial": first_trial + i, "snr_db": "" if snr_db is None else snr_db,
                   "bits": "" if bits is None else bits, "D0_trajectory": t,
                   "P_h": repr(float(P[i])), "sdnr": repr(float(S[i])), "q": repr(float(q[i]))}

    def to_csv(self, snr_db=None, bits=None, first_trial=0, header=True):
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.CSV_FIELDS, lineterminator="\n")
        if header:
            writer.writeheader()
        writer.writerows(self.rows(snr_db, bits, first_trial))
        return buf.getvalue()


def denoise_beamspace(hb, params: DenoiserParams = DenoiserParams(), alpha: float = 1.0, known_D0=None):
    """Estimate parameters from ``hb`` and hard-threshold it.

    Returns ``(DenoiseResult, EstimationReport)``.
    """
    hb = hb if isinstance(hb, BeamspaceVector) else BeamspaceVector(hb)
    p = magnitudes_squared(hb)
    noise, D0, aux = estimate_all(p, params, known_D0)
    eta = compute_threshold(D0, aux.sdnr, aux.q, params.C)
    result = denoise(hb, eta, alpha)
    report = EstimationReport(
        D0_trajectory=np.empty(0) if noise is None else _out(noise.trajectory),
        D0=D0, P_h=aux.P_h, sdnr=aux.sdnr, q=aux.q, qM=aux.qM, eta=eta,
        decisions=result.decisions, activity_clamped=aux.clamped,
        known_D0=known_D0 is not None)
    return result, report


def denoise_pipeline(h_prime: ChannelVector, params: DenoiserParams = DenoiserParams(),
                     alpha: float = 1.0, known_D0=None):
    """Antenna-domain observation in, denoised antenna-domain channel out.

    Transform to beamspace, estimate ``D0`` (or take ``known_D0``), derive
    the channel power, SDNR and activity rate, threshold, rescale by
    ``1/alpha`` and transform back. Returns ``(ChannelVector, EstimationReport)``.
    """
    if not isinstance(h_prime, ChannelVector):
        h_prime = ChannelVector(h_prime)
    result, report = denoise_beamspace(to_beamspace(h_prime), params, alpha, known_D0)
    return from_beamspace(result.h_star), report
