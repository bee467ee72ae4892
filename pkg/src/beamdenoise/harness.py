"""Monte-Carlo experiment driver: channel-estimation MSE, post-equalization BER
and runtime scaling of the denoiser.

Every trial draws its channel and unit-variance noise from its own stream,
seeded by ``(seed, trial)``; the SNR only rescales that noise. All SNR points,
ADC resolutions and estimators therefore see the same realizations, and a
trial's draws do not depend on how the trials are batched.
"""

import csv
import io
import math
import time
from dataclasses import dataclass, field, replace
from functools import partial

import numpy as np

from .beamspace import from_beamspace, magnitudes_squared, to_beamspace
from .chanmodel import BernoulliGaussianConfig, complex_normal, generate_bg_beamspace_channel, geometric_channels
from .denoiser import compute_threshold, denoise, denoise_pipeline
from .estimators import DenoiserParams, estimate_all
from .quantizer import agc_scale, alpha_for, composite_noise_variance, make_quantizer, quantize
from .types import BeamspaceVector, ChannelVector

ESTIMATORS = ("proposed-blind", "proposed-known", "ls", "diag-lmmse")
CHANNELS = ("geometric", "geometric-offgrid", "bernoulli-gaussian")
CSV_FIELDS = ("estimator", "bits", "snr_db", "mse_linear", "mse_db", "ber", "trials", "seconds_per_vector")


@dataclass(frozen=True)
class SimConfig:
    M: int = 64
    K: int = 8
    bits: tuple = (2, 3, 4)
    snr_db: tuple = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)
    trials: int = 1000
    seed: int = 0
    estimators: tuple = ESTIMATORS
    channel: str = "geometric"
    paths: int = 3
    decay: float = 0.5
    activity: float = 0.1
    data_symbols: int = 32
    params: DenoiserParams = field(default_factory=DenoiserParams)
    fixed_point: bool = False
    chunk: int = 500
    timing: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if len(self.snr_db) == 0:
            raise ValueError("SNR grid must not be empty")
        if self.channel not in CHANNELS:
            raise ValueError(f"unknown channel model {self.channel!r}; choose from {CHANNELS}")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise ValueError(f"unknown estimators {sorted(unknown)}")
        if self.K > self.M:
            raise ValueError("K must not exceed M")


@dataclass
class ResultRow:
    estimator: str
    bits: object
    snr_db: float
    mse_linear: float | None = None
    ber: float | None = None
    trials: int = 0
    seconds_per_vector: float | None = None
    flagged: int = 0
    M: int | None = None

    @property
    def mse_db(self):
        if self.mse_linear is None:
            return None
        return 10 * math.log10(self.mse_linear) if self.mse_linear > 0 else -math.inf

    def as_csv_dict(self):
        def fmt(v):
            return "" if v is None else repr(float(v))

        return {
            "estimator": self.estimator,
            "bits": "inf" if self.bits is None else str(self.bits),
            "snr_db": fmt(self.snr_db),
            "mse_linear": fmt(self.mse_linear),
            "mse_db": fmt(self.mse_db),
            "ber": fmt(self.ber),
            "trials": str(self.trials),
            "seconds_per_vector": fmt(self.seconds_per_vector),
        }


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.as_csv_dict())
    return buf.getvalue()


def write_csv(rows, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(rows))


# -- baselines and equalization ------------------------------------------------


def ls_estimate(h_prime):
    """The quantized observation itself."""
    return h_prime


def diag_lmmse_estimate(hb, alpha, P, D0) -> BeamspaceVector:
    """Per-entry Wiener scaling ``alpha P / (alpha^2 P + D0)`` of the beamspace observation.

    ``P`` is the per-entry channel power (before the Bussgang gain).
    """
    x = hb.entries if isinstance(hb, BeamspaceVector) else np.asarray(hb, dtype=complex)
    alpha, P, D0 = (np.asarray(v, dtype=float) for v in (alpha, P, D0))
    if np.any(P < 0) or np.any(D0 < 0) or np.any(alpha <= 0):
        raise ValueError("alpha must be positive and P, D0 nonnegative")
    den = alpha**2 * P + D0
    with np.errstate(invalid="ignore", divide="ignore"):
        g = np.where(den > 0, alpha * P / den, 0.0)
    return BeamspaceVector(x * g[..., None])


def lmmse_equalize(H, y, snr_linear, return_flags=False, max_condition=1e12):
    """``x_hat = W^H y`` with ``W = H (H^H H + I/snr)^-1``.

    Solves the K x K regularized Gram system. ``H`` is ``(..., M, K)`` and
    ``y`` is ``(..., M)`` or ``(..., M, N)``. With ``return_flags`` a boolean
    per batch entry marks Gram matrices whose condition number exceeds
    ``max_condition``.
    """
    H = np.asarray(H, dtype=complex)
    y = np.asarray(y, dtype=complex)
    K = H.shape[-1]
    Hh = np.conj(np.swapaxes(H, -1, -2))
    G = Hh @ H + np.eye(K) / snr_linear
    vec = y.ndim == H.ndim - 1
    rhs = Hh @ (y[..., None] if vec else y)
    cond = np.linalg.cond(G)
    bad = ~(cond <= max_condition)
    G_safe = np.where(bad[..., None, None], np.eye(K), G)
    x = np.linalg.solve(G_safe, rhs)
    if vec:
        x = x[..., 0]
    return (x, bad) if return_flags else x


_QAM_LEVELS = np.array([-3.0, -1.0, 3.0, 1.0])  # Gray: 00, 01, 10, 11
_QAM_NORM = np.sqrt(10.0)


def qam16_modulate(bits):
    """Gray-mapped unit-energy 16-QAM; ``bits`` has a trailing axis of 4."""
    bits = np.asarray(bits, dtype=np.int64)
    i = _QAM_LEVELS[2 * bits[..., 0] + bits[..., 1]]
    q = _QAM_LEVELS[2 * bits[..., 2] + bits[..., 3]]
    return (i + 1j * q) / _QAM_NORM


def _slice_pam4(v):
    b0 = (v > 0).astype(np.int64)
    b1 = (np.abs(v) < 2).astype(np.int64)
    return b0, b1


def qam16_demodulate(symbols):
    s = np.asarray(symbols) * _QAM_NORM
    i0, i1 = _slice_pam4(s.real)
    q0, q1 = _slice_pam4(s.imag)
    return np.stack([i0, i1, q0, q1], axis=-1)


def snr_at_ber(snr_db, ber, target=1e-2):
    """SNR where a BER curve first drops to ``target`` (log-linear interpolation).

    ``nan`` when the curve starts below the target or never reaches it.
    """
    snr_db = np.asarray(snr_db, dtype=float)
    ber = np.asarray(ber, dtype=float)
    below = np.nonzero(ber <= target)[0]
    if below.size == 0 or below[0] == 0:
        return math.nan
    i = below[0]
    lo, hi = max(ber[i - 1], 1e-300), max(ber[i], 1e-300)
    if hi == lo:
        return float(snr_db[i])
    frac = (math.log10(lo) - math.log10(target)) / (math.log10(lo) - math.log10(hi))
    return float(snr_db[i - 1] + frac * (snr_db[i] - snr_db[i - 1]))


# -- trial generation ----------------------------------------------------------


def _trial_rng(seed, trial, stream=0):
    return np.random.default_rng([int(seed), int(trial), int(stream)])


def _draw_channels(cfg: SimConfig, rng, users):
    if cfg.channel == "bernoulli-gaussian":
        bg = BernoulliGaussianConfig(cfg.M, cfg.activity, 1.0)
        return from_beamspace(generate_bg_beamspace_channel(bg, rng, size=users)).entries
    return geometric_channels(rng, (users,), cfg.M, cfg.paths, cfg.decay,
                              on_grid=cfg.channel == "geometric")


def draw_pilot_trials(cfg: SimConfig, start, stop, users=1):
    """Channels and unit-variance pilot noise for trials ``start..stop-1``.

    Returns arrays of shape ``(trials, users, M)``.
    """
    H, W = [], []
    for t in range(start, stop):
        rng = _trial_rng(cfg.seed, t)
        H.append(_draw_channels(cfg, rng, users))
        W.append(complex_normal(rng, (users, cfg.M)))
    return np.stack(H), np.stack(W)


def draw_data_trials(cfg: SimConfig, start, stop):
    """Data bits ``(trials, K, N, 4)`` and unit noise ``(trials, M, N)``."""
    B, W = [], []
    for t in range(start, stop):
        rng = _trial_rng(cfg.seed, t, stream=1)
        B.append(rng.integers(0, 2, size=(cfg.K, cfg.data_symbols, 4), dtype=np.int8))
        W.append(complex_normal(rng, (cfg.M, cfg.data_symbols)))
    return np.stack(B), np.stack(W)


# -- estimators ----------------------------------------------------------------

# Channel models are normalized so that E||h||^2 / M = 1.
_CHANNEL_POWER = 1.0


def run_estimator(name, h_prime, alpha, N0, cfg: SimConfig):
    """Apply one named estimator to observations of shape ``(..., M)``."""
    if name == "ls":
        return ls_estimate(h_prime)
    known = composite_noise_variance(alpha, N0, _CHANNEL_POWER)
    if name == "proposed-blind":
        if cfg.fixed_point:
            from .fixedpoint import fx_denoise_pipeline

            flat = h_prime.reshape(-1, h_prime.shape[-1])
            out = np.stack([fx_denoise_pipeline(v, cfg.params, alpha)[0] for v in flat])
            return out.reshape(h_prime.shape)
        return denoise_pipeline(ChannelVector(h_prime), cfg.params, alpha)[0].entries
    if name == "proposed-known":
        return denoise_pipeline(ChannelVector(h_prime), cfg.params, alpha, known_D0=known)[0].entries
    if name == "diag-lmmse":
        hb = to_beamspace(ChannelVector(h_prime))
        return from_beamspace(diag_lmmse_estimate(hb, alpha, _CHANNEL_POWER, known)).entries
    raise ValueError(f"unknown estimator {name!r}")


def _label(name, cfg):
    return name + "[fx]" if cfg.fixed_point and name == "proposed-blind" else name


def _chunks(cfg):
    for start in range(0, cfg.trials, cfg.chunk):
        yield start, min(cfg.trials, start + cfg.chunk)


# -- experiments ---------------------------------------------------------------


def run_mse_experiment(cfg: SimConfig):
    """Normalized MSE ``sum ||h_hat - h||^2 / sum ||h||^2`` per (estimator, bits, SNR)."""
    quantizers = [(b, make_quantizer(b)) for b in cfg.bits]
    alphas = {b: alpha_for(qm) for b, qm in quantizers}
    keys = [(b, s, e) for b, _ in quantizers for s in cfg.snr_db for e in cfg.estimators]
    err = dict.fromkeys(keys, 0.0)
    elapsed = dict.fromkeys(keys, 0.0)
    power = 0.0
    for start, stop in _chunks(cfg):
        H, W = draw_pilot_trials(cfg, start, stop)
        H, W = H[:, 0], W[:, 0]
        power += float(np.sum(np.abs(H) ** 2))
        for b, qm in quantizers:
            for s in cfg.snr_db:
                N0 = 10 ** (-s / 10)
                hp = quantize(H + math.sqrt(N0) * W, qm).entries
                for e in cfg.estimators:
                    t0 = time.perf_counter()
                    est = run_estimator(e, hp, alphas[b], N0, cfg)
                    elapsed[b, s, e] += time.perf_counter() - t0
                    err[b, s, e] += float(np.sum(np.abs(est - H) ** 2))
    return [ResultRow(_label(e, cfg), b, float(s), mse_linear=err[b, s, e] / power, trials=cfg.trials,
                      seconds_per_vector=elapsed[b, s, e] / cfg.trials if cfg.timing else None)
            for (b, s, e) in keys]


def run_ber_experiment(cfg: SimConfig):
    """Uncoded 16-QAM BER after LMMSE equalization with each estimator's channel.

    Each user sends one unit pilot (observation ``Q(h_k + e_k)``), then
    ``data_symbols`` vectors ``y = Q(H x + n)`` are equalized. The known
    Bussgang gain is removed from the data (``y / alpha``) for every
    estimator. A ``perfect`` row uses the true channel. Trials whose Gram
    matrix is numerically singular are excluded and counted in ``flagged``.
    """
    quantizers = [(b, make_quantizer(b)) for b in cfg.bits]
    alphas = {b: alpha_for(qm) for b, qm in quantizers}
    names = tuple(cfg.estimators) + ("perfect",)
    keys = [(b, s, e) for b, _ in quantizers for s in cfg.snr_db for e in names]
    errors = dict.fromkeys(keys, 0)
    counted = dict.fromkeys(keys, 0)
    flagged = dict.fromkeys(keys, 0)
    sq_err = dict.fromkeys(keys, 0.0)
    elapsed = dict.fromkeys(keys, 0.0)
    power = 0.0
    for start, stop in _chunks(cfg):
        H, Wp = draw_pilot_trials(cfg, start, stop, users=cfg.K)     # (T, K, M)
        bits, Wd = draw_data_trials(cfg, start, stop)                 # (T, K, N, 4), (T, M, N)
        X = qam16_modulate(bits)                                      # (T, K, N)
        Hm = np.swapaxes(H, 1, 2)                                     # (T, M, K)
        clean = Hm @ X                                                # (T, M, N)
        power += float(np.sum(np.abs(H) ** 2))
        for b, qm in quantizers:
            alpha = alphas[b]
            for s in cfg.snr_db:
                N0 = 10 ** (-s / 10)
                snr = 1 / N0
                hp = quantize(H + math.sqrt(N0) * Wp, qm).entries
                R = clean + math.sqrt(N0) * Wd
                scale = agc_scale(R.reshape(R.shape[0], -1))[..., None]
                Y = quantize(R, qm, scale=scale).entries / alpha
                for e in names:
                    t0 = time.perf_counter()
                    Hhat = H if e == "perfect" else run_estimator(e, hp, alpha, N0, cfg)
                    elapsed[b, s, e] += time.perf_counter() - t0
                    sq_err[b, s, e] += float(np.sum(np.abs(Hhat - H) ** 2))
                    xhat, bad = lmmse_equalize(np.swapaxes(Hhat, 1, 2), Y, snr, return_flags=True)
                    wrong = qam16_demodulate(xhat) != bits
                    errors[b, s, e] += int(np.sum(wrong[~bad]))
                    counted[b, s, e] += int(np.sum(~bad)) * wrong[0].size
                    flagged[b, s, e] += int(np.sum(bad))
    rows = []
    for key in keys:
        b, s, e = key
        ber = errors[key] / counted[key] if counted[key] else None
        rows.append(ResultRow(_label(e, cfg), b, float(s), mse_linear=sq_err[key] / power, ber=ber,
                              trials=cfg.trials, flagged=flagged[key],
                              seconds_per_vector=elapsed[key] / (cfg.trials * cfg.K) if cfg.timing else None))
    return rows


def run_scaling_benchmark(Ms=(256, 512, 1024, 2048, 4096), repetitions=9, bits=3, snr_db=10.0,
                          seed=0, params=DenoiserParams(), batch_elements=2**18):
    """Per-vector wall time of the denoiser versus ``M``.

    Each timing call processes a batch of ``batch_elements // M`` vectors so
    that interpreter overhead is amortized and every call touches the same
    amount of memory. Reported per vector, median over ``repetitions``, for
    the blind and known-noise modes, each with (``full``) and without
    (``post-transform``) the DFT pair. Repetitions are interleaved across
    all sizes and modes so slow drifts in machine load hit every cell alike.
    The estimator label carries the mode, the stage and ``M``; ``row.M``
    holds ``M`` as well.
    """
    qm = make_quantizer(bits)
    alpha = alpha_for(qm)
    N0 = 10 ** (-snr_db / 10)
    known = composite_noise_variance(alpha, N0, _CHANNEL_POWER)

    def stage(hb, known_D0):
        p = magnitudes_squared(hb)
        _, D0, aux = estimate_all(p, params, known_D0)
        eta = compute_threshold(D0, aux.sdnr, aux.q, params.C)
        return denoise(hb, eta, alpha)

    def full(hp, known_D0):
        return denoise_pipeline(hp, params, alpha, known_D0)

    cells = []
    for M in Ms:
        if M & (M - 1):
            raise ValueError("M values must be powers of two")
        B = max(1, batch_elements // M)
        rng = np.random.default_rng([seed, M])
        H = geometric_channels(rng, (B,), M)
        hp = quantize(H + complex_normal(rng, H.shape, N0), qm)
        hb = to_beamspace(hp)
        for mode, kd in (("proposed-blind", None), ("proposed-known", known)):
            cells.append((f"{mode}/post-transform/M={M}", M, B, partial(stage, hb, kd)))
            cells.append((f"{mode}/full/M={M}", M, B, partial(full, hp, kd)))
    for *_, fn in cells:
        fn()  # warm-up
    times = {label: [] for label, *_ in cells}
    for _ in range(repetitions):
        for label, _, _, fn in cells:
            t0 = time.perf_counter()
            fn()
            times[label].append(time.perf_counter() - t0)
    return [ResultRow(label, bits, float(snr_db), trials=repetitions,
                      seconds_per_vector=float(np.median(times[label])) / B, M=M)
            for label, M, B, _ in cells]


def denoise_one(cfg: SimConfig, bits=3, snr_db=10.0, trial=0, known_noise=False):
    """Denoise a single pilot observation; returns ``(h, h_prime, h_hat, report)``."""
    qm = make_quantizer(bits)
    alpha = alpha_for(qm)
    N0 = 10 ** (-snr_db / 10)
    H, W = draw_pilot_trials(cfg, trial, trial + 1)
    h = H[0, 0]
    hp = quantize(h + math.sqrt(N0) * W[0, 0], qm).entries
    known = composite_noise_variance(alpha, N0, _CHANNEL_POWER) if known_noise else None
    if cfg.fixed_point:
        from .fixedpoint import fx_denoise_pipeline

        h_hat, report = fx_denoise_pipeline(hp, cfg.params, alpha, known_D0=known)
        return h, hp, h_hat, report
    out, report = denoise_pipeline(ChannelVector(hp), cfg.params, alpha, known)
    return h, hp, out.entries, report


def with_overrides(cfg: SimConfig, **kwargs) -> SimConfig:
    return replace(cfg, **{k: v for k, v in kwargs.items() if v is not None})
