"""Bit-accurate golden model of the denoiser datapath.

Values are two's-complement integers (``raw``) paired with a :class:`QFormat`.
Every narrowing conversion saturates, never wraps, and reports the event to
any active :func:`saturation_monitor`. Conversions round to nearest, ties to
even; the sequential divider truncates.

The FFT/IFFT pair is not modelled bit-exactly: the transform runs in floating
point on the dequantized antenna samples and its output is quantized to the
beamspace format.
"""

import math
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .denoiser import EstimationReport
from .estimators import DenoiserParams, kappa

# --- formats ------------------------------------------------------------------


@dataclass(frozen=True)
class QFormat:
    word_bits: int
    frac_bits: int
    signed: bool = True

    def __post_init__(self):
        if not 0 <= self.frac_bits < self.word_bits <= 64:
            raise ValueError("need 0 <= frac_bits < word_bits <= 64")

    @property
    def max_raw(self):
        return (1 << (self.word_bits - 1)) - 1 if self.signed else (1 << self.word_bits) - 1

    @property
    def min_raw(self):
        return -(1 << (self.word_bits - 1)) if self.signed else 0

    @property
    def lsb(self):
        return 2.0**-self.frac_bits

    def __str__(self):
        return f"Q{self.word_bits}.{self.frac_bits}"


ANTENNA = QFormat(16, 8)
# Ten integer bits: the unitary FFT grows peaks by up to sqrt(M).
BEAMSPACE = QFormat(18, 8)
POWER = QFormat(16, 8)          # squared magnitudes, D0, P
SDNR = QFormat(24, 8)
ETA = QFormat(24, 8)
LUT_FRAC = 16                   # fractional bits of LUT constants and log terms
LOG = QFormat(32, LUT_FRAC)
DIV_GUARD = 8                   # extra quotient bits produced by the divider


@dataclass(frozen=True)
class FxValue:
    """Raw two's-complement integer(s) with their format.

    ``raw`` is a Python int or an integer numpy array.
    """

    raw: object
    fmt: QFormat

    def __post_init__(self):
        lo, hi = self.fmt.min_raw, self.fmt.max_raw
        if np.any(np.asarray(self.raw) < lo) or np.any(np.asarray(self.raw) > hi):
            raise OverflowError(f"raw value does not fit {self.fmt}")

    def to_float(self):
        if isinstance(self.raw, np.ndarray):
            return self.raw.astype(float) * self.fmt.lsb
        return float(self.raw) * self.fmt.lsb

    def __len__(self):
        return len(self.raw)


# --- saturation bookkeeping ---------------------------------------------------

_monitors = []


@contextmanager
def saturation_monitor():
    """Count saturation events per site while the block runs.

    >>> with saturation_monitor() as events:
    ...     fx_quantize(1e9, ANTENNA)
    ...
    >>> events["fx_quantize"]
    1
    """
    events = Counter()
    _monitors.append(events)
    try:
        yield events
    finally:
        _monitors.remove(events)


def _saturate(raw, fmt, site):
    lo, hi = fmt.min_raw, fmt.max_raw
    if isinstance(raw, np.ndarray):
        n = int(np.count_nonzero((raw < lo) | (raw > hi)))
        out = np.clip(raw, lo, hi)
    else:
        n = int(raw < lo or raw > hi)
        out = min(max(raw, lo), hi)
    if n:
        for events in _monitors:
            events[site] += n
    return out


def _round_shift(v, s):
    """``v / 2**s`` rounded to nearest, ties to even (works on ints and int arrays)."""
    if s <= 0:
        return v << -s if not isinstance(v, np.ndarray) else v * (1 << -s)
    q = v >> s
    r = v - (q << s)
    half = 1 << (s - 1)
    up = (r > half) | ((r == half) & ((q & 1) == 1))
    if isinstance(v, np.ndarray):
        return q + up.astype(q.dtype)
    return q + int(up)


def _log2_int(n, what):
    k = int(round(math.log2(n))) if n > 0 else -1
    if n <= 0 or 2**k != n:
        raise ValueError(f"{what} must be a power of two, got {n}")
    return k


def fx_quantize(x, fmt: QFormat, site="fx_quantize") -> FxValue:
    """Round ``x * 2**frac_bits`` to nearest (ties to even) and saturate."""
    scaled = np.asarray(x, dtype=float) * 2.0**fmt.frac_bits
    if not np.all(np.isfinite(scaled)):
        raise ValueError("cannot quantize non-finite values")
    # Clip in float first so the integer cast cannot overflow; the clip is
    # still reported as saturation.
    bound = 2.0 ** (fmt.word_bits + 1)
    r = np.asarray(np.rint(np.clip(scaled, -bound, bound)), dtype=np.int64)
    if r.ndim == 0:
        return FxValue(int(_saturate(int(r), fmt, site)), fmt)
    return FxValue(_saturate(r, fmt, site), fmt)


def fx_lut_constant(value, frac_bits=LUT_FRAC):
    return int(round(value * 2**frac_bits))


# --- sorting and prefix sums --------------------------------------------------


def fx_sorted_prefix(p: FxValue):
    """Ascending sort plus running sums in an accumulator widened by ``ceil(log2 M)`` bits."""
    raw = np.asarray(p.raw, dtype=np.int64)
    M = raw.shape[-1]
    s = np.sort(raw, axis=-1)
    acc_fmt = QFormat(p.fmt.word_bits + max(1, math.ceil(math.log2(M))), p.fmt.frac_bits, p.fmt.signed)
    prefix = np.cumsum(s, axis=-1)
    return FxValue(s, p.fmt), FxValue(prefix, acc_fmt)


# --- noise estimator ----------------------------------------------------------


@dataclass(frozen=True)
class NoiseLuts:
    inv_ln2: int
    inv_kappa_c: int
    inv_kappa_cprime: int
    shift_c: int
    shift_cprime: int

    @classmethod
    def for_params(cls, params: DenoiserParams):
        k_c = kappa(params.c)
        k_cp = k_c if params.strict_kappa else kappa(params.c_prime)
        return cls(fx_lut_constant(1 / math.log(2)), fx_lut_constant(1 / k_c), fx_lut_constant(1 / k_cp),
                   _log2_int(params.c, "c"), _log2_int(params.c_prime, "c_prime"))


@dataclass
class FxNoiseEstimate:
    D0: FxValue
    trajectory: list
    retained: list
    sorted: FxValue
    prefix: FxValue


def _walk(s, idx, tau):
    """Move ``idx`` until it counts the sorted samples ``<= tau``."""
    M = len(s)
    while idx < M and s[idx] <= tau:
        idx += 1
    while idx > 0 and s[idx - 1] > tau:
        idx -= 1
    return idx


def fx_noise_estimator(p: FxValue, params: DenoiserParams = DenoiserParams()) -> FxNoiseEstimate:
    """Fixed-point composite-noise estimator on a sorted copy with prefix sums.

    Median of the two middle samples times a ``1/ln 2`` LUT constant, then
    ``T`` rounds of: shift-scaled threshold, index walk from the previous
    position, truncating divide of the prefix sum, ``1/kappa`` LUT multiply.
    """
    if p.fmt != POWER:
        raise ValueError(f"squared magnitudes must be in {POWER}")
    luts = NoiseLuts.for_params(params)
    sorted_p, prefix = fx_sorted_prefix(p)
    s = [int(v) for v in sorted_p.raw]
    pre = [int(v) for v in prefix.raw]
    M = len(s)
    rho_min = params.rho_min_for(M)
    f = LUT_FRAC

    if M % 2 == 0:
        med2 = s[M // 2 - 1] + s[M // 2]           # twice the median
        D = _round_shift(med2 * luts.inv_ln2, f + 1)
    else:
        D = _round_shift(s[M // 2] * luts.inv_ln2, f)
    D = _saturate(D, POWER, "noise_init")
    trajectory, retained = [D], []
    idx = M // 2
    for _ in range(params.T):
        idx = _walk(s, idx, D << luts.shift_c)
        inv_k = luts.inv_kappa_c
        if idx < rho_min:
            idx = _walk(s, idx, D << luts.shift_cprime)
            inv_k = luts.inv_kappa_cprime
        if idx == 0:
            D = 0
        else:
            mean = (pre[idx - 1] << DIV_GUARD) // idx          # sequential divider
            D = _saturate(_round_shift(mean * inv_k, f + DIV_GUARD), POWER, "noise_update")
        trajectory.append(D)
        retained.append(idx)
    return FxNoiseEstimate(FxValue(D, POWER), trajectory, retained, sorted_p, prefix)


def fx_channel_power(prefix: FxValue, D0: FxValue) -> FxValue:
    """``max(mean(p) - D0, 0)`` with the mean as a shift (``M`` a power of two)."""
    M = len(prefix.raw)
    m = _log2_int(M, "M")
    total = int(prefix.raw[-1])
    P = _round_shift(total - (D0.raw << m), m)
    return FxValue(_saturate(max(P, 0), POWER, "channel_power"), POWER)


def fx_sdnr(P: FxValue, D0: FxValue) -> FxValue:
    """``P / D0`` through the truncating divider; saturates when ``D0 == 0``."""
    if D0.raw == 0:
        raw = SDNR.max_raw if P.raw > 0 else 0
    else:
        raw = (P.raw << SDNR.frac_bits) // D0.raw
    return FxValue(_saturate(raw, SDNR, "sdnr"), SDNR)


# --- logarithm ----------------------------------------------------------------


@dataclass(frozen=True)
class PwlLogTable:
    """Chord interpolation of ``ln`` over the mantissa range [1, 2).

    ``intercepts[i]`` is ``ln`` at breakpoint ``i``; slopes are derived from
    consecutive rounded intercepts so the approximation is monotone and
    continuous across segments and octaves.
    """

    segments: int
    breakpoints: FxValue
    slopes: FxValue
    intercepts: FxValue
    ln2: int


def build_pwl_log_table(segments=8, frac_bits=LUT_FRAC) -> PwlLogTable:
    seg_bits = _log2_int(segments, "segment count")
    fmt = QFormat(32, frac_bits)
    b = 1.0 + np.arange(segments + 1) / segments
    I = np.array([fx_lut_constant(math.log(v), frac_bits) for v in b], dtype=np.int64)
    slopes = (I[1:] - I[:-1]) << seg_bits
    bp = np.array([fx_lut_constant(v, frac_bits) for v in b[:-1]], dtype=np.int64)
    return PwlLogTable(segments, FxValue(bp, fmt), FxValue(slopes, fmt), FxValue(I[:-1], fmt), int(I[-1]))


_DEFAULT_TABLE = None


def default_pwl_table():
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = build_pwl_log_table()
    return _DEFAULT_TABLE


def pwl_ln(x: FxValue, table: PwlLogTable | None = None) -> FxValue:
    """``ln x = k ln 2 + pwl(mantissa)`` with ``k`` from the leading one."""
    table = table or default_pwl_table()
    raw = int(x.raw)
    if raw <= 0:
        raise ValueError("pwl_ln requires a positive argument")
    f = LUT_FRAC
    msb = raw.bit_length() - 1
    k = msb - x.fmt.frac_bits
    mant = raw >> (msb - f) if msb >= f else raw << (f - msb)     # in [2^f, 2^(f+1))
    seg_bits = _log2_int(table.segments, "segment count")
    seg = (mant - (1 << f)) >> (f - seg_bits)
    dx = mant - int(table.breakpoints.raw[seg])
    y = int(table.intercepts.raw[seg]) + _round_shift(int(table.slopes.raw[seg]) * dx, f)
    return FxValue(_saturate(k * table.ln2 + y, LOG, "pwl_ln"), LOG)


def ln_int_lut(M, frac_bits=LUT_FRAC):
    """``ln(n)`` for ``n = 0..M`` (entry 0 unused)."""
    return [0] + [fx_lut_constant(math.log(n), frac_bits) for n in range(1, M + 1)]


# --- activity and threshold ---------------------------------------------------


def fx_active_beams(p: FxValue, D0: FxValue, P: FxValue, M=None):
    """Integer active-beam count ``round(2 M^2 P^2 / (sum p^2 - 2 M D0^2 - 4 M D0 P))``.

    Products with 2 and ``M`` are shifts; the quotient is rounded half up.
    Returns ``(qM, clamped)``; a nonpositive denominator gives ``(M, True)``.
    """
    M = len(p.raw) if M is None else M
    m = _log2_int(M, "M")
    D, Pr = int(D0.raw), int(P.raw)
    den = fx_fourth_moment(p) - (D * D << (1 + m)) - (D * Pr << (2 + m))
    if den <= 0:
        return M, True
    num = Pr * Pr << (1 + 2 * m)
    return min(max((2 * num + den) // (2 * den), 1), M), False


def fx_threshold(D0: FxValue, sdnr: FxValue, qM: int, M: int, C=4.0, table=None, ln_lut=None):
    """Threshold from the split-log form.

    ``ln(M - qM)`` and ``ln(qM)`` come from an integer-indexed LUT, ``ln C``
    is a LUT constant and ``ln(1 + M S / qM)`` goes through :func:`pwl_ln`.
    The two divisions use the truncating divider. Returns
    ``(eta, log_sum, factor)``; the last two are ``None`` on sentinel paths.
    """
    m = _log2_int(M, "M")
    f = LUT_FRAC
    D, S = int(D0.raw), int(sdnr.raw)
    if S == 0:
        return FxValue(ETA.max_raw, ETA), None, None
    if qM >= M:
        return FxValue(ETA.min_raw, ETA), None, None
    if D == 0:
        return FxValue(1, ETA), None, None
    ln_lut = ln_lut or ln_int_lut(M)
    shift_s = f - SDNR.frac_bits
    ratio = (S << (m + shift_s)) // qM                      # M S / qM at f fractional bits
    ln_ratio = pwl_ln(FxValue(ratio + (1 << f), QFormat(64, f)), table).raw
    log_sum = ln_ratio + ln_lut[M - qM] - ln_lut[qM] + fx_lut_constant(math.log(C))
    factor = (1 << f) + (qM << (f + SDNR.frac_bits)) // (S << m)   # 1 + qM / (M S)
    eta = _saturate(_round_shift(D * factor * log_sum, 2 * f), ETA, "eta")
    return FxValue(eta, ETA), log_sum, factor


@dataclass
class FxThreshold:
    qM: int
    eta: FxValue
    activity_clamped: bool
    log_sum: int | None = None
    factor: int | None = None


def fx_fourth_moment(p: FxValue) -> int:
    """``sum p^2`` at ``2 * frac_bits`` fractional bits (exact accumulator)."""
    return sum(int(v) * int(v) for v in np.asarray(p.raw).ravel())


def fx_activity_and_threshold(p: FxValue, D0: FxValue, P: FxValue, sdnr: FxValue, C=4.0,
                              M=None, table=None, ln_lut=None) -> FxThreshold:
    """:func:`fx_active_beams` followed by :func:`fx_threshold`."""
    M = len(p.raw) if M is None else M
    qM, clamped = fx_active_beams(p, D0, P, M)
    eta, log_sum, factor = fx_threshold(D0, sdnr, qM, M, C, table, ln_lut)
    return FxThreshold(qM, eta, clamped, log_sum, factor)


# --- denoising ------------------------------------------------------------------


def fx_magnitudes_squared(re: FxValue, im: FxValue) -> FxValue:
    r, i = np.asarray(re.raw, dtype=np.int64), np.asarray(im.raw, dtype=np.int64)
    sq = _round_shift(r * r + i * i, 2 * re.fmt.frac_bits - POWER.frac_bits)
    return FxValue(_saturate(sq, POWER, "magnitude"), POWER)


def fx_denoise(re: FxValue, im: FxValue, p: FxValue, eta: FxValue, inv_alpha: int):
    """Hard threshold ``p >= eta`` and scale survivors by the ``1/alpha`` LUT constant.

    Returns ``(re_out, im_out, decisions)`` in the beamspace format.
    """
    if re.fmt != BEAMSPACE or im.fmt != BEAMSPACE:
        raise ValueError(f"beamspace entries must be in {BEAMSPACE}")
    keep = np.asarray(p.raw) >= int(eta.raw)
    out = []
    for part in (re, im):
        r = np.asarray(part.raw, dtype=np.int64)
        scaled = _saturate(_round_shift(r * inv_alpha, LUT_FRAC), BEAMSPACE, "denoise_scale")
        out.append(FxValue(np.where(keep, scaled, 0), BEAMSPACE))
    return out[0], out[1], keep


@dataclass
class FxTrace:
    """Every intermediate of one fixed-point pipeline run, in its declared format."""

    antenna_re: FxValue
    antenna_im: FxValue
    beam_re: FxValue
    beam_im: FxValue
    power: FxValue
    D0: FxValue
    P: FxValue
    sdnr: FxValue
    threshold: FxThreshold
    out_re: FxValue
    out_im: FxValue
    noise: FxNoiseEstimate | None = None


def fx_denoise_pipeline(h_prime, params: DenoiserParams = DenoiserParams(), alpha=1.0, known_D0=None,
                        input_gain=1.0, table=None, return_trace=False):
    """Run one antenna-domain observation through the fixed-point datapath.

    ``input_gain`` scales the observation before it enters the 16-bit
    antenna format (the result is scaled back). Returns
    ``(h_hat, EstimationReport)`` plus an :class:`FxTrace` when requested.
    """
    h = np.asarray(h_prime, dtype=complex) * input_gain
    M = h.shape[-1]
    a_re, a_im = fx_quantize(h.real, ANTENNA, "antenna"), fx_quantize(h.imag, ANTENNA, "antenna")
    hb = np.fft.fft(a_re.to_float() + 1j * a_im.to_float(), norm="ortho")
    b_re, b_im = fx_quantize(hb.real, BEAMSPACE, "beamspace"), fx_quantize(hb.imag, BEAMSPACE, "beamspace")
    p = fx_magnitudes_squared(b_re, b_im)

    noise = None
    if known_D0 is None:
        noise = fx_noise_estimator(p, params)
        D0 = noise.D0
        prefix = noise.prefix
    else:
        D0 = fx_quantize(known_D0 * input_gain**2, POWER, "known_D0")
        prefix = fx_sorted_prefix(p)[1]
    P = fx_channel_power(prefix, D0)
    S = fx_sdnr(P, D0)
    thr = fx_activity_and_threshold(p, D0, P, S, params.C, M, table)
    inv_alpha = fx_lut_constant(1 / alpha)
    o_re, o_im, keep = fx_denoise(b_re, b_im, p, thr.eta, inv_alpha)
    h_hat = np.fft.ifft(o_re.to_float() + 1j * o_im.to_float(), norm="ortho") / input_gain

    g2 = input_gain**2
    eta = thr.eta.raw
    eta_f = math.inf if eta == ETA.max_raw else -math.inf if eta == ETA.min_raw else thr.eta.to_float() / g2
    traj = np.array([v * POWER.lsb / g2 for v in noise.trajectory]) if noise else np.empty(0)
    report = EstimationReport(
        D0_trajectory=traj, D0=D0.to_float() / g2, P_h=P.to_float() / g2, sdnr=S.to_float(),
        q=thr.qM / M, qM=thr.qM, eta=eta_f, decisions=keep, activity_clamped=thr.activity_clamped,
        known_D0=known_D0 is not None)
    if return_trace:
        trace = FxTrace(a_re, a_im, b_re, b_im, p, D0, P, S, thr, o_re, o_im, noise)
        return h_hat, report, trace
    return h_hat, report


# --- stimulus / response files --------------------------------------------------


def write_hex(path, value: FxValue):
    """One two's-complement hex word per line, zero padded to the format width."""
    width = (value.fmt.word_bits + 3) // 4
    mask = (1 << value.fmt.word_bits) - 1
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for v in np.atleast_1d(value.raw):
            fh.write(f"{int(v) & mask:0{width}x}\n")


def read_hex(path, fmt: QFormat) -> FxValue:
    raws = []
    sign = 1 << (fmt.word_bits - 1)
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            v = int(line, 16)
            if fmt.signed and v & sign:
                v -= 1 << fmt.word_bits
            raws.append(v)
    return FxValue(np.array(raws, dtype=np.int64), fmt)
