"""Command-line front end for the Monte-Carlo harness.

Subcommands ``mse``, ``ber``, ``scaling`` and ``denoise-one`` write CSV to
``--out`` (or stdout). A ``key = value`` file passed with ``--config`` sets
defaults that explicit flags override.
"""

import argparse
import csv
import io
import sys

import numpy as np

from . import harness
from .estimators import DenoiserParams

_PARAM_KEYS = {"C": "C", "c": "c", "cprime": "c_prime", "c_prime": "c_prime",
               "rho-min": "rho_min", "rho_min": "rho_min", "T": "T", "strict-kappa": "strict_kappa"}


def parse_params(text: str) -> DenoiserParams:
    """``"C=4,c=2,cprime=4,rho-min=8,T=3"`` -> :class:`DenoiserParams`."""
    kwargs = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in _PARAM_KEYS:
            raise ValueError(f"bad denoiser parameter {item!r}")
        name = _PARAM_KEYS[key]
        if name in ("rho_min", "T"):
            kwargs[name] = int(value)
        elif name == "strict_kappa":
            kwargs[name] = value.strip().lower() in ("1", "true", "yes", "on")
        else:
            kwargs[name] = float(value)
    return DenoiserParams(**kwargs)


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment. Keys use flag spelling."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{n}: expected 'key = value'")
            out[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return out


def _bits_list(text):
    vals = []
    for b in text.split(","):
        b = b.strip()
        vals.append(float("inf") if b in ("inf", "ideal") else int(b))
    return tuple(vals)


def _snr_grid(start, stop, step):
    if step <= 0:
        raise ValueError("--snr-step must be positive")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return tuple(float(start + i * step) for i in range(max(n, 0)))


_TRUE = ("1", "true", "yes", "on")

_CONVERTERS = {
    "m": int, "k": int, "bits": str, "snr_start": float, "snr_stop": float, "snr_step": float,
    "snr": float, "trials": int, "seed": int, "estimators": str, "channel": str,
    "known_noise": lambda v: str(v).lower() in _TRUE, "fixed_point": lambda v: str(v).lower() in _TRUE,
    "timing": lambda v: str(v).lower() in _TRUE, "out": str, "params": str, "repetitions": int, "sizes": str, "trial": int,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file providing defaults")
    common.add_argument("--m", type=int, help="number of antennas (default 64)")
    common.add_argument("--k", type=int, help="number of users (default 8)")
    common.add_argument("--bits", help="comma-separated ADC resolutions; 'inf' for no quantization")
    common.add_argument("--snr-start", type=float)
    common.add_argument("--snr-stop", type=float)
    common.add_argument("--snr-step", type=float)
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--estimators", help=f"comma-separated subset of {','.join(harness.ESTIMATORS)}")
    common.add_argument("--channel", choices=harness.CHANNELS)
    common.add_argument("--known-noise", action="store_const", const=True, default=None,
                        help="use the true composite noise power instead of the blind estimate")
    common.add_argument("--fixed-point", action="store_const", const=True, default=None,
                        help="route the proposed estimator through the fixed-point model")
    common.add_argument("--params", help="denoiser constants, e.g. C=4,c=2,cprime=4,rho-min=8,T=3")
    common.add_argument("--timing", action="store_const", const=True, default=None,
                        help="fill seconds_per_vector in mse/ber output (makes the CSV run-dependent)")
    common.add_argument("--out", help="CSV output path (default: stdout)")

    parser = argparse.ArgumentParser(prog="beamdenoise", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("mse", parents=[common], help="channel-estimation MSE versus SNR")
    sub.add_parser("ber", parents=[common], help="16-QAM BER after LMMSE equalization versus SNR")
    sc = sub.add_parser("scaling", parents=[common], help="denoiser runtime versus array size")
    sc.add_argument("--sizes", help="comma-separated powers of two (default 256,...,4096)")
    sc.add_argument("--repetitions", type=int)
    one = sub.add_parser("denoise-one", parents=[common], help="denoise one pilot observation and dump estimates")
    one.add_argument("--snr", type=float, help="operating SNR in dB (default 10)")
    one.add_argument("--trial", type=int, help="trial index to draw (default 0)")
    return parser


def resolve_options(argv=None):
    """Parse flags and merge them over the ``--config`` file."""
    ns = build_parser().parse_args(argv)
    opts = {}
    if ns.config:
        for key, value in read_config(ns.config).items():
            if key not in _CONVERTERS:
                raise SystemExit(f"unknown config key {key!r}")
            opts[key] = _CONVERTERS[key](value)
    for key, value in vars(ns).items():
        if value is not None and key not in ("config", "command"):
            opts[key] = value
    return ns.command, opts


def make_config(opts) -> harness.SimConfig:
    d = harness.SimConfig()
    snr = d.snr_db
    if any(k in opts for k in ("snr_start", "snr_stop", "snr_step")):
        snr = _snr_grid(opts.get("snr_start", snr[0]), opts.get("snr_stop", snr[-1]),
                        opts.get("snr_step", 5.0))
    estimators = tuple(e.strip() for e in opts["estimators"].split(",")) if "estimators" in opts else d.estimators
    if opts.get("known_noise"):
        estimators = tuple("proposed-known" if e == "proposed-blind" else e for e in estimators)
        estimators = tuple(dict.fromkeys(estimators))
    return harness.SimConfig(
        M=opts.get("m", d.M), K=opts.get("k", d.K),
        bits=_bits_list(opts["bits"]) if "bits" in opts else d.bits,
        snr_db=snr, trials=opts.get("trials", d.trials), seed=opts.get("seed", d.seed),
        estimators=estimators, channel=opts.get("channel", d.channel),
        params=parse_params(opts["params"]) if "params" in opts else d.params,
        fixed_point=bool(opts.get("fixed_point", False)), timing=bool(opts.get("timing", False)))


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _report_csv(bits, snr, trial, h, h_hat, report):
    err = float(np.sum(np.abs(h_hat - h) ** 2) / np.sum(np.abs(h) ** 2))
    fields = list(report.CSV_FIELDS) + ["D0", "qM", "eta", "kept", "nmse"]
    extra = {"D0": repr(float(report.D0)), "qM": int(report.qM), "eta": repr(float(report.eta)),
             "kept": int(np.sum(report.decisions)), "nmse": repr(err)}
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in report.rows(snr_db=snr, bits=bits, first_trial=trial):
        w.writerow({**r, **extra})
    return buf.getvalue()


def main(argv=None):
    command, opts = resolve_options(argv)
    try:
        cfg = make_config(opts)
    except ValueError as exc:
        raise SystemExit(f"error: {exc}")
    out = opts.get("out")
    if command == "mse":
        rows = harness.run_mse_experiment(cfg)
    elif command == "ber":
        rows = harness.run_ber_experiment(cfg)
        flagged = sum(r.flagged for r in rows)
        if flagged:
            print(f"warning: {flagged} ill-conditioned trial(s) excluded from BER", file=sys.stderr)
    elif command == "scaling":
        sizes = tuple(int(s) for s in opts["sizes"].split(",")) if "sizes" in opts else (256, 512, 1024, 2048, 4096)
        bits = cfg.bits[0] if "bits" in opts else 3
        snr = cfg.snr_db[0] if "snr_start" in opts else 10.0
        rows = harness.run_scaling_benchmark(sizes, opts.get("repetitions", 9), bits, snr, cfg.seed, cfg.params)
    else:
        bits = cfg.bits[0] if "bits" in opts else 3
        snr = opts.get("snr", 10.0)
        trial = opts.get("trial", 0)
        h, _, h_hat, report = harness.denoise_one(cfg, bits, snr, trial, bool(opts.get("known_noise")))
        _emit(_report_csv(bits, snr, trial, h, h_hat, report), out)
        return 0
    _emit(harness.rows_to_csv(rows), out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
