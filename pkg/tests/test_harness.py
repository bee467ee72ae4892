import math

import numpy as np
import pytest

from beamdenoise import harness
from beamdenoise.chanmodel import complex_normal
from beamdenoise.types import BeamspaceVector


def test_ls_is_identity(rng):
    v = complex_normal(rng, (3, 8))
    assert harness.ls_estimate(v) is v


def test_diag_lmmse_limits(rng):
    x = BeamspaceVector(complex_normal(rng, (8,)))
    np.testing.assert_allclose(harness.diag_lmmse_estimate(x, 0.5, 1.0, 0.0).entries, x.entries / 0.5)
    assert np.all(harness.diag_lmmse_estimate(x, 0.5, 0.0, 1.0).entries == 0)
    with pytest.raises(ValueError):
        harness.diag_lmmse_estimate(x, 0.5, -1.0, 1.0)


def test_lmmse_equalizer_limits(rng):
    h = complex_normal(rng, (16, 1))
    x = np.array([0.3 - 0.7j])
    np.testing.assert_allclose(harness.lmmse_equalize(h, h @ x, 1e12), x, atol=1e-9)
    y = complex_normal(rng, (4,))
    np.testing.assert_allclose(harness.lmmse_equalize(np.eye(4), y, 1.0), y / 2, atol=1e-15)
    H = complex_normal(rng, (64, 8))
    bits = rng.integers(0, 2, (8, 200, 4))
    X = harness.qam16_modulate(bits)
    Y = H @ X + complex_normal(rng, (64, 200), 1e-4)
    assert np.all(harness.qam16_demodulate(harness.lmmse_equalize(H, Y, 1e4)) == bits)


def test_lmmse_flags_singular():
    H = np.zeros((2, 4, 2), complex)
    H[0] = np.eye(4)[:, :2]
    H[1, :, 0] = H[1, :, 1] = 1.0
    _, bad = harness.lmmse_equalize(H, np.ones((2, 4)), 1e20, return_flags=True)
    assert bad.tolist() == [False, True]


def test_qam16_gray_and_energy():
    bits = np.array([[b >> 3 & 1, b >> 2 & 1, b >> 1 & 1, b & 1] for b in range(16)])
    s = harness.qam16_modulate(bits)
    assert np.mean(np.abs(s) ** 2) == pytest.approx(1.0)
    np.testing.assert_array_equal(harness.qam16_demodulate(s), bits)
    # Gray property: nearest neighbours differ in exactly one bit.
    d = np.abs(s[:, None] - s[None, :])
    dmin = d[d > 0].min()
    for i, j in zip(*np.nonzero(np.isclose(d, dmin))):
        assert np.sum(bits[i] != bits[j]) == 1


def test_snr_at_ber():
    snr = np.array([0.0, 5.0, 10.0])
    assert harness.snr_at_ber(snr, np.array([1e-1, 1e-2, 1e-3])) == pytest.approx(5.0)
    assert harness.snr_at_ber(snr, np.array([1e-1, 1e-1 * 10**-0.5, 1e-2 * 10**-0.5])) == pytest.approx(7.5)
    assert math.isnan(harness.snr_at_ber(snr, np.array([0.3, 0.2, 0.1])))
    assert math.isnan(harness.snr_at_ber(snr, np.array([1e-3, 1e-4, 1e-5])))


def test_config_validation():
    for kw in (dict(trials=0), dict(snr_db=()), dict(channel="x"), dict(estimators=("x",)), dict(K=99)):
        with pytest.raises(ValueError):
            harness.SimConfig(**kw)


def test_trials_independent_of_batching():
    a = harness.SimConfig(trials=23, chunk=500, snr_db=(0.0,), bits=(3,))
    b = harness.with_overrides(a, chunk=4)
    ra, rb = harness.run_mse_experiment(a), harness.run_mse_experiment(b)
    for x, y in zip(ra, rb):
        assert x.mse_linear == pytest.approx(y.mse_linear, rel=1e-12)


def test_mse_ordering_and_csv(tmp_path):
    cfg = harness.SimConfig(trials=300, bits=(3,), snr_db=(-10.0, 10.0), seed=3)
    rows = harness.run_mse_experiment(cfg)
    t = {(r.estimator, r.snr_db): r.mse_linear for r in rows}
    assert t["ls", 10.0] > t["proposed-blind", 10.0]
    assert t["diag-lmmse", -10.0] < t["ls", -10.0]
    assert all(r.mse_linear > 0 and r.seconds_per_vector is None for r in rows)
    path = tmp_path / "out.csv"
    harness.write_csv(rows, path)
    data = path.read_bytes()
    assert data.decode("utf-8").splitlines()[0] == ",".join(harness.CSV_FIELDS)
    assert b"\r" not in data
    assert harness.rows_to_csv(harness.run_mse_experiment(cfg)).encode() == data


def test_timing_is_opt_in():
    cfg = harness.SimConfig(trials=5, bits=(3,), snr_db=(0.0,), estimators=("ls",), timing=True)
    assert harness.run_mse_experiment(cfg)[0].seconds_per_vector >= 0


def test_other_channel_models_run():
    for ch in ("geometric-offgrid", "bernoulli-gaussian"):
        rows = harness.run_mse_experiment(harness.SimConfig(trials=50, bits=(3,), snr_db=(10.0,), channel=ch,
                                                            estimators=("proposed-blind", "ls")))
        t = {r.estimator: r.mse_linear for r in rows}
        assert t["proposed-blind"] < t["ls"]


def test_fixed_point_route_label():
    cfg = harness.SimConfig(trials=10, bits=(3,), snr_db=(10.0,), estimators=("proposed-blind",), fixed_point=True)
    assert harness.run_mse_experiment(cfg)[0].estimator == "proposed-blind[fx]"


def test_ber_properties():
    snrs = tuple(float(s) for s in range(-10, 21, 5))
    cfg = harness.SimConfig(trials=60, bits=(3,), snr_db=snrs, seed=5, estimators=("proposed-blind", "ls"))
    rows = harness.run_ber_experiment(cfg)
    n = cfg.trials * cfg.K * cfg.data_symbols * 4
    by = {}
    for r in rows:
        assert 0 <= r.ber <= 0.5 and r.flagged == 0
        by.setdefault(r.estimator, []).append((r.snr_db, r.ber))
    perf = dict(by["perfect"])
    for e, curve in by.items():
        curve.sort()
        b = np.array([x for _, x in curve])
        se = np.sqrt(np.maximum(b * (1 - b), 1 / n) / n)
        inversions = np.sum(b[1:] > b[:-1] + 2 * np.maximum(se[1:], se[:-1]))
        assert inversions == 0
        assert np.sum(b[1:] > b[:-1]) <= 1
        for s, x in curve:
            assert perf[s] <= x + 2 * math.sqrt(max(x * (1 - x), 1 / n) / n)


def test_scaling_benchmark_rows():
    rows = harness.run_scaling_benchmark(Ms=(64, 128), repetitions=3, batch_elements=2**12)
    labels = [r.estimator for r in rows]
    assert "proposed-blind/post-transform/M=64" in labels and "proposed-known/full/M=128" in labels
    assert all(r.seconds_per_vector > 0 for r in rows)
    with pytest.raises(ValueError):
        harness.run_scaling_benchmark(Ms=(100,), repetitions=1)


def test_denoise_one():
    cfg = harness.SimConfig()
    h, hp, h_hat, rep = harness.denoise_one(cfg, 3, 10.0, trial=2)
    h2, *_ = harness.denoise_one(cfg, 3, 10.0, trial=2)
    np.testing.assert_array_equal(h, h2)
    assert np.sum(np.abs(h_hat - h) ** 2) < np.sum(np.abs(hp - h) ** 2)
    _, _, _, rk = harness.denoise_one(cfg, 3, 10.0, trial=2, known_noise=True)
    assert rk.known_D0
