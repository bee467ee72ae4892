import subprocess
import sys

import pytest

from beamdenoise import cli


def test_parse_params():
    p = cli.parse_params("C=8,c=2,cprime=8,rho-min=4,T=5")
    assert (p.C, p.c, p.c_prime, p.rho_min, p.T) == (8.0, 2.0, 8.0, 4, 5)
    with pytest.raises(ValueError):
        cli.parse_params("gamma=1")


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# desk run\ntrials = 7\nbits = 2,4\nsnr-start = -5\nsnr-stop = 5\nsnr-step = 5\nseed = 11\n")
    cmd, opts = cli.resolve_options(["mse", "--config", str(cfg), "--trials", "9"])
    sc = cli.make_config(opts)
    assert cmd == "mse" and sc.trials == 9 and sc.bits == (2, 4) and sc.seed == 11
    assert sc.snr_db == (-5.0, 0.0, 5.0)


def test_bad_config_line(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("trials 7\n")
    with pytest.raises(ValueError):
        cli.resolve_options(["mse", "--config", str(cfg)])


def test_known_noise_swaps_estimator():
    _, opts = cli.resolve_options(["mse", "--known-noise", "--estimators", "proposed-blind,ls"])
    assert cli.make_config(opts).estimators == ("proposed-known", "ls")


def test_mse_writes_csv(tmp_path):
    out = tmp_path / "m.csv"
    assert cli.main(["mse", "--trials", "5", "--bits", "3", "--snr-start", "0", "--snr-stop", "0",
                     "--estimators", "ls", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "estimator,bits,snr_db,mse_linear,mse_db,ber,trials,seconds_per_vector"
    assert lines[1].startswith("ls,3,0.0,")


def test_fixed_point_flag(tmp_path):
    out = tmp_path / "fx.csv"
    cli.main(["mse", "--trials", "3", "--bits", "3", "--snr-start", "10", "--snr-stop", "10",
              "--estimators", "proposed-blind", "--fixed-point", "--out", str(out)])
    assert "proposed-blind[fx]" in out.read_text()


def test_denoise_one_stdout(capsys):
    cli.main(["denoise-one", "--trial", "4", "--snr", "5", "--bits", "2"])
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("trial,snr_db,bits,D0_trajectory")
    assert lines[1].startswith("4,5.0,2,")


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "beamdenoise", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "denoise-one" in r.stdout


def test_invalid_channel_rejected():
    with pytest.raises(SystemExit):
        cli.main(["mse", "--channel", "rayleigh"])
