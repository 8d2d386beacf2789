import io
import subprocess
import sys

import pytest

from regen_lil import cli


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    try:
        code = cli.main(argv, out, err)
    except SystemExit as exc:
        code = exc.code
    return code, out.getvalue(), err.getvalue()


def test_phi_table_rows():
    code, out, _ = run(["phi-table", "--model", "kind=gamma theta=1 lambda=1", "--t", "1e2,1e6"])
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "t,Phi,phi_prime_log_t,asymptotic,difference"
    t, val, der, asym, diff = lines[2].split(",")
    assert float(t) == 1e6
    # quadrature value; the log t + Euler-gamma figure 14.39273 is not attained
    assert float(val) == pytest.approx(13.81551, abs=1e-3)
    assert abs(float(diff)) < 1e-5


def test_phi_table_gamma_like_and_cp():
    code, out, _ = run(["phi-table", "--model", "kind=gammalike theta=1 lambda=1", "--t", "1e6"])
    assert code == 0 and float(out.splitlines()[1].split(",")[1]) == pytest.approx(14.39273, abs=1e-3)
    code, out, _ = run(["phi-table", "--model", "kind=cp jump=exp rate=1", "--t", "geo:1:100:3"])
    assert code == 0 and len(out.strip().splitlines()) == 4


def test_clt_zero_reps_names_flag():
    code, _, err = run(["clt", "--model", "kind=gammalike theta=1 lambda=1", "--n", "100", "--reps", "0"])
    assert code == 1 and "--reps" in err


def test_unknown_flag_and_missing_subcommand():
    code, _, err = run(["clt", "--model", "kind=gamma theta=1 lambda=1", "--n", "100", "--reps", "3",
                        "--bogus", "1"])
    assert code == 1 and "--bogus" in err
    assert run([])[0] == 1
    code, _, err = run(["phi-table", "--model", "kind=weibull", "--t", "1"])
    assert code == 1 and "--model" in err


def test_clt_csv_to_stdout_and_seed_determinism():
    argv = ["clt", "--model", "kind=gammalike theta=1 lambda=1", "--n", "50,200", "--reps", "25", "--seed", "4"]
    code, out1, err = run(argv)
    assert code == 0 and "n=50" in err
    assert out1.splitlines()[0] == "n,raw,centering,normalization,normalized,replicate,stream_id"
    assert len(out1.splitlines()) == 51
    assert run(argv)[1] == out1
    assert run(argv[:-1] + ["5"])[1] != out1


def test_replay_round_trip(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    code, _, _ = run(["clt", "--model", "kind=gamma theta=1 lambda=1", "--n", "geo:20:2000:3", "--reps", "30",
                      "--seed", "9", "--out", str(a)])
    assert code == 0
    code, _, _ = run(["replay", "--manifest", str(a / "manifest.txt"), "--out", str(b)])
    assert code == 0
    assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()


def test_lil_and_bm_lil(tmp_path):
    code, out, err = run(["lil", "--model", "kind=gamma theta=1 lambda=1", "--nmax", "5000", "--seed", "1"])
    assert code == 0 and "diagnostic" in err and len(out.splitlines()) > 10
    code, _, err = run(["lil", "--model", "kind=gamma theta=1 lambda=1", "--nmax", "5000", "--eps", "0.5"])
    assert code == 1 and "epsilon" in err
    code, out, err = run(["bm-lil", "--alpha", "1", "--T", "1e4", "--step", "1", "--seed", "2"])
    assert code == 0 and "trajectory 0" in err


def test_validate_subprocess():
    proc = subprocess.run([sys.executable, "-m", "regen_lil", "validate"], capture_output=True, text=True,
                          timeout=600)
    assert proc.returncode == 0
    lines = proc.stdout.strip().splitlines()
    assert lines and all(line.startswith("PASS") for line in lines)
