import subprocess
import sys

import pytest

from secagg.cli import EXIT_FAILED, EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE, main

K3T1 = ["--K", "3", "--U", "2", "--T", "1", "--p", "5"]


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_feasible_suggests_fields(capsys):
    code, out, _ = run(capsys, "check", "--K", "4", "--U", "2", "--T", "1")
    assert code == EXIT_OK
    assert "feasible" in out
    assert "GF(7)" in out
    assert "GF(2) with B = 3" in out


def test_check_infeasible(capsys):
    code, out, _ = run(capsys, "check", "--K", "4", "--U", "1", "--T", "1")
    assert code == EXIT_INFEASIBLE
    assert "U=1 <= T=1" in out


def test_check_rejects_u_equal_k(capsys):
    code, out, _ = run(capsys, "check", "--K", "3", "--U", "3", "--T", "0")
    assert code == EXIT_USAGE
    assert "U <= K-1" in out


def test_check_field_too_small(capsys):
    code, out, _ = run(capsys, "check", "--K", "4", "--U", "2", "--T", "1", "--p", "2")
    assert code == EXIT_USAGE
    assert "use B = 3" in out


def test_usage_errors_exit_1(capsys, tmp_path):
    assert run(capsys, "check", "--K", "4")[0] == EXIT_USAGE
    assert run(capsys, "check", "--K", "x")[0] == EXIT_USAGE
    assert run(capsys, "frobnicate")[0] == EXIT_USAGE
    bad = tmp_path / "bad.cfg"
    bad.write_text("K = 3\nwat\n")
    assert run(capsys, "check", "--config", str(bad))[0] == EXIT_USAGE
    assert run(capsys, "check", "--config", str(tmp_path / "missing.cfg"))[0] == EXIT_USAGE
    assert run(capsys, "check", *K3T1, "--m", "2", "--p", "4")[0] == EXIT_USAGE


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "ex.cfg"
    cfg.write_text("# three users, one colluder\nK = 3\nU = 2\nT = 2\np = 5\n")
    assert run(capsys, "check", "--config", str(cfg))[0] == EXIT_INFEASIBLE
    code, out, _ = run(capsys, "check", "--config", str(cfg), "--T", "1")
    assert code == EXIT_OK
    assert "T=1" in out


def test_deal_is_byte_identical(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(capsys, "deal", *K3T1, "--seed", "5", "--out", str(a))[0] == EXIT_OK
    assert run(capsys, "deal", *K3T1, "--seed", "5", "--out", str(b))[0] == EXIT_OK
    assert (a / "dealer.bin").read_bytes() == (b / "dealer.bin").read_bytes()
    assert run(capsys, "deal", *K3T1)[0] == EXIT_USAGE


def test_verify_k3_t1_all_pass(capsys, tmp_path):
    run(capsys, "deal", *K3T1, "--out", str(tmp_path))
    code, out, _ = run(capsys, "verify", *K3T1, "--dealer", str(tmp_path / "dealer.bin"), "--out", str(tmp_path))
    assert code == EXIT_OK
    assert "FAIL" not in out
    assert "checks passed" in out
    assert (tmp_path / "verify.txt").exists()


def test_verify_rejects_mismatched_dealer(capsys, tmp_path):
    run(capsys, "deal", *K3T1, "--out", str(tmp_path))
    code, _, err = run(capsys, "verify", "--K", "3", "--U", "2", "--T", "0", "--p", "5", "--L", "2",
                       "--dealer", str(tmp_path / "dealer.bin"))
    assert code == EXIT_USAGE
    assert "dealer output is for" in err


def test_verify_detects_tampered_dealer(capsys, tmp_path):
    run(capsys, "deal", *K3T1, "--out", str(tmp_path))
    path = tmp_path / "dealer.bin"
    data = bytearray(path.read_bytes())
    data[-1] = (data[-1] + 1) % 5  # last share symbol of user 3
    path.write_bytes(bytes(data))
    code, out, _ = run(capsys, "verify", *K3T1, "--dealer", str(path))
    assert code == EXIT_FAILED
    assert "FAIL" in out


def test_simulate_exhaustive(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", *K3T1, "--exhaustive", "--out", str(tmp_path))
    assert code == EXIT_OK
    assert "schedules=7 decodes_exact=7/7" in out
    assert len(list((tmp_path / "transcripts").iterdir())) == 7
    assert (tmp_path / "report.txt").read_text().count("decode_ok=1") == 28


def test_simulate_inputs_file_and_single_schedule(capsys, tmp_path):
    inputs = tmp_path / "w.txt"
    inputs.write_text("5\n1\n6\n3\n")
    code, out, _ = run(capsys, "simulate", "--K", "4", "--U", "2", "--T", "1", "--inputs", str(inputs),
                       "--u1", "1,3,4", "--u2", "1,4")
    assert code == EXIT_OK
    assert "decodes_exact=1/1" in out
    inputs.write_text("5\n1\n9\n3\n")
    assert run(capsys, "simulate", "--K", "4", "--U", "2", "--T", "1", "--inputs", str(inputs))[0] == EXIT_USAGE
    assert run(capsys, "simulate", *K3T1, "--u1", "1,2", "--u2", "1")[0] == EXIT_USAGE


def test_simulate_budget(capsys, monkeypatch):
    assert run(capsys, "simulate", *K3T1, "--exhaustive", "--budget", "5")[0] == EXIT_USAGE
    monkeypatch.setenv("SECAGG_BUDGET", "5")
    assert run(capsys, "simulate", *K3T1, "--exhaustive")[0] == EXIT_USAGE
    assert run(capsys, "simulate", *K3T1, "--exhaustive", "--budget", "100")[0] == EXIT_OK


def test_simulate_sampled_is_deterministic(capsys):
    a = run(capsys, "simulate", "--K", "5", "--U", "3", "--T", "1", "--samples", "10", "--seed", "4")
    b = run(capsys, "simulate", "--K", "5", "--U", "3", "--T", "1", "--samples", "10", "--seed", "4")
    assert a == b and a[0] == EXIT_OK


def test_rates_table(capsys):
    code, out, _ = run(capsys, "rates", "--K", "5", "--U", "3", "--T", "1")
    assert code == EXIT_OK
    header, row = out.strip().splitlines()
    fields = dict(zip(header.split("\t"), row.split("\t")))
    assert fields["R1"] == "1" and fields["R2"] == "1/2"
    assert run(capsys, "rates", "--K", "4", "--U", "1", "--T", "1")[0] == EXIT_INFEASIBLE


def test_structured_scheme_via_cli(capsys):
    code, out, _ = run(capsys, "verify", "--K", "3", "--U", "2", "--T", "0", "--p", "5", "--L", "2",
                       "--scheme", "structured")
    assert code == EXIT_OK
    assert "H(Z_2) = 5" in out


@pytest.mark.parametrize("argv,code", [(["check", "--K", "4", "--U", "1", "--T", "1"], 2), (["check"], 1)])
def test_module_entry_point(argv, code):
    proc = subprocess.run([sys.executable, "-m", "secagg", *argv], capture_output=True, text=True)
    assert proc.returncode == code
