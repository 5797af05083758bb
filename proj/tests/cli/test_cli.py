"""Exercises the qka-sim binary: exit codes, output shapes, determinism."""

import json
import os
import subprocess

import pytest

BIN = os.environ.get("QKA_SIM_BIN")

pytestmark = pytest.mark.skipif(not BIN, reason="QKA_SIM_BIN not set")

GOLDEN_FLAGS = [
    "--n", "5", "--m", "3", "--l-verify", "2", "--pivot", "3",
    "--seed", "20240901",
    "--keys", "10,11,10;00,01,01;11,01,00;11,10,11;00,10,01",
]


def run_cli(*args, env_extra=None, check=None):
    env = os.environ.copy()
    env.pop("QKA_SIM_SEED", None)
    if env_extra:
        env.update(env_extra)
    proc = subprocess.run(
        [BIN, *args], capture_output=True, text=True, env=env, timeout=120
    )
    if check is not None:
        assert proc.returncode == check, proc.stderr or proc.stdout
    return proc


def test_golden_run_text():
    proc = run_cli("run", *GOLDEN_FLAGS, "--out", "", check=0)
    assert "outcome: key recovered" in proc.stdout
    assert "s = 10,11,01" in proc.stdout


def test_run_json_is_deterministic_and_parses():
    first = run_cli("run", *GOLDEN_FLAGS, "--out", "", "--json", check=0)
    second = run_cli("run", *GOLDEN_FLAGS, "--out", "", "--json", check=0)
    assert first.stdout == second.stdout
    transcript = json.loads(first.stdout)
    assert transcript["result"]["shared_key"] == "10,11,01"
    assert transcript["config"]["n"] == 5


def test_transcript_file_matches_stdout(tmp_path):
    out = tmp_path / "transcript.json"
    proc = run_cli("run", *GOLDEN_FLAGS, "--out", str(out), "--json", check=0)
    assert out.read_text() == proc.stdout


def test_attacked_run_exits_2():
    proc = run_cli(
        "run", *GOLDEN_FLAGS, "--out", "",
        "--attack", "forge-pivot-key:key=00,00,00",
    )
    assert proc.returncode == 2
    assert "aborted in tdc-verification (eq5-pivot-key-digest)" in proc.stdout
    assert "offender: P3" in proc.stdout


def test_seed_env_fallback():
    with_env = run_cli(
        "run", "--n", "3", "--m", "1", "--out", "", "--json",
        env_extra={"QKA_SIM_SEED": "42"}, check=0,
    )
    with_flag = run_cli(
        "run", "--n", "3", "--m", "1", "--seed", "42", "--out", "", "--json", check=0
    )
    assert with_env.stdout == with_flag.stdout

    other = run_cli(
        "run", "--n", "3", "--m", "1", "--seed", "43", "--out", "", "--json", check=0
    )
    assert other.stdout != with_flag.stdout


def test_config_file_round_trip(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "n": 5, "m": 3, "l_verify": 2, "pivot": 3, "seed": 20240901,
        "keys": ["10,11,10", "00,01,01", "11,01,00", "11,10,11", "00,10,01"],
    }))
    from_file = run_cli("run", "--config", str(cfg), "--out", "", "--json", check=0)
    from_flags = run_cli("run", *GOLDEN_FLAGS, "--out", "", "--json", check=0)
    assert from_file.stdout == from_flags.stdout


def test_bad_inputs_exit_1(tmp_path):
    assert run_cli().returncode == 1  # missing subcommand
    assert run_cli("run", "--n", "4", "--out", "").returncode == 1
    assert run_cli("run", "--attack", "no-such-attack", "--out", "").returncode == 1

    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    proc = run_cli("run", "--config", str(bad), "--out", "")
    assert proc.returncode == 1
    assert "error:" in proc.stderr


def test_verify_table_text():
    proc = run_cli("verify-table", check=0)
    assert proc.stdout.count("AGREE") == 16  # DISAGREE contains AGREE
    assert proc.stdout.count("DISAGREE") == 3
    assert "13/16 rows agree" in proc.stdout


def test_verify_table_json():
    proc = run_cli("verify-table", "--json", check=0)
    table = json.loads(proc.stdout)
    assert table["agreements"] == 13
    assert len(table["rows"]) == 16


def test_attack_report_json():
    proc = run_cli(
        "attack", "intercept-resend:transfer=0",
        "--n", "3", "--m", "2", "--decoys", "4",
        "--trials", "1000", "--seed", "9",
        check=0,
    )
    report = json.loads(proc.stdout)
    assert report["trials"] == 1000
    assert 0 <= report["detected"] <= 1000
    assert report["analytic"] == pytest.approx(1 - 0.75 ** 4)


def test_attack_rejects_small_trials():
    proc = run_cli("attack", "intercept-resend", "--trials", "10")
    assert proc.returncode == 1
    assert "at least 1000" in proc.stderr


def test_efficiency_output():
    proc = run_cli("efficiency", "--n", "5", "--m", "3", check=0)
    assert "= 1/23 =" in proc.stdout
    assert "circulating approximation 1/(2n) = 0.1" in proc.stdout

    as_json = json.loads(run_cli("efficiency", "--n", "5", "--m", "3", "--json", check=0).stdout)
    assert as_json["denominator"] == 23
    assert as_json["closed_form_denominator"] == 23


def test_selftest_and_fault_injection():
    proc = run_cli("selftest", check=0)
    assert proc.stdout.count("ok   ") == 4

    tripped = run_cli("selftest", "--inject-fault", "codebook-soundness")
    assert tripped.returncode == 3
    assert "FAIL codebook-soundness" in tripped.stdout
