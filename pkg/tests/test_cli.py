"""Command-line interface: config handling, exit codes, output format,
byte-level determinism."""

import subprocess
import sys

import pytest

from cowsim.config import ConfigError, RunConfig


def run_cli(*args):
    proc = subprocess.run([sys.executable, "-m", "cowsim", *args],
                          capture_output=True, text=True)
    return proc.returncode, proc.stdout, proc.stderr


def table(stdout):
    rows = [l for l in stdout.splitlines() if l and not l.startswith("#")]
    header = rows[0].split(",")
    return header, [r.split(",") for r in rows[1:]]


class TestRunConfig:
    def test_defaults_and_overrides(self):
        cfg = RunConfig.from_sources(None, ["mu=0.7", "seed=99"])
        assert cfg["mu"] == 0.7
        assert cfg["seed"] == 99

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig.from_sources(None, ["nope=1"])

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig.from_sources(None, ["mu=abc"])

    def test_file_parsing(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# comment line\nmu = 0.25  # inline comment\n\nseed=7\n")
        cfg = RunConfig.from_sources(str(path), [])
        assert cfg["mu"] == 0.25
        assert cfg["seed"] == 7

    def test_file_then_set_precedence(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("mu = 0.25\n")
        cfg = RunConfig.from_sources(str(path), ["mu=0.5"])
        assert cfg["mu"] == 0.5

    def test_malformed_file_line(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("just words\n")
        with pytest.raises(ConfigError):
            RunConfig.from_sources(str(path), [])


class TestKeyrateCommand:
    def test_reference_row(self):
        code, out, _ = run_cli("keyrate", "--set", "t_b=1.0")
        assert code == 0
        header, rows = table(out)
        row = dict(zip(header, rows[0]))
        assert row["protocol"] == "cow"
        assert row["r_sk"] == "0.0336447938"
        assert row["r_s"] == "0.0450171"

    def test_metadata_block(self):
        code, out, _ = run_cli("keyrate")
        assert out.startswith("# cowsim 0.1.0\n# command = keyrate\n")
        assert "# mu = 0.5" in out

    def test_unknown_key_exits_1(self):
        code, _, err = run_cli("keyrate", "--set", "bogus=1")
        assert code == 1
        assert "unknown configuration key" in err

    def test_invalid_params_exit_1(self):
        code, _, err = run_cli("keyrate", "--set", "mu=-1")
        assert code == 1

    def test_saturated_information_row(self):
        # r clamps to 1 at 10 dB with the as-printed model: clamped rate is
        # zero while the raw column stays negative
        code, out, _ = run_cli("keyrate", "--set", "loss_db=10", "--set",
                               "mu=1.0", "--set", "v=0.9", "--set", "t_b=1.0")
        assert code == 0
        header, rows = table(out)
        row = dict(zip(header, rows[0]))
        assert row["r_sk"] == "0"
        assert float(row["r_sk_raw"]) < 0.0
        assert row["i_eve"] == "1"

    def test_dead_source_all_zero_row(self):
        code, out, _ = run_cli("keyrate", "--set", "mu=0", "--set", "p_d=0")
        assert code == 0
        header, rows = table(out)
        row = dict(zip(header, rows[0]))
        assert row["r_s"] == "0" and row["q_total"] == "0"
        assert row["r_sk"] == "0" and row["r_sk_raw"] == "0"


class TestCurveCommand:
    def test_columns_and_ordering(self):
        code, out, _ = run_cli(
            "curve", "--set", "loss_grid=0,10", "--set", "visibilities=1.0,0.9",
            "--set", "protocols=cow,bb84", "--set", "t_b=1.0")
        assert code == 0
        header, rows = table(out)
        assert header == ["protocol", "V", "loss_db", "mu_star", "r_sk"]
        key = [(r[0], r[1], r[2]) for r in rows]
        assert key == [("cow", "1", "0"), ("cow", "1", "10"),
                       ("cow", "0.9", "0"), ("cow", "0.9", "10"),
                       ("bb84", "1", "0"), ("bb84", "1", "10"),
                       ("bb84", "0.9", "0"), ("bb84", "0.9", "10")]

    def test_v1_identity_in_output(self):
        code, out, _ = run_cli(
            "curve", "--set", "loss_grid=0,5,10", "--set", "visibilities=1.0",
            "--set", "protocols=cow,bb84-decoy", "--set", "t_b=1.0")
        header, rows = table(out)
        cow = [float(r[4]) for r in rows if r[0] == "cow"]
        dec = [float(r[4]) for r in rows if r[0] == "bb84-decoy"]
        for a, b in zip(cow, dec):
            assert abs(a - b) <= 1e-9 * max(a, b, 1e-30)

    def test_empty_grid_exits_1(self):
        code, _, err = run_cli("curve", "--set", "loss_grid=")
        assert code == 1


class TestSimulateCommand:
    def test_clean_run_exit_0(self):
        code, out, _ = run_cli("simulate", "--set", "n_symbols=20000",
                               "--seed", "3")
        assert code == 0
        header, rows = table(out)
        row = dict(zip(header, rows[0]))
        assert row["abort"] == "false"

    def test_full_attack_aborts_exit_2(self):
        code, out, _ = run_cli(
            "simulate", "--set", "n_symbols=200000", "--seed", "5",
            "--set", "attack=intercept-resend", "--set", "p_ir=1.0",
            "--set", "t_b=0.5", "--set", "eta=0.25", "--set", "f=0.3",
            "--set", "p_d=0.0", "--set", "insertion_loss=0.0")
        assert code == 2
        header, rows = table(out)
        row = dict(zip(header, rows[0]))
        assert row["abort"] == "true"
        assert row["n_secret"] == "0"

    def test_event_dump(self, tmp_path):
        dump = tmp_path / "events.csv"
        code, _, _ = run_cli("simulate", "--set", "n_symbols=5000",
                             "--seed", "3", "--dump-events", str(dump))
        assert code == 0
        lines = dump.read_text().splitlines()
        header = [l for l in lines if not l.startswith("#")][0]
        assert header == "detector,sequence_index,slot_index"


class TestExperimentCommand:
    def test_histogram_and_summary(self):
        code, out, _ = run_cli("experiment", "--set", "n_frames=50000",
                               "--seed", "5")
        assert code == 0
        assert "# raw_rate_hz = " in out
        assert "# data_qber = " in out
        header, rows = table(out)
        assert header == ["slot_time_ns", "detector", "count"]
        assert {r[1] for r in rows} == {"D_B", "D_M1", "D_M2"}

    def test_preset_metadata(self):
        code, out, _ = run_cli("experiment", "--set", "n_frames=1000")
        assert "# loss_db = 5.0" in out
        assert "# deadtime_ns = 10000.0" in out
        assert "# p_d = 4.25" in out
        assert "# v = 0.92" in out

    def test_net_visibility_selector(self):
        code, out, _ = run_cli("experiment", "--set", "n_frames=1000",
                               "--set", "experiment_visibility=net")
        assert "# v = 0.98" in out

    def test_explicit_v_wins(self):
        code, out, _ = run_cli("experiment", "--set", "n_frames=1000",
                               "--set", "v=0.95")
        assert "# v = 0.95" in out

    def test_deadtime_override_increases_rate(self):
        def rate(*extra):
            _, out, _ = run_cli("experiment", "--set", "n_frames=50000",
                                "--seed", "5", *extra)
            line = [l for l in out.splitlines() if l.startswith("# raw_rate_hz")][0]
            return float(line.split("=")[1])
        assert rate("--set", "deadtime_ns=0") > rate()


class TestDeterminism:
    @pytest.mark.parametrize("args", [
        ("keyrate", "--set", "t_b=1.0"),
        ("curve", "--set", "loss_grid=0,10", "--set", "visibilities=1.0"),
        ("simulate", "--set", "n_symbols=20000", "--seed", "9"),
        ("experiment", "--set", "n_frames=20000", "--seed", "9"),
    ])
    def test_byte_identical_rerun(self, args, tmp_path):
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        code1, _, _ = run_cli(*args, "--out", str(out1))
        code2, _, _ = run_cli(*args, "--out", str(out2))
        assert code1 == code2
        assert out1.read_bytes() == out2.read_bytes()
