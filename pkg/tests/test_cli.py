from pathlib import Path

import pytest
from click.testing import CliRunner

from markovline.cli import main

EXPERIMENTS = Path(__file__).resolve().parent.parent / "configs" / "experiments"


def run_cli(args):
    runner = CliRunner()
    return runner.invoke(main, args, catch_exceptions=False)


class TestExitCodes:
    def test_pass_gives_zero(self, tmp_path):
        res = run_cli(
            ["chain-analyze", "--config", str(EXPERIMENTS / "chain_analyze_ssrw.toml"),
             "--out", str(tmp_path / "o")]
        )
        assert res.exit_code == 0
        assert "overall = PASS" in res.output

    def test_verdict_failure_gives_two(self, tmp_path):
        res = run_cli(
            ["chain-analyze", "--config", str(EXPERIMENTS / "chain_analyze_ssrw.toml"),
             "--out", str(tmp_path / "o"),
             "--override", "verdict.expect_aperiodic=true"]
        )
        assert res.exit_code == 2
        assert "FAIL" in res.output

    def test_config_error_gives_one(self, tmp_path):
        missing = tmp_path / "nope.toml"
        res = run_cli(["evolve", "--config", str(missing), "--out", str(tmp_path / "o")])
        assert res.exit_code == 1
        assert "error" in res.output

    def test_unknown_key_gives_one(self, tmp_path):
        cfg = tmp_path / "bad.toml"
        cfg.write_text('experiment = "evolve"\nkernel = "k.toml"\nwhatever = 1\n')
        res = run_cli(["evolve", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert res.exit_code == 1
        assert "unknown key" in res.output

    def test_invalid_construction_gives_one(self, tmp_path):
        # a finite modification whose signed perturbation sum does not cancel
        (tmp_path / "base.toml").write_text(
            'variant = "quasi_lift"\nperiod = "1"\n'
            '[[branch]]\ncell = 0\nslope = "1/2"\noffset = "0"\n'
            '[[branch]]\ncell = -1\nslope = "1/2"\noffset = "-1/2"\n'
        )
        (tmp_path / "bad_fm.toml").write_text(
            'variant = "finite_modification"\nbase = "base.toml"\n'
            '[[modification]]\nbranch = 0\ndelta = "1/64"\n'
            '[[modification]]\nbranch = -1\ndelta = "1/64"\n'
        )
        cfg = tmp_path / "check.toml"
        cfg.write_text(f'experiment = "build-check"\nmap = "bad_fm.toml"\n')
        res = run_cli(["build-check", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert res.exit_code == 1
        assert "sum must vanish" in res.output


class TestDeterminism:
    def test_byte_identical_reruns(self, tmp_path):
        for sub in ("a", "b"):
            res = run_cli(
                ["orbits", "--config", str(EXPERIMENTS / "orbits_markov_fiveband.toml"),
                 "--out", str(tmp_path / sub),
                 "--override", "params.samples=20000", "--override", "params.horizon=5"]
            )
            assert res.exit_code == 0
        a = (tmp_path / "a" / "markov_test.csv").read_bytes()
        b = (tmp_path / "b" / "markov_test.csv").read_bytes()
        assert a == b

    def test_seed_flag_wins_over_config(self, tmp_path):
        base = ["orbits", "--config", str(EXPERIMENTS / "orbits_markov_fiveband.toml"),
                "--override", "params.samples=5000", "--override", "params.horizon=3",
                "--override", "verdict.require_three_sigma=false"]
        run_cli(base + ["--out", str(tmp_path / "s1"), "--seed", "123"])
        run_cli(base + ["--out", str(tmp_path / "s2"), "--seed", "777"])
        a = (tmp_path / "s1" / "markov_test.csv").read_text()
        b = (tmp_path / "s2" / "markov_test.csv").read_text()
        assert "seed = 123" in a and "seed = 777" in b
        assert a.splitlines()[4:] != b.splitlines()[4:]


class TestThreads:
    def test_env_honored_and_flag_wins(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MARKOVLINE_THREADS", "3")
        res = run_cli(
            ["chain-analyze", "--config", str(EXPERIMENTS / "chain_analyze_ssrw.toml"),
             "--out", str(tmp_path / "env")]
        )
        assert "threads = 3" in res.output
        res2 = run_cli(
            ["chain-analyze", "--config", str(EXPERIMENTS / "chain_analyze_ssrw.toml"),
             "--out", str(tmp_path / "flag"), "--threads", "2"]
        )
        assert "threads = 2" in res2.output

    def test_bad_env_value_rejected(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MARKOVLINE_THREADS", "lots")
        res = run_cli(
            ["chain-analyze", "--config", str(EXPERIMENTS / "chain_analyze_ssrw.toml"),
             "--out", str(tmp_path / "o")]
        )
        assert res.exit_code == 1


class TestArtifacts:
    def test_correlate_csv_columns(self, tmp_path):
        res = run_cli(
            ["correlate", "--config", str(EXPERIMENTS / "correlate_fiveband.toml"),
             "--out", str(tmp_path / "o"),
             "--override", "params.n_max=120",
             "--override", "params.threshold=0.05",
             "--override", "verdict.residual_max_at=[[100, 0.03]]"]
        )
        assert res.exit_code == 0
        lines = (tmp_path / "o" / "correlate.csv").read_text().splitlines()
        header = [l for l in lines if not l.startswith("#")][0]
        assert header == "n,c_n,residual"
        body = [l for l in lines if not l.startswith("#")][1:]
        assert len(body) == 121
        n, c0, r0 = body[0].split(",")
        assert (n, c0) == ("0", "1.0")

    def test_correlate_without_target_omits_residual(self, tmp_path):
        cfg = tmp_path / "bare.toml"
        cfg.write_text(
            'experiment = "correlate"\n'
            f'map = "{(EXPERIMENTS / "../maps/fiveband.toml").resolve()}"\n'
            f'observable = "{(EXPERIMENTS / "../observables/theta.toml").resolve()}"\n'
            '[params]\nn_max = 5\nmode = "exact"\n'
        )
        res = run_cli(["correlate", "--config", str(cfg), "--out", str(tmp_path / "p")])
        assert res.exit_code == 0
        lines = (tmp_path / "p" / "correlate.csv").read_text().splitlines()
        header = [l for l in lines if not l.startswith("#")][0]
        assert header == "n,c_n"

    def test_summary_written(self, tmp_path):
        res = run_cli(
            ["evolve", "--config", str(EXPERIMENTS / "evolve_fiveband.toml"),
             "--out", str(tmp_path / "o"), "--override", "params.steps=20"]
        )
        assert res.exit_code == 0
        summary = (tmp_path / "o" / "summary.txt").read_text()
        assert "verdict mass_exact = PASS" in summary
        assert "verdict symmetric_decreasing = PASS" in summary
        assert "overall = PASS" in summary

    def test_cylinders_run(self, tmp_path):
        res = run_cli(
            ["cylinders", "--config", str(EXPERIMENTS / "cylinders_doubling.toml"),
             "--out", str(tmp_path / "o")]
        )
        assert res.exit_code == 0
        body = [
            l for l in (tmp_path / "o" / "cylinders.csv").read_text().splitlines()
            if not l.startswith("#")
        ]
        assert body[0] == "word,left,right,length,length_bound"
        assert body[1].startswith("0,")

    def test_ggm_sweep_csv_long_format(self, tmp_path):
        res = run_cli(
            ["ggm-sweep", "--config", str(EXPERIMENTS / "ggm_surface_fiveband.toml"),
             "--out", str(tmp_path / "o"),
             "--override", "params.sizes=[200]", "--override", "params.n_list=[5]"]
        )
        assert res.exit_code == 0
        body = [
            l for l in (tmp_path / "o" / "ggm_sweep.csv").read_text().splitlines()
            if not l.startswith("#")
        ]
        assert body[0] == "functional,M,n,value_re,value_im,residual"
        assert body[1].startswith("GGM2,200,5,")

    def test_budget_exceeded_gives_one(self, tmp_path):
        res = run_cli(
            ["ggm-sweep", "--config", str(EXPERIMENTS / "ggm_surface_fiveband.toml"),
             "--out", str(tmp_path / "o"),
             "--override", "params.sizes=[40000000]",
             "--override", "params.n_list=[100]"]
        )
        assert res.exit_code == 1
        assert "budget" in res.output.lower()
