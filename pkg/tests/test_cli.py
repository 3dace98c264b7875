import json
import subprocess
import sys

import pytest

import mfg_kinetic as mk
from mfg_kinetic.cli import main
from mfg_kinetic.model import spec_to_dict


def write_config(path, spec, run=None):
    doc = {"schema": 1, "model": spec_to_dict(spec), "run": run or {}}
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture(scope="module")
def mono_config(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cfg")
    spec = mk.presets.two_state_monotone(n_steps=200)
    return write_config(tmp / "mono.json", spec, {"damping": 0.5, "tol": 1e-7, "max_iter": 200})


class TestSolveMFG:
    def test_artifacts_and_exit_zero(self, tmp_path, mono_config, capsys):
        out = tmp_path / "run1"
        code = main(["solve-mfg", "--config", mono_config, "--out", str(out), "--quiet"])
        assert code == 0
        for name in ("m.csv", "value.csv", "policy.csv", "meta.json"):
            assert (out / name).exists()
        summary = json.loads(capsys.readouterr().out)
        assert summary["command"] == "solve-mfg" and summary["converged"] is True

    def test_not_converged_exit_three(self, tmp_path, mono_config, capsys):
        cfg = json.loads(open(mono_config).read())
        cfg["run"] = {"damping": 0.5, "tol": 1e-13, "max_iter": 1}
        p = tmp_path / "hard.json"
        p.write_text(json.dumps(cfg))
        out = tmp_path / "run3"
        code = main(["solve-mfg", "--config", str(p), "--out", str(out), "--quiet"])
        assert code == 3
        meta = json.loads((out / "meta.json").read_text())
        assert meta["converged"] is False
        capsys.readouterr()

    def test_malformed_config_exit_two_no_artifacts(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"schema": 1}')
        out = tmp_path / "never"
        assert main(["solve-mfg", "--config", str(bad), "--out", str(out), "--quiet"]) == 2
        assert not out.exists()

    def test_invalid_model_exit_two(self, tmp_path):
        spec = mk.presets.two_state_monotone(n_steps=50)
        doc = {"schema": 1, "model": spec_to_dict(spec), "run": {}}
        doc["model"]["m0"] = [0.5, 0.6]
        bad = tmp_path / "badmodel.json"
        bad.write_text(json.dumps(doc))
        out = tmp_path / "never2"
        assert main(["solve-mfg", "--config", str(bad), "--out", str(out), "--quiet"]) == 2
        assert not out.exists()


class TestPipelines:
    def test_nash_gap_with_precomputed_solution(self, tmp_path, mono_config, capsys):
        sol_dir = tmp_path / "sol"
        assert main(["solve-mfg", "--config", mono_config, "--out", str(sol_dir), "--quiet"]) == 0
        capsys.readouterr()
        out = tmp_path / "gap"
        code = main([
            "nash-gap", "--config", mono_config, "--out", str(out),
            "--solution", str(sol_dir), "--quiet",
        ])
        assert code == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["slope"] is not None and summary["slope"] <= -0.4
        lines = (out / "nash_gap.csv").read_text().splitlines()
        assert lines[0] == "N,cost_sym,cost_br,epsilon,epsilon_sqrtN"
        assert len(lines) == 1 + len(summary["N"])

    def test_nash_gap_solves_when_needed(self, tmp_path, capsys):
        tmp = tmp_path
        spec = mk.presets.two_state_monotone(n_steps=200)
        cfg = write_config(tmp / "m.json", spec,
                           {"damping": 0.5, "tol": 1e-7, "max_iter": 200, "N_list": [2, 4]})
        out = tmp / "gap2"
        assert main(["nash-gap", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        assert (out / "solution" / "m.csv").exists()
        summary = json.loads(capsys.readouterr().out)
        assert len(summary["epsilons"]) == 2

    def test_mc_converge(self, tmp_path, capsys):
        spec = mk.presets.three_state_coupled(n_steps=200)
        cfg = write_config(tmp_path / "c.json", spec, {
            "damping": 0.5, "tol": 1e-7, "max_iter": 200,
            "N_list": [8, 16, 32], "replications": 50,
        })
        out = tmp_path / "mc"
        assert main(["mc-converge", "--config", cfg, "--out", str(out), "--quiet",
                     "--seed", "4"]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert "slope" in summary
        header = (out / "mc_stats.csv").read_text().splitlines()[0]
        assert header == "t,N,reps,mean_mu_err,ci_mu_err,mean_x_err,ci_x_err,mismatch_prob"
        assert (out / "error_fit.csv").exists()

    def test_tstar_and_check_mono_and_eval(self, tmp_path, mono_config, capsys):
        spec = mk.presets.two_state_contraction(n_steps=200)
        cfg = write_config(tmp_path / "t.json", spec)
        out = tmp_path / "t"
        assert main(["tstar", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        doc = json.loads((out / "tstar.json").read_text())
        assert abs(doc["lhs_at_tstar"] - 1.0) <= 1e-10
        capsys.readouterr()

        out2 = tmp_path / "mono"
        assert main(["check-mono", "--config", mono_config, "--out", str(out2), "--quiet"]) == 0
        assert json.loads((out2 / "monotonicity.json").read_text())["passed"] is True
        capsys.readouterr()

        out3 = tmp_path / "eval"
        assert main(["eval-cost", "--config", mono_config, "--out", str(out3), "--quiet"]) == 0
        doc = json.loads((out3 / "eval.json").read_text())
        assert abs(doc["cost_optimal_policy"] - doc["m0_dot_W0"]) <= 1e-6
        capsys.readouterr()


class TestReproducibility:
    def test_identical_reruns_byte_identical(self, tmp_path, mono_config, capsys):
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            assert main(["solve-mfg", "--config", mono_config, "--out", str(out), "--quiet"]) == 0
            capsys.readouterr()
            outs.append(out)
        for name in ("m.csv", "value.csv", "policy.csv"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    def test_thread_count_invariant_csv(self, tmp_path, capsys):
        spec = mk.presets.three_state_coupled(n_steps=200)
        cfg = write_config(tmp_path / "c.json", spec, {
            "damping": 0.5, "tol": 1e-7, "max_iter": 200,
            "N_list": [8, 16], "replications": 40,
        })
        outs = []
        for threads in ("1", "3"):
            out = tmp_path / f"t{threads}"
            assert main(["mc-converge", "--config", cfg, "--out", str(out), "--quiet",
                         "--seed", "2", "--threads", threads]) == 0
            capsys.readouterr()
            outs.append(out)
        assert (outs[0] / "mc_stats.csv").read_bytes() == (outs[1] / "mc_stats.csv").read_bytes()


class TestEntryPoint:
    def test_module_invocation(self, tmp_path, mono_config):
        out = tmp_path / "run"
        proc = subprocess.run(
            [sys.executable, "-m", "mfg_kinetic", "eval-cost", "--config", mono_config,
             "--out", str(out), "--quiet"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        summary = json.loads(proc.stdout)
        assert summary["command"] == "eval-cost"
