import hashlib
import json

import pytest

from ifista.cli import main
from ifista.config import parse_config
from ifista.exceptions import DivergenceError


def write_config(path, cfg):
    path.write_text(json.dumps(cfg))
    return str(path)


def quad_config(**overrides):
    cfg = {
        "problem": {"kind": "quadratic", "n": 8, "seed": 1, "spectrum": "spread"},
        "params": {"family": "critical"},
        "max_iters": 200,
        "seed": 3,
    }
    cfg.update(overrides)
    return cfg


class TestRun:
    def test_minimal_run(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path / "cfg.json", quad_config())
        assert main(["run", "--config", cfg_path, "--out", str(tmp_path / "out")]) == 0
        lines = (tmp_path / "out" / "trace.csv").read_text().splitlines()
        assert len(lines) == 202  # header + k = 0..200
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert summary["mode"] == "deterministic"
        assert summary["max_bound_violation"] == 0.0
        assert "run" in capsys.readouterr().out

    def test_byte_identical_reruns(self, tmp_path):
        cfg_path = write_config(tmp_path / "cfg.json", quad_config(
            delta={"c": 1e-3, "p": 2.0}, b={"c": 1e-3, "p": 2.0}))
        main(["run", "--config", cfg_path, "--out", str(tmp_path / "a")])
        main(["run", "--config", cfg_path, "--out", str(tmp_path / "b")])
        ha = hashlib.sha256((tmp_path / "a" / "trace.csv").read_bytes()).hexdigest()
        hb = hashlib.sha256((tmp_path / "b" / "trace.csv").read_bytes()).hexdigest()
        assert ha == hb

    def test_gamma_constraint_rejected(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path / "cfg.json", quad_config(gamma=1.5))
        assert main(["run", "--config", cfg_path, "--out", str(tmp_path / "out")]) == 1
        assert "1/L" in capsys.readouterr().err

    def test_malformed_config(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path / "cfg.json", quad_config(pizza=1))
        assert main(["run", "--config", cfg_path]) == 1
        assert "pizza" in capsys.readouterr().err
        cfg_path2 = write_config(tmp_path / "cfg2.json", {"mode": "deterministic"})
        assert main(["run", "--config", cfg_path2]) == 1
        assert "problem" in capsys.readouterr().err

    def test_env_seed_default(self, tmp_path, monkeypatch):
        monkeypatch.setenv("IFISTA_SEED", "424242")
        cfg = quad_config()
        del cfg["seed"]
        cfg_path = write_config(tmp_path / "cfg.json", cfg)
        main(["run", "--config", cfg_path, "--out", str(tmp_path / "out")])
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert summary["config"]["seed"] == 424242

    def test_max_iters_override(self, tmp_path):
        cfg_path = write_config(tmp_path / "cfg.json", quad_config())
        main(["run", "--config", cfg_path, "--out", str(tmp_path / "out"), "--max-iters", "50"])
        lines = (tmp_path / "out" / "trace.csv").read_text().splitlines()
        assert len(lines) == 52

    def test_stochastic_run_writes_aggregate(self, tmp_path):
        cfg = quad_config(mode="stochastic", replications=4, max_iters=100,
                          noise={"family": "sphere", "sigma": 0.05},
                          gamma_schedule={"q": 1.5, "r": 0.5})
        cfg_path = write_config(tmp_path / "cfg.json", cfg)
        assert main(["run", "--config", cfg_path, "--out", str(tmp_path / "out")]) == 0
        agg = (tmp_path / "out" / "aggregate.csv").read_text().splitlines()
        assert agg[0] == "k,mean_F_gap,se_F_gap,bound_rhs"
        assert len(agg) == 102

    def test_inner_cap_exit_code(self, tmp_path):
        cfg = {
            "problem": {"kind": "tv1d", "m": 20, "n": 30, "seed": 1, "lam_tv": 0.5},
            "delta": {"c": 1e-8, "p": 0.0},
            "max_iters": 20,
            "inner_cap": 5,
            "attach_reference": False,
        }
        cfg_path = write_config(tmp_path / "cfg.json", cfg)
        assert main(["run", "--config", cfg_path, "--out", str(tmp_path / "out")]) == 3

    def test_divergence_exit_code(self, tmp_path, monkeypatch):
        import ifista.cli as cli_mod

        def boom(*a, **kw):
            raise DivergenceError("blew up", k=7)

        monkeypatch.setattr(cli_mod, "run_inexact_fista", boom)
        cfg_path = write_config(tmp_path / "cfg.json", quad_config())
        assert main(["run", "--config", cfg_path, "--out", str(tmp_path / "out")]) == 2


class TestConfigCanonicalization:
    def test_run_id_ignores_key_order(self):
        a = parse_config(quad_config())
        shuffled = dict(reversed(list(quad_config().items())))
        b = parse_config(shuffled)
        assert a.run_id() == b.run_id()

    def test_run_id_materializes_defaults(self):
        a = parse_config(quad_config())
        b = parse_config(quad_config(weak_inexactness=False, replications=1))
        assert a.run_id() == b.run_id()

    def test_canonical_round_trip(self):
        cfg = parse_config(quad_config(delta={"c": 1e-2, "p": 2.5}))
        txt = cfg.canonical_json()
        again = parse_config(json.loads(txt))
        assert again.canonical_json() == txt

    def test_seed_changes_run_id(self):
        assert parse_config(quad_config(seed=1)).run_id() != parse_config(quad_config(seed=2)).run_id()


class TestSweep:
    def test_alpha_grid(self, tmp_path):
        cfg = {
            "problem": {"kind": "quadratic", "n": 10, "seed": 0, "spectrum": "geometric"},
            "max_iters": 800,
            "fit_window": [20, 800],
            "seed": 5,
            "sweep": {"alpha": [0.5, 1.0]},
        }
        cfg_path = write_config(tmp_path / "cfg.json", cfg)
        assert main(["sweep", "--config", cfg_path, "--out", str(tmp_path / "out")]) == 0
        lines = (tmp_path / "out" / "sweep.csv").read_text().splitlines()
        assert len(lines) == 3
        header = lines[0].split(",")
        rows = [dict(zip(header, line.split(","))) for line in lines[1:]]
        assert all(row["status"] == "ok" for row in rows)
        assert [row["alpha"] for row in rows] == ["0.5", "1.0"]
        assert all(float(row["fitted_slope"]) < -0.5 for row in rows)

    def test_feasibility_recorded_for_small_p(self, tmp_path):
        # p below the error-decay threshold: verdict false, run still executes
        cfg = {
            "problem": {"kind": "quadratic", "n": 6, "seed": 0},
            "delta": {"c": 1e-3, "p": 2.5},
            "max_iters": 60,
            "sweep": {"alpha": [1.0], "p": [1.5, 2.5]},
        }
        cfg_path = write_config(tmp_path / "cfg.json", cfg)
        assert main(["sweep", "--config", cfg_path, "--out", str(tmp_path / "out")]) == 0
        lines = (tmp_path / "out" / "sweep.csv").read_text().splitlines()
        header = lines[0].split(",")
        rows = [dict(zip(header, line.split(","))) for line in lines[1:]]
        assert rows[0]["p"] == "1.5" and rows[0]["status"] == "ok"
        assert rows[0]["deterministic_error_decay_ok"] == "False"
        assert rows[1]["deterministic_error_decay_ok"] == "True"

    def test_empty_grid_rejected(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path / "cfg.json", quad_config(sweep={}))
        assert main(["sweep", "--config", cfg_path, "--out", str(tmp_path)]) == 1
        cfg_path2 = write_config(tmp_path / "c2.json", quad_config())
        assert main(["sweep", "--config", cfg_path2, "--out", str(tmp_path)]) == 1

    def test_partial_failure_recorded(self, tmp_path):
        cfg = quad_config(max_iters=60, sweep={"p": [2.5, -1.0]},
                          delta={"c": 1e-3, "p": 2.0})
        cfg_path = write_config(tmp_path / "cfg.json", cfg)
        assert main(["sweep", "--config", cfg_path, "--out", str(tmp_path / "out")]) == 0
        lines = (tmp_path / "out" / "sweep.csv").read_text().splitlines()
        header = lines[0].split(",")
        rows = [dict(zip(header, line.split(",", len(header) - 1))) for line in lines[1:]]
        assert rows[0]["status"] == "ok"
        assert rows[1]["status"] == "error" and "p" in rows[1]["error"]

    def test_workers_match_serial(self, tmp_path):
        cfg = {
            "problem": {"kind": "quadratic", "n": 6, "seed": 0},
            "max_iters": 120,
            "fit_window": [10, 120],
            "sweep": {"alpha": [0.25, 0.5, 1.0]},
        }
        cfg_path = write_config(tmp_path / "cfg.json", cfg)
        main(["sweep", "--config", cfg_path, "--out", str(tmp_path / "serial")])
        main(["sweep", "--config", cfg_path, "--out", str(tmp_path / "par"), "--workers", "3"])

        def rows_without_timing(p):
            lines = (p / "sweep.csv").read_text().splitlines()
            header = lines[0].split(",")
            drop = header.index("wall_clock_s")
            return [[c for i, c in enumerate(line.split(",")) if i != drop] for line in lines]

        assert rows_without_timing(tmp_path / "serial") == rows_without_timing(tmp_path / "par")


class TestVerify:
    @pytest.fixture()
    def lasso_run_dir(self, tmp_path):
        cfg = {
            "problem": {"kind": "lasso", "m": 60, "n": 30, "seed": 7},
            "delta": {"c": 1e-2, "p": 2.5},
            "b": {"c": 1e-2, "p": 2.5},
            "max_iters": 400,
            "seed": 11,
        }
        cfg_path = write_config(tmp_path / "cfg.json", cfg)
        out = tmp_path / "out"
        assert main(["run", "--config", cfg_path, "--out", str(out)]) == 0
        return out

    def test_bounds_pass_on_honest_trace(self, lasso_run_dir, capsys):
        assert main(["verify", "bounds", "--trace", str(lasso_run_dir / "trace.csv")]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_bounds_detect_corruption_at_exact_row(self, lasso_run_dir, capsys):
        path = lasso_run_dir / "trace.csv"
        lines = path.read_text().splitlines()
        header = lines[0].split(",")
        col = header.index("F_gap")
        # inject at an early row, where the gap sits within a factor 10 of
        # the bound; deep in the tail the true gap decays far below the k^-2
        # envelope and a tenfold inflation would still be covered
        target_k = 2
        cells = lines[1 + target_k].split(",")
        cells[col] = repr(float(cells[col]) * 10.0)
        lines[1 + target_k] = ",".join(cells)
        corrupted = lasso_run_dir / "corrupted.csv"
        corrupted.write_text("\n".join(lines) + "\n")
        # the sidecar summary stays discoverable for mode metadata
        assert main(["verify", "bounds", "--trace", str(corrupted)]) == 4
        out = capsys.readouterr().out
        assert "k=[2]" in out

    def test_bounds_missing_column_names_it(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("k,t_k,gamma_k,delta_k,b_norm,F_gap,energy,bound_rhs,cert_excess\n0,1,1,0,0,0,0,0,0\n")
        assert main(["verify", "bounds", "--trace", str(bad)]) == 1
        assert "x_dist_to_ref" in capsys.readouterr().err

    def test_bounds_requires_trace_flag(self, capsys):
        assert main(["verify", "bounds"]) == 1

    def test_lemmas_deterministic_pass(self, capsys):
        assert main(["verify", "lemmas", "--instances", "50", "--seed", "0"]) == 0
        first = capsys.readouterr().out
        assert main(["verify", "lemmas", "--instances", "50", "--seed", "0"]) == 0
        assert capsys.readouterr().out == first
        assert "PASS" in first

    def test_prox_certs_pass(self, capsys):
        assert main(["verify", "prox-certs", "--instances", "60", "--seed", "1"]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_bounds_stochastic_uses_aggregate_mean(self, tmp_path, capsys):
        cfg = {
            "problem": {"kind": "box_qp", "n": 8, "seed": 1, "spectrum": "spread"},
            "mode": "stochastic",
            "noise": {"family": "sphere", "sigma": 0.1},
            "gamma_schedule": {"q": 1.5, "r": 0.5},
            "max_iters": 200,
            "replications": 8,
            "seed": 4,
        }
        cfg_path = write_config(tmp_path / "cfg.json", cfg)
        out = tmp_path / "out"
        assert main(["run", "--config", cfg_path, "--out", str(out)]) == 0
        assert main(["verify", "bounds", "--trace", str(out / "trace.csv")]) == 0
        assert "mode=stochastic" in capsys.readouterr().out
        (out / "aggregate.csv").unlink()
        assert main(["verify", "bounds", "--trace", str(out / "trace.csv")]) == 1
        assert "aggregate.csv" in capsys.readouterr().err
