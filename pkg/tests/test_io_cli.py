from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from slackpf.checks import critical_strain, patch_problem
from slackpf.cli import main
from slackpf.config import ConfigError, RunConfig, format_config, parse_config, with_overrides, write_config
from slackpf.fem import DofMap, Formulation, SystemState
from slackpf.mesh import generate_rect_mesh, generate_tri_mesh
from slackpf.output import (
    LD_HEADER,
    fmt,
    load_checkpoint,
    read_ld_csv,
    read_vtk_point_scalars,
    save_checkpoint,
    write_fields,
    write_ld_csv,
)
from slackpf.solver import SolverConfig, StepSchedule, run_simulation

CONFIGS = Path(str(resources.files("slackpf") / "configs"))


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestConfig:
    def test_defaults(self, tmp_path):
        cfg = parse_config(write(tmp_path, "[run]\nbenchmark = sent\n"))
        assert cfg.solver == SolverConfig()
        assert cfg.output == Path("out")

    def test_values(self, tmp_path):
        text = "[run]\nbenchmark = sens\n[solver]\nformulation = penalty\neta = 1e4\n[model]\nlength_scale = 0.03\n"
        cfg = parse_config(write(tmp_path, text))
        assert cfg.solver.formulation is Formulation.PENALTY
        assert cfg.solver.eta == 1e4
        assert cfg.model == {"length_scale": 0.03}

    def test_eta_override(self, tmp_path):
        cfg = with_overrides(parse_config(write(tmp_path, "[run]\nbenchmark = sent\n")), eta=1e3, tol=None)
        assert cfg.solver.eta == 1e3 and cfg.solver.tol == 1e-4

    def test_bad_length_scale(self, tmp_path):
        with pytest.raises(ConfigError, match="length_scale") as exc:
            parse_config(write(tmp_path, "[run]\nbenchmark = sent\n[model]\nlength_scale = -1\n"))
        assert exc.value.field == "length_scale"

    def test_unknown_key_located(self, tmp_path):
        with pytest.raises(ConfigError, match="line 3") as exc:
            parse_config(write(tmp_path, "[solver]\ntol = 1e-4\netaa = 5\n"))
        assert exc.value.field == "etaa"
        assert exc.value.line == 3

    def test_unknown_section(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config(write(tmp_path, "[run]\nbenchmark = sent\n[extras]\nx = 1\n"))

    def test_unknown_benchmark(self, tmp_path):
        with pytest.raises(ConfigError, match="benchmark"):
            parse_config(write(tmp_path, "[run]\nbenchmark = bridge\n"))

    def test_schedule_phases(self, tmp_path):
        cfg = parse_config(write(tmp_path, "[run]\nbenchmark = sent\n[schedule]\nphases = 3 @ 1e-3, * @ 1e-4\nend = 4e-3\n"))
        sched = cfg.schedule(cfg.build_problem())
        assert sched.phases == ((3, 1e-3), (10, 1e-4))

    def test_round_trip(self, tmp_path):
        cfg = RunConfig(
            benchmark="tpb", output=tmp_path / "o", snapshot_every=5, model={"band_h": 1.25},
            solver=SolverConfig(formulation="penalty", eta=1e5, max_steps=7), phases=((2, 1e-3),),
        )
        path = tmp_path / "c.ini"
        write_config(cfg, path)
        assert parse_config(path) == cfg
        assert parse_config(write(tmp_path, format_config(RunConfig()), "d.ini")) == RunConfig()

    @pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.ini")))
    def test_shipped_configs_parse(self, name):
        parse_config(CONFIGS / name)


class TestLoadDisplacement:
    def result(self):
        return run_simulation(patch_problem(StepSchedule(((3, 0.4 * critical_strain()),))), SolverConfig())

    def test_header_only(self, tmp_path):
        write_ld_csv([], tmp_path / "ld.csv")
        assert (tmp_path / "ld.csv").read_text() == LD_HEADER + "\n"
        assert len(read_ld_csv(tmp_path / "ld.csv")) == 0

    def test_rows(self, tmp_path):
        res = self.result()
        write_ld_csv(res, tmp_path / "ld.csv")
        data = read_ld_csv(tmp_path / "ld.csv")
        assert data.dtype.names == tuple(LD_HEADER.split(","))
        assert len(data) == 3 and np.all(np.diff(data["u_mm"]) > 0)
        np.testing.assert_allclose(data["load_kN"], res.loads, rtol=1e-11)

    def test_deterministic(self, tmp_path):
        write_ld_csv(self.result(), tmp_path / "a.csv")
        write_ld_csv(self.result(), tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_fmt(self):
        assert fmt(0.5) == "0.5"
        assert float(fmt(1.0 / 3.0)) == pytest.approx(1.0 / 3.0, rel=1e-11)


class TestVTK:
    def test_single_quad(self, tmp_path):
        m = generate_rect_mesh(1.0, 1.0, 1.0)
        st = SystemState.zeros(DofMap(4, Formulation.LMM))
        st.phi[:] = [0.0, 0.5, 1.2, -0.1]
        write_fields(st, m, tmp_path / "f.vtk")
        text = (tmp_path / "f.vtk").read_text()
        assert "POINTS 4 double" in text
        assert "CELLS 1 5" in text
        assert "CELL_TYPES 1\n9" in text
        s = read_vtk_point_scalars(tmp_path / "f.vtk")
        np.testing.assert_array_equal(s["phi"], [0.0, 0.5, 1.0, 0.0])
        assert set(s) >= {"phi", "theta", "lam", "slack_gap"}

    def test_triangles_and_penalty_multiplier(self, tmp_path):
        m = generate_tri_mesh(2.0, 2.0, 1.0, [], [])
        st = SystemState.zeros(DofMap(m.n_nodes, Formulation.PENALTY))
        st.phi[:] = 0.01
        write_fields(st, m, tmp_path / "t.vtk", eta=1e3)
        text = (tmp_path / "t.vtk").read_text()
        assert f"CELL_TYPES {m.n_elements}" in text
        np.testing.assert_allclose(read_vtk_point_scalars(tmp_path / "t.vtk")["lam"], -10.0)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        problem = patch_problem(StepSchedule(((4, 0.3 * critical_strain()),)))
        part = run_simulation(problem, SolverConfig(max_steps=2))
        save_checkpoint(tmp_path / "c.npz", part.progress)
        prog = load_checkpoint(tmp_path / "c.npz", DofMap(problem.mesh.n_nodes, Formulation.LMM))
        assert prog.state.x.tobytes() == part.state.x.tobytes()
        assert prog.records == part.records
        full = run_simulation(problem, SolverConfig())
        rest = run_simulation(problem, SolverConfig(), resume=prog)
        assert rest.state.x.tobytes() == full.state.x.tobytes()

    def test_formulation_mismatch(self, tmp_path):
        prog = run_simulation(patch_problem(StepSchedule(((1, 1e-4),))), SolverConfig()).progress
        save_checkpoint(tmp_path / "c.npz", prog)
        with pytest.raises(ValueError, match="penalty"):
            load_checkpoint(tmp_path / "c.npz", DofMap(4, Formulation.PENALTY))


class TestCLI:
    def test_list(self, capsys):
        assert main(["list-benchmarks"]) == 0
        names = [line.split()[0] for line in capsys.readouterr().out.splitlines()]
        assert names == ["sent", "sens", "notched_hole", "tpb", "lpanel"]

    def test_missing_file(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.ini")]) == 3

    def test_usage(self):
        assert main(["frobnicate"]) == 1
        assert main(["run"]) == 1

    def test_bad_config(self, tmp_path):
        assert main(["run", str(write(tmp_path, "[solver]\ntol = -1\n"))]) == 1

    def test_negative_eta(self):
        assert main(["run", str(CONFIGS / "sent_coarse.ini"), "--eta", "-1"]) == 1

    def test_check(self, capsys):
        assert main(["check"]) == 0
        assert "FAIL" not in capsys.readouterr().out

    def test_mesh(self, tmp_path):
        assert main(["mesh", "sent_coarse", "--out", str(tmp_path / "m.txt")]) == 0
        assert (tmp_path / "m.txt").is_file()
        assert main(["mesh", "nope", "--out", str(tmp_path / "n.txt")]) == 1

    def test_run_and_resume(self, tmp_path):
        cfg = str(CONFIGS / "sent_coarse.ini")
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["run", cfg, "--out", str(a), "--max-steps", "3", "--snapshot-every", "1"]) == 0
        for name in ("load_displacement.csv", "kkt.csv", "fields_final.vtk", "fields_000001.vtk", "metadata.json", "checkpoint.npz"):
            assert (a / name).is_file(), name
        assert len(read_ld_csv(a / "load_displacement.csv")) == 3

        assert main(["run", cfg, "--out", str(b), "--max-steps", "2"]) == 0
        assert main(["run", cfg, "--out", str(b), "--max-steps", "3", "--resume", str(b / "checkpoint.npz")]) == 0
        ld = "load_displacement.csv"
        assert (a / ld).read_bytes() == (b / ld).read_bytes()
        assert (a / "fields_final.vtk").read_bytes() == (b / "fields_final.vtk").read_bytes()

    def test_resume_wrong_formulation(self, tmp_path):
        cfg = str(CONFIGS / "sent_coarse.ini")
        assert main(["run", cfg, "--out", str(tmp_path), "--max-steps", "1"]) == 0
        rc = main(["run", cfg, "--out", str(tmp_path), "--formulation", "penalty", "--resume", str(tmp_path / "checkpoint.npz")])
        assert rc == 1
