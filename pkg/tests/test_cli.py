import math

import numpy as np
import pytest

from tfphase.cli import RunConfig, execute, main, read_config_file
from tfphase.energy import EnergyRecord
from tfphase.fields import Grid, read_snapshot
from tfphase.output import (
    emit_energy_csv,
    emit_pgm,
    pgm_levels,
    read_energy_csv,
    read_pgm,
    write_manifest,
)
from tfphase.presets import (
    PRESETS,
    preset_ch_random,
    preset_flower,
    preset_seven_circles,
)


class TestPresets:
    def test_flower(self):
        g = Grid.square(64, 2.0, -1.0)
        u = preset_flower(g)
        assert np.max(np.abs(u)) <= 1
        x, y = g.coordinates()
        centre = np.unravel_index(np.argmin(np.hypot(x, y)), g.shape)
        assert u[centre] < -0.99

    def test_flower_zero_level_on_axis(self):
        g = Grid(64, 4, Lx=2.0, Ly=1.0, x0=-1.0, y0=0.0)
        u = preset_flower(g)[0]
        x = g.coordinates()[0][0]
        right = x > 0
        crossing = x[right][np.nonzero(np.diff(np.sign(u[right])))[0][0]]
        assert abs(crossing - 9 / 16) <= g.dx

    def test_seven_circles(self):
        g = Grid.square(64)
        u = preset_seven_circles(g)
        x, y = g.coordinates()
        i, j = np.argmin(np.abs(y[:, 0] - math.pi / 2)), np.argmin(np.abs(x[0] - math.pi / 2))
        assert u[i, j] == pytest.approx(-1 + 2 * math.exp(-0.01 / (math.pi / 5) ** 2), rel=1e-12)
        assert u[i, j] == pytest.approx(0.9499756, abs=1e-7)
        assert u[0, 0] == -1.0
        assert np.all(u >= -1) and np.all(u <= 1)

    def test_random_is_deterministic(self):
        g = Grid.square(32)
        a, b = preset_ch_random(g, 7), preset_ch_random(g, 7)
        assert a.tobytes() == b.tobytes()
        assert not np.array_equal(a, preset_ch_random(g, 8))
        assert np.all(a >= -1) and np.all(a < 1)

    def test_random_mean_is_small(self):
        g = Grid.square(128)
        means = [preset_ch_random(g, s).mean() for s in range(20)]
        sigma = 1 / math.sqrt(3 * g.nx * g.ny)
        assert sum(abs(m) < 2 * sigma for m in means) >= 16

    def test_registry(self):
        assert set(PRESETS) == {"flower", "circles", "ch-random"}
        assert PRESETS["flower"].grid().nx == 128


class TestOutputFormats:
    def test_empty_csv_is_header_only(self, tmp_path):
        path = tmp_path / "e.csv"
        emit_energy_csv([], path)
        assert path.read_text() == "t,E,E_tilde,D_term,stab_term,max_abs_u,mean_u\n"
        assert read_energy_csv(path) == []

    def test_csv_round_trip_is_exact(self, tmp_path):
        rec = EnergyRecord(0.1, 1 / 3, math.pi, 1e-17, 0.0, 0.999, -2.5e-300)
        path = tmp_path / "e.csv"
        emit_energy_csv([rec, rec], path)
        assert read_energy_csv(path) == [rec, rec]

    def test_csv_rejects_foreign_header(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            read_energy_csv(path)

    def test_pgm_levels(self):
        levels = pgm_levels(np.array([[-1.05, 0.0, 1.05, 7.0, -7.0]]))
        assert levels.tolist() == [[0, 128, 255, 255, 0]]

    def test_pgm_round_trip(self, tmp_path):
        u = np.linspace(-1, 1, 48).reshape(6, 8)
        path = tmp_path / "u.pgm"
        emit_pgm(u, path)
        raw = path.read_bytes()
        assert raw.startswith(b"P5\n8 6\n255\n")
        np.testing.assert_array_equal(read_pgm(path), pgm_levels(u))

    def test_unwritable_path(self, tmp_path):
        with pytest.raises(OSError):
            emit_energy_csv([], tmp_path / "missing" / "e.csv")

    def test_manifest_sorted(self, tmp_path):
        path = tmp_path / "m.txt"
        write_manifest({"b": 0.1, "a": 2, "c": "x"}, path)
        assert path.read_text() == "a = 2\nb = 0.10000000000000001\nc = x\n"


class TestRunConfig:
    def test_defaults_from_preset(self):
        r = RunConfig(preset="circles").resolved()
        assert (r.scheme, r.alpha, r.dt, r.steps, r.S) == ("l2-ac", 0.8, 0.05, 100, 1.0)
        assert r.end_time == pytest.approx(5.0)

    def test_end_time(self):
        assert RunConfig(dt=0.1, end_time=2.0).resolved().steps == 20
        assert RunConfig(dt=0.1, end_time=2.0, steps=21).resolved().steps == 21
        with pytest.raises(ValueError, match="inconsistent"):
            RunConfig(dt=0.1, end_time=2.0, steps=40).resolved()

    def test_validation(self):
        with pytest.raises(ValueError):
            RunConfig(preset="square")
        with pytest.raises(ValueError):
            RunConfig(alpha=1.5).scheme_config()

    def test_config_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# comment\npreset = ch-random\nalpha = 0.4  # trailing\n"
                        "snap-stride = 5\npgm = yes\n\n")
        assert read_config_file(path) == {"preset": "ch-random", "alpha": 0.4, "snap_stride": 5,
                                          "pgm": True}
        path.write_text("nonsense\n")
        with pytest.raises(ValueError, match="run.cfg:1"):
            read_config_file(path)


def small_run(tmp_path, name, *extra):
    out = tmp_path / name
    argv = ["run", "--preset", "flower", "--grid", "16", "--steps", "6", "--dt", "0.02",
            "--snap-stride", "3", "--out", str(out), *extra]
    assert main(argv) == 0
    return out


class TestCommands:
    def test_run_outputs(self, tmp_path, capsys):
        out = small_run(tmp_path, "a", "--pgm")
        assert capsys.readouterr().out.strip() == str(out)
        records = read_energy_csv(out / "energy.csv")
        assert len(records) == 7
        snaps = sorted(p.name for p in (out / "snapshots").iterdir())
        assert snaps == ["u_000000.pgm", "u_000000.tfp", "u_000003.pgm", "u_000003.tfp",
                         "u_000006.pgm", "u_000006.tfp"]
        assert read_snapshot(out / "snapshots" / "u_000000.tfp").shape == (16, 16)
        manifest = (out / "manifest.txt").read_text()
        assert "alpha = 0.90000000000000002" in manifest
        assert "guarantee_applies = True" in manifest

    @pytest.mark.parametrize("preset", ["flower", "circles", "ch-random"])
    def test_reproducible(self, tmp_path, preset):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["run", "--preset", preset, "--grid", "16", "--steps", "5",
                         "--snap-stride", "1", "--seed", "11", "--out", str(out)]) == 0
            outs.append(out)
        files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
        assert len(files) == 8
        for rel in files:
            if rel.name == "manifest.txt":
                continue
            assert (outs[0] / rel).read_bytes() == (outs[1] / rel).read_bytes()

    def test_config_file_and_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        out = tmp_path / "o"
        cfg.write_text(f"preset = circles\ngrid = 16\nsteps = 4\nalpha = 0.4\nout = {out}\n")
        assert main(["run", "--config", str(cfg), "--alpha", "0.7"]) == 0
        manifest = (out / "manifest.txt").read_text()
        assert "alpha = 0.69999999999999996" in manifest
        assert "preset = circles" in manifest
        assert "steps = 4" in manifest
        assert "guarantee_applies = False" in manifest

    def test_bad_input_exits_with_code_2(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as info:
            main(["run", "--alpha", "1.2", "--grid", "8", "--out", str(tmp_path / "x")])
        assert info.value.code == 2
        assert "fractional order" in capsys.readouterr().err

    def test_report(self, tmp_path, capsys):
        out = small_run(tmp_path, "r")
        capsys.readouterr()
        assert main(["report", str(out)]) == 0
        printed = capsys.readouterr().out.split()
        assert sorted(p.rsplit("/", 1)[-1] for p in printed) == ["dissipation.png", "energy.png"]
        for name in ("energy.png", "dissipation.png"):
            assert (out / name).read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_plot_flag(self, tmp_path):
        out = small_run(tmp_path, "p", "--plot")
        assert (out / "energy.png").exists() and (out / "dissipation.png").exists()

    def test_coeffs(self, capsys):
        assert main(["coeffs", "--alpha", "0.5", "--n", "2"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "k,b_k"
        assert float(lines[1].split(",")[1]) == pytest.approx(1.1283792, abs=1e-7)
        assert float(lines[2].split(",")[1]) == pytest.approx(0.4673900, abs=1e-7)
        assert main(["coeffs", "--alpha", "0.5", "--n", "3", "--which", "l2"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("# r1 = 0.48223")
        assert lines[1] == "j,a_j,b_j,c_j,d_j"
        assert len(lines) == 5

    def test_verify(self, capsys):
        assert main(["verify", "--alphas", "0.5", "--cases", "200"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 4 and all(line.startswith("PASS") for line in lines)

    def test_sweep(self, tmp_path, capsys):
        out = tmp_path / "s"
        assert main(["sweep", "--preset", "flower", "--grid", "16", "--steps", "3",
                     "--alphas", "0.3,0.7", "--S-values", "20", "--jobs", "2",
                     "--out", str(out)]) == 0
        assert (out / "alpha0.3_S20" / "energy.csv").exists()
        assert (out / "alpha0.7_S20" / "energy.csv").exists()

    def test_execute_returns_directory(self, tmp_path):
        out = execute(RunConfig(preset="ch-random", grid=16, steps=2, out=str(tmp_path / "e")))
        assert out == tmp_path / "e"
        assert len(read_energy_csv(out / "energy.csv")) == 3
