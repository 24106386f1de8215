import json
import logging

import numpy as np
import pytest

from pycoefid.fem.mesh import build_rect_mesh
from pycoefid.main import EXIT_INPUT, EXIT_OK, main
from pycoefid.models.config_model import parse_run_config
from pycoefid.problems.library import generate_synthetic_data
from pycoefid.utils.field_io import CONVERGENCE_HEADER, read_node_field, write_node_field


def run(*args):
    return main([str(arg) for arg in args])


def test_forward_writes_field_and_summary(small_config, write_config, tmp_path):
    out = tmp_path / "out"
    assert run("forward", "--config", write_config(small_config), "--out", out) == EXIT_OK
    u = read_node_field(out / "u_final.csv", build_rect_mesh(1.0, 1.0, 4, 4))
    summary = json.loads((out / "summary.json").read_text())
    assert summary["u_min"] == u.min()
    assert summary["u_max"] == u.max()
    assert summary["dmp"]["nonnegative"] and summary["dmp"]["nondecreasing"]


def test_forward_zero_source(small_config, write_config, tmp_path):
    small_config["source"]["amplitude"] = 0.0
    out = tmp_path / "out"
    assert run("forward", "--config", write_config(small_config), "--out", out) == EXIT_OK
    np.testing.assert_array_equal(read_node_field(out / "u_final.csv"), 0.0)


def test_forward_snapshots_and_vtk(small_config, write_config, tmp_path):
    small_config["time"]["snapshot_every"] = 2
    out = tmp_path / "out"
    assert run("forward", "--config", write_config(small_config), "--out", out, "--vtk") == EXIT_OK
    assert sorted(p.name for p in out.glob("u_step_*.csv")) == ["u_step_00000.csv", "u_step_00002.csv",
                                                                "u_step_00004.csv"]
    vtk = (out / "forward.vtk").read_text().splitlines()
    assert vtk[0] == "# vtk DataFile Version 2.0"
    assert "POINTS 25 double" in vtk
    assert "CELLS 32 128" in vtk
    assert "SCALARS u double 1" in vtk


def test_malformed_config_writes_nothing(small_config, write_config, tmp_path, caplog):
    small_config["time"]["tau"] = -0.05
    out = tmp_path / "out"
    with caplog.at_level(logging.ERROR):
        assert run("forward", "--config", write_config(small_config), "--out", out) == EXIT_INPUT
    assert not out.exists()
    assert "load config" in caplog.text
    assert "time.tau" in caplog.text


def test_generate_data_round_trip(small_config, write_config, tmp_path):
    out = tmp_path / "data"
    assert run("generate-data", "--config", write_config(small_config), "--out", out) == EXIT_OK
    mesh = build_rect_mesh(1.0, 1.0, 4, 4)
    psi = read_node_field(out / "psi.csv", mesh)
    assert psi.shape == (25,)

    config = parse_run_config(small_config)
    expected = generate_synthetic_data(config.to_problem(), mesh, config.time.resolved_data_tau,
                                       theta=config.time.data_theta)
    np.testing.assert_array_equal(psi, expected)


def test_generate_data_needs_true_coefficient(small_config, write_config, tmp_path):
    del small_config["coefficients"]["reaction"]
    out = tmp_path / "data"
    assert run("generate-data", "--config", write_config(small_config), "--out", out) == EXIT_INPUT
    assert not out.exists()


def test_generate_data_warns_on_constant_in_time_source(small_config, write_config, tmp_path, caplog):
    small_config["source"]["time_power"] = 0
    out = tmp_path / "data"
    with caplog.at_level(logging.WARNING):
        assert run("generate-data", "--config", write_config(small_config), "--out", out) == EXIT_OK
    assert "f(x, 0) != 0" in caplog.text
    assert (out / "psi.csv").exists()
    assert not json.loads((out / "summary.json").read_text())["source_conditions_hold"]


@pytest.fixture
def psi_file(small_config, write_config, tmp_path):
    out = tmp_path / "data"
    assert run("generate-data", "--config", write_config(small_config, "data.json"), "--out", out) == EXIT_OK
    return out / "psi.csv"


def test_identify_outputs(small_config, write_config, psi_file, tmp_path):
    out = tmp_path / "identify"
    assert run("identify", "--config", write_config(small_config), "--psi", psi_file, "--out", out) == EXIT_OK

    names = {p.name for p in out.iterdir()}
    assert {f"c_{k:03d}.csv" for k in range(4)} <= names
    assert {f"delta_c{k:03d}.csv" for k in range(1, 4)} <= names
    assert {f"error_c{k:03d}.csv" for k in range(4)} <= names
    assert {"convergence.csv", "final_solution.csv", "summary.json"} <= names

    lines = (out / "convergence.csv").read_text().splitlines()
    assert lines[0] == CONVERGENCE_HEADER
    assert len(lines) == 1 + 4
    assert lines[1].startswith("0,")

    summary = json.loads((out / "summary.json").read_text())
    assert summary["init_mode"] == "from_above"
    assert summary["iterations"] == 3
    assert summary["zero_start_condition"] is None


def test_identify_is_deterministic(small_config, write_config, psi_file, tmp_path):
    config = write_config(small_config)
    for name in ("a", "b"):
        assert run("identify", "--config", config, "--psi", psi_file, "--out", tmp_path / name, "--vtk") == EXIT_OK
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_identify_from_zero_reports_condition(small_config, write_config, psi_file, tmp_path):
    small_config["identification"]["init_mode"] = "zero"
    out = tmp_path / "identify"
    assert run("identify", "--config", write_config(small_config), "--psi", psi_file, "--out", out) == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["zero_start_condition"] is not None


def test_identify_node_count_mismatch(small_config, write_config, psi_file, tmp_path):
    small_config["mesh"] = {"nx": 5, "ny": 5}
    out = tmp_path / "identify"
    assert run("identify", "--config", write_config(small_config), "--psi", psi_file, "--out", out) == EXIT_INPUT
    assert not out.exists()


def test_identify_psi_floor_violation(small_config, write_config, tmp_path, caplog):
    mesh = build_rect_mesh(1.0, 1.0, 4, 4)
    psi = np.ones(mesh.node_count)
    psi[3] = 0.0
    psi_path = write_node_field(tmp_path / "psi.csv", mesh, psi)
    out = tmp_path / "identify"
    with caplog.at_level(logging.ERROR):
        assert run("identify", "--config", write_config(small_config), "--psi", psi_path, "--out", out) == EXIT_INPUT
    assert "psi[3]" in caplog.text
    assert not out.exists()


def test_identify_requires_psi(small_config, write_config):
    with pytest.raises(SystemExit) as excinfo:
        run("identify", "--config", write_config(small_config))
    assert excinfo.value.code == 2


def test_study_command(small_config, write_config, tmp_path):
    out = tmp_path / "study"
    assert run("study", "--config", write_config(small_config), "--out", out, "--workers", 2) == EXIT_OK
    lines = (out / "study.csv").read_text().splitlines()
    assert lines[0] == "tau,k,eps_inf,eps_2"
    # Two steps, iterates k = 0..3 each
    assert len(lines) == 1 + 2 * 4
    summary = json.loads((out / "summary.json").read_text())
    assert [run_["tau"] for run_ in summary["runs"]] == [0.05, 0.025]
    assert summary["errors"] == []


def test_identify_rejects_zero_data(small_config, write_config, tmp_path, caplog):
    mesh = build_rect_mesh(1.0, 1.0, 4, 4)
    psi_path = write_node_field(tmp_path / "psi.csv", mesh, np.zeros(mesh.node_count))
    out = tmp_path / "identify"
    with caplog.at_level(logging.ERROR):
        assert run("identify", "--config", write_config(small_config), "--psi", psi_path, "--out", out) == EXIT_INPUT
    assert "psi[0]" in caplog.text
    assert not out.exists()


@pytest.fixture
def third_horizon_config(small_config):
    """Horizon 1/3, which the default study steps do not divide."""
    del small_config["time"]["study_taus"]
    small_config["time"].update({"horizon": 1.0 / 3.0, "tau": 1.0 / 30.0, "data_tau": 1.0 / 300.0})
    return small_config


def test_default_study_steps_do_not_block_forward(third_horizon_config, write_config, tmp_path):
    out = tmp_path / "out"
    assert run("forward", "--config", write_config(third_horizon_config), "--out", out) == EXIT_OK
    assert (out / "u_final.csv").exists()


def test_study_rejects_steps_not_dividing_the_horizon(third_horizon_config, write_config, tmp_path, caplog):
    out = tmp_path / "study"
    with caplog.at_level(logging.ERROR):
        assert run("study", "--config", write_config(third_horizon_config), "--out", out) == EXIT_INPUT
    assert "do not divide the horizon" in caplog.text
    assert not out.exists()
