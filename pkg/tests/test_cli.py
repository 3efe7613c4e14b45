import json
import math

import numpy as np
import pytest

from fdlab import cli

PI = math.pi


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out
    return code, out


def run_json(capsys, *argv):
    code, out = run(capsys, *argv)
    return code, json.loads(out)


def test_eval_cyl_point(capsys):
    code, rep = run_json(capsys, "eval", "--point", "1.2,1.5707963267948966,0.1")
    assert code == 0
    assert rep["schema"] == "1"
    assert np.allclose(rep["value"], [-0.05, 0.05, 0.125], atol=1e-12)
    assert rep["config"]["seed"] == 0


def test_eval_cart_point(capsys):
    code, rep = run_json(capsys, "eval", "--cart", "0,1.2,0.1")
    assert code == 0
    assert np.allclose(rep["value"], [-0.05, 0.05, 0.125], atol=1e-12)


def test_jac_and_distortion(capsys):
    code, rep = run_json(capsys, "jac", "--point", "0.8,1.5707963267948966,0.4")
    assert code == 0
    assert rep["jacobian"] == pytest.approx(1 / (8 * PI), rel=1e-12)
    assert np.array(rep["frame_differential"]).shape == (3, 3)
    code, rep = run_json(capsys, "distortion", "--point", "0.8,1.5707963267948966,0.4")
    assert code == 0
    assert rep["distortion"] >= 1.0


def test_fiber_subcommand(capsys):
    code, rep = run_json(capsys, "fiber", "--target=-0.5,0,0", "--samples", "32")
    assert code == 0
    assert rep["kind"] == "FIGURE_EIGHT"
    assert rep["components"] == 2
    assert rep["wedge"] == [0.5, 0.0, 0.0]
    assert len(rep["samples"]) == rep["n_samples"]


def test_fiber_csv(capsys):
    code, out = run(capsys, "fiber", "--target", "0,0,0", "--samples", "8",
                    "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "x,y,z"
    assert len(lines) == 9


def test_invert_and_error_exit(capsys):
    code, rep = run_json(capsys, "invert", "--target", "0.5,0,0")
    assert code == 0
    assert rep["residual"] < 1e-9
    # targets on the collapsed half-line have no single preimage
    code = cli.main(["invert", "--target=-0.5,0,0"])
    capsys.readouterr()
    assert code == 1


def test_usage_errors(capsys):
    assert cli.main(["no-such-command"]) == 2
    capsys.readouterr()
    assert cli.main(["eval", "--bogus", "1"]) == 2
    capsys.readouterr()
    assert cli.main(["eval", "--point", "1,2"]) == 2
    capsys.readouterr()


def test_table_json_and_csv(capsys):
    code, rep = run_json(capsys, "table", "--nmax", "4")
    assert code == 0
    assert rep["rows"]["3"][0] == {"k": 1, "p": "1/2", "parenthetical": False}
    assert rep["rows"]["3"][1]["parenthetical"] is True
    code, out = run(capsys, "table", "--nmax", "4", "--format", "csv")
    assert code == 0
    assert out.splitlines()[1] == "3,1/2,(1/2),"


def test_integrate_deterministic(capsys):
    argv = ["integrate", "--p", "0.3", "--samples", "20000"]
    _, first = run(capsys, *argv)
    _, second = run(capsys, *argv)
    assert first == second
    rep = json.loads(first)
    assert rep["value"] > 0.0 and rep["stderr"] > 0.0
    assert set(rep["by_case"]) == {"INNER", "CONE", "OUTER"}


def test_fit_subcommand(capsys):
    code, rep = run_json(
        capsys, "fit", "--p", "0.5",
        "--eps-schedule", "1e-2,1e-3,1e-4,1e-5",
        "--samples", "100000",
    )
    assert code == 0
    assert rep["model"] in ("CONSTANT", "LOG", "POWER")
    assert len(rep["series"]) == 4


def test_components_subcommand(capsys):
    code, rep = run_json(
        capsys, "components", "--target=-0.5,0,0",
        "--radius", "0.1", "--resolution", "64",
    )
    assert code == 0
    assert rep["components"] == 1


def test_dimension_subcommand(capsys):
    code, rep = run_json(capsys, "dimension", "--target", "0,0,0", "--samples", "5000")
    assert code == 0
    assert rep["kind"] == "CIRCLE"
    assert 0.9 <= rep["dimension"] <= 1.1


def test_energy_subcommand(capsys):
    code, rep = run_json(capsys, "energy", "--samples", "20000")
    assert code == 0
    assert rep["value"] > 0.0


def test_export_mesh(capsys, tmp_path):
    path = tmp_path / "torus.obj"
    code, rep = run_json(
        capsys, "export-mesh", "--level", "0.5",
        "--resolution", "24", "--mesh-path", str(path),
    )
    assert code == 0
    assert rep["kind"] == "trimesh"
    assert rep["euler_characteristic"] == 0
    text = path.read_text()
    assert sum(1 for ln in text.splitlines() if ln.startswith("v ")) == rep["vertices"]
    assert sum(1 for ln in text.splitlines() if ln.startswith("f ")) == rep["faces"]


def test_export_mesh_degenerate_level(capsys, tmp_path):
    path = tmp_path / "circle.obj"
    code, rep = run_json(
        capsys, "export-mesh", "--level", "0", "--mesh-path", str(path),
    )
    assert code == 0
    assert rep["degenerate"] is True and rep["kind"] == "polyline"
    assert path.exists()


def test_output_file(capsys, tmp_path):
    path = tmp_path / "report.json"
    code, out = run(capsys, "eval", "--point", "1.2,0.5,0.1", "--output", str(path))
    assert code == 0 and out == ""
    rep = json.loads(path.read_text())
    assert rep["schema"] == "1"
