import json

import pytest

from harmgbc.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_mesh_command_square(tmp_path, capsys):
    code, out, err = run_cli(capsys, "mesh", "--polygon", "square",
                             "--refine", "1", "--out", str(tmp_path))
    assert code == 0
    doc = json.loads((tmp_path / "design.mesh.json").read_text())
    assert len(doc["triangles"]) == 8
    assert "beta=" in out
    manifest = json.loads((tmp_path / "mesh.manifest.json").read_text())
    assert manifest["command"] == "mesh"
    assert manifest["kernel_backend"] in ("compiled", "python")


def test_mesh_command_polygon_file(tmp_path, capsys):
    poly = tmp_path / "pent.polygon.json"
    poly.write_text(json.dumps({"vertices": [[0, 0], [3, 0], [3, 1], [1.5, 2], [0, 1]]}))
    code, out, err = run_cli(capsys, "mesh", "--polygon-file", str(poly),
                             "--refine", "1", "--out", str(tmp_path / "o"))
    assert code == 0
    doc = json.loads((tmp_path / "o" / "design.mesh.json").read_text())
    assert len(doc["triangles"]) == 3 * 4  # ear clipping then one refinement


def test_mesh_command_rejects_self_intersection(tmp_path, capsys):
    bad = tmp_path / "bad.polygon.json"
    bad.write_text(json.dumps({"vertices": [[0, 0], [4, 0], [4, 2], [1, -1], [0, 2]]}))
    code, out, err = run_cli(capsys, "mesh", "--polygon-file", str(bad),
                             "--out", str(tmp_path / "o"))
    assert code == 2
    assert "crosses" in err and "edge" in err


def test_gbc_command(tmp_path, capsys):
    code, out, err = run_cli(capsys, "gbc", "--polygon", "square", "--refine", "1",
                             "--grid", "31", "--out", str(tmp_path))
    assert code == 0
    assert "partition-of-unity residual" in out
    assert "reload residuals identical: True" in out
    manifest = json.loads((tmp_path / "gbc.manifest.json").read_text())
    assert "boundary_solves" in manifest["timings"]
    assert "per_field_boundary_solves" in manifest["timings"]
    assert (tmp_path / "gbcset" / "manifest.json").exists()


def test_locality_command_rectangle_flags_subexponential(tmp_path, capsys):
    code, out, err = run_cli(capsys, "locality", "--polygon", "square",
                             "--refine", "0", "--fine-refine", "4",
                             "--grid", "31", "--out", str(tmp_path))
    assert code == 0
    assert "SUB-EXPONENTIAL" in out
    assert (tmp_path / "locality.manifest.json").exists()


def test_locality_command_tables(tmp_path, capsys):
    code, out, err = run_cli(capsys, "locality", "--polygon", "square",
                             "--refine", "2", "--rings", "2,3",
                             "--grid", "31", "--out", str(tmp_path))
    assert code == 0
    assert "SUB-EXPONENTIAL" not in out
    csvs = sorted(p.name for p in tmp_path.glob("local_vs_global_*.csv"))
    assert len(csvs) == 2  # one boundary, one interior center
    lines = (tmp_path / csvs[0]).read_text().splitlines()
    assert lines[0] == "ring,max_error,rate"


def test_poisson_command(tmp_path, capsys):
    code, out, err = run_cli(capsys, "poisson", "--polygon", "square",
                             "--refine", "2", "--grid", "41", "--out", str(tmp_path))
    assert code == 0
    assert "superposition equivalence residual" in out
    lines = (tmp_path / "poisson_benchmark.csv").read_text().splitlines()
    assert lines[0] == "case,method,refinement,max_error,grid"
    assert len(lines) == 1 + 5 * 2 * 2  # cases x methods x levels
    manifest = json.loads((tmp_path / "poisson.manifest.json").read_text())
    assert manifest["equivalence_residual"] <= 1e-9
    assert manifest["sign_factor"] == -1.0


def test_unknown_polygon_rejected(capsys):
    with pytest.raises(SystemExit):
        main(["mesh", "--polygon", "hexagon"])
