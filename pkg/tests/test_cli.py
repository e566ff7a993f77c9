"""Project-directory CLI: stage artifacts, gating, byte-identical reruns."""

import hashlib
import math
import re

import numpy as np
import pytest

from zipribbon import shapes
from zipribbon.cli import main
from zipribbon.serialize import read_json, read_obj, write_json, write_obj


def make_project(root, mesh, seg, spec=None):
    root.mkdir(exist_ok=True)
    write_obj(root / "mesh.obj", mesh.vertices, mesh.faces)
    write_json(root / "seg.json", seg)
    if spec is not None:
        write_json(root / "spec.json", spec)
    return root


@pytest.fixture(scope="module")
def cyl_project(tmp_path_factory):
    """An 8-winding cylinder, run through every stage once."""
    proj = make_project(
        tmp_path_factory.mktemp("cyl") / "proj",
        shapes.tube(n_theta=25, n_z=40),
        {"loops": []},
        {"windings": 8},
    )
    for argv in (
        ["param", str(proj)],
        ["spiral", str(proj)],
        ["ribbon", str(proj)],
        ["export", str(proj), "--bed", "65x40", "--spacing", "2", "--interval", "5"],
    ):
        assert main(argv) == 0, argv
    return proj


ARTIFACTS = (
    "charts.json",
    "curve.json",
    "curve.obj",
    "ribbon.obj",
    "flat.obj",
    "plan.svg",
    "reports/param.json",
    "reports/spiral.json",
    "reports/ribbon.json",
    "reports/export.json",
)


def checksums(proj):
    return {
        name: hashlib.sha256((proj / name).read_bytes()).hexdigest()
        for name in ARTIFACTS
    }


def test_all_stage_artifacts_exist(cyl_project):
    for name in ARTIFACTS:
        assert (cyl_project / name).exists(), name


def test_check_reports_topology(cyl_project, capsys):
    assert main(["check", str(cyl_project / "mesh.obj")]) == 0
    out = capsys.readouterr().out
    assert "vertices  1025" in out
    assert "faces     2000" in out
    assert "boundary loops  2" in out


def test_decompose_writes_summary(cyl_project, capsys):
    assert (
        main(
            [
                "decompose",
                str(cyl_project / "mesh.obj"),
                "--seg",
                str(cyl_project / "seg.json"),
            ]
        )
        == 0
    )
    assert "1 parts, 0 interfaces" in capsys.readouterr().out
    summary = read_json(cyl_project / "reports" / "decompose.json")
    assert summary["parts"][0]["faces"] == 2000
    assert summary["traversal"] == [0]


def test_zipper_length_matches_helix(cyl_project):
    # one tape of an 8-winding helix on a (faceted) unit cylinder of
    # height 3; the 25-gon shortens the circumference by sin(t)/t
    report = read_json(cyl_project / "reports" / "ribbon.json")
    ideal = math.hypot(2.0 * math.pi * 8.0, 3.0)
    assert abs(report["zipper_length"] - ideal) / ideal < 0.01


def test_flat_strip_is_developable_and_thin(cyl_project):
    report = read_json(cyl_project / "reports" / "ribbon.json")
    assert report["developable"] is True
    assert report["interior_vertices"] == 0
    verts, faces = read_obj(cyl_project / "flat.obj")
    assert len(faces) == report["faces"]
    # the unrolled cylinder spiral is a long straight strip
    span = verts.max(axis=0) - verts.min(axis=0)
    assert span[:2].max() > 40.0
    assert sorted(span[:2])[0] < 1.0


def test_export_metadata_consistent(cyl_project):
    meta = read_json(cyl_project / "reports" / "export.json")
    assert meta["pieces"] == 1
    assert meta["format"] == "svg"
    assert meta["bed"] == [65.0, 40.0]
    svg = (cyl_project / "plan.svg").read_text()
    assert svg.count("<path") == 1 + meta["markers_per_side"] * 2
    assert 'width="65mm"' in svg and 'height="40mm"' in svg


def test_reruns_are_byte_identical(cyl_project):
    before = checksums(cyl_project)
    for argv in (
        ["param", str(cyl_project)],
        ["spiral", str(cyl_project)],
        ["ribbon", str(cyl_project)],
        [
            "export",
            str(cyl_project),
            "--bed",
            "65x40",
            "--spacing",
            "2",
            "--interval",
            "5",
        ],
    ):
        assert main(argv) == 0, argv
    assert checksums(cyl_project) == before


def test_dxf_export(cyl_project):
    assert (
        main(
            [
                "export",
                str(cyl_project),
                "--bed",
                "65x40",
                "--spacing",
                "2",
                "--interval",
                "5",
                "--format",
                "dxf",
            ]
        )
        == 0
    )
    dxf = (cyl_project / "plan.dxf").read_text()
    assert "AC1009" in dxf and dxf.rstrip().endswith("EOF")


def test_stage_order_is_enforced(tmp_path, capsys):
    proj = make_project(
        tmp_path / "proj", shapes.tube(n_theta=12, n_z=8), {"loops": []}
    )
    assert main(["spiral", str(proj)]) == 1
    assert "run param first" in capsys.readouterr().err
    assert main(["ribbon", str(proj)]) == 1
    assert "run param first" in capsys.readouterr().err
    assert main(["export", str(proj)]) == 1
    assert "run ribbon first" in capsys.readouterr().err


def test_curve_requires_spiral_stage(tmp_path, capsys):
    proj = make_project(
        tmp_path / "proj", shapes.tube(n_theta=12, n_z=8), {"loops": []}
    )
    assert main(["param", str(proj)]) == 0
    capsys.readouterr()
    assert main(["ribbon", str(proj)]) == 1
    assert "run spiral first" in capsys.readouterr().err


def test_sphere_is_rejected_with_diagnostic(tmp_path, capsys):
    proj = make_project(tmp_path / "proj", shapes.uv_sphere(), {"loops": []})
    assert main(["param", str(proj)]) == 1
    err = capsys.readouterr().err
    assert "error:" in err
    assert "not a topological cylinder" in err


def test_stale_charts_detected(tmp_path, capsys):
    proj = make_project(
        tmp_path / "proj", shapes.tube(n_theta=12, n_z=8), {"loops": []}
    )
    assert main(["param", str(proj)]) == 0
    data = read_json(proj / "charts.json")
    write_json(proj / "charts.json", {**data, "x": data["x"][:-3]})
    capsys.readouterr()
    assert main(["spiral", str(proj)]) == 1
    assert "run param again" in capsys.readouterr().err


def test_bad_bed_argument(cyl_project, capsys):
    assert main(["export", str(cyl_project), "--bed", "banana"]) == 1
    assert "600x400" in capsys.readouterr().err


def test_missing_mesh_file(tmp_path, capsys):
    assert main(["check", str(tmp_path / "nope.obj")]) == 1
    assert "error:" in capsys.readouterr().err


def test_reports_carry_17_digit_floats(cyl_project):
    text = (cyl_project / "curve.json").read_text()
    # full-precision floats survive the round trip through the artifact
    longest = max(
        (m.group(0) for m in re.finditer(r"\d+\.\d+", text)), key=len
    )
    assert len(longest.split(".")[1]) >= 15
    curve = read_json(cyl_project / "curve.json")
    assert np.asarray(curve["points"]).dtype == np.float64
