"""Batch pipeline driver: run pipeline stages over a project directory.

A project is a directory with fixed file names: the inputs ``mesh.obj``,
``seg.json`` and ``spec.json``, the stage artifacts ``charts.json``,
``curve.json`` (plus ``curve.obj``), ``ribbon.obj``, ``flat.obj`` and
``plan.svg``/``plan.dxf``, and one JSON report per stage in ``reports/``.
"""

import argparse
import os
import sys
from pathlib import Path


class StageError(Exception):
    pass


# ----------------------------------------------------------------------
# project plumbing


def _project(path):
    proj = Path(path)
    if not proj.is_dir():
        raise StageError(f"project directory {proj} does not exist")
    return proj


def _input_file(proj, name, what):
    p = proj / name
    if not p.exists():
        raise StageError(f"missing {name}; a project needs {what}")
    return p


def _artifact(proj, name, stage):
    p = proj / name
    if not p.exists():
        raise StageError(f"missing {name}; run {stage} first")
    return p


def _reports_dir(proj):
    d = proj / "reports"
    d.mkdir(exist_ok=True)
    return d


def load_mesh(path):
    from .mesh import SurfaceMesh
    from .serialize import read_obj

    return SurfaceMesh(*read_obj(path))


def load_charts(proj):
    """Rebuild the chart set from the project inputs (deterministic)."""
    from .decomposition import apply_segmentation, build_charts, load_segmentation

    mesh = load_mesh(_input_file(proj, "mesh.obj", "the input mesh"))
    seg = load_segmentation(_input_file(proj, "seg.json", "the segmentation"))
    return mesh, build_charts(apply_segmentation(mesh, seg))


def load_solution(proj, charts):
    import numpy as np

    from .serialize import read_json

    data = read_json(_artifact(proj, "charts.json", "param"))
    x = np.asarray(data.get("x", ()), dtype=np.float64)
    if x.shape != (charts.n_unknowns,):
        raise StageError(
            "charts.json does not match the project inputs; run param again"
        )
    return x


def load_curve(proj):
    from .serialize import read_json
    from .spiral import SurfaceCurve

    return SurfaceCurve.from_dict(read_json(_artifact(proj, "curve.json", "spiral")))


def load_spec(proj, path=None):
    from .serialize import read_json
    from .spiral import SpiralSpec

    if path is None:
        fallback = proj / "spec.json"
        if not fallback.exists():
            return SpiralSpec()
        path = fallback
    return SpiralSpec.from_dict(read_json(path))


def build_ribbon(proj, charts, x, curve):
    """Recompute ribbon and unfolding with the width the ribbon stage used."""
    from .ribbon import RemeshConfig, remesh_rulings, unfold
    from .serialize import read_json

    report = read_json(
        _artifact(proj, Path("reports") / "ribbon.json", "ribbon")
    )
    width = report.get("config", {}).get("target_width")
    ribbon = remesh_rulings(curve, charts, x, RemeshConfig(target_width=width))
    return ribbon, unfold(ribbon)


# ----------------------------------------------------------------------
# subcommands


def cmd_check(args):
    mesh = load_mesh(args.mesh)
    bbox = mesh.vertices.max(axis=0) - mesh.vertices.min(axis=0)
    loops = mesh.boundary_loops()
    print(f"vertices  {mesh.n_vertices}")
    print(f"faces     {mesh.n_faces}")
    print(f"boundary loops  {len(loops)}")
    print(f"euler characteristic  {mesh.euler_characteristic()}")
    print("bbox  " + " x ".join(f"{d:.6g}" for d in bbox))
    return 0


def cmd_decompose(args):
    from .decomposition import apply_segmentation, load_segmentation
    from .serialize import write_json

    mesh_path = Path(args.mesh)
    mesh = load_mesh(mesh_path)
    seg = load_segmentation(args.seg)
    decomp = apply_segmentation(mesh, seg)
    summary = {
        "parts": [
            {
                "index": p.index,
                "name": p.name,
                "faces": len(p.faces),
                "role": p.role,
            }
            for p in decomp.parts
        ],
        "interfaces": [
            {"index": i.index, "parts": list(i.parts), "edges": i.n_edges}
            for i in decomp.interfaces
        ],
        "traversal": list(decomp.traversal),
    }
    write_json(_reports_dir(mesh_path.parent) / "decompose.json", summary)
    print(
        f"decomposition ok: {len(decomp.parts)} parts, "
        f"{len(decomp.interfaces)} interfaces"
    )
    return 0


def cmd_param(args):
    from .serialize import write_json
    from .solver import SolverConfig, parameterize

    proj = _project(args.project)
    config = SolverConfig()
    if args.config:
        from .serialize import read_json

        config = SolverConfig(**read_json(args.config))
    _, charts = load_charts(proj)
    x, report, _, _ = parameterize(charts, config)
    write_json(
        proj / "charts.json",
        {
            "x": x,
            "charts": len(charts.charts),
            "unknowns": charts.n_unknowns,
        },
    )
    rep = report.to_dict()
    rep.pop("seconds")  # timing would break byte-identical reruns
    write_json(_reports_dir(proj) / "param.json", rep)
    print(
        f"param {'converged' if report.converged else 'FAILED'}: "
        f"{report.iterations} iterations, "
        f"mean distortion {report.mean_distortion:.6f}"
    )
    if not report.converged:
        print(f"solver did not converge: {report.reason}", file=sys.stderr)
        return 1
    return 0


def cmd_spiral(args):
    from .serialize import write_json, write_obj
    from .spiral import curve_quality, plan_lines, trace_curve

    proj = _project(args.project)
    spec = load_spec(proj, args.spec)
    _, charts = load_charts(proj)
    x = load_solution(proj, charts)
    lines = plan_lines(spec, charts, x)
    curve = trace_curve(lines, charts, x)
    q = curve_quality(curve, charts, x)
    write_json(proj / "curve.json", curve.to_dict())
    write_obj(
        proj / "curve.obj",
        curve.points,
        polylines=[range(curve.n_samples)],
        comment="traced spiral polyline",
    )
    write_json(
        _reports_dir(proj) / "spiral.json",
        {
            "samples": curve.n_samples,
            "planned_lines": len(lines),
            "total_length": q.total_length,
            "spacing_mean": q.spacing_mean,
            "spacing_std": q.spacing_std,
            "spacing_cv": q.spacing_cv,
            "spacing_min": q.spacing_min,
            "max_turning": q.max_turning,
            "median_turning": q.median_turning,
        },
    )
    print(
        f"spiral ok: {curve.n_samples} samples, length {q.total_length:.6g}, "
        f"spacing cv {q.spacing_cv:.4f}"
    )
    return 0


def cmd_ribbon(args):
    from .ribbon import RemeshConfig, check_developable, remesh_rulings, surface_deviation, unfold
    from .serialize import write_json, write_obj

    proj = _project(args.project)
    mesh, charts = load_charts(proj)
    x = load_solution(proj, charts)
    curve = load_curve(proj)
    ribbon = remesh_rulings(curve, charts, x, RemeshConfig(target_width=args.width))
    dev = check_developable(ribbon)
    flat = unfold(ribbon)
    deviation = surface_deviation(ribbon, mesh)
    write_obj(proj / "ribbon.obj", ribbon.mesh.vertices, ribbon.mesh.faces)
    write_obj(proj / "flat.obj", flat.vertices, flat.faces)
    write_json(
        _reports_dir(proj) / "ribbon.json",
        {
            "config": {"target_width": args.width},
            "developable": dev.ok,
            "interior_vertices": len(dev.interior_vertices),
            "connected": dev.connected,
            "boundary_loops": dev.n_boundary_loops,
            "euler": dev.euler,
            "vertices": ribbon.mesh.n_vertices,
            "faces": ribbon.mesh.n_faces,
            "units": len(ribbon.units),
            "rulings": len(ribbon.unit_links),
            "zipper_length": ribbon.zipper_length,
            "flat_area": flat.area(),
            "deviation": deviation,
        },
    )
    print(
        f"ribbon ok: {len(ribbon.units)} units, "
        f"zipper length {ribbon.zipper_length:.6g}, "
        f"deviation max {deviation['max']:.3g}"
    )
    if not dev.ok:
        print("ribbon is not developable; see reports/ribbon.json", file=sys.stderr)
        return 1
    return 0


def _parse_bed(text):
    try:
        w, h = text.lower().split("x")
        bed = (float(w), float(h))
    except ValueError:
        raise StageError(f"bed must look like 600x400, got {text!r}") from None
    if bed[0] <= 0 or bed[1] <= 0:
        raise StageError("bed dimensions must be positive")
    return bed


def cmd_export(args):
    from .layout import build_plan, emit_plan
    from .serialize import read_obj, write_json

    proj = _project(args.project)
    bed = _parse_bed(args.bed)
    _artifact(proj, "ribbon.obj", "ribbon")
    _artifact(proj, "flat.obj", "ribbon")
    _, charts = load_charts(proj)
    x = load_solution(proj, charts)
    curve = load_curve(proj)
    ribbon, flat = build_ribbon(proj, charts, x, curve)
    saved_verts, _ = read_obj(proj / "ribbon.obj")
    if len(saved_verts) != ribbon.mesh.n_vertices:
        raise StageError("ribbon.obj is stale; run ribbon again")
    plan = build_plan(
        flat, bed=bed, spacing=args.spacing, marker_interval=args.interval
    )
    out = proj / f"plan.{args.format}"
    out.write_text(emit_plan(plan, args.format))
    meta = plan.metadata()
    meta["format"] = args.format
    write_json(_reports_dir(proj) / "export.json", meta)
    print(
        f"export ok: {meta['pieces']} pieces, "
        f"{meta['markers_per_side']} markers per side, {out.name}"
    )
    return 0


def cmd_serve(args):
    import uvicorn

    from .service import create_app

    data = args.data or os.environ.get("ZIPRIBBON_DATA") or "."
    app = create_app(Path(data))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ----------------------------------------------------------------------
# argument parsing


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="zipribbon",
        description="mesh + cylinder decomposition -> zippable developable ribbon",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="load and validate a mesh, print topology")
    p.add_argument("mesh")

    p = sub.add_parser("decompose", help="validate a segmentation, write a report")
    p.add_argument("mesh")
    p.add_argument("--seg", required=True, help="segmentation JSON")

    p = sub.add_parser("param", help="solve the seamless parameterization")
    p.add_argument("project")
    p.add_argument("--threads", type=int, default=1, help="BLAS threads (default 1)")
    p.add_argument("--config", help="solver config JSON")

    p = sub.add_parser("spiral", help="plan and trace the spiral curve")
    p.add_argument("project")
    p.add_argument("--spec", help="spiral spec JSON (default: <project>/spec.json)")

    p = sub.add_parser("ribbon", help="remesh along rulings and unfold")
    p.add_argument("project")
    p.add_argument("--width", type=float, help="target ruling spacing")

    p = sub.add_parser("export", help="split, pack and emit the cut plan")
    p.add_argument("project")
    p.add_argument("--bed", default="600x400", help="bed size WxH in mm")
    p.add_argument("--format", choices=("svg", "dxf"), default="svg")
    p.add_argument("--spacing", type=float, default=5.0, help="piece spacing mm")
    p.add_argument("--interval", type=float, default=50.0, help="marker interval mm")

    p = sub.add_parser("serve", help="host the design service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--data", help="session persistence directory "
                   "(default: $ZIPRIBBON_DATA or .)")
    return ap


COMMANDS = {
    "check": cmd_check,
    "decompose": cmd_decompose,
    "param": cmd_param,
    "spiral": cmd_spiral,
    "ribbon": cmd_ribbon,
    "export": cmd_export,
    "serve": cmd_serve,
}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    if getattr(args, "threads", None):
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    from .decomposition import SegmentationError
    from .layout import LayoutError
    from .mesh import MeshError
    from .ribbon import RibbonError
    from .serialize import SerializeError
    from .spiral import SpiralError

    try:
        return COMMANDS[args.command](args)
    except (
        MeshError,
        SegmentationError,
        SpiralError,
        RibbonError,
        LayoutError,
        SerializeError,
        StageError,
        FileNotFoundError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
