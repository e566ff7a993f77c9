"""Run the whole pipeline on a generated shape and write the artifacts.

Usage:
    python scripts/demo_pipeline.py --shape vase --windings 8 --out out/
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from zipribbon import shapes
from zipribbon.decomposition import Segmentation, apply_segmentation, build_charts
from zipribbon.layout import build_plan, emit_plan
from zipribbon.mesh import SurfaceMesh
from zipribbon.ribbon import RemeshConfig, check_developable, remesh_rulings, unfold
from zipribbon.serialize import write_obj
from zipribbon.solver import parameterize
from zipribbon.spiral import SpiralSpec, curve_quality, plan_lines, trace_curve


def make_shape(name, scale):
    if name == "tube":
        mesh, seg = shapes.tube(n_theta=48, n_z=60), Segmentation(loops=())
    elif name == "vase":
        mesh, seg = shapes.vase(n_theta=48, n_z=60), Segmentation(loops=())
    elif name == "tee":
        mesh, info = shapes.t_shape(n_theta=32, n_leg=16, n_arm=16)
        seg = Segmentation.from_dict(shapes.t_shape_segmentation(info))
    elif name == "two_part":
        mesh = shapes.tube(n_theta=32, n_z=32)
        ring = tuple(16 * 32 + j for j in range(32))
        seg = Segmentation(loops=(ring,), traversal=(0, 1))
    else:
        raise SystemExit(f"unknown shape {name!r}")
    return SurfaceMesh(mesh.vertices * scale, mesh.faces), seg


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--shape", default="vase", help="tube | vase | tee | two_part")
    ap.add_argument("--windings", type=int, default=8)
    ap.add_argument("--scale", type=float, default=60.0, help="model units to mm")
    ap.add_argument("--bed", type=float, nargs=2, default=(600.0, 400.0))
    ap.add_argument("--out", type=Path, default=Path("out"))
    args = ap.parse_args()

    mesh, seg = make_shape(args.shape, args.scale)
    print(f"{args.shape}: {mesh.n_vertices} vertices, {mesh.n_faces} faces")

    charts = build_charts(apply_segmentation(mesh, seg))
    x, report, _, cons = parameterize(charts)
    print(
        f"solve: {report.iterations} iterations, mean distortion "
        f"{report.mean_distortion:.6f}, residual {cons.residual(x):.2e}"
    )

    curve = trace_curve(plan_lines(SpiralSpec(windings=args.windings), charts, x), charts, x)
    q = curve_quality(curve, charts, x)
    print(
        f"curve: length {curve.total_length:.1f}, winding spacing "
        f"{q.spacing_mean:.2f} (cv {q.spacing_cv:.1e})"
    )

    ribbon = remesh_rulings(curve, charts, x, RemeshConfig())
    dev = check_developable(ribbon)
    flat = unfold(ribbon)
    print(
        f"ribbon: {ribbon.mesh.n_faces} faces, developable={dev.ok}, "
        f"zipper {ribbon.zipper_length:.1f} per tape"
    )

    plan = build_plan(flat, bed=tuple(args.bed))
    print(
        f"plan: {len(plan.placements)} pieces, cut {plan.cut_length():.0f}, "
        f"{plan.markers_per_side} markers per side"
    )

    args.out.mkdir(parents=True, exist_ok=True)
    write_obj(args.out / "ribbon.obj", ribbon.mesh.vertices, ribbon.mesh.faces)
    write_obj(args.out / "flat.obj", flat.vertices, flat.faces)
    (args.out / "plan.svg").write_text(emit_plan(plan, "svg"))
    print(f"wrote ribbon.obj, flat.obj, plan.svg to {args.out}/")


if __name__ == "__main__":
    main()
