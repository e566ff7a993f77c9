"""Sweep winding counts on one shape: curve, strip and plan statistics.

More windings mean a narrower, longer strip: cut length and piece count
grow while bending effort drops.  The table makes the tradeoff visible.

Usage:
    python scripts/winding_study.py --shape vase --scale 40
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from zipribbon import shapes
from zipribbon.decomposition import Segmentation, apply_segmentation, build_charts
from zipribbon.layout import LayoutError, build_plan
from zipribbon.mesh import SurfaceMesh
from zipribbon.ribbon import RemeshConfig, remesh_rulings, unfold
from zipribbon.solver import parameterize
from zipribbon.spiral import SpiralSpec, curve_quality, plan_lines, trace_curve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--shape", default="vase", help="tube | vase")
    ap.add_argument("--scale", type=float, default=40.0, help="model units to mm")
    ap.add_argument("--windings", type=int, nargs="+", default=[4, 6, 8, 12, 16])
    ap.add_argument("--bed", type=float, nargs=2, default=(600.0, 400.0))
    args = ap.parse_args()

    maker = {"tube": shapes.tube, "vase": shapes.vase}[args.shape]
    raw = maker(n_theta=48, n_z=60)
    mesh = SurfaceMesh(raw.vertices * args.scale, raw.faces)
    charts = build_charts(apply_segmentation(mesh, Segmentation(loops=())))
    x, report, _, _ = parameterize(charts)
    print(
        f"{args.shape} x{args.scale:g}: {mesh.n_faces} faces, "
        f"mean distortion {report.mean_distortion:.6f}\n"
    )
    print(f"{'w':>4} {'width':>8} {'length':>9} {'zipper':>9} {'pieces':>7} {'cut':>9}")
    for w in args.windings:
        curve = trace_curve(plan_lines(SpiralSpec(windings=w), charts, x), charts, x)
        q = curve_quality(curve, charts, x)
        ribbon = remesh_rulings(curve, charts, x, RemeshConfig())
        flat = unfold(ribbon)
        try:
            plan = build_plan(flat, bed=tuple(args.bed))
            pieces, cut = str(len(plan.placements)), f"{plan.cut_length():9.0f}"
        except LayoutError:
            pieces, cut = "-", "  overflow"
        print(
            f"{w:>4} {q.spacing_mean:8.2f} {curve.total_length:9.0f} "
            f"{ribbon.zipper_length:9.0f} {pieces:>7} {cut}"
        )


if __name__ == "__main__":
    main()
