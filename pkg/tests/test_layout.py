"""Bed packing, zipper markers, SVG/DXF plan emission."""

import json
import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zipribbon import shapes
from zipribbon.decomposition import Segmentation, apply_segmentation, build_charts
from zipribbon.layout import (
    LayoutError,
    _shelf_pack,
    emit_plan,
    pack_pieces,
)
from zipribbon.mesh import SurfaceMesh
from zipribbon.ribbon import (
    FlatRibbon,
    RemeshConfig,
    Ribbon,
    SplitPolicy,
    _unit_adjacency,
    remesh_rulings,
    split_ribbon,
    unfold,
)
from zipribbon.solver import parameterize
from zipribbon.spiral import SpiralSpec, plan_lines, trace_curve


def pipeline(mesh, seg, windings):
    charts = build_charts(apply_segmentation(mesh, seg))
    x, report, _, _ = parameterize(charts)
    assert report.converged, report.reason
    lines = plan_lines(SpiralSpec(windings=windings), charts, x)
    curve = trace_curve(lines, charts, x)
    ribbon = remesh_rulings(curve, charts, x, RemeshConfig())
    return ribbon, unfold(ribbon)


@pytest.fixture(scope="module")
def cyl_plan():
    mesh = shapes.tube(n_theta=25, n_z=40)
    ribbon, flat = pipeline(mesh, Segmentation(loops=()), 8)
    split = split_ribbon(flat, SplitPolicy(bed=(100.0, 100.0)))
    plan = pack_pieces(split, flat, bed=(65.0, 40.0), spacing=2.0, marker_interval=5.0)
    return {"ribbon": ribbon, "flat": flat, "split": split, "plan": plan}


@pytest.fixture(scope="module")
def tee_plan():
    mesh, info = shapes.t_shape()
    seg = Segmentation.from_dict(shapes.t_shape_segmentation(info))
    ribbon, flat = pipeline(mesh, seg, 3)
    split = split_ribbon(flat, SplitPolicy(bed=(20.0, 10.0)))
    plan = pack_pieces(split, flat, bed=(70.0, 40.0), spacing=0.5, marker_interval=2.0)
    return {"ribbon": ribbon, "flat": flat, "split": split, "plan": plan}


def straight_strip(n_cells, cell, width):
    """Synthetic flat strip ribbon: tape 0 along y=0, tape 1 along y=width."""
    n = n_cells
    xs = np.arange(n + 1) * cell
    bot = np.c_[xs, np.zeros(n + 1), np.zeros(n + 1)]
    verts = np.vstack([bot, bot + np.array([0.0, width, 0.0])])
    faces, units = [], []
    for i in range(n):
        b0, b1, t0, t1 = i, i + 1, n + 1 + i, n + 2 + i
        units.append(np.array([len(faces), len(faces) + 1], dtype=np.int64))
        faces.append((b0, b1, t1))
        faces.append((b0, t1, t0))
    mesh = SurfaceMesh(verts, np.asarray(faces, dtype=np.int64))
    pairing = np.array(
        [[[i, i + 1], [n + 2 + i, n + 1 + i]] for i in range(n)], dtype=np.int64
    )
    ribbon = Ribbon(
        mesh=mesh,
        pairing=pairing,
        zipper_start=0,
        zipper_end=n,
        units=units,
        unit_links=_unit_adjacency(mesh, units),
    )
    flat = FlatRibbon(ribbon=ribbon, vertices=verts[:, :2].copy(), faces=mesh.faces)
    return ribbon, flat


# ----------------------------------------------------------------------
# oracles


def placed_rect(plan, pi):
    pts = np.vstack(plan.outlines[pi])
    return pts.min(axis=0), pts.max(axis=0)


def rects_overlap(a, b, gap=0.0):
    """Exact open-interval intersection after growing both rects by gap/2."""
    lo_a, hi_a = a[0] - gap / 2, a[1] + gap / 2
    lo_b, hi_b = b[0] - gap / 2, b[1] + gap / 2
    return bool((lo_a < hi_b).all() and (lo_b < hi_a).all())


def dist_to_polyline(p, loop):
    a = loop
    b = np.roll(loop, -1, axis=0)
    d = b - a
    t = np.clip(
        np.einsum("ij,ij->i", p - a, d) / np.maximum((d * d).sum(axis=1), 1e-30),
        0.0,
        1.0,
    )
    proj = a + t[:, None] * d
    return float(np.linalg.norm(proj - p, axis=1).min())


def point_in_loop(p, loop):
    x, y = p
    a = loop
    b = np.roll(loop, -1, axis=0)
    cross = (a[:, 1] > y) != (b[:, 1] > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = a[:, 0] + (y - a[:, 1]) * (b[:, 0] - a[:, 0]) / (b[:, 1] - a[:, 1])
    return bool((cross & (xi > x)).sum() % 2)


_NUM = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")


def svg_cut_loops(svg):
    root = ET.fromstring(svg)
    bh = float(root.get("viewBox").split()[3])
    ns = "{http://www.w3.org/2000/svg}"
    cut = next(g for g in root.iter(ns + "g") if g.get("id") == "cut")
    loops = []
    for path in cut.iter(ns + "path"):
        nums = [float(t) for t in _NUM.findall(path.get("d"))]
        pts = np.asarray(nums).reshape(-1, 2)
        pts[:, 1] = bh - pts[:, 1]
        loops.append(pts)
    return loops


def dxf_entities(dxf):
    toks = dxf.strip().split("\n")
    pairs = list(zip(toks[0::2], toks[1::2]))
    ents = []
    in_entities = False
    for code, value in pairs:
        if code == "2" and value == "ENTITIES":
            in_entities = True
        elif code == "0" and value == "ENDSEC":
            in_entities = False
        elif in_entities and code == "0":
            ents.append({"type": value})
        elif in_entities and ents:
            ents[-1].setdefault(code, []).append(value)
    return ents


def dxf_polylines(dxf, layer):
    ents = dxf_entities(dxf)
    polys = []
    current = None
    for e in ents:
        if e["type"] == "POLYLINE" and e.get("8") == [layer]:
            current = []
        elif e["type"] == "VERTEX" and current is not None:
            current.append((float(e["10"][0]), float(e["20"][0])))
        elif e["type"] == "SEQEND" and current is not None:
            polys.append(np.asarray(current))
            current = None
    return polys


# ----------------------------------------------------------------------
# shelf packing


def test_small_piece_sits_at_spacing_margin():
    ribbon, flat = straight_strip(1, 1.0, 1.0)
    split = split_ribbon(flat, SplitPolicy(bed=(600.0, 400.0)))
    plan = pack_pieces(split, flat)
    assert len(plan.placements) == 1
    lo, hi = placed_rect(plan, 0)
    assert np.allclose(lo, [5.0, 5.0]) and np.allclose(hi, [6.0, 6.0])
    assert plan.markers_per_side == 1  # tape shorter than one interval


def test_two_long_strips_pack_disjoint_on_default_bed():
    ribbon, flat = straight_strip(8, 100.0, 100.0)
    split = split_ribbon(flat, SplitPolicy(bed=(400.0, 400.0)))
    assert len(split.pieces) == 2
    assert all(np.allclose(sorted(p.bbox()), [100.0, 400.0]) for p in split.pieces)
    plan = pack_pieces(split, flat, bed=(600.0, 400.0), spacing=5.0)
    r0, r1 = placed_rect(plan, 0), placed_rect(plan, 1)
    assert not rects_overlap(r0, r1)
    for lo, hi in (r0, r1):
        assert (lo >= 5.0 - 1e-12).all()
        assert (hi <= np.array([595.0, 395.0]) + 1e-12).all()


def test_piece_larger_than_bed_is_rejected_by_name():
    ribbon, flat = straight_strip(8, 100.0, 100.0)
    split = split_ribbon(flat, SplitPolicy(bed=(1e9, 1e9)))
    assert len(split.pieces) == 1
    with pytest.raises(LayoutError, match=r"piece 0 .* does not fit"):
        pack_pieces(split, flat, bed=(600.0, 400.0), spacing=5.0)


def test_too_many_pieces_for_one_bed_is_an_error(tee_plan):
    # each piece fits the bed on its own; six together do not
    with pytest.raises(LayoutError, match="overflow"):
        pack_pieces(
            tee_plan["split"],
            tee_plan["flat"],
            bed=(21.0, 11.0),
            spacing=0.25,
            marker_interval=2.0,
        )


def test_packed_pieces_keep_spacing_and_stay_in_bed(tee_plan):
    plan = tee_plan["plan"]
    n = len(plan.placements)
    rects = [placed_rect(plan, pi) for pi in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            assert not rects_overlap(rects[i], rects[j], gap=plan.spacing - 1e-9)
    for lo, hi in rects:
        assert (lo >= plan.spacing - 1e-9).all()
        assert (hi <= np.asarray(plan.bed) - plan.spacing + 1e-9).all()


def test_packing_sorts_shelves_by_decreasing_height():
    sizes = [(50.0, 10.0), (30.0, 80.0), (40.0, 40.0)]
    packed = _shelf_pack(sizes, (600.0, 400.0), 5.0)
    assert packed[1][0] == 1  # the tall thin piece lies flat (80 x 30)
    assert packed[2][1] == (5.0, 5.0)  # the tallest placed piece leads
    placed = sorted(
        (x, h if rot % 2 == 0 else w)
        for (rot, (x, y)), (w, h) in zip(packed, sizes)
    )
    hs = [h for _, h in placed]  # one shelf: x order is placement order
    assert hs == sorted(hs, reverse=True)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.floats(5.0, 650.0, allow_nan=False),
            st.floats(5.0, 450.0, allow_nan=False),
        ),
        min_size=1,
        max_size=8,
    )
)
def test_shelf_packing_never_overlaps_for_any_sizes(sizes):
    try:
        packed = _shelf_pack(sizes, (600.0, 400.0), 5.0)
    except LayoutError:
        return
    rects = []
    for (rot, (x, y)), (w, h) in zip(packed, sizes):
        pw, ph = (w, h) if rot % 2 == 0 else (h, w)
        rects.append((np.array([x, y]), np.array([x + pw, y + ph])))
    for i in range(len(rects)):
        assert (rects[i][0] >= 5.0 - 1e-9).all()
        assert (rects[i][1] <= np.array([595.0, 395.0]) + 1e-9).all()
        for j in range(i + 1, len(rects)):
            assert not rects_overlap(rects[i], rects[j], gap=5.0 - 1e-9)


# ----------------------------------------------------------------------
# zipper markers


def test_ten_meter_zipper_carries_201_markers_per_side():
    ribbon, flat = straight_strip(200, 50.0, 30.0)
    split = split_ribbon(flat, SplitPolicy(bed=(1e9, 1e9)))
    plan = pack_pieces(split, flat, bed=(10020.0, 50.0), spacing=5.0)
    assert plan.zipper_length == 10000.0
    assert plan.markers_per_side == 201
    sides = [[m for m in plan.markers if m.side == s] for s in (0, 1)]
    assert len(sides[0]) == len(sides[1]) == 201
    # tape 0 runs along the bottom edge: marker j sits at 50 j exactly
    for j, m in enumerate(sides[0]):
        assert m.index == j
        assert np.allclose(m.point, [5.0 + 50.0 * j, 5.0], atol=1e-12)
    for j, m in enumerate(sides[1]):
        assert np.allclose(m.point, [5.0 + 50.0 * j, 35.0], atol=1e-12)


def test_marker_count_is_floor_length_over_interval_plus_one():
    ribbon, flat = straight_strip(13, 10.0, 5.0)  # tape length 130
    split = split_ribbon(flat, SplitPolicy(bed=(1e9, 1e9)))
    plan = pack_pieces(split, flat, bed=(200.0, 30.0), spacing=5.0)
    assert plan.markers_per_side == int(130.0 // 50.0) + 1
    last = [m for m in plan.markers if m.side == 0][-1]
    assert np.allclose(last.point, [105.0, 5.0])  # 100 along, not at the end


def test_markers_lie_on_their_piece_boundary(cyl_plan):
    plan = cyl_plan["plan"]
    assert plan.markers_per_side == int(plan.zipper_length // plan.marker_interval) + 1
    for m in plan.markers:
        d = min(dist_to_polyline(m.point, loop) for loop in plan.outlines[m.piece])
        assert d <= 1e-9
        assert np.allclose(m.tick[0], m.point)


def test_marker_ticks_point_off_the_piece(tee_plan):
    plan = tee_plan["plan"]
    for m in plan.markers:
        loops = plan.outlines[m.piece]
        inside = any(point_in_loop(m.tick[1], loop) for loop in loops)
        assert not inside
        assert np.linalg.norm(m.tick[1] - m.tick[0]) <= plan.spacing + 1e-12


def test_flat_tape_length_matches_surface_zipper_length(tee_plan):
    plan, ribbon = tee_plan["plan"], tee_plan["ribbon"]
    assert abs(plan.zipper_length - ribbon.zipper_length) <= 1e-6 * ribbon.zipper_length


# ----------------------------------------------------------------------
# sew labels


def test_sew_labels_mark_both_halves(tee_plan):
    plan, split = tee_plan["plan"], tee_plan["split"]
    assert len(plan.labels) == 2 * len(split.sew_pairs)
    by_text = {}
    for lb in plan.labels:
        by_text.setdefault(lb.text, []).append(lb)
    assert sorted(by_text) == [f"S{i + 1}" for i in range(len(split.sew_pairs))]
    for si, sew in enumerate(split.sew_pairs):
        pair = by_text[f"S{si + 1}"]
        assert sorted(lb.piece for lb in pair) == sorted((sew.piece_a, sew.piece_b))
        for lb in pair:
            d = min(dist_to_polyline(lb.point, loop) for loop in plan.outlines[lb.piece])
            assert d <= 1e-9  # the cut ruling midpoint is on the outline


# ----------------------------------------------------------------------
# emission


def test_svg_unit_square_is_one_closed_four_segment_path():
    ribbon, flat = straight_strip(1, 1.0, 1.0)
    split = split_ribbon(flat, SplitPolicy(bed=(600.0, 400.0)))
    plan = pack_pieces(split, flat)
    svg = emit_plan(plan, "svg")
    root = ET.fromstring(svg)
    assert root.get("width") == "600mm" and root.get("height") == "400mm"
    assert root.get("viewBox") == "0 0 600 400"
    loops = svg_cut_loops(svg)
    assert len(loops) == 1 and len(loops[0]) == 4
    assert svg.count('<path d="M') - len(plan.markers) == 1
    ns = "{http://www.w3.org/2000/svg}"
    assert [g.get("id") for g in root.iter(ns + "g")] == ["cut", "mark", "label"]


def test_svg_reimport_reproduces_boundaries(tee_plan):
    plan = tee_plan["plan"]
    loops = svg_cut_loops(emit_plan(plan, "svg"))
    planned = [loop for piece in plan.outlines for loop in piece]
    assert len(loops) == len(planned)
    for got, want in zip(loops, planned):
        assert np.abs(got - want).max() <= 1e-6


def test_dxf_polylines_match_outlines(tee_plan):
    plan = tee_plan["plan"]
    dxf = emit_plan(plan, "dxf")
    assert dxf.startswith("0\nSECTION")
    assert "AC1009" in dxf
    polys = dxf_polylines(dxf, "cut")
    planned = [loop for piece in plan.outlines for loop in piece]
    assert len(polys) == len(planned)
    for got, want in zip(polys, planned):
        assert np.abs(got - want).max() <= 1e-6  # y up, no flip
    ents = dxf_entities(dxf)
    assert sum(e["type"] == "LINE" for e in ents) == len(plan.markers)
    texts = [e["1"][0] for e in ents if e["type"] == "TEXT"]
    assert texts == [lb.text for lb in plan.labels]


def test_emission_is_deterministic(tee_plan):
    split, flat = tee_plan["split"], tee_plan["flat"]
    again = pack_pieces(split, flat, bed=(70.0, 40.0), spacing=0.5, marker_interval=2.0)
    for fmt in ("svg", "dxf"):
        assert emit_plan(again, fmt) == emit_plan(tee_plan["plan"], fmt)


def test_unknown_format_is_rejected(cyl_plan):
    with pytest.raises(LayoutError, match="unknown plan format"):
        emit_plan(cyl_plan["plan"], "pdf")


def test_metadata_reports_lengths_and_counts(tee_plan):
    plan, split = tee_plan["plan"], tee_plan["split"]
    meta = json.loads(plan.metadata_json())
    assert meta == plan.metadata()
    assert meta["pieces"] == len(split.pieces)
    assert meta["sew_pairs"] == len(split.sew_pairs)
    assert meta["markers_per_side"] == plan.markers_per_side
    assert meta["zipper_length"] == plan.zipper_length
    perimeter = 0.0
    for piece in plan.outlines:
        for loop in piece:
            perimeter += np.linalg.norm(np.roll(loop, -1, axis=0) - loop, axis=1).sum()
    assert abs(meta["cut_length"] - perimeter) <= 1e-9
