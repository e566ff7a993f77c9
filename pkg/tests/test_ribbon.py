"""Cutting, ruled remeshing, unfolding, overlap handling, splitting."""

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zipribbon import shapes
from zipribbon.decomposition import Segmentation, apply_segmentation, build_charts
from zipribbon.mesh import SurfaceMesh
from zipribbon.ribbon import (
    FlatRibbon,
    RemeshConfig,
    Ribbon,
    RibbonError,
    SplitPolicy,
    _tri_overlap,
    _unit_adjacency,
    check_developable,
    cut_along_curve,
    detect_overlaps,
    remesh_rulings,
    split_ribbon,
    surface_deviation,
    unfold,
)
from zipribbon.solver import parameterize
from zipribbon.spiral import SpiralSpec, plan_lines, trace_curve


HEIGHT = 3.0


def pipeline(mesh, seg, windings):
    charts = build_charts(apply_segmentation(mesh, seg))
    x, report, _, _ = parameterize(charts)
    assert report.converged, report.reason
    lines = plan_lines(SpiralSpec(windings=windings), charts, x)
    curve = trace_curve(lines, charts, x)
    ribbon = remesh_rulings(curve, charts, x, RemeshConfig())
    return {
        "mesh": mesh,
        "charts": charts,
        "x": x,
        "curve": curve,
        "ribbon": ribbon,
        "flat": unfold(ribbon),
    }


@pytest.fixture(scope="module")
def cyl():
    return pipeline(shapes.tube(n_theta=25, n_z=40), Segmentation(loops=()), 8)


@pytest.fixture(scope="module")
def two_part():
    loops = (tuple(8 * 24 + j for j in range(24)),)
    return pipeline(
        shapes.tube(n_theta=24, n_z=16),
        Segmentation(loops=loops, traversal=(0, 1)),
        3,
    )


@pytest.fixture(scope="module")
def tee():
    mesh, info = shapes.t_shape()
    return pipeline(mesh, Segmentation.from_dict(shapes.t_shape_segmentation(info)), 3)


def edge_pairs(mesh):
    """One (origin, dest) per undirected edge."""
    out = []
    for h in range(3 * mesh.n_faces):
        t = int(mesh.twin[h])
        if 0 <= t < h:
            continue
        out.append((int(mesh.he_origin[h]), int(mesh.he_dest[h])))
    return out


def polyline_lengths(pos, pairs):
    a = pos[[u for u, _ in pairs]]
    b = pos[[v for _, v in pairs]]
    return np.linalg.norm(b - a, axis=1)


def flat_signed_areas(flat):
    v = flat.vertices[flat.faces]
    d1 = v[:, 1] - v[:, 0]
    d2 = v[:, 2] - v[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def arc_strip(total_turn=3 * math.pi, r0=2.5, r1=3.5, n=160):
    """Planar annular band lifted to z=0; radial edges act as rulings."""
    th = np.linspace(0.0, total_turn, n + 1)
    ring = np.c_[np.cos(th), np.sin(th), np.zeros(n + 1)]
    verts = np.vstack([r0 * ring, r1 * ring])
    faces, units = [], []
    for i in range(n):
        a, b, c, d = i, i + 1, n + 1 + i, n + 2 + i
        units.append(np.array([len(faces), len(faces) + 1], dtype=np.int64))
        faces.append((a, b, d))
        faces.append((a, d, c))
    mesh = SurfaceMesh(verts, np.asarray(faces, dtype=np.int64))
    return Ribbon(
        mesh=mesh,
        pairing=np.zeros((0, 2, 2), dtype=np.int64),
        zipper_start=0,
        zipper_end=n,
        units=units,
        unit_links=_unit_adjacency(mesh, units),
    )


# ----------------------------------------------------------------------
# cutting the surface open along the curve


def test_cut_cylinder_gives_one_disk_strip(cyl):
    work = cyl["charts"].decomp.mesh
    strip, pairing = cut_along_curve(work, cyl["curve"])
    assert strip.euler_characteristic() == 1
    assert len(strip.boundary_loops()) == 1
    # the two copies of every cut edge keep identical 3D length
    la = polyline_lengths(strip.vertices, [tuple(p[0]) for p in pairing])
    lb = polyline_lengths(strip.vertices, [tuple(p[1]) for p in pairing])
    assert np.abs(la - lb).max() <= 1e-12


def test_cut_tee_strip_is_branched_disk(tee):
    work = tee["charts"].decomp.mesh
    strip, pairing = cut_along_curve(work, tee["curve"])
    assert strip.euler_characteristic() == 1
    assert len(strip.boundary_loops()) == 1
    assert len(pairing) > 0


def test_cut_rejects_curve_ending_inside(cyl):
    curve = cyl["curve"]
    # clip at a sample sitting on a mesh edge so only the endpoint rule fails
    on_edge = np.nonzero(curve.bary.min(axis=1) <= 1e-9)[0]
    k = int(on_edge[len(on_edge) // 2]) + 1
    clipped = dataclasses.replace(
        curve,
        face=curve.face[:k],
        bary=curve.bary[:k],
        points=curve.points[:k],
        part=curve.part[:k],
        line=curve.line[:k],
        ext=curve.ext[:k],
    )
    with pytest.raises(RibbonError, match="interior"):
        cut_along_curve(cyl["charts"].decomp.mesh, clipped)


# ----------------------------------------------------------------------
# ruled remesh


def test_all_ribbon_vertices_lie_on_the_boundary(cyl, two_part, tee):
    for fix in (cyl, two_part, tee):
        mesh = fix["ribbon"].mesh
        assert mesh.is_boundary_vertex().all()


def test_cylinder_strip_interior_is_quads(cyl):
    sizes = np.array([len(u) for u in cyl["ribbon"].units])
    assert ((sizes == 1) | (sizes == 2)).sum() >= 0.9 * len(sizes)
    assert (sizes == 2).sum() > 0.8 * len(sizes)


def test_cylinder_ruling_lengths_equal_pitch(cyl):
    ribbon = cyl["ribbon"]
    pitch = HEIGHT / 8
    pos = ribbon.mesh.vertices
    lens = polyline_lengths(pos, ribbon.ruling_edges)
    assert np.abs(lens - pitch).max() <= 1e-6 * pitch


def test_wider_target_width_gives_coarser_ribbon(cyl):
    charts, x, curve = cyl["charts"], cyl["x"], cyl["curve"]
    fine = remesh_rulings(curve, charts, x, RemeshConfig(target_width=0.2))
    coarse = remesh_rulings(curve, charts, x, RemeshConfig(target_width=0.8))
    assert coarse.mesh.n_vertices < fine.mesh.n_vertices


def test_bent_tube_ribbon_stays_near_surface():
    mesh = shapes.bent_tube()
    fix = pipeline(mesh, Segmentation(loops=()), 8)
    dev = surface_deviation(fix["ribbon"], mesh)
    diag = np.linalg.norm(mesh.vertices.max(axis=0) - mesh.vertices.min(axis=0))
    assert dev["max"] <= 0.02 * diag


def test_tee_windings_from_one_to_four(tee):
    charts, x = tee["charts"], tee["x"]
    for w in (1, 2, 4):
        lines = plan_lines(SpiralSpec(windings=w), charts, x)
        curve = trace_curve(lines, charts, x)
        ribbon = remesh_rulings(curve, charts, x, RemeshConfig())
        report = check_developable(ribbon)
        assert report.ok, report.interior_vertices


# ----------------------------------------------------------------------
# developability check


def test_remeshed_ribbons_report_developable(cyl, two_part, tee):
    for fix in (cyl, two_part, tee):
        report = check_developable(fix["ribbon"])
        assert report.ok
        assert report.euler == 1 and report.n_boundary_loops == 1


def test_interior_vertex_is_diagnosed():
    k = 6
    th = np.linspace(0, 2 * math.pi, k, endpoint=False)
    verts = np.vstack([[0.0, 0.0, 0.0], np.c_[np.cos(th), np.sin(th), np.zeros(k)]])
    faces = np.array([(0, 1 + i, 1 + (i + 1) % k) for i in range(k)])
    mesh = SurfaceMesh(verts, faces)
    ribbon = Ribbon(
        mesh=mesh,
        pairing=np.zeros((0, 2, 2), dtype=np.int64),
        zipper_start=1,
        zipper_end=2,
        units=[np.arange(k, dtype=np.int64)],
        unit_links=[],
    )
    report = check_developable(ribbon)
    assert not report.ok
    assert 0 in report.interior_vertices


def test_two_triangle_quad_is_developable():
    verts = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
    faces = np.array([(0, 1, 2), (0, 2, 3)])
    mesh = SurfaceMesh(verts, faces)
    ribbon = Ribbon(
        mesh=mesh,
        pairing=np.zeros((0, 2, 2), dtype=np.int64),
        zipper_start=0,
        zipper_end=2,
        units=[np.array([0, 1], dtype=np.int64)],
        unit_links=[],
    )
    assert check_developable(ribbon).ok


# ----------------------------------------------------------------------
# exact unfolding


def test_single_triangle_unfolds_congruently():
    verts = np.array([[0, 0, 0], [2, 0, 1], [0.5, 1.5, -0.5]])
    mesh = SurfaceMesh(verts, np.array([(0, 1, 2)]))
    ribbon = Ribbon(
        mesh=mesh,
        pairing=np.zeros((0, 2, 2), dtype=np.int64),
        zipper_start=0,
        zipper_end=1,
        units=[np.array([0], dtype=np.int64)],
        unit_links=[],
    )
    flat = unfold(ribbon)
    for i, j in ((0, 1), (1, 2), (2, 0)):
        l3 = np.linalg.norm(verts[j] - verts[i])
        l2 = np.linalg.norm(flat.vertices[j] - flat.vertices[i])
        assert l2 == pytest.approx(l3, rel=1e-12)


def test_unfold_preserves_every_edge_length(two_part, tee):
    for fix in (two_part, tee):
        mesh = fix["ribbon"].mesh
        pairs = edge_pairs(mesh)
        l3 = polyline_lengths(mesh.vertices, pairs)
        l2 = polyline_lengths(fix["flat"].vertices, pairs)
        assert (np.abs(l2 - l3) / l3).max() <= 1e-9


def test_cylinder_unfolds_to_straight_strip(cyl):
    ribbon, flat = cyl["ribbon"], cyl["flat"]
    pitch = HEIGHT / 8
    pos = flat.vertices
    side_a = np.unique(ribbon.pairing[:, 0].ravel())
    side_b = np.unique(ribbon.pairing[:, 1].ravel())
    pts = pos[side_a]
    center = pts.mean(axis=0)
    _, sv, vt = np.linalg.svd(pts - center)
    normal = np.array([-vt[0, 1], vt[0, 0]])
    off_a = (pts - center) @ normal
    off_b = (pos[side_b] - center) @ normal
    # each zipper side is a straight line, one ruling length apart
    assert np.abs(off_a).max() <= 1e-3 * pitch
    assert np.abs(off_b - np.median(off_b)).max() <= 1e-3 * pitch
    width = abs(float(np.median(off_b)))
    assert width == pytest.approx(pitch, rel=0.01)
    # strip length matches the closed-form helix length
    helix = math.hypot(2 * math.pi * 1.0 * 8, HEIGHT)
    la = polyline_lengths(pos, [tuple(p[0]) for p in ribbon.pairing]).sum()
    assert la == pytest.approx(helix, rel=0.01)


def test_zipper_sides_pair_up_exactly(cyl, two_part, tee):
    for fix in (cyl, two_part, tee):
        ribbon, flat = fix["ribbon"], fix["flat"]
        for pos in (ribbon.mesh.vertices, flat.vertices):
            la = polyline_lengths(pos, [tuple(p[0]) for p in ribbon.pairing])
            lb = polyline_lengths(pos, [tuple(p[1]) for p in ribbon.pairing])
            assert np.abs(la - lb).max() <= 1e-9 * max(1.0, la.max())
            assert abs(la.sum() - lb.sum()) <= 1e-6 * la.sum()


def test_flat_layout_conserves_area_without_flips(cyl, tee):
    for fix in (cyl, tee):
        signed = flat_signed_areas(fix["flat"])
        assert (signed > 0).all() or (signed < 0).all()
        a3 = fix["ribbon"].mesh.face_areas().sum()
        assert np.abs(signed).sum() == pytest.approx(a3, rel=1e-9)


# ----------------------------------------------------------------------
# overlap detection


def test_straight_strip_has_no_overlaps(cyl):
    assert detect_overlaps(cyl["flat"]) == []


def test_touching_triangles_are_not_overlaps():
    verts = np.array(
        [(0, 0), (1, 0), (0, 1), (1, 0), (2, 0), (1, 1), (0, 0), (1, 0), (0.5, -1)],
        dtype=float,
    )
    faces = np.array([(0, 1, 2), (3, 4, 5), (6, 7, 8)])
    flat = FlatRibbon(ribbon=None, vertices=verts, faces=faces)
    # shared corner point (1,0) and shared edge y=0 both have zero area
    assert detect_overlaps(flat) == []


def test_band_turning_past_full_circle_overlaps():
    ribbon = arc_strip(total_turn=3 * math.pi)
    flat = unfold(ribbon)
    hits = detect_overlaps(flat)
    assert hits
    # and the same band stopped short of a full turn is clean
    assert detect_overlaps(unfold(arc_strip(total_turn=1.5 * math.pi))) == []


# ----------------------------------------------------------------------
# splitting into pieces


def bbox_fits(piece, bed):
    w, h = piece.vertices.max(axis=0) - piece.vertices.min(axis=0)
    bw, bh = bed
    tol = 1e-9
    return (w <= bw + tol and h <= bh + tol) or (h <= bw + tol and w <= bh + tol)


def test_small_ribbon_stays_one_piece(cyl):
    res = split_ribbon(cyl["flat"], SplitPolicy())
    assert len(res.pieces) == 1
    assert res.sew_pairs == []


def test_bed_split_pieces_fit_and_conserve_area(tee):
    flat = tee["flat"]
    policy = SplitPolicy(bed=(20.0, 10.0), resolve_overlaps=False)
    res = split_ribbon(flat, policy)
    assert len(res.pieces) > 1
    assert len(res.sew_pairs) == len(res.pieces) - 1
    total = 0.0
    for piece in res.pieces:
        assert bbox_fits(piece, policy.bed)
        v = piece.vertices[piece.local_faces]
        d1 = v[:, 1] - v[:, 0]
        d2 = v[:, 2] - v[:, 0]
        total += np.abs(0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])).sum()
    whole = np.abs(flat_signed_areas(flat)).sum()
    assert total == pytest.approx(whole, rel=1e-9)
    for sew in res.sew_pairs:
        # cut rulings are straight segments of matching length
        u, v = sew.edge
        assert sew.length == pytest.approx(
            float(np.linalg.norm(flat.vertices[v] - flat.vertices[u])), rel=1e-12
        )
        assert sew.length > 0


def test_overlapping_band_is_split_into_clean_pieces():
    flat = unfold(arc_strip(total_turn=3 * math.pi))
    res = split_ribbon(flat, SplitPolicy(bed=(1e9, 1e9), resolve_overlaps=True))
    assert len(res.pieces) >= 2
    for piece in res.pieces:
        pts = piece.vertices[piece.local_faces]
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                if set(piece.faces[[i, j]].ravel()) and set(
                    flat.faces[piece.faces[i]]
                ) & set(flat.faces[piece.faces[j]]):
                    continue
                assert not _tri_overlap(pts[i], pts[j], 1e-9)


def test_panel_larger_than_bed_is_an_error(cyl):
    with pytest.raises(RibbonError, match="exceeds the bed"):
        split_ribbon(cyl["flat"], SplitPolicy(bed=(0.05, 0.05)))


# ----------------------------------------------------------------------
# invariants under varying designs


@settings(max_examples=6, deadline=None)
@given(
    w0=st.integers(min_value=1, max_value=4),
    w1=st.integers(min_value=1, max_value=4),
)
def test_ribbon_invariants_for_any_winding_counts(two_part, w0, w1):
    charts, x = two_part["charts"], two_part["x"]
    lines = plan_lines(SpiralSpec(windings={0: w0, 1: w1}), charts, x)
    curve = trace_curve(lines, charts, x)
    ribbon = remesh_rulings(curve, charts, x, RemeshConfig())
    assert ribbon.mesh.is_boundary_vertex().all()
    assert check_developable(ribbon).ok
    flat = unfold(ribbon)
    pairs = edge_pairs(ribbon.mesh)
    l3 = polyline_lengths(ribbon.mesh.vertices, pairs)
    l2 = polyline_lengths(flat.vertices, pairs)
    assert (np.abs(l2 - l3) / l3).max() <= 1e-9
