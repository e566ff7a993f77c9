"""Segmentation validation, part splitting, and chart cutting."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zipribbon import shapes
from zipribbon.decomposition import (
    Segmentation,
    SegmentationError,
    apply_segmentation,
    build_charts,
    load_segmentation,
    save_segmentation,
    summary,
)

NT, NZ = 12, 10


def ring(k, nt=NT):
    return [k * nt + j for j in range(nt)]


def tube_seg(rings, traversal=None):
    return Segmentation(
        loops=tuple(tuple(ring(k)) for k in rings),
        traversal=tuple(traversal) if traversal else None,
    )


# ----------------------------------------------------------------------
# single part


def test_plain_tube_is_one_open_part():
    d = apply_segmentation(shapes.tube(n_theta=NT, n_z=NZ), tube_seg([]))
    assert len(d.parts) == 1
    p = d.parts[0]
    assert p.role == "single"
    assert p.bottom.kind == "open" and p.top.kind == "open"
    # bottom end is the circle holding the smallest vertex id
    assert min(p.bottom.circle) < min(p.top.circle)
    assert d.traversal == (0,)
    assert not d.interfaces


def test_sphere_without_holes_is_rejected():
    s = shapes.uv_sphere(n_theta=12, n_phi=8)
    with pytest.raises(SegmentationError, match="not a topological cylinder"):
        apply_segmentation(s, Segmentation(loops=()))


def test_sphere_with_two_holes_works():
    s = shapes.uv_sphere(n_theta=12, n_phi=8)
    seg = Segmentation(
        loops=(),
        open_sites=(
            {"type": "hole", "vertex": 0},
            {"type": "hole", "vertex": 1},
        ),
    )
    d = apply_segmentation(s, seg)
    assert d.parts[0].role == "single"
    assert d.mesh.n_vertices == s.n_vertices - 2


# ----------------------------------------------------------------------
# chains of parts


def test_two_part_tube():
    d = apply_segmentation(shapes.tube(n_theta=NT, n_z=NZ), tube_seg([5], [0, 1]))
    assert [p.role for p in d.parts] == ["start", "end"]
    assert len(d.interfaces) == 1
    iface = d.interfaces[0]
    assert iface.parts == (0, 1)
    assert iface.vertices[0] == iface.vertices[-1]  # junction-free loop arc
    assert iface.n_edges == NT
    assert not d.junctions
    # start: open bottom, transition top; end: the reverse
    assert d.parts[0].bottom.kind == "open"
    assert d.parts[0].top.kind == "transition"
    assert d.parts[1].bottom.kind == "transition"
    assert d.parts[1].top.kind == "open"
    assert sum(len(p.faces) for p in d.parts) == d.mesh.n_faces


def test_three_part_tube_middle_is_through():
    d = apply_segmentation(shapes.tube(n_theta=NT, n_z=NZ), tube_seg([3, 7], [0, 1, 2]))
    assert [p.role for p in d.parts] == ["start", "through", "end"]
    mid = d.parts[1]
    assert mid.bottom.kind == "transition" and mid.top.kind == "transition"
    assert mid.bottom.interfaces != mid.top.interfaces


def test_traversal_required_and_validated():
    tube = shapes.tube(n_theta=NT, n_z=NZ)
    with pytest.raises(SegmentationError, match="traversal order is required"):
        apply_segmentation(tube, tube_seg([5]))
    with pytest.raises(SegmentationError, match="exactly once"):
        apply_segmentation(tube, tube_seg([5], [0, 0]))
    with pytest.raises(SegmentationError, match="share no loop arc"):
        apply_segmentation(tube, tube_seg([3, 7], [0, 2, 1]))


def test_loop_validation():
    tube = shapes.tube(n_theta=NT, n_z=NZ)
    with pytest.raises(SegmentationError, match="touches an open boundary"):
        apply_segmentation(tube, tube_seg([0], [0, 1]))
    with pytest.raises(SegmentationError, match="non-edge"):
        apply_segmentation(
            tube, Segmentation(loops=((NT, NT + 2, NT + 4),), traversal=(0, 1))
        )
    bad = tuple(ring(5)) + (5 * NT,)
    with pytest.raises(SegmentationError, match="revisits"):
        apply_segmentation(tube, Segmentation(loops=(bad,), traversal=(0, 1)))


def test_nonseparating_loop_is_rejected():
    t = shapes.torus(n_u=12, n_v=8)
    meridian = tuple(j for j in range(8))
    with pytest.raises(SegmentationError, match="does not separate"):
        apply_segmentation(t, Segmentation(loops=(meridian,), traversal=(0,)))


# ----------------------------------------------------------------------
# branching decomposition


@pytest.fixture(scope="module")
def tee():
    mesh, info = shapes.t_shape()
    return mesh, info, apply_segmentation(mesh, shapes.t_shape_segmentation(info))


def test_t_shape_parts_and_roles(tee):
    mesh, info, d = tee
    assert [p.name for p in d.parts] == ["leg", "arm_left", "arm_right"]
    assert d.part_named("arm_left").role == "start"
    assert d.part_named("leg").role == "turn"
    assert d.part_named("arm_right").role == "end"
    # the leg turns at its punched cap and carries both transitions on top
    leg = d.part_named("leg")
    assert leg.bottom.kind == "open"
    assert leg.top.kind == "transition"
    assert len(leg.top.interfaces) == 2


def test_t_shape_interfaces(tee):
    mesh, info, d = tee
    assert len(d.interfaces) == 3
    pairs = sorted(i.parts for i in d.interfaces)
    assert pairs == [(0, 1), (0, 2), (1, 2)]
    half = len(info["junction_ring"]) // 2
    assert sorted(int(d.orig_vertex[j]) for j in d.junctions) == [0, half]
    for i in d.interfaces:
        # arcs run junction to junction, never wrapping
        ends = {int(d.orig_vertex[i.vertices[0]]), int(d.orig_vertex[i.vertices[-1]])}
        assert ends == {0, half}


def test_t_shape_without_open_sites_fails(tee):
    mesh, info, _ = tee
    seg = shapes.t_shape_segmentation(info)
    seg = Segmentation(loops=Segmentation.from_dict(seg).loops,
                       traversal=(1, 0, 2))
    with pytest.raises(SegmentationError, match="not a topological cylinder"):
        apply_segmentation(mesh, seg)


def test_summary_shape(tee):
    _, _, d = tee
    s = summary(d)
    assert s["traversal"] == ["arm_left", "leg", "arm_right"]
    assert [p["role"] for p in s["parts"]] == ["turn", "start", "end"]
    assert all(i["edges"] > 0 for i in s["interfaces"])


def test_segmentation_json_round_trip(tmp_path, tee):
    mesh, info, _ = tee
    seg = Segmentation.from_dict(shapes.t_shape_segmentation(info))
    p = tmp_path / "seg.json"
    save_segmentation(seg, p)
    assert load_segmentation(p) == seg


# ----------------------------------------------------------------------
# charts


def test_single_tube_chart():
    tube = shapes.tube(n_theta=NT, n_z=NZ)
    cs = build_charts(apply_segmentation(tube, tube_seg([])))
    assert len(cs.charts) == 1
    c = cs.charts[0]
    assert c.mesh.euler_characteristic() == 1
    assert len(c.mesh.boundary_loops()) == 1
    # seam duplicates every path vertex once
    assert c.mesh.n_vertices == tube.n_vertices + len(c.seam_left)
    assert len(c.bottom.vertices) == NT + 1
    assert c.bottom.arcs == c.top.arcs  # single open arc each
    assert c.bottom.vertices[0] == c.seam_left[0]
    assert c.bottom.vertices[-1] == c.seam_right[0]
    assert c.top.vertices[0] == c.seam_left[-1]
    assert c.top.vertices[-1] == c.seam_right[-1]
    # seam copies pin to the same surface points
    assert np.array_equal(c.to_work[c.seam_left], c.to_work[c.seam_right])
    assert cs.n_unknowns == 2 * c.n_vertices


def test_two_part_charts_share_interface_sides():
    d = apply_segmentation(shapes.tube(n_theta=NT, n_z=NZ), tube_seg([5], [0, 1]))
    cs = build_charts(d)
    (sa, sb) = cs.sides[0]
    assert {sa.chart, sb.chart} == {0, 1}
    assert {sa.line, sb.line} == {"top", "bottom"}
    for s in (sa, sb):
        line = getattr(cs.charts[s.chart], s.line)
        assert (s.lo, s.hi) == (0, len(line.vertices) - 1)
    # both sides cut their chart at the same surface vertex
    runs = []
    for s in (sa, sb):
        line = getattr(cs.charts[s.chart], s.line)
        run = cs.charts[s.chart].to_work[line.vertices[s.lo : s.hi + 1]]
        runs.append(run if s.forward else run[::-1])
    assert np.array_equal(runs[0], runs[1])


def test_t_shape_charts(tee):
    _, info, d = tee
    cs = build_charts(d)
    leg = cs.charts[0]
    assert leg.part.name == "leg"
    assert [a.interface for a in leg.bottom.arcs] == [None]
    assert len(leg.top.arcs) == 2
    # the seam lands on the junction vertex with the smallest id
    assert int(d.orig_vertex[leg.to_work[leg.top.vertices[0]]]) == 0
    assert int(d.orig_vertex[leg.to_work[leg.top.vertices[-1]]]) == 0
    for i in (0, 1, 2):
        sa, sb = cs.sides[i]
        assert sa.chart != sb.chart
    assert cs.offsets.shape == (4,)
    assert cs.n_unknowns == sum(2 * c.n_vertices for c in cs.charts)


@settings(max_examples=10, deadline=None)
@given(k=st.integers(min_value=2, max_value=NZ - 2))
def test_any_ring_split_builds_charts(k):
    d = apply_segmentation(shapes.tube(n_theta=NT, n_z=NZ), tube_seg([k], [0, 1]))
    cs = build_charts(d)
    assert len(cs.charts) == 2
    for c in cs.charts:
        assert c.mesh.euler_characteristic() == 1
        assert len(c.bottom.vertices) >= 2 and len(c.top.vertices) >= 2
