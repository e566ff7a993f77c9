"""Spiral planning, tracing, and quality measurement."""

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zipribbon import shapes
from zipribbon.decomposition import Segmentation, apply_segmentation, build_charts
from zipribbon.solver import parameterize
from zipribbon.spiral import (
    ParamLine,
    SpiralError,
    SpiralSpec,
    SpiralWarning,
    curve_quality,
    lift_point,
    plan_lines,
    trace_curve,
)
from zipribbon.tutte import initial_layout


def solved(mesh, seg):
    charts = build_charts(apply_segmentation(mesh, seg))
    x, report, layout, cons = parameterize(charts)
    assert report.converged, report.reason
    return charts, x


@pytest.fixture(scope="module")
def tube():
    return solved(shapes.tube(n_theta=25, n_z=40), Segmentation(loops=()))


@pytest.fixture(scope="module")
def two_part():
    loops = (tuple(8 * 24 + j for j in range(24)),)
    return solved(
        shapes.tube(n_theta=24, n_z=16), Segmentation(loops=loops, traversal=(0, 1))
    )


@pytest.fixture(scope="module")
def tee():
    mesh, info = shapes.t_shape()
    return solved(mesh, Segmentation.from_dict(shapes.t_shape_segmentation(info)))


def chart_frame(charts, x, ci):
    from zipribbon.spiral import _ChartFrame

    return _ChartFrame(charts, x, ci)


def faces_share(mesh, f1, f2):
    return len(set(mesh.faces[f1]) & set(mesh.faces[f2]))


# ----------------------------------------------------------------------
# planning


def test_single_tube_line_spans_w_periods(tube):
    charts, x = tube
    fr = chart_frame(charts, x, 0)
    for w in (1, 5):
        (line,) = plan_lines(SpiralSpec(windings=w), charts, x)
        assert line.part == 0 and line.index == 1
        extent = abs(line.end[0] - line.start[0])
        assert extent == pytest.approx(w * abs(fr.period), rel=1e-12)
        assert line.start_on == "bottom" and line.end_on == "top"


def test_windings_accept_per_part_mapping(two_part):
    charts, x = two_part
    lines = plan_lines(SpiralSpec(windings={"part0": 2, 1: 4}), charts, x)
    fr0 = chart_frame(charts, x, 0)
    fr1 = chart_frame(charts, x, 1)
    assert abs(lines[0].end[0] - lines[0].start[0]) == pytest.approx(
        2 * abs(fr0.period)
    )
    assert abs(lines[1].end[0] - lines[1].start[0]) == pytest.approx(
        4 * abs(fr1.period)
    )


def test_spec_validation_errors(two_part, tee):
    charts, x = two_part
    with pytest.raises(SpiralError, match="positive integer"):
        plan_lines(SpiralSpec(windings=0), charts, x)
    with pytest.raises(SpiralError, match="every part exactly once"):
        plan_lines(SpiralSpec(traversal=(0, 0)), charts, x)
    with pytest.raises(SpiralError, match="unknown interface"):
        plan_lines(SpiralSpec(crossings={7: 0.1}), charts, x)
    with pytest.raises(SpiralError, match="outside interface"):
        plan_lines(SpiralSpec(crossings={0: -0.5}), charts, x)
    tee_charts, tee_x = tee
    with pytest.raises(SpiralError, match="not a turn"):
        plan_lines(
            SpiralSpec(turn_points={"arm_left": (0.0, 1.0)}), tee_charts, tee_x
        )


def test_fermat_turn_produces_two_lines(tee):
    charts, x = tee
    lines = plan_lines(SpiralSpec(windings=3), charts, x)
    by_part = {}
    for line in lines:
        by_part.setdefault(line.part, []).append(line)
    leg = charts.decomp.part_named("leg").index
    assert [ln.index for ln in by_part[leg]] == [1, 2]
    assert all(len(v) == 1 for k, v in by_part.items() if k != leg)
    one, two = by_part[leg]
    fr = chart_frame(charts, x, leg)
    # both arms turn on the open boundary, half a period apart
    assert one.end_on == two.start_on
    assert charts.charts[leg].bottom.kind == "open"
    gap = abs(two.start[0] - one.end[0])
    assert gap == pytest.approx(0.5 * abs(fr.period), abs=1e-9)
    # entry and exit crossings sit half a period apart as well
    assert abs((two.end[0] - one.start[0]) % fr.period) == pytest.approx(
        0.5 * abs(fr.period), abs=1e-9 * abs(fr.period)
    )


def test_infeasible_turn_points_warn_but_plan(tee):
    charts, x = tee
    leg = charts.decomp.part_named("leg").index
    fr = chart_frame(charts, x, leg)
    lo = float(fr.line_x["bottom"].min())
    bad = (lo + 0.1 * abs(fr.period), lo + 0.3 * abs(fr.period))
    with pytest.warns(SpiralWarning, match="not half a period"):
        lines = plan_lines(SpiralSpec(turn_points={"leg": bad}), charts, x)
    assert len(lines) == 4  # still produced at the user-given points


# ----------------------------------------------------------------------
# tracing


def test_helix_matches_closed_form(tube):
    charts, x = tube
    height = 3.0
    for w in (3, 8, 20):
        lines = plan_lines(SpiralSpec(windings=w), charts, x)
        curve = trace_curve(lines, charts, x)
        pts = curve.points
        # the lift of a straight line on a cylinder chart is a helix:
        # axial height advances linearly with the unwrapped angle
        theta = np.unwrap(np.arctan2(pts[:, 1], pts[:, 0]))
        turns = abs(theta[-1] - theta[0]) / (2 * math.pi)
        assert turns == pytest.approx(w, abs=1e-6)
        # chord midpoints advance in angle slightly unevenly, so the
        # fit is exact only up to the 25-gon discretization
        fit = np.polyfit(theta, pts[:, 2], 1)
        assert abs(fit[0]) == pytest.approx(height / (2 * math.pi * w), rel=1e-4)
        resid = pts[:, 2] - np.polyval(fit, theta)
        assert np.abs(resid).max() <= 1e-3 * height
        # winding spacing along the axis is pitch = h / w, within 1%
        q = curve_quality(curve, charts, x)
        assert q.spacing_mean == pytest.approx(height / w, rel=0.01)
        assert q.spacing_cv <= 0.01


def test_consecutive_samples_share_a_face_edge_or_vertex(two_part):
    charts, x = two_part
    lines = plan_lines(SpiralSpec(windings=3), charts, x)
    curve = trace_curve(lines, charts, x)
    work = charts.decomp.mesh
    for i in range(curve.n_samples - 1):
        f1, f2 = int(curve.face[i]), int(curve.face[i + 1])
        shared = faces_share(work, f1, f2)
        if f1 == f2 or shared >= 2:
            continue
        # faces meeting only at a vertex: the sample must sit on it
        assert shared == 1
        assert curve.bary[i].max() >= 1.0 - 1e-6


def test_two_part_chain_crosses_interface_once(two_part):
    charts, x = two_part
    lines = plan_lines(SpiralSpec(windings=3), charts, x)
    curve = trace_curve(lines, charts, x)
    hops = np.nonzero(curve.part[:-1] != curve.part[1:])[0]
    assert len(hops) == 1
    # connected: consecutive 3D samples stay close at the hop
    gap = np.linalg.norm(curve.points[hops[0] + 1] - curve.points[hops[0]])
    assert gap <= 0.1  # under one sample step
    # endpoints on the open boundaries of first and last parts
    assert curve.part[0] == charts.decomp.traversal[0]
    assert curve.part[-1] == charts.decomp.traversal[-1]
    z = curve.points[:, 2]
    assert min(z[0], z[-1]) == pytest.approx(0.0, abs=1e-12)
    assert max(z[0], z[-1]) == pytest.approx(3.0, abs=1e-12)


def test_tee_curve_is_connected_and_simple(tee):
    charts, x = tee
    lines = plan_lines(SpiralSpec(windings=3), charts, x)
    curve = trace_curve(lines, charts, x)
    assert int((curve.part[:-1] != curve.part[1:]).sum()) == 2
    steps = np.linalg.norm(np.diff(curve.points, axis=0), axis=1)
    assert steps.max() <= 0.5  # densely sampled throughout
    assert curve.total_length == pytest.approx(steps.sum())


def test_fermat_boundary_intersections_evenly_spaced(tee):
    charts, x = tee
    lines = plan_lines(SpiralSpec(windings=3), charts, x)
    curve = trace_curve(lines, charts, x)
    leg = charts.decomp.part_named("leg").index
    fr = chart_frame(charts, x, leg)
    y0 = fr.line_y["bottom"]
    p = abs(fr.period)
    # the touch points are where the sample line id flips: arm one to
    # connector at the first turn, connector to arm two at the second
    mask = curve.part == leg
    li = curve.line[mask]
    xs = curve.ext[mask, 0]
    sw = np.nonzero(li[:-1] != li[1:])[0]
    assert len(sw) == 2
    t1, t2 = float(xs[sw[0]]), float(xs[sw[1]])
    assert np.abs(curve.ext[mask][sw, 1] - y0).max() < 1e-9
    gap = abs(t2 - t1) % p
    # the turn points split the boundary circle into equal halves
    assert min(gap, p - gap) == pytest.approx(0.5 * p, abs=1e-6)


def test_degenerate_line_follows_boundary_loop(tube):
    charts, x = tube
    fr = chart_frame(charts, x, 0)
    y0 = fr.line_y["bottom"]
    x0 = float(fr.line_x["bottom"][0])
    line = ParamLine(
        part=0,
        index=1,
        start=np.array([x0, y0]),
        end=np.array([x0 + fr.period, y0]),
        start_on="bottom",
        end_on="bottom",
    )
    curve = trace_curve([line], charts, x, check_simple=False)
    # the bottom boundary of the tube is the z = 0 ring: samples stay on
    # the 25-gon chords
    assert np.abs(curve.points[:, 2]).max() <= 1e-12
    r = np.linalg.norm(curve.points[:, :2], axis=1)
    assert r.max() <= 1.0 + 1e-12
    assert r.min() >= math.cos(math.pi / 25) - 1e-12
    ring = charts.decomp.mesh.vertices[
        charts.charts[0].to_work[charts.charts[0].bottom.vertices]
    ]
    loop_len = np.linalg.norm(np.diff(ring, axis=0), axis=1).sum()
    assert curve.total_length == pytest.approx(loop_len, rel=1e-9)


def test_self_intersecting_design_is_rejected(tube):
    charts, x = tube
    fr = chart_frame(charts, x, 0)
    x0 = float(fr.line_x["bottom"][0])
    y0, y1 = fr.line_y["bottom"], fr.line_y["top"]
    up = ParamLine(
        part=0,
        index=1,
        start=np.array([x0, y0]),
        end=np.array([x0 + 2 * fr.period, y1]),
        start_on="bottom",
        end_on="top",
    )
    # winding back down four turns against two turns up must cross
    down = ParamLine(
        part=0,
        index=2,
        start=np.array([x0 + 2.5 * fr.period, y1]),
        end=np.array([x0 - 1.5 * fr.period, y0]),
        start_on="top",
        end_on="bottom",
    )
    with pytest.raises(SpiralError, match="self-intersects"):
        trace_curve([up, down], charts, x)


def test_period_consistent_lift(two_part):
    charts, x = two_part
    rng = np.random.default_rng(3)
    for ci in range(2):
        fr = chart_frame(charts, x, ci)
        ys = sorted((fr.line_y["bottom"], fr.line_y["top"]))
        for _ in range(25):
            px = float(rng.uniform(0.0, abs(fr.period)))
            py = float(rng.uniform(ys[0] + 0.05, ys[1] - 0.05))
            _, _, p1 = lift_point(charts, x, ci, (px, py))
            _, _, p2 = lift_point(charts, x, ci, (px + fr.period, py))
            assert np.linalg.norm(p1 - p2) <= 1e-8


def test_lift_point_rejects_points_outside(tube):
    charts, x = tube
    fr = chart_frame(charts, x, 0)
    above = fr.line_y["top"] + 1.0
    with pytest.raises(SpiralError, match="outside all triangles"):
        lift_point(charts, x, 0, (0.0, above))


# ----------------------------------------------------------------------
# quality


def test_optimized_beats_tutte_on_bent_tube():
    charts = build_charts(
        apply_segmentation(shapes.bent_tube(), Segmentation(loops=()))
    )
    x0 = initial_layout(charts).x
    x1, report, _, _ = parameterize(charts)
    assert report.converged

    def cv(xx):
        lines = plan_lines(SpiralSpec(windings=8), charts, xx)
        return curve_quality(trace_curve(lines, charts, xx), charts, xx).spacing_cv

    assert cv(x1) < cv(x0)


def test_single_winding_is_nearly_straight(tube):
    charts, x = tube
    lines = plan_lines(SpiralSpec(windings=1), charts, x)
    curve = trace_curve(lines, charts, x)
    q = curve_quality(curve, charts, x)
    # one winding over a tall tube: turning only at panel creases
    assert q.median_turning == pytest.approx(0.0, abs=1e-9)
    assert q.max_turning <= math.radians(15.0)


@settings(max_examples=8, deadline=None)
@given(
    w0=st.integers(min_value=1, max_value=4),
    w1=st.integers(min_value=1, max_value=4),
    frac=st.floats(min_value=0.05, max_value=0.95),
)
def test_chain_invariants_hold_for_any_design(two_part, w0, w1, frac):
    charts, x = two_part
    iface = charts.decomp.interfaces[0]
    arc = charts.decomp.mesh.vertices[list(iface.vertices)]
    arc_len = float(np.linalg.norm(np.diff(arc, axis=0), axis=1).sum())
    spec = SpiralSpec(
        windings={0: w0, 1: w1}, crossings={iface.index: frac * arc_len}
    )
    lines = plan_lines(spec, charts, x)
    curve = trace_curve(lines, charts, x)
    assert int((curve.part[:-1] != curve.part[1:]).sum()) == 1
    z = curve.points[:, 2]
    assert {round(float(z[0]), 6), round(float(z[-1]), 6)} == {0.0, 3.0}
    q = curve_quality(curve, charts, x)
    if min(w0, w1) >= 2:  # one winding leaves no adjacent pair to measure
        assert q.spacing_min > 0
    assert q.total_length > (w0 + w1) * 6.0  # at least the windings
