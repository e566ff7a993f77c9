"""Feasible initial chart layout.

Every chart is laid out as a period-wide strip: boundary lines pinned
horizontal, seam copies one period apart, interior by a uniform-weight
harmonic solve on the seam-glued annulus (the classic convex-boundary
layout, made periodic by substituting each right seam copy as its left
copy plus the period).

Two global couplings make the start feasible for every constraint row:

* x-spacing along shared lines.  Each interface arc gets one scale
  factor on its 3D arc length and every transition line's scaled arcs
  must sum to one common period W; the factors solve a small
  least-squares system (closest to 1).  Open lines stretch their own
  3D spacing to W.

* chart orientation.  Matched arcs advance oppositely in the two
  charts (the rotation-by-pi gluing), which holds exactly when two
  charts joined bottom-to-bottom or top-to-top share an orientation
  and charts joined top-to-bottom take opposite ones.  That parity is
  a 2-coloring of the part graph; color-1 charts are rotated by pi
  about their pinned anchor.

Within a chart the +x direction is fixed combinatorially (the face
halfedges along the bottom line run +x), so the layout is flip-free by
construction, never by trial.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import spsolve

from .decomposition import SegmentationError


@dataclass
class InitialLayout:
    x: np.ndarray
    period: float
    heights: list[float]
    scales: dict[int, float]  # interface index -> arc length scale
    rotations: list[int]  # chart color: 1 means rotated by pi


def _polyline_length(vertices, chain):
    p = vertices[np.asarray(chain)]
    return float(np.linalg.norm(np.diff(p, axis=0), axis=1).sum())


def _arc_cumlen(chart_set, iface):
    verts = chart_set.decomp.mesh.vertices[np.asarray(iface.vertices)]
    seg = np.linalg.norm(np.diff(verts, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def solve_arc_scales(chart_set):
    """Interface scale factors and the common period W.

    Minimizes sum (s_i - 1)^2 subject to: for every transition line,
    sum over its arcs of s_i * arclen_i equals W.  W itself is free.
    """
    ifaces = chart_set.decomp.interfaces
    arc_len = {i.index: _arc_cumlen(chart_set, i)[-1] for i in ifaces}

    lines = []
    open_lens = []
    for chart in chart_set.charts:
        for name in ("bottom", "top"):
            line = getattr(chart, name)
            if line.kind == "transition":
                lines.append([a.interface for a in line.arcs])
            else:
                open_lens.append(
                    _polyline_length(chart.mesh.vertices, line.vertices)
                )

    if not ifaces:
        w = float(np.mean(open_lens))
        return {}, w

    # KKT system for min ||s - 1||^2 with A [s; w] = 0, w free
    k = len(ifaces)
    m = len(lines)
    a = np.zeros((m, k + 1))
    for r, arcs in enumerate(lines):
        for i in arcs:
            a[r, i] += arc_len[i]
        a[r, k] = -1.0
    h = np.zeros((k + 1, k + 1))
    h[:k, :k] = np.eye(k)
    rhs = np.concatenate([np.ones(k), [0.0], np.zeros(m)])
    kkt = np.block([[h, a.T], [a, np.zeros((m, m))]])
    sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    s = sol[:k]
    w = float(sol[k])
    if w < 0:
        s, w = -s, -w
    if w <= 0 or np.any(s <= 0):
        raise SegmentationError(
            "no positive arc scales satisfy the interface length balance; "
            "the loops are too unevenly sized to share one period"
        )
    gap = np.abs(a @ sol[: k + 1]).max()
    if gap > 1e-9 * w:
        raise SegmentationError(
            "interface arc lengths admit no common period (line length "
            f"mismatch {gap:.3g})"
        )
    return {i.index: float(s[i.index]) for i in ifaces}, w


def chart_rotations(chart_set):
    """2-color the charts so every interface can advance oppositely.

    Sides meeting bottom-to-bottom or top-to-top force equal colors,
    top-to-bottom forces opposite ones; an inconsistent cycle means no
    feasible seamless layout exists for this decomposition.
    """
    n = len(chart_set.charts)
    color = [-1] * n
    for seed in range(n):
        if color[seed] >= 0:
            continue
        color[seed] = 0
        stack = [seed]
        while stack:
            ci = stack.pop()
            for iface, (sa, sb) in chart_set.sides.items():
                for me, other in ((sa, sb), (sb, sa)):
                    if me.chart != ci:
                        continue
                    want = color[ci] ^ (1 if me.line != other.line else 0)
                    if color[other.chart] < 0:
                        color[other.chart] = want
                        stack.append(other.chart)
                    elif color[other.chart] != want:
                        raise SegmentationError(
                            "charts cannot alternate orientation around a "
                            "cycle of loops; the decomposition admits no "
                            "seamless layout"
                        )
    return color


def _line_positions(chart_set, chart, line, scales, w, arc_cum):
    """x offset of every line vertex, 0 at the chain start, up to W.

    Transition lines place each arc by its shared scaled cumulative arc
    length, so both charts seeing an arc use bit-identical spacings.
    """
    n = len(line.vertices)
    x = np.empty(n)
    if line.kind == "open":
        p = chart.mesh.vertices[line.vertices]
        cum = np.concatenate(
            [[0.0], np.cumsum(np.linalg.norm(np.diff(p, axis=0), axis=1))]
        )
        total = cum[-1]
        if total <= 0:
            raise SegmentationError("zero-length open boundary line")
        return w * (cum / total)
    pos = 0.0
    for arc, side in zip(line.arcs, _line_sides(chart_set, chart, line)):
        cum = scales[arc.interface] * arc_cum[arc.interface]
        span = cum[-1]
        s = len(cum) - 1
        for m in range(s + 1):
            r = m if side.forward else s - m
            val = cum[r] if side.forward else cum[-1] - cum[r]
            x[arc.lo + m] = pos + val
        pos += span
    return x


def _line_sides(chart_set, chart, line):
    """The InterfaceSide record for each transition arc of a line."""
    ci = chart_set.charts.index(chart)
    out = []
    for arc in line.arcs:
        for side in chart_set.sides[arc.interface]:
            if side.chart == ci and (side.lo, side.hi) == (arc.lo, arc.hi):
                out.append(side)
                break
        else:
            raise AssertionError("line arc missing from interface sides")
    return out


def _bottom_runs_ccw(chart):
    """True when the bottom chain order is the face-halfedge direction.

    The face halfedges along the bottom line run +x in a positively
    oriented layout, so this decides the sign of the whole strip.
    """
    lookup = chart.mesh.halfedge_lookup()
    a, b = int(chart.bottom.vertices[0]), int(chart.bottom.vertices[1])
    if (a, b) in lookup:
        return True
    if (b, a) in lookup:
        return False
    raise AssertionError("bottom chain start is not a mesh edge")


def initial_layout(chart_set):
    scales, w = solve_arc_scales(chart_set)
    arc_cum = {
        i.index: _arc_cumlen(chart_set, i) for i in chart_set.decomp.interfaces
    }
    rotations = chart_rotations(chart_set)
    x = np.zeros(chart_set.n_unknowns)
    heights = []
    for ci, chart in enumerate(chart_set.charts):
        base = chart_set.offsets[ci]
        h = _polyline_length(chart.mesh.vertices, chart.seam_left)
        heights.append(h)
        xc = _chart_layout(chart_set, chart, scales, w, h, arc_cum)
        if rotations[ci]:
            xc = -xc
        n_flip = _count_flipped(chart, xc)
        if n_flip:
            raise SegmentationError(
                f"initial layout of part {chart.part.name!r} is not flip-free "
                f"({n_flip} inverted triangles); the part may be too coarse "
                "or too tightly pinched for a harmonic start"
            )
        x[base : base + 2 * chart.n_vertices] = xc
    return InitialLayout(
        x=x, period=w, heights=heights, scales=scales, rotations=rotations
    )


def _chart_layout(chart_set, chart, scales, w, height, arc_cum):
    """Periodic uniform-weight harmonic layout of one chart."""
    mesh = chart.mesh
    n = mesh.n_vertices
    cls = chart.to_part  # seam copies share their part-local class
    n_cls = int(cls.max()) + 1
    sign = 1.0 if _bottom_runs_ccw(chart) else -1.0
    shift = np.zeros(n)
    shift[chart.seam_right] = sign * w

    fixed_x = {}
    fixed_y = {}
    for name, y in (("bottom", 0.0), ("top", height)):
        line = getattr(chart, name)
        lx = sign * _line_positions(chart_set, chart, line, scales, w, arc_cum)
        for v, xv in zip(line.vertices, lx):
            c = int(cls[v])
            fixed_x.setdefault(c, xv - shift[v])
            fixed_y.setdefault(c, y)

    # one uniform-weight equation per free class, edges from the disk
    # with their seam shift; duplicated seam edges collapse via the set
    edges = set()
    for u, v in zip(mesh.he_origin, mesh.he_dest):
        cu, cv = int(cls[u]), int(cls[v])
        s = shift[v] - shift[u]
        if cu > cv:
            cu, cv, s = cv, cu, -s
        edges.add((cu, cv, float(s)))

    free = sorted(set(range(n_cls)) - set(fixed_x))
    idx = {c: i for i, c in enumerate(free)}
    rows, cols, vals = [], [], []
    bx = np.zeros(len(free))
    by = np.zeros(len(free))
    deg = np.zeros(len(free))
    for cu, cv, s in edges:
        for a, b, sab in ((cu, cv, s), (cv, cu, -s)):
            if a not in idx:
                continue
            i = idx[a]
            deg[i] += 1.0
            bx[i] += sab  # neighbor position seen from a includes the shift
            if b in idx:
                rows.append(i)
                cols.append(idx[b])
                vals.append(-1.0)
            else:
                bx[i] += fixed_x[b]
                by[i] += fixed_y[b]
    qx = np.zeros(n_cls)
    qy = np.zeros(n_cls)
    if free:
        rows.extend(range(len(free)))
        cols.extend(range(len(free)))
        vals.extend(deg)
        lap = csr_matrix((vals, (rows, cols)), shape=(len(free), len(free)))
        sol = spsolve(lap, np.column_stack([bx, by]))
        sol = np.atleast_2d(sol)
        for c, i in idx.items():
            qx[c], qy[c] = sol[i, 0], sol[i, 1]
    for c, v in fixed_x.items():
        qx[c] = v
    for c, v in fixed_y.items():
        qy[c] = v
    xc = np.empty(2 * n)
    xc[0::2] = qx[cls] + shift
    xc[1::2] = qy[cls]
    return xc


def _count_flipped(chart, xc):
    u = xc.reshape(-1, 2)[chart.mesh.faces]
    det = (u[:, 1, 0] - u[:, 0, 0]) * (u[:, 2, 1] - u[:, 0, 1]) - (
        u[:, 1, 1] - u[:, 0, 1]
    ) * (u[:, 2, 0] - u[:, 0, 0])
    # chart orientation must match the oriented rest frames, so any
    # non-positive 2D determinant counts as a flip
    return int(np.count_nonzero(det <= 0))
