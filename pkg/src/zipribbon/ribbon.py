"""Developable ribbon meshing, unfolding, and splitting.

The surface cut along the spiral is rebuilt as a triangle mesh whose
vertices all lie on the cut curve or on open boundaries.  In a chart's
period-extended domain the curve copies slice the part into a long
corridor; vertical ruling columns subdivide the corridor into quads
away from the boundary lines, and the leftover regions along each line
(caps) are triangulated without interior points.  Caps on transition
lines are merged with the neighbor part's caps across the interface
(a rotation by pi in the glued plane), so no vertex ever lands on an
interface.

Both sides of every curve segment take their subdivision from the same
per-part column grid, so the two boundary copies of each cut edge are
identical 3D chords and the zipper pairing is exact by construction.
Column phases are always produced by one canonical function of the
column index, never by accumulating offsets, which keeps the mesh
bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mesh import SurfaceMesh, split_along_edges
from .spiral import curve_quality


class RibbonError(Exception):
    """Raised when the curve design does not admit a ruled ribbon."""


@dataclass
class RemeshConfig:
    """Knobs for the ruling pass.

    ``samples_per_winding`` fixes the column count per period (rounded
    up to even); by default it is derived so consecutive rulings sit at
    most a quarter of the target ribbon width apart along the winding.
    ``target_width`` defaults to the measured mean winding spacing.
    """

    samples_per_winding: int | None = None
    target_width: float | None = None
    weld_fraction: float = 1e-6  # columns closer than this merge


@dataclass
class SplitPolicy:
    bed: tuple = (600.0, 400.0)  # max piece bounding box, model units
    resolve_overlaps: bool = True


@dataclass
class Ribbon:
    """Developable strip: every vertex on the cut or an open boundary."""

    mesh: SurfaceMesh
    pairing: np.ndarray  # (k, 2, 2) vertex ids: [[a0, a1], [b1, b0]]
    zipper_start: int  # vertex id at the curve's start
    zipper_end: int
    units: list  # face-id arrays: quads and cap patches
    unit_links: list  # (unit_a, unit_b, (vid0, vid1)) shared rulings

    @property
    def ruling_edges(self):
        return [edge for _, _, edge in self.unit_links]

    @property
    def zipper_length(self):
        """Total length of one zipper tape (the paired cut edges)."""
        p = self.mesh.vertices
        a = self.pairing[:, 0]
        return float(np.linalg.norm(p[a[:, 1]] - p[a[:, 0]], axis=1).sum())


@dataclass
class DevelopReport:
    ok: bool
    interior_vertices: np.ndarray
    connected: bool
    n_boundary_loops: int
    euler: int


@dataclass
class FlatRibbon:
    """Exact planar unfolding, triangle for triangle."""

    ribbon: Ribbon
    vertices: np.ndarray  # (n, 2)
    faces: np.ndarray  # same array as ribbon.mesh.faces

    def face_points(self):
        return self.vertices[self.faces]

    def area(self):
        p = self.face_points()
        u = p[:, 1] - p[:, 0]
        v = p[:, 2] - p[:, 0]
        return float(0.5 * np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]).sum())


@dataclass
class Piece:
    faces: np.ndarray  # face ids into the flat ribbon
    units: np.ndarray  # unit ids making up the piece
    vertex_ids: np.ndarray  # ribbon vertex ids of the piece vertices
    vertices: np.ndarray  # (n, 2) local coords, bbox moved to origin
    local_faces: np.ndarray  # faces re-indexed into ``vertices``

    def bbox(self):
        return self.vertices.max(axis=0) - self.vertices.min(axis=0)

    def area(self):
        p = self.vertices[self.local_faces]
        u = p[:, 1] - p[:, 0]
        v = p[:, 2] - p[:, 0]
        return float(0.5 * np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]).sum())


@dataclass
class SewPair:
    piece_a: int
    piece_b: int
    edge: tuple  # ribbon vertex ids of the cut ruling
    length: float


@dataclass
class SplitResult:
    pieces: list
    sew_pairs: list


# ----------------------------------------------------------------------
# polygon triangulation (constrained: boundary kept, no interior points)


def _tri_area2(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def triangulate_polygon(pts):
    """Ear clipping of a simple CCW polygon, Delaunay-flipped afterwards.

    Returns index triples into ``pts``.  No interior points are ever
    introduced, so triangulating a boundary-only polygon keeps the
    region developable.
    """
    n = len(pts)
    if n < 3:
        raise RibbonError("degenerate region with fewer than 3 corners")
    pts = np.asarray(pts, dtype=np.float64)
    total = 0.0
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        total += a[0] * b[1] - a[1] * b[0]
    if total <= 0:
        raise RibbonError("region polygon is not counterclockwise")
    scale2 = max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1])) ** 2
    idx = list(range(n))
    tris = []
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 4 * n * n:
            raise RibbonError("region polygon could not be triangulated")
        best = None
        m = len(idx)
        for k in range(m):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % m]
            area = _tri_area2(pts[i0], pts[i1], pts[i2])
            if area <= 1e-14 * scale2:
                continue
            ok = True
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                p = pts[j]
                if (
                    _tri_area2(pts[i0], pts[i1], p) >= -1e-14 * scale2
                    and _tri_area2(pts[i1], pts[i2], p) >= -1e-14 * scale2
                    and _tri_area2(pts[i2], pts[i0], p) >= -1e-14 * scale2
                ):
                    ok = False
                    break
            if ok and (best is None or area > best[0]):
                best = (area, k)
        if best is None:
            raise RibbonError(
                "cap region could not be triangulated; the ribbon "
                "boundary folds onto itself here"
            )
        k = best[1]
        tris.append((idx[k - 1], idx[k], idx[(k + 1) % len(idx)]))
        idx.pop(k)
    tris.append(tuple(idx))
    return _delaunay_flips(pts, tris)


def _delaunay_flips(pts, tris):
    tris = [list(t) for t in tris]
    edge_of = {}
    for f, t in enumerate(tris):
        for j in range(3):
            edge_of[(t[j], t[(j + 1) % 3])] = f
    for _ in range(8 * len(tris) + 16):
        flipped = False
        for f, t in enumerate(tris):
            for j in range(3):
                a, b = t[j], t[(j + 1) % 3]
                g = edge_of.get((b, a))
                if g is None or g == f:
                    continue
                c = t[(j + 2) % 3]
                tg = tris[g]
                d = next(v for v in tg if v not in (a, b))
                if _in_circumcircle(pts[a], pts[b], pts[c], pts[d]):
                    if (
                        _tri_area2(pts[a], pts[d], pts[c]) <= 0
                        or _tri_area2(pts[d], pts[b], pts[c]) <= 0
                    ):
                        continue
                    for e in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
                        edge_of.pop(e, None)
                    for e in ((tg[0], tg[1]), (tg[1], tg[2]), (tg[2], tg[0])):
                        edge_of.pop(e, None)
                    tris[f] = [a, d, c]
                    tris[g] = [d, b, c]
                    for ff in (f, g):
                        tt = tris[ff]
                        for jj in range(3):
                            edge_of[(tt[jj], tt[(jj + 1) % 3])] = ff
                    flipped = True
        if not flipped:
            break
    return [tuple(t) for t in tris]


def _in_circumcircle(a, b, c, p):
    m = np.array(
        [
            [a[0] - p[0], a[1] - p[1], (a[0] - p[0]) ** 2 + (a[1] - p[1]) ** 2],
            [b[0] - p[0], b[1] - p[1], (b[0] - p[0]) ** 2 + (b[1] - p[1]) ** 2],
            [c[0] - p[0], c[1] - p[1], (c[0] - p[0]) ** 2 + (c[1] - p[1]) ** 2],
        ]
    )
    return np.linalg.det(m) > 1e-12 * max(abs(m).max() ** 3, 1e-30)


def _segments_cross(p0, p1, q0, q1, eps):
    """Proper crossing test; touching at an endpoint does not count."""
    d1 = _tri_area2(q0, q1, p0)
    d2 = _tri_area2(q0, q1, p1)
    d3 = _tri_area2(p0, p1, q0)
    d4 = _tri_area2(p0, p1, q1)
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and (
        (d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)
    ):
        return True
    return False


def _polygon_is_simple(pts):
    n = len(pts)
    span = max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1]))
    eps = 1e-12 * span * span
    for i in range(n):
        p0, p1 = pts[i], pts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_cross(p0, p1, pts[j], pts[(j + 1) % n], eps):
                return False
    return True


# ----------------------------------------------------------------------
# pass geometry: the planned lines plus Fermat connectors, per part


class _Pass:
    """One curve line in a part's extended domain, with its 3D samples."""

    def __init__(self, part, tag, x0, y0, x1, y1, xs, pts):
        self.part = part
        self.tag = tag  # position in the planned-lines list, or "connector"
        self.x0, self.y0 = float(x0), float(y0)
        self.x1, self.y1 = float(x1), float(y1)
        self.lo, self.hi = sorted((self.x0, self.x1))
        forward = self.x1 >= self.x0
        self.xs = np.asarray(xs if forward else xs[::-1], dtype=np.float64)
        self.pts = np.asarray(pts if forward else pts[::-1], dtype=np.float64)
        self.on_line = self.y0 == self.y1  # runs along an open boundary
        self.params = None  # ascending subdivision, filled later
        self.col_idx = None
        self.pos = None

    def y_at(self, x):
        t = (x - self.x0) / (self.x1 - self.x0)
        return self.y0 + t * (self.y1 - self.y0)

    def pos_at(self, x):
        x = np.atleast_1d(x)
        out = np.empty((len(x), 3))
        for c in range(3):
            out[:, c] = np.interp(x, self.xs, self.pts[:, c])
        return out

    def end_index(self, x):
        """Param index of the endpoint whose extended x equals ``x``."""
        return 0 if abs(x - self.lo) <= abs(x - self.hi) else len(self.params) - 1


def _collect_passes(lines, curve):
    """Passes grouped per part, curve order, Fermat connectors included.

    The tracer drops the duplicate sample at every line junction, so the
    exact junction point survives only as the previous line's last
    sample; it is restored here so pass endpoints stay exact.
    """
    per_part = {}
    by_tag = {}
    for li, line in enumerate(lines):
        mask = (curve.part == line.part) & (curve.line == line.index)
        idx = np.nonzero(mask)[0]
        if len(idx) == 0:
            raise RibbonError(f"planned line {li} left no samples to follow")
        xs = curve.ext[idx, 0]
        pts = curve.points[idx]
        if abs(xs[0] - line.start[0]) > 1e-12 * max(1.0, abs(line.start[0])):
            xs = np.concatenate([[line.start[0]], xs])
            pts = np.vstack([curve.points[idx[0] - 1][None], pts])
        if not (np.all(np.diff(xs) > 0) or np.all(np.diff(xs) < 0)):
            raise RibbonError(f"curve samples of line {li} are not monotone")
        ps = _Pass(
            line.part,
            li,
            line.start[0],
            line.start[1],
            line.end[0],
            line.end[1],
            xs,
            pts,
        )
        per_part.setdefault(line.part, []).append(ps)
        by_tag[li] = ps

    for li in range(1, len(lines)):
        a, b = lines[li - 1], lines[li]
        if a.part != b.part:
            continue
        # consecutive lines of one part: the connector between them runs
        # along the open boundary at the turn height
        mask = (curve.part == a.part) & (curve.line == 0)
        idx = np.nonzero(mask)[0]
        x0, y0 = float(a.end[0]), float(a.end[1])
        x1 = float(b.start[0])
        if len(idx) == 0:
            raise RibbonError(f"turn connector of part {a.part} left no samples")
        xs = curve.ext[idx, 0]
        pts = curve.points[idx]
        if abs(xs[0] - x0) > 1e-12 * max(1.0, abs(x0)):
            xs = np.concatenate([[x0], xs])
            pts = np.vstack([curve.points[idx[0] - 1][None], pts])
        ps = _Pass(a.part, "connector", x0, y0, x1, y0, xs, pts)
        per_part[a.part].append(ps)
        by_tag[("connector", a.part)] = ps
    return per_part, by_tag


# ----------------------------------------------------------------------
# per-part ruling frames


class _PartFrame:
    """Column grid and boundary-line geometry for one part."""

    def __init__(self, ci, chart_set, x, passes, cfg, width):
        chart = chart_set.charts[ci]
        self.index = ci
        self.chart = chart
        base = int(chart_set.offsets[ci])
        xy = np.asarray(x[base : base + 2 * chart.n_vertices]).reshape(-1, 2)
        self.period = abs(
            float(xy[chart.seam_right[0], 0] - xy[chart.seam_left[0], 0])
        )
        junctions = chart_set.decomp.junctions
        self.line_y = {}
        self.line_kind = {}
        self.line_chain_x = {}
        self.line_chain_pts = {}
        self.crotches = {}  # per line: (work vertex id, raw x) of junctions
        self.arcs = {}  # per line: (interface id, x lo, x hi) in raw coords
        self.arc_x0 = {}
        for name in ("bottom", "top"):
            ln = getattr(chart, name)
            ids = np.asarray(ln.vertices)
            self.line_y[name] = float(xy[ids, 1].mean())
            self.line_kind[name] = ln.kind
            cx = xy[ids, 0]
            order = np.argsort(cx, kind="stable")
            self.line_chain_x[name] = cx[order].copy()
            self.line_chain_pts[name] = chart.mesh.vertices[ids[order]].copy()
            arcs, crs = [], []
            for arc in ln.arcs:
                if arc.interface is not None:
                    xa, xb = float(cx[arc.lo]), float(cx[arc.hi])
                    arcs.append((arc.interface, min(xa, xb), max(xa, xb)))
            for a, b in zip(ln.arcs, ln.arcs[1:]):
                if a.interface is not None and b.interface is not None:
                    crs.append((int(chart.to_work[ids[a.hi]]), float(cx[a.hi])))
            if ln.kind == "transition" and int(chart.to_work[ids[0]]) in junctions:
                crs.append((int(chart.to_work[ids[0]]), float(cx[0])))
            self.arcs[name] = arcs
            self.arc_x0[name] = float(cx.min())
            self.crotches[name] = crs
        height = abs(self.line_y["top"] - self.line_y["bottom"])
        self.ytol = 1e-9 * max(self.period, height, 1.0)
        self.passes = passes

        total3d = sum(
            float(np.linalg.norm(np.diff(p.pts, axis=0), axis=1).sum())
            for p in passes
        )
        span = sum(p.hi - p.lo for p in passes)
        winding_len = total3d * self.period / max(span, 1e-30)
        if cfg.samples_per_winding is not None:
            n = int(cfg.samples_per_winding)
        else:
            n = int(math.ceil(winding_len / (0.25 * width)))
        n = max(4, n + (n % 2))
        self.n_cols = n
        self.delta = self.period / n
        self.pad = max(cfg.weld_fraction, 1e-12) * self.delta

        # anchor classes: every pass endpoint phase becomes a column
        # class, as does every junction point, so the envelope rows
        # always hold a vertex exactly under each crossing and crotch;
        # classes closer than the weld distance merge
        anchor = {p.x0 % self.delta for p in passes} | {p.x1 % self.delta for p in passes}
        for crs in self.crotches.values():
            anchor |= {cx % self.delta for _, cx in crs}
        offs = sorted(anchor)
        classes = []
        for o in offs:
            if classes and (
                o - classes[-1] <= self.pad
                or (o + self.pad >= self.delta and classes[0] <= self.pad)
            ):
                continue
            classes.append(o)
        self.col_base = np.sort(
            np.concatenate([[c + j * self.delta for j in range(n)] for c in classes])
        )
        self.col_count = len(self.col_base)

    def col(self, k):
        """Canonical phase of global column index k (bit-reproducible)."""
        q, r = divmod(k, self.col_count)
        return float(self.col_base[r] + q * self.period)

    def col_range(self, lo, hi, pad):
        """Global column indices with phase strictly inside (lo, hi)."""
        ks = []
        k = (int(math.floor((lo - self.col_base[0]) / self.period)) - 1) * self.col_count
        while self.col(k) <= lo + pad:
            k += 1
        while self.col(k) < hi - pad:
            ks.append(k)
            k += 1
        return ks

    def stack(self, phase, y0, sgn):
        """Nearest pass copy strictly beyond y0 in direction sgn.

        Returns (y, pass, m) where the copy is ``pass`` shifted by m
        periods, or None when only the boundary line is left.
        """
        best = None
        for p in self.passes:
            m_lo = int(math.ceil((phase - p.hi) / self.period))
            m_hi = int(math.floor((phase - p.lo) / self.period))
            for m in range(m_lo, m_hi + 1):
                y = p.y_at(phase - m * self.period)
                if sgn * (y - y0) > self.ytol and (
                    best is None or sgn * (best[0] - y) > 0
                ):
                    best = (y, p, m)
        return best

    def line_point(self, name, phase):
        """3D point of an open boundary line at the given phase."""
        xs = self.line_chain_x[name]
        pts = self.line_chain_pts[name]
        xw = xs[0] + ((phase - xs[0]) % self.period)
        out = np.empty(3)
        for c in range(3):
            out[c] = np.interp(xw, xs, pts[:, c])
        return out


def _subdivide_passes(frames):
    """Per-pass param lists: exact endpoints plus interior columns."""
    for fr in frames.values():
        for p in fr.passes:
            ks = fr.col_range(p.lo, p.hi, fr.pad)
            p.params = np.array([p.lo] + [fr.col(k) for k in ks] + [p.hi])
            p.col_idx = [None] + ks + [None]
            p.pos = p.pos_at(p.params)
            p.col_to_i = {k: i for i, k in enumerate(p.col_idx) if k is not None}


def _param_at(p, x, fr):
    """Index of the subdivision param equal to x (up to welding)."""
    j = int(np.searchsorted(p.params, x))
    best, dist = None, None
    for jj in (j - 1, j):
        if 0 <= jj < len(p.params):
            d = abs(p.params[jj] - x)
            if best is None or d < dist:
                best, dist = jj, d
    if best is None or dist > 0.45 * fr.delta:
        raise RibbonError(
            f"no ruling column at phase {x:.6g} on part {p.part}; the "
            "part winds too few times for its crossing layout"
        )
    return best


def _upper_index(q, p, i, m, fr):
    """Param index on pass q matching p.params[i] shifted by m periods."""
    k = p.col_idx[i]
    if k is not None:
        j = q.col_to_i.get(k - m * fr.col_count)
        if j is not None:
            return j
    return _param_at(q, p.params[i] - m * fr.period, fr)


# ----------------------------------------------------------------------
# vertex registry


class _Builder:
    def __init__(self):
        self.verts = []
        self.faces = []
        self.vert_key = {}
        self.alias = {}

    def canon(self, key):
        while key in self.alias:
            key = self.alias[key]
        return key

    def identify(self, key_a, key_b):
        a, b = self.canon(key_a), self.canon(key_b)
        if a == b:
            return
        if a in self.vert_key and b in self.vert_key:
            raise AssertionError(f"late identification of {key_a} and {key_b}")
        if b in self.vert_key:
            a, b = b, a
        self.alias[b] = a

    def vertex(self, key, pos):
        key = self.canon(key)
        vid = self.vert_key.get(key)
        if vid is None:
            vid = len(self.verts)
            self.verts.append(np.asarray(pos, dtype=np.float64))
            self.vert_key[key] = vid
        return vid

    def lookup(self, key):
        return self.vert_key[self.canon(key)]

    def face(self, a, b, c):
        self.faces.append((a, b, c))
        return len(self.faces) - 1


def _pass_vertex(bld, p, i, side):
    return bld.vertex(("pv", p.part, p.tag, i, side), p.pos[i])


def _interior_sign(fr, name):
    """+1 when the part lies above the named line, -1 when below."""
    other = "top" if name == "bottom" else "bottom"
    return 1 if fr.line_y[name] < fr.line_y[other] else -1


# ----------------------------------------------------------------------
# junction vertex identification
#
# Where two consecutive lines meet, the cut point splits in exactly two
# copies.  Interface gluing reverses the phase direction (rotation by
# pi), so the two charts see the crossing from opposite sides: the thin
# cap sliver of one part lies on the same surface wedge as the other
# part's interior (strip-and-wall) region.  Toward-line therefore
# identifies with interior, crosswise.  At a turn the connector runs
# along the open rim, and the only cut through the point is the arm
# itself: the connector's surface copy sits in the wedge toward the
# line when arm and connector leave the junction the same way along
# the line, and in the wedge away from it when they leave opposite
# ways.


def _identify_junctions(bld, lines, frames, by_tag):
    for li in range(1, len(lines)):
        a, b = lines[li - 1], lines[li]
        pa, pb = by_tag[li - 1], by_tag[li]
        ia = pa.end_index(float(a.end[0]))
        ib = pb.end_index(float(b.start[0]))
        if a.part != b.part:
            sa = -_interior_sign(frames[a.part], a.end_on)
            sb = -_interior_sign(frames[b.part], b.start_on)
            bld.identify(
                ("pv", a.part, pa.tag, ia, sa), ("pv", b.part, pb.tag, ib, -sb)
            )
            bld.identify(
                ("pv", a.part, pa.tag, ia, -sa), ("pv", b.part, pb.tag, ib, sb)
            )
        else:
            cn = by_tag[("connector", a.part)]
            s = _interior_sign(frames[a.part], a.end_on)
            ca = cn.end_index(float(a.end[0]))
            cb = cn.end_index(float(b.start[0]))
            wa = -s if (ia == 0) == (ca == 0) else s
            wb = -s if (ib == 0) == (cb == 0) else s
            bld.identify(
                ("pv", a.part, pa.tag, ia, wa), ("pv", a.part, "connector", ca, s)
            )
            bld.identify(
                ("pv", b.part, pb.tag, ib, wb), ("pv", a.part, "connector", cb, s)
            )


# ----------------------------------------------------------------------
# cap regions along the boundary lines


def _gather_markers(fr, name, ly):
    """Run boundaries on the line: curve crossings and junction points.

    Crossing markers carry the pass-end group, crotch markers the
    junction vertex.  Returned sorted over one period window.
    """
    raw = []
    for p in fr.passes:
        for xe in (p.lo, p.hi):
            if abs(p.y_at(xe) - ly) <= fr.ytol:
                raw.append((xe, p, p.end_index(xe)))
    crotch = fr.crotches[name]
    if not raw and not crotch:
        return None, None
    w0 = min(
        [xe % fr.period for xe, _, _ in raw]
        + [cx % fr.period for _, cx in crotch]
    )

    def fold(v):
        # float dust can wrap a residue of 0 to the far window edge
        r = (v - w0) % fr.period
        return w0 + (0.0 if r >= fr.period - fr.pad else r)

    items = sorted(((fold(xe), p, ie) for xe, p, ie in raw), key=lambda it: it[0])
    markers = []
    for pos, p, ie in items:
        if markers and pos - markers[-1]["phase"] <= 2 * fr.pad:
            markers[-1]["group"].append((p, ie))
        else:
            markers.append({"kind": "cross", "phase": pos, "group": [(p, ie)]})
    # a crossing at the very end of the window is the first one wrapped
    if (
        len(markers) > 1
        and (w0 + fr.period) - markers[-1]["phase"] <= 2 * fr.pad
        and markers[0]["phase"] - w0 <= 2 * fr.pad
    ):
        markers[0]["group"].extend(markers.pop()["group"])
    for work, cx in crotch:
        markers.append({"kind": "crotch", "phase": fold(cx), "work": work})
    markers.sort(key=lambda mk: mk["phase"])
    if len(markers) > 1:
        for i in range(len(markers)):
            a = markers[i]
            b = markers[(i + 1) % len(markers)]
            gap = (b["phase"] - a["phase"]) % fr.period
            if gap <= 2 * fr.pad and not (a["kind"] == b["kind"] == "cross"):
                raise RibbonError(
                    "a curve crossing sits on a junction point of part "
                    f"{fr.index}; move the crossing"
                )
    return w0, markers


def _covered_by_on_line(fr, ly, mid):
    for p in fr.passes:
        if p.on_line and abs(p.y0 - ly) <= fr.ytol:
            if 0 < (mid - p.lo) % fr.period < (p.hi - p.lo):
                return True
    return False


def _wall_vertex(bld, part, group, s):
    """Pivot vertex on the line: the interior-side copy of its pass end.

    Connector ends alias a different wedge at the junction, so prefer a
    crossing pass when the group holds both.
    """
    for p, ie in group:
        if p.tag != "connector":
            return bld.vertex(("pv", part, p.tag, ie, s), p.pos[ie])
    p, ie = group[0]
    return bld.vertex(("pv", part, p.tag, ie, s), p.pos[ie])


def _arc_interface(fr, name, mid):
    """Interface id of the arc containing window phase mid."""
    x0 = fr.arc_x0[name]
    r = x0 + ((mid - x0) % fr.period)
    tol = 1e-9 * fr.period
    for iface, lo, hi in fr.arcs[name]:
        if lo - tol <= r <= hi + tol:
            return iface
    raise AssertionError("cap run does not lie on an interface arc")


def _register_shadow(registry, work, part, vid):
    """Record the part's envelope vertex standing in for a junction."""
    prev = registry.setdefault(work, {}).setdefault(part, vid)
    if prev != vid:
        raise AssertionError("junction shadow vertex disagrees between runs")


def _build_caps(bld, frames, chart_set, units):
    """Triangulate every region between the curve and a boundary line.

    Open-line caps become units directly.  Transition-line caps are
    collected as glue pieces, split at junction points, and merged per
    interface by :func:`_assemble_zones`; junction points themselves
    get one covering face each from :func:`_crotch_units`.
    """
    pieces = []
    registry = {}
    crotch_edges = {}
    for ci in sorted(frames):
        fr = frames[ci]
        for name in ("bottom", "top"):
            ly = fr.line_y[name]
            s = _interior_sign(fr, name)
            w0, markers = _gather_markers(fr, name, ly)
            if markers is None:
                raise RibbonError(
                    f"boundary line {name} of part {ci} is never touched "
                    "by the curve; it cannot be ruled"
                )
            for g in range(len(markers)):
                ma = markers[g]
                mb = markers[(g + 1) % len(markers)]
                pa = ma["phase"]
                pb = mb["phase"] if g + 1 < len(markers) else markers[0]["phase"] + fr.period
                mid = 0.5 * (pa + pb)
                if _covered_by_on_line(fr, ly, mid):
                    continue
                env = fr.stack(mid, ly, s)
                if env is None:
                    raise RibbonError(
                        f"no curve beyond line {name} of part {ci}; the "
                        "region cannot be ruled"
                    )
                _, q, m = env
                ia = _param_at(q, pa - m * fr.period, fr)
                ib = _param_at(q, pb - m * fr.period, fr)
                if ib <= ia:
                    raise AssertionError("empty cap run")
                pinch_a = ma["kind"] == "cross" and ia in (0, len(q.params) - 1) and (
                    abs(q.y_at(q.params[ia]) - ly) <= fr.ytol
                )
                pinch_b = mb["kind"] == "cross" and ib in (0, len(q.params) - 1) and (
                    abs(q.y_at(q.params[ib]) - ly) <= fr.ytol
                )
                side = -s  # the cap sees the pass from its line side
                env_ids = [
                    _pass_vertex(bld, q, j, side) for j in range(ia, ib + 1)
                ]
                env_pts = [
                    (q.params[j] + m * fr.period, q.y_at(q.params[j]))
                    for j in range(ia, ib + 1)
                ]
                if fr.line_kind[name] == "open":
                    _open_cap(
                        bld, fr, ci, name, ly, s,
                        pa, pb, markers, g,
                        pinch_a, pinch_b, env_ids, env_pts, units,
                    )
                else:
                    # glue piece: path walks the curve side, interface
                    # side dropped; crossing ends carry pivot copies,
                    # junction ends stop at the envelope shadow vertex
                    end_a = end_b = ("cross",)
                    if ma["kind"] == "crotch":
                        _register_shadow(registry, ma["work"], ci, env_ids[0])
                        end_a = ("crotch", ma["work"], (pa, ly))
                    if mb["kind"] == "crotch":
                        _register_shadow(registry, mb["work"], ci, env_ids[-1])
                        end_b = ("crotch", mb["work"], (pb, ly))
                    ids, pts = list(env_ids), list(env_pts)
                    if s == 1:
                        ids.reverse()
                        pts.reverse()
                        head_end, tail_end = end_b, end_a
                        ends = (pinch_b, pinch_a)
                        phases = (pb, pa)
                        mks = (mb, ma)
                    else:
                        head_end, tail_end = end_a, end_b
                        ends = (pinch_a, pinch_b)
                        phases = (pa, pb)
                        mks = (ma, mb)
                    if mks[0]["kind"] == "cross" and not ends[0]:
                        ids.insert(0, _wall_vertex(bld, ci, mks[0]["group"], s))
                        pts.insert(0, (phases[0], ly))
                    if mks[1]["kind"] == "cross" and not ends[1]:
                        ids.append(_wall_vertex(bld, ci, mks[1]["group"], s))
                        pts.append((phases[1], ly))
                    pieces.append({
                        "ids": ids,
                        "pts": np.asarray(pts),
                        "part": ci,
                        "line": name,
                        "iface": _arc_interface(fr, name, mid),
                        "head_end": head_end,
                        "tail_end": tail_end,
                    })
    iface_parts = {it.index: it.parts for it in chart_set.decomp.interfaces}
    _assemble_zones(bld, pieces, units, registry, iface_parts, crotch_edges)
    _crotch_units(bld, crotch_edges, units)


def _open_cap(
    bld, fr, ci, name, ly, s, pa, pb, markers, g,
    pinch_a, pinch_b, env_ids, env_pts, units,
):
    ks = fr.col_range(pa, pb, fr.pad)
    line_ids = [
        bld.vertex(("lv", ci, name, k), fr.line_point(name, fr.col(k)))
        for k in ks
    ]
    line_pts = [(fr.col(k), ly) for k in ks]
    wall_a = wall_b = None
    if not pinch_a:
        wall_a = _wall_vertex(bld, ci, markers[g]["group"], s)
    if not pinch_b:
        wall_b = _wall_vertex(bld, ci, markers[(g + 1) % len(markers)]["group"], s)
    ids, pts = [], []
    if s == 1:
        # line below the cap: east along the line, back west along the curve
        if wall_a is not None:
            ids.append(wall_a)
            pts.append((pa, ly))
        ids += line_ids
        pts += line_pts
        if wall_b is not None:
            ids.append(wall_b)
            pts.append((pb, ly))
        ids += env_ids[::-1]
        pts += env_pts[::-1]
    else:
        # line above the cap: east along the curve, back west along the line
        ids += env_ids
        pts += env_pts
        if wall_b is not None:
            ids.append(wall_b)
            pts.append((pb, ly))
        ids += line_ids[::-1]
        pts += line_pts[::-1]
        if wall_a is not None:
            ids.append(wall_a)
            pts.append((pa, ly))
    pts = np.asarray(pts)
    if len(ids) < 3:
        return  # pinched sliver with no area
    faces = [
        bld.face(ids[t0], ids[t1], ids[t2])
        for t0, t1, t2 in triangulate_polygon(pts)
    ]
    units.append(np.asarray(faces, dtype=np.int64))


def _assemble_zones(bld, pieces, units, registry, iface_parts, crotch_edges):
    """Merge transition-line glue pieces across their interfaces.

    Each piece is an open path along the curve over one interface arc
    segment.  Interface gluing is a rotation by pi, so chaining pieces
    head-to-tail under alternating-sign transforms develops each zone
    into one plane polygon, triangulated with its interior left empty
    of vertices.  Crossing hops anchor at the shared pivot vertex;
    junction hops insert a short ruling between the two parts' shadow
    vertices and anchor the transforms so the junction point itself
    lands on one plane position.
    """
    if not pieces:
        return
    by_iface = {}
    for pc in pieces:
        by_iface.setdefault(pc["iface"], []).append(pc)
    for iface in sorted(by_iface):
        group = by_iface[iface]
        by_head = {}
        for pc in group:
            head = pc["ids"][0]
            if head in by_head:
                raise RibbonError("interface caps overlap; curve design invalid")
            by_head[head] = pc
        used = set()
        for start in group:
            if id(start) in used:
                continue
            ids, pts = [], []
            sign, off = 1.0, np.zeros(2)
            shared = False  # whether cur starts on the previous tail vertex
            cur = start
            while True:
                used.add(id(cur))
                plane = off + sign * cur["pts"]
                if shared:
                    if cur["ids"][0] != ids[-1]:
                        raise AssertionError("zone chain endpoints disagree")
                    ids += cur["ids"][1:]
                    pts += list(plane[1:])
                else:
                    ids += list(cur["ids"])
                    pts += list(plane)
                tail = cur["tail_end"]
                if tail[0] == "crotch":
                    _, work, own_pt = tail
                    qa, qb = iface_parts[iface]
                    qpart = qa if cur["part"] == qb else qb
                    head_id = registry.get(work, {}).get(qpart)
                    nxt = by_head.get(head_id) if head_id is not None else None
                    if nxt is None or (id(nxt) in used and nxt is not start):
                        raise RibbonError(
                            "interface caps do not close around junction "
                            f"point {work}"
                        )
                    hd = nxt["head_end"]
                    if hd[0] != "crotch" or hd[1] != work:
                        raise AssertionError("zone chain misaligned at a junction")
                    # ruling edge between the two shadows; the next
                    # transform pins the junction point itself
                    crotch_edges.setdefault(work, []).append((ids[-1], head_id))
                    anchor = off + sign * np.asarray(own_pt)
                    sign = -sign
                    off = anchor - sign * np.asarray(hd[2])
                    shared = False
                else:
                    nxt = by_head.get(cur["ids"][-1])
                    if nxt is None or (id(nxt) in used and nxt is not start):
                        raise RibbonError(
                            "interface caps do not close into a ring around "
                            f"part {cur['part']} line {cur['line']}"
                        )
                    anchor = np.asarray(pts[-1])
                    sign = -sign
                    off = anchor - sign * nxt["pts"][0]
                    shared = True
                if nxt is start:
                    if tail[0] != "crotch":
                        if ids[-1] != ids[0]:
                            raise AssertionError("zone polygon did not close")
                        ids.pop()
                        pts.pop()
                    break
                cur = nxt
            pts = np.asarray(pts)
            area = 0.0
            for i in range(len(pts)):
                a, b = pts[i], pts[(i + 1) % len(pts)]
                area += a[0] * b[1] - a[1] * b[0]
            if area <= 0:
                raise AssertionError("interface zone developed with flipped area")
            if not _polygon_is_simple(pts):
                raise RibbonError(
                    "ruling would cross the strip boundary inside the "
                    f"interface zone touching part {start['part']}; adjust "
                    "crossing points or winding counts"
                )
            faces = [
                bld.face(ids[t0], ids[t1], ids[t2])
                for t0, t1, t2 in triangulate_polygon(pts)
            ]
            units.append(np.asarray(faces, dtype=np.int64))


def _crotch_units(bld, crotch_edges, units):
    """One covering face per junction point.

    The zone walks emit one directed ruling edge per interface at each
    junction; together they cycle around the junction's shadow
    vertices, and the reversed cycle is the cap face whose halfedges
    twin every walked ruling.
    """
    for work in sorted(crotch_edges):
        edges = crotch_edges[work]
        if len(edges) < 3:
            raise RibbonError(
                f"junction point {work} joins fewer than three interface zones"
            )
        nxt = dict(edges)
        if len(nxt) != len(edges):
            raise RibbonError(f"junction point {work} rulings repeat a shadow")
        start = edges[0][0]
        cyc = [start]
        for _ in range(len(edges) - 1):
            b = nxt.get(cyc[-1])
            if b is None or b == start:
                raise RibbonError(f"junction point {work} rulings do not close")
            cyc.append(b)
        if nxt.get(cyc[-1]) != start or len(set(cyc)) != len(edges):
            raise RibbonError(f"junction point {work} rulings do not close")
        rev = cyc[::-1]
        faces = [
            bld.face(rev[0], rev[i], rev[i + 1]) for i in range(1, len(rev) - 1)
        ]
        units.append(np.asarray(faces, dtype=np.int64))


# ----------------------------------------------------------------------
# the remesh driver


def remesh_rulings(curve, chart_set, x, config=None):
    """Rebuild the cut surface as a developable ruled ribbon.

    Vertices lie only on the traced curve and on open boundaries; the
    strip interior is quads between consecutive ruling columns, split
    into triangles, and the regions along boundary lines and interfaces
    are triangulated without interior points.
    """
    lines = list(curve.lines)
    if not lines:
        raise RibbonError("curve carries no planned lines")
    cfg = config or RemeshConfig()
    width = cfg.target_width
    if width is None:
        q = curve_quality(curve, chart_set, x)
        width = q.spacing_mean if q.spacing_mean > 0 else q.total_length * 0.05
    if width <= 0:
        raise RibbonError("ribbon width could not be determined")

    per_part, by_tag = _collect_passes(lines, curve)
    frames = {
        ci: _PartFrame(ci, chart_set, x, passes, cfg, width)
        for ci, passes in per_part.items()
    }
    _subdivide_passes(frames)
    bld = _Builder()
    _identify_junctions(bld, lines, frames, by_tag)

    units = []
    for ci in sorted(frames):
        fr = frames[ci]
        for p in fr.passes:
            for i in range(len(p.params) - 1):
                phase = 0.5 * (p.params[i] + p.params[i + 1])
                above = fr.stack(phase, p.y_at(phase), +1)
                if above is None:
                    continue  # boundary-line cap, handled per line run
                _, q, m = above
                ja = _upper_index(q, p, i, m, fr)
                jb = _upper_index(q, p, i + 1, m, fr)
                if jb <= ja:
                    raise AssertionError("ruling columns collapsed in a cell")
                v00 = _pass_vertex(bld, p, i, +1)
                v01 = _pass_vertex(bld, p, i + 1, +1)
                v11 = _pass_vertex(bld, q, jb, -1)
                v10 = _pass_vertex(bld, q, ja, -1)
                # at a turn point the two passes meet, collapsing one
                # side of the cell; keep the surviving triangle
                if v00 == v10 and v01 == v11:
                    continue
                if v00 == v10:
                    faces = [bld.face(v00, v01, v11)]
                elif v01 == v11:
                    faces = [bld.face(v00, v11, v10)]
                else:
                    faces = [bld.face(v00, v01, v11), bld.face(v00, v11, v10)]
                units.append(np.array(faces, dtype=np.int64))

    _build_caps(bld, frames, chart_set, units)

    # pairing rows in curve order, one per ruling cell; row[0] is the
    # tape on the left of travel (start, end), row[1] its twin on the
    # right, stored reversed so both read as oriented boundary edges
    pairing = []
    for li, line in enumerate(lines):
        p = by_tag[li]
        if p.on_line:
            continue
        ci = line.part
        fwd = float(line.end[0]) >= float(line.start[0])
        n = len(p.params)
        for i in range(n - 1) if fwd else range(n - 2, -1, -1):
            a0 = bld.lookup(("pv", ci, p.tag, i, +1))
            a1 = bld.lookup(("pv", ci, p.tag, i + 1, +1))
            b0 = bld.lookup(("pv", ci, p.tag, i, -1))
            b1 = bld.lookup(("pv", ci, p.tag, i + 1, -1))
            if fwd:
                pairing.append([[a0, a1], [b1, b0]])
            else:
                pairing.append([[b1, b0], [a0, a1]])

    verts = np.vstack(bld.verts)
    faces = np.asarray(bld.faces, dtype=np.int64)
    mesh = SurfaceMesh(verts, faces)

    first, last = lines[0], lines[-1]
    p0, p1 = by_tag[0], by_tag[len(lines) - 1]
    zipper_start = bld.lookup(
        ("pv", first.part, p0.tag, p0.end_index(float(first.start[0])),
         -_interior_sign(frames[first.part], first.start_on))
    )
    zipper_end = bld.lookup(
        ("pv", last.part, p1.tag, p1.end_index(float(last.end[0])),
         -_interior_sign(frames[last.part], last.end_on))
    )

    links = _unit_adjacency(mesh, units)
    return Ribbon(
        mesh=mesh,
        pairing=np.asarray(pairing, dtype=np.int64)
        if pairing
        else np.zeros((0, 2, 2), dtype=np.int64),
        zipper_start=zipper_start,
        zipper_end=zipper_end,
        units=units,
        unit_links=links,
    )


def _unit_adjacency(mesh, units):
    face_unit = np.full(mesh.n_faces, -1, dtype=np.int64)
    for uid, farr in enumerate(units):
        face_unit[farr] = uid
    if (face_unit < 0).any():
        raise AssertionError("faces left out of all units")
    links = []
    for h in range(3 * mesh.n_faces):
        t = int(mesh.twin[h])
        if t < 0 or t < h:
            continue
        ua, ub = int(face_unit[h // 3]), int(face_unit[t // 3])
        if ua == ub:
            continue
        links.append((ua, ub, (int(mesh.he_origin[h]), int(mesh.he_dest[h]))))
    return links


# ----------------------------------------------------------------------
# developability check and exact unfolding


def check_developable(ribbon):
    """Zero interior vertices, one boundary loop, disk topology."""
    mesh = ribbon.mesh
    interior = np.nonzero(~mesh.is_boundary_vertex())[0]

    seen = np.zeros(mesh.n_faces, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        f = stack.pop()
        for j in range(3):
            t = int(mesh.twin[3 * f + j])
            if t >= 0 and not seen[t // 3]:
                seen[t // 3] = True
                stack.append(t // 3)
    connected = bool(seen.all())
    loops = mesh.boundary_loops()
    euler = mesh.n_vertices - mesh.n_edges() + mesh.n_faces
    ok = len(interior) == 0 and connected and euler == 1 and len(loops) == 1
    return DevelopReport(
        ok=ok,
        interior_vertices=interior,
        connected=connected,
        n_boundary_loops=len(loops),
        euler=int(euler),
    )


def unfold(ribbon):
    """Lay the ribbon out in the plane, triangle by triangle.

    Breadth-first over face adjacency from the triangle holding the
    zipper start, children in face-index order; every face is placed
    rigidly against its already-placed edge, so edge lengths transfer
    exactly up to roundoff.
    """
    mesh = ribbon.mesh
    verts3 = mesh.vertices
    faces = mesh.faces
    pos = np.full((mesh.n_vertices, 2), np.nan)

    start_faces = np.nonzero((faces == ribbon.zipper_start).any(axis=1))[0]
    root = int(start_faces.min()) if len(start_faces) else 0

    def place_third(a2, b2, a3, b3, c3):
        e = b3 - a3
        L2 = float(e @ e)
        u = float((c3 - a3) @ e) / L2
        h = np.linalg.norm(np.cross(e, c3 - a3)) / L2
        d = b2 - a2
        return a2 + u * d + h * np.array([-d[1], d[0]])

    a, b, c = (int(v) for v in faces[root])
    L = float(np.linalg.norm(verts3[b] - verts3[a]))
    pos[a] = (0.0, 0.0)
    pos[b] = (L, 0.0)
    pos[c] = place_third(pos[a], pos[b], verts3[a], verts3[b], verts3[c])

    placed = np.zeros(mesh.n_faces, dtype=bool)
    placed[root] = True
    queue = [root]
    qi = 0
    while qi < len(queue):
        f = queue[qi]
        qi += 1
        nbrs = sorted(
            int(mesh.twin[3 * f + j]) // 3
            for j in range(3)
            if mesh.twin[3 * f + j] >= 0
        )
        for g in nbrs:
            if placed[g]:
                continue
            placed[g] = True
            queue.append(g)
            tri = faces[g]
            for j in range(3):
                va, vb, vc = int(tri[j]), int(tri[(j + 1) % 3]), int(tri[(j + 2) % 3])
                if not (np.isnan(pos[va]).any() or np.isnan(pos[vb]).any()):
                    if np.isnan(pos[vc]).any():
                        pos[vc] = place_third(
                            pos[va], pos[vb], verts3[va], verts3[vb], verts3[vc]
                        )
                    break
            else:
                raise AssertionError("face reached with no placed edge")
    if not placed.all() or np.isnan(pos).any():
        raise RibbonError("ribbon is not connected; cannot unfold")
    return FlatRibbon(ribbon=ribbon, vertices=pos, faces=faces)


# ----------------------------------------------------------------------
# overlap detection in the plane


def _tri_overlap(p, q, eps):
    """Strict positive-area overlap of two triangles (SAT)."""
    for tri, other in ((p, q), (q, p)):
        for j in range(3):
            d = tri[(j + 1) % 3] - tri[j]
            nrm = np.array([-d[1], d[0]])
            a0 = tri @ nrm
            a1 = other @ nrm
            if a1.min() >= a0.max() - eps or a1.max() <= a0.min() + eps:
                return False
    return True


def detect_overlaps(flat, faces=None):
    """Pairs of non-adjacent triangles with positive-area intersection."""
    if faces is None:
        faces = np.arange(len(flat.faces))
    tris = flat.faces[faces]
    pts = flat.vertices[tris]
    lo = pts.min(axis=1)
    hi = pts.max(axis=1)
    span = max(float((hi - lo).max()), 1e-30)
    eps = 1e-9 * span
    cell = max(float(np.median(hi - lo)), span * 1e-6)
    grid = {}
    for i in range(len(faces)):
        c0 = np.floor(lo[i] / cell).astype(int)
        c1 = np.floor(hi[i] / cell).astype(int)
        for cx in range(c0[0], c1[0] + 1):
            for cy in range(c0[1], c1[1] + 1):
                grid.setdefault((cx, cy), []).append(i)
    out = set()
    for bucket in grid.values():
        for ii in range(len(bucket)):
            for jj in range(ii + 1, len(bucket)):
                i, j = bucket[ii], bucket[jj]
                if i > j:
                    i, j = j, i
                if (i, j) in out:
                    continue
                if (hi[i] < lo[j] - eps).any() or (hi[j] < lo[i] - eps).any():
                    continue
                if set(tris[i]) & set(tris[j]):
                    continue
                if _tri_overlap(pts[i], pts[j], eps):
                    out.add((i, j))
    return sorted((int(faces[i]), int(faces[j])) for i, j in out)


# ----------------------------------------------------------------------
# splitting into bed-sized, overlap-free pieces


def split_ribbon(flat, policy=None):
    """Cut the flat ribbon along rulings into valid pieces.

    The unit adjacency graph (quads and cap patches joined by ruling
    edges) is a tree, so removing one ruling always splits a piece in
    two.  Oversized pieces are cut where a start-to-end walk first
    leaves the bed; overlapping pieces are cut at the ruling nearest
    the overlap midpoint.
    """
    policy = policy or SplitPolicy()
    bw, bh = policy.bed
    ribbon = flat.ribbon
    units = ribbon.units
    adj = {u: [] for u in range(len(units))}
    for ua, ub, edge in ribbon.unit_links:
        adj[ua].append((ub, edge))
        adj[ub].append((ua, edge))

    def unit_bbox(u):
        p = flat.vertices[flat.faces[units[u]].ravel()]
        return p.min(axis=0), p.max(axis=0)

    def fits(lo, hi):
        w, h = hi - lo
        return (w <= bw and h <= bh) or (h <= bw and w <= bh)

    def component(seed, members, blocked):
        out = []
        stack = [seed]
        seen = {seed}
        while stack:
            u = stack.pop()
            out.append(u)
            for v, edge in adj[u]:
                if v in seen or v not in members:
                    continue
                if (u, v) in blocked or (v, u) in blocked:
                    continue
                seen.add(v)
                stack.append(v)
        return out

    blocked = set()
    todo = [sorted(component(0, set(range(len(units))), blocked))]
    # other components would mean a disconnected ribbon; the mesh
    # constructor has already guaranteed against that
    done = []
    while todo:
        members = set(todo.pop())
        start = min(members)
        order = []
        stack = [start]
        seen = {start}
        parent_edge = {}
        while stack:
            u = stack.pop()
            order.append(u)
            for v, edge in sorted(adj[u])[::-1]:
                if v in seen or v not in members:
                    continue
                if (u, v) in blocked or (v, u) in blocked:
                    continue
                seen.add(v)
                parent_edge[v] = (u, v)
                stack.append(v)
        lo, hi = unit_bbox(order[0])
        if not fits(lo, hi):
            raise RibbonError("a single ruled panel exceeds the bed")
        cut = None
        for u in order[1:]:
            ulo, uhi = unit_bbox(u)
            nlo, nhi = np.minimum(lo, ulo), np.maximum(hi, uhi)
            if not fits(nlo, nhi):
                cut = parent_edge[u]
                break
            lo, hi = nlo, nhi
        if cut is None and policy.resolve_overlaps:
            fids = np.concatenate([units[u] for u in sorted(members)])
            bad = detect_overlaps(flat, fids)
            if bad:
                fa, fb = bad[0]
                mid = 0.5 * (
                    flat.vertices[flat.faces[fa]].mean(axis=0)
                    + flat.vertices[flat.faces[fb]].mean(axis=0)
                )
                best = None
                for u in members:
                    for v, edge in adj[u]:
                        if v not in members or u > v:
                            continue
                        if (u, v) in blocked or (v, u) in blocked:
                            continue
                        em = 0.5 * (
                            flat.vertices[edge[0]] + flat.vertices[edge[1]]
                        )
                        d = float(np.hypot(*(em - mid)))
                        if best is None or d < best[0]:
                            best = (d, (u, v))
                if best is None:
                    raise RibbonError(
                        "piece overlaps itself but has no ruling to cut"
                    )
                cut = best[1]
        if cut is None:
            done.append(sorted(members))
            continue
        if len(members) == 1:
            raise RibbonError("a single ruled panel exceeds the bed")
        blocked.add(cut)
        half_a = component(cut[0], members, blocked)
        half_b = component(cut[1], members, blocked)
        if len(half_a) + len(half_b) != len(members):
            raise AssertionError("ruling cut did not split the piece in two")
        todo.append(sorted(half_a))
        todo.append(sorted(half_b))

    done.sort(key=min)
    piece_of = {}
    pieces = []
    for pi, members in enumerate(done):
        fids = np.sort(np.concatenate([units[u] for u in members]))
        vids = np.unique(flat.faces[fids].ravel())
        local = {int(v): i for i, v in enumerate(vids)}
        coords = flat.vertices[vids]
        coords = coords - coords.min(axis=0)
        lf = np.vectorize(local.__getitem__)(flat.faces[fids])
        pieces.append(
            Piece(
                faces=fids,
                units=np.asarray(members, dtype=np.int64),
                vertex_ids=vids,
                vertices=coords,
                local_faces=lf,
            )
        )
        for u in members:
            piece_of[u] = pi
    sews = []
    for ua, ub, edge in ribbon.unit_links:
        pa, pb = piece_of[ua], piece_of[ub]
        if pa != pb:
            length = float(
                np.hypot(*(flat.vertices[edge[1]] - flat.vertices[edge[0]]))
            )
            sews.append(SewPair(min(pa, pb), max(pa, pb), edge, length))
    return SplitResult(pieces=pieces, sew_pairs=sews)


# ----------------------------------------------------------------------
# fidelity: sampled distance from the ribbon back to the source surface


def surface_deviation(ribbon, mesh):
    """Max and mean distance from ribbon face samples to the surface."""
    tris = ribbon.mesh.vertices[ribbon.mesh.faces]
    samples = np.concatenate(
        [
            tris.mean(axis=1),
            0.5 * (tris[:, 0] + tris[:, 1]),
            0.5 * (tris[:, 1] + tris[:, 2]),
            0.5 * (tris[:, 2] + tris[:, 0]),
        ]
    )
    d = _point_mesh_distance(samples, mesh)
    return {"max": float(d.max()), "mean": float(d.mean())}


def _point_mesh_distance(points, mesh, batch=512):
    tri = mesh.vertices[mesh.faces]
    out = np.empty(len(points))
    for s in range(0, len(points), batch):
        p = points[s : s + batch]
        d = _point_tri_distance(p[:, None, :], tri[None, :, :, :])
        out[s : s + batch] = d.min(axis=1)
    return out


def _point_tri_distance(p, tri):
    """Exact point-triangle distance, broadcast over leading axes."""
    a, b, c = tri[..., 0, :], tri[..., 1, :], tri[..., 2, :]
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = (ab * ap).sum(-1)
    d2 = (ac * ap).sum(-1)
    bp = p - b
    d3 = (ab * bp).sum(-1)
    d4 = (ac * bp).sum(-1)
    cp = p - c
    d5 = (ab * cp).sum(-1)
    d6 = (ac * cp).sum(-1)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    denom = np.where(va + vb + vc != 0, va + vb + vc, 1.0)
    v = vb / denom
    w = vc / denom
    # clamp into the triangle region by region
    v_ab = np.clip(np.where(d1 - d3 != 0, d1 / np.where(d1 - d3 == 0, 1, d1 - d3), 0), 0, 1)
    t_ac = np.clip(np.where(d2 - d6 != 0, d2 / np.where(d2 - d6 == 0, 1, d2 - d6), 0), 0, 1)
    t_bc = np.clip(
        np.where(
            (d4 - d3) + (d5 - d6) != 0,
            (d4 - d3) / np.where((d4 - d3) + (d5 - d6) == 0, 1.0, (d4 - d3) + (d5 - d6)),
            0,
        ),
        0,
        1,
    )
    cand_a = a
    cand_b = b
    cand_c = c
    cand_ab = a + v_ab[..., None] * ab
    cand_ac = a + t_ac[..., None] * ac
    cand_bc = b + t_bc[..., None] * (c - b)
    cand_in = a + v[..., None] * ab + w[..., None] * ac
    inside = (va >= 0) & (vb >= 0) & (vc >= 0)
    on_a = (d1 <= 0) & (d2 <= 0)
    on_b = (d3 >= 0) & (d4 <= d3)
    on_c = (d6 >= 0) & (d5 <= d6)
    on_ab = (~on_a) & (~on_b) & (d1 >= 0) & (d3 <= 0) & (vc <= 0)
    on_ac = (~on_a) & (~on_c) & (d2 >= 0) & (d6 <= 0) & (vb <= 0)
    on_bc = (~on_b) & (~on_c) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0) & (va <= 0)
    closest = np.where(
        inside[..., None],
        cand_in,
        np.where(
            on_a[..., None],
            cand_a,
            np.where(
                on_b[..., None],
                cand_b,
                np.where(
                    on_c[..., None],
                    cand_c,
                    np.where(
                        on_ab[..., None],
                        cand_ab,
                        np.where(on_ac[..., None], cand_ac, cand_bc),
                    ),
                ),
            ),
        ),
    )
    return np.linalg.norm(p - closest, axis=-1)


# ----------------------------------------------------------------------
# cutting the original mesh along the curve (strip preview)


def cut_along_curve(mesh, curve):
    """Split the surface open along the traced curve.

    The mesh is refined so every curve sample becomes a vertex and
    every in-face chord an edge, then the interior chords are cut.
    Returns (strip mesh, pairing) where pairing lists the two vertex-id
    copies of every cut edge as ``[[a0, a1], [b1, b0]]``.
    """
    refined, path = _refine_along_curve(mesh, curve)
    lookup = refined.halfedge_lookup()
    cut_edges = []
    for i in range(len(path) - 1):
        u, v = path[i], path[i + 1]
        if u == v:
            continue
        h = lookup.get((u, v))
        if h is None:
            # rim chords exist in one direction only and are not cut
            h = lookup.get((v, u))
        if h is None:
            raise AssertionError("refined curve chord is not a mesh edge")
        if refined.twin[h] >= 0:
            cut_edges.append((u, v))
    bmask = refined.is_boundary_vertex()
    for vid in (path[0], path[-1]):
        if not bmask[vid]:
            raise RibbonError("curve endpoint lies interior to the surface")
    strip = split_along_edges(refined, cut_edges)
    pairing = []
    for u, v in cut_edges:
        h = lookup[(u, v)]
        t = int(refined.twin[h])
        fl, fr = h // 3, t // 3
        cl = strip.faces[fl]
        cr = strip.faces[fr]
        ol = refined.faces[fl]
        orr = refined.faces[fr]
        lu = int(cl[list(ol).index(u)])
        lv = int(cl[list(ol).index(v)])
        ru = int(cr[list(orr).index(u)])
        rv = int(cr[list(orr).index(v)])
        pairing.append([[lu, lv], [rv, ru]])
    return strip, np.asarray(pairing, dtype=np.int64)


def _refine_along_curve(mesh, curve):
    """Insert curve samples as vertices and chords as edges."""
    V, F = mesh.vertices, mesh.faces
    n = curve.n_samples
    btol = 1e-9

    kinds = []
    for i in range(n):
        f = int(curve.face[i])
        b = curve.bary[i]
        j = int(np.argmax(b))
        if b[j] >= 1.0 - btol:
            kinds.append(("v", int(F[f, j])))
            continue
        j = int(np.argmin(b))
        if b[j] <= btol:
            u, v = int(F[f, (j + 1) % 3]), int(F[f, (j + 2) % 3])
            t = float(b[(j + 2) % 3] / (b[(j + 1) % 3] + b[(j + 2) % 3]))
            kinds.append(("e", (min(u, v), max(u, v)), t if u < v else 1 - t, i))
        else:
            kinds.append(("f", f, i))

    verts = [V]
    node_id = []
    new_id = mesh.n_vertices
    for k in kinds:
        if k[0] == "v":
            node_id.append(k[1])
        else:
            node_id.append(new_id)
            new_id += 1
            verts.append(curve.points[k[-1]][None])
    verts = np.vstack(verts)

    # star of each vertex, for locating the face of a segment
    star = [[] for _ in range(mesh.n_vertices)]
    for f in range(mesh.n_faces):
        for v in F[f]:
            star[int(v)].append(f)

    def faces_of(k):
        if k[0] == "v":
            return set(star[k[1]])
        if k[0] == "e":
            u, v = k[1]
            return {f for f in star[u] if v in F[f]}
        return {k[1]}

    seg_face = []
    for i in range(n - 1):
        shared = faces_of(kinds[i]) & faces_of(kinds[i + 1])
        if not shared:
            raise RibbonError(
                f"curve samples {i} and {i + 1} do not share a face"
            )
        seg_face.append(min(shared))

    per_face = {}
    for i, f in enumerate(seg_face):
        per_face.setdefault(f, []).append((node_id[i], node_id[i + 1]))
    edge_points = {}
    for i, k in enumerate(kinds):
        if k[0] == "e":
            edge_points.setdefault(k[1], []).append((k[2], node_id[i]))

    out_faces = []
    for f in range(mesh.n_faces):
        chords = per_face.get(f, [])
        corners = [int(v) for v in F[f]]
        poly = []
        for j in range(3):
            a, b = corners[j], corners[(j + 1) % 3]
            poly.append(a)
            pts_on = edge_points.get((min(a, b), max(a, b)), [])
            pts_on = sorted(pts_on) if a < b else sorted(pts_on, reverse=True)
            poly.extend(pid for _, pid in pts_on)
        chords = [(a, b) for a, b in chords if a != b]
        if not chords:
            if len(poly) == 3:
                out_faces.append(tuple(poly))
            else:
                out_faces.extend(_split_polygon_faces(poly, [], verts, corners))
            continue
        out_faces.extend(_split_polygon_faces(poly, chords, verts, corners))

    refined = SurfaceMesh(verts, np.asarray(out_faces, dtype=np.int64))
    path = []
    for i in range(n):
        if not path or path[-1] != node_id[i]:
            path.append(node_id[i])
    return refined, path


def _split_polygon_faces(poly, chords, verts, corners):
    """Triangulate one refined face respecting its in-face chords."""
    a3, b3, c3 = (verts[c] for c in corners)
    e = b3 - a3
    L = np.linalg.norm(e)
    ex = e / L
    nrm = np.cross(e, c3 - a3)
    ey = np.cross(nrm / np.linalg.norm(nrm), ex)

    def to2(vid):
        d = verts[vid] - a3
        return np.array([float(d @ ex), float(d @ ey)])

    pos = {vid: to2(vid) for vid in poly}
    graph = {}
    for a, b in chords:
        for vid in (a, b):
            if vid not in pos:
                pos[vid] = to2(vid)
        graph.setdefault(a, []).append(b)
        graph.setdefault(b, []).append(a)
    # decompose the chord graph into simple paths between boundary nodes
    on_bd = set(poly)
    paths = []
    visited = set()
    for start in sorted(graph):
        if start not in on_bd:
            continue
        for nxt in graph[start]:
            if (start, nxt) in visited:
                continue
            path = [start, nxt]
            visited.add((start, nxt))
            visited.add((nxt, start))
            while path[-1] not in on_bd:
                options = [
                    w
                    for w in graph[path[-1]]
                    if (path[-1], w) not in visited
                ]
                if not options:
                    raise RibbonError("curve chord dead-ends inside a face")
                w = options[0]
                visited.add((path[-1], w))
                visited.add((w, path[-1]))
                path.append(w)
            paths.append(path)

    tris = []
    _split_region(poly, paths, pos, tris)
    return tris


def _split_region(poly, paths, pos, tris):
    # chords running along the boundary are already polygon edges
    keep = []
    for path in paths:
        if len(path) == 2 and path[0] in poly and path[1] in poly:
            ia, ib = poly.index(path[0]), poly.index(path[1])
            if (ib - ia) % len(poly) == 1 or (ia - ib) % len(poly) == 1:
                continue
        keep.append(path)
    paths = keep
    usable = None
    for pi, path in enumerate(paths):
        if path[0] in poly and path[-1] in poly:
            ia, ib = poly.index(path[0]), poly.index(path[-1])
            if ia == ib:
                continue
            usable = (pi, ia, ib)
            break
    if usable is None:
        if paths:
            raise RibbonError("curve chords could not split a face region")
        pts = np.asarray([pos[v] for v in poly])
        area = 0.0
        for i in range(len(pts)):
            a, b = pts[i], pts[(i + 1) % len(pts)]
            area += a[0] * b[1] - a[1] * b[0]
        if abs(area) < 1e-16:
            return
        for t0, t1, t2 in triangulate_polygon(pts):
            tris.append((poly[t0], poly[t1], poly[t2]))
        return
    pi, ia, ib = usable
    path = paths.pop(pi)
    side_a = []
    i = ia
    while True:
        side_a.append(poly[i])
        if i == ib:
            break
        i = (i + 1) % len(poly)
    side_a.extend(reversed(path[1:-1]))
    side_b = []
    i = ib
    while True:
        side_b.append(poly[i])
        if i == ia:
            break
        i = (i + 1) % len(poly)
    side_b.extend(path[1:-1])
    rest_a, rest_b = [], []
    for pth in paths:
        probe = 0.5 * (pos[pth[0]] + pos[pth[1]])
        if len(pth) > 2:
            probe = pos[pth[1]]
        if _point_in_polygon(probe, [pos[v] for v in side_a]):
            rest_a.append(pth)
        else:
            rest_b.append(pth)
    _split_region(side_a, rest_a, pos, tris)
    _split_region(side_b, rest_b, pos, tris)


def _point_in_polygon(p, pts):
    inside = False
    n = len(pts)
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        if (a[1] > p[1]) != (b[1] > p[1]):
            t = (p[1] - a[1]) / (b[1] - a[1])
            if a[0] + t * (b[0] - a[0]) > p[0]:
                inside = not inside
    return inside
