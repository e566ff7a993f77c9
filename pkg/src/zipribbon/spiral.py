"""Spiraling curve design on the optimized charts.

A regular spiral on one part is a straight line in the period-extended
chart: tile the chart horizontally by its period and draw the line
across as many copies as the requested winding count.  Folding the
copies back turns the line into a spiral.  Parts traversed between two
transition circles on the same end get a two-line Fermat treatment:
one line winds in to a turn point on the open boundary, a short
connector runs along the boundary, and a second line winds back out
with the opposite horizontal advance.

Crossing an interface flips the horizontal advance (the charts are
glued by a rotation by pi), so consecutive parts alternate direction
in their own coordinates while the surface curve stays smooth.

Tracing walks each line triangle by triangle through its chart,
re-entering at the opposite seam copy whenever a seam edge is crossed,
and lifts every visited point to 3D by barycentric interpolation.
Samples are kept dense enough (a quarter of the local mean edge
length) that consecutive samples always share a face or an edge.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .tutte import _arc_cumlen


class SpiralError(Exception):
    """Raised when a curve cannot be planned or traced."""


class SpiralWarning(UserWarning):
    """Non-fatal design compromises (uneven Fermat crossings etc.)."""


@dataclass
class SpiralSpec:
    """User choices for the curve.

    ``traversal`` lists parts (names or indices) in visiting order;
    None uses the decomposition's own order.  ``windings`` is one count
    for every part or a per-part mapping.  ``crossings`` pins the
    passing point on an interface, as a 3D arc length along its arc.
    ``turn_points`` pins the two Fermat turn x positions on a turn
    part's open boundary line, in chart units.
    """

    traversal: tuple | None = None
    windings: int | dict = 3
    crossings: dict = field(default_factory=dict)
    turn_points: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d):
        # JSON keys arrive as strings; part and interface indices are ints
        def keyed(m):
            return {
                int(k) if isinstance(k, str) and k.lstrip("-").isdigit() else k: v
                for k, v in dict(m).items()
            }

        w = d.get("windings", 3)
        return cls(
            traversal=tuple(d["traversal"]) if d.get("traversal") is not None else None,
            windings=w if isinstance(w, int) else keyed(w),
            crossings=keyed(d.get("crossings", {})),
            turn_points=keyed(d.get("turn_points", {})),
        )

    def to_dict(self):
        out = {"windings": self.windings}
        if self.traversal is not None:
            out["traversal"] = list(self.traversal)
        if self.crossings:
            out["crossings"] = dict(self.crossings)
        if self.turn_points:
            out["turn_points"] = dict(self.turn_points)
        return out


@dataclass
class ParamLine:
    """One straight segment in a chart's period-extended domain."""

    part: int
    index: int  # 1 for regular spirals, 1-2 for the Fermat pair
    start: np.ndarray
    end: np.ndarray
    start_on: str  # chart line holding the start point: "bottom" | "top"
    end_on: str


@dataclass
class SurfaceCurve:
    """The lifted curve, sampled densely along the surface.

    ``face`` indexes the decomposition's working mesh; ``bary`` is the
    barycentric position in that face.  ``ext`` keeps the chart-domain
    coordinates (period-extended) the sample came from.
    """

    face: np.ndarray
    bary: np.ndarray
    points: np.ndarray
    part: np.ndarray
    line: np.ndarray
    ext: np.ndarray
    total_length: float
    lines: tuple = ()  # the ParamLines the curve was traced from

    @property
    def n_samples(self):
        return len(self.face)

    def to_dict(self):
        return {
            "face": self.face,
            "bary": self.bary,
            "points": self.points,
            "part": self.part,
            "line": self.line,
            "ext": self.ext,
            "total_length": self.total_length,
            "lines": [
                {
                    "part": ln.part,
                    "index": ln.index,
                    "start": ln.start,
                    "end": ln.end,
                    "start_on": ln.start_on,
                    "end_on": ln.end_on,
                }
                for ln in self.lines
            ],
        }

    @classmethod
    def from_dict(cls, d):
        lines = tuple(
            ParamLine(
                part=int(ln["part"]),
                index=int(ln["index"]),
                start=np.asarray(ln["start"], dtype=np.float64),
                end=np.asarray(ln["end"], dtype=np.float64),
                start_on=ln["start_on"],
                end_on=ln["end_on"],
            )
            for ln in d["lines"]
        )
        return cls(
            face=np.asarray(d["face"], dtype=np.int64),
            bary=np.asarray(d["bary"], dtype=np.float64),
            points=np.asarray(d["points"], dtype=np.float64),
            part=np.asarray(d["part"], dtype=np.int64),
            line=np.asarray(d["line"], dtype=np.int64),
            ext=np.asarray(d["ext"], dtype=np.float64),
            total_length=float(d["total_length"]),
            lines=lines,
        )


@dataclass
class CurveQuality:
    total_length: float
    spacing_mean: float
    spacing_std: float
    spacing_cv: float
    spacing_min: float
    spacings: np.ndarray
    turning_angles: np.ndarray  # radians, one per interior sample
    max_turning: float
    median_turning: float


def _cross(a, b):
    return a[0] * b[1] - a[1] * b[0]


def _ekey(a, b):
    return (a, b) if a < b else (b, a)


class _ChartFrame:
    """Solved-layout geometry of one chart, cached for tracing."""

    def __init__(self, chart_set, x, ci):
        chart = chart_set.charts[ci]
        if chart.part.index != ci:
            raise AssertionError("chart order must match part order")
        self.index = ci
        self.chart = chart
        base = int(chart_set.offsets[ci])
        self.xy = np.asarray(x[base : base + 2 * chart.n_vertices]).reshape(-1, 2)
        sl, sr = chart.seam_left, chart.seam_right
        self.period = float(self.xy[sr[0], 0] - self.xy[sl[0], 0])
        if self.period == 0.0:
            raise SpiralError("chart has zero period")
        self.step = np.array([self.period, 0.0])
        self.line_y = {}
        self.line_x = {}
        self.chain = {}
        for name in ("bottom", "top"):
            line = getattr(chart, name)
            self.chain[name] = np.asarray(line.vertices)
            self.line_x[name] = self.xy[line.vertices, 0].copy()
            self.line_y[name] = float(self.xy[line.vertices, 1].mean())
        mesh = chart.mesh
        self.faces = mesh.faces
        self.twin = mesh.twin
        self.verts3 = mesh.vertices
        self.work_face = np.asarray(chart.part.faces)
        self.lookup = mesh.halfedge_lookup()
        order = np.argsort(mesh.he_origin, kind="stable")
        splits = np.searchsorted(
            mesh.he_origin[order], np.arange(mesh.n_vertices + 1)
        )
        self.star = [
            np.unique(order[splits[i] : splits[i + 1]] // 3)
            for i in range(mesh.n_vertices)
        ]
        self.seam_edge = {}
        self.seam_vertex = {}
        for j in range(len(sl) - 1):
            a, b = int(sl[j]), int(sl[j + 1])
            c, d = int(sr[j]), int(sr[j + 1])
            self.seam_edge[_ekey(a, b)] = (c, d, -1)
            self.seam_edge[_ekey(c, d)] = (a, b, +1)
        for a, b in zip(sl, sr):
            self.seam_vertex[int(a)] = (int(b), -1)
            self.seam_vertex[int(b)] = (int(a), +1)
        tri = mesh.vertices[mesh.faces]
        elen = np.linalg.norm(tri - tri[:, [1, 2, 0]], axis=2)
        self.face_step = 0.25 * elen.mean(axis=1)

    def boundary_face(self, a, b):
        """(face, local edge) of the single halfedge on boundary edge a-b."""
        h = self.lookup.get((a, b))
        if h is None or self.twin[h] >= 0:
            h = self.lookup.get((b, a))
        if h is None or self.twin[h] >= 0:
            raise SpiralError(f"edge ({a}, {b}) is not a chart boundary edge")
        return h // 3, h % 3

    def wrap(self, xe, name):
        """Split an extended x into (integer copy shift, fundamental x)."""
        lo = float(self.line_x[name].min())
        p = abs(self.period)
        m = math.floor((xe - lo) / p)
        phi = xe - m * p
        k = m if self.period > 0 else -m
        return k, phi

    def bary(self, face, point, k, tol=1e-6):
        """Barycentric coords of an extended 2D point in a lifted face.

        The default tolerance absorbs the solver's constraint residual:
        planned points sit on the fitted horizontal line, actual line
        vertices on the solved one.
        """
        p = self.xy[self.faces[face]] + k * self.step
        v0 = p[1] - p[0]
        v1 = p[2] - p[0]
        v2 = np.asarray(point) - p[0]
        den = _cross(v0, v1)
        l1 = _cross(v2, v1) / den
        l2 = _cross(v0, v2) / den
        lam = np.array([1.0 - l1 - l2, l1, l2])
        if lam.min() < -tol:
            raise SpiralError(
                f"sample outside its triangle by {-lam.min():.3g} "
                f"(barycentric tolerance {tol:g})"
            )
        lam = np.clip(lam, 0.0, None)
        return lam / lam.sum()


def _chain_locate(xs, phi, tol):
    """Segment index and local parameter of a phase on a boundary chain."""
    seg = xs[1:] - xs[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (phi - xs[:-1]) / seg
    ok = np.nonzero((s >= -tol) & (s <= 1 + tol))[0]
    if len(ok) == 0:
        raise SpiralError(f"phase {phi:.6g} lies outside the boundary line")
    j = int(ok[0])
    return j, float(np.clip(s[j], 0.0, 1.0))


class _Collector:
    """Accumulates curve samples, dropping consecutive duplicates."""

    def __init__(self):
        self.face = []
        self.bary = []
        self.points = []
        self.part = []
        self.line = []
        self.ext = []

    def emit(self, fr, face, point, k, part, line):
        lam = fr.bary(face, point, k)
        pos = lam @ fr.verts3[fr.faces[face]]
        if self.points and np.linalg.norm(pos - self.points[-1]) <= 1e-12 * (
            1.0 + np.linalg.norm(pos)
        ):
            return
        self.face.append(int(fr.work_face[face]))
        self.bary.append(lam)
        self.points.append(pos)
        self.part.append(part)
        self.line.append(line)
        self.ext.append(np.asarray(point, dtype=np.float64))

    def to_curve(self):
        pts = np.vstack(self.points)
        length = float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())
        return SurfaceCurve(
            face=np.array(self.face, dtype=np.int64),
            bary=np.vstack(self.bary),
            points=pts,
            part=np.array(self.part, dtype=np.int64),
            line=np.array(self.line, dtype=np.int64),
            ext=np.vstack(self.ext),
            total_length=length,
        )


# ----------------------------------------------------------------------
# line planning


def _resolve_order(spec, decomp):
    if spec.traversal is None:
        return list(decomp.traversal)
    order = []
    for entry in spec.traversal:
        if isinstance(entry, str):
            order.append(decomp.part_named(entry).index)
        else:
            entry = int(entry)
            if not 0 <= entry < len(decomp.parts):
                raise SpiralError(f"traversal references unknown part {entry}")
            order.append(entry)
    if sorted(order) != list(range(len(decomp.parts))):
        raise SpiralError("traversal must visit every part exactly once")
    return order


def _windings_per_part(spec, decomp):
    n = len(decomp.parts)
    if isinstance(spec.windings, int):
        w = [spec.windings] * n
    else:
        w = [1] * n
        for key, val in spec.windings.items():
            pi = decomp.part_named(key).index if isinstance(key, str) else int(key)
            w[pi] = val
    for pi, wi in enumerate(w):
        if not (isinstance(wi, (int, np.integer)) and wi >= 1):
            raise SpiralError(
                f"winding count for part {decomp.parts[pi].name!r} "
                f"must be a positive integer, got {wi!r}"
            )
    return w


def _step_interfaces(decomp, order):
    out = []
    for a, b in zip(order, order[1:]):
        hits = [i for i in decomp.interfaces if set(i.parts) == {a, b}]
        if len(hits) != 1:
            raise SpiralError(
                f"parts {decomp.parts[a].name!r} and {decomp.parts[b].name!r} "
                f"share {len(hits)} interfaces; the traversal needs exactly one"
            )
        out.append(hits[0])
    return out


def _side_of(chart_set, iface, ci):
    for side in chart_set.sides[iface.index]:
        if side.chart == ci:
            return side
    raise AssertionError("interface side missing for chart")


def _arc_phase_nodes(chart_set, frames, iface, ci):
    """(3D cumulative lengths, chart x per node) along an interface arc."""
    side = _side_of(chart_set, iface, ci)
    xs = frames[ci].line_x[side.line][side.lo : side.hi + 1]
    if not side.forward:
        xs = xs[::-1]
    cum = _arc_cumlen(chart_set, iface)
    return cum, xs


def _crossing_x(chart_set, frames, iface, ci, s):
    cum, xs = _arc_phase_nodes(chart_set, frames, iface, ci)
    return float(np.interp(s, cum, xs))


def _wrap_half(delta, p):
    """Reduce a phase difference into [-p/2, p/2)."""
    return delta - p * math.floor(delta / p + 0.5)


def _scan_turn_pair(chart_set, frames, ci, ie, io, fixed, crossings):
    """Pick crossing arc lengths on a turn part's two interfaces.

    Aims for chart phases half a period apart (the even Fermat
    interleave); scans a 512-point arc-length grid over whichever
    crossings are still free, then refines the exit on its bracketing
    segment for an exact hit when one exists.
    """
    p = abs(frames[ci].period)
    cum_e, xs_e = _arc_phase_nodes(chart_set, frames, ie, ci)
    cum_o, xs_o = _arc_phase_nodes(chart_set, frames, io, ci)
    se = (
        np.array([crossings[ie.index]])
        if ie.index in fixed
        else np.linspace(0.0, cum_e[-1], 512)
    )
    so = (
        np.array([crossings[io.index]])
        if io.index in fixed
        else np.linspace(0.0, cum_o[-1], 512)
    )
    xe = np.interp(se, cum_e, xs_e)
    xo = np.interp(so, cum_o, xs_o)
    diff = xo[None, :] - xe[:, None] - p / 2.0
    res = np.abs(diff - p * np.floor(diff / p + 0.5))
    i, j = np.unravel_index(int(np.argmin(res)), res.shape)
    best_e, best_o = float(se[i]), float(so[j])

    # refine the free crossing along its monotone chain for an exact hit
    def refine(target_x, cum, xs):
        lo, hi = (xs[0], xs[-1]) if xs[0] <= xs[-1] else (xs[-1], xs[0])
        xs_a, cum_a = (xs, cum) if xs[0] <= xs[-1] else (xs[::-1], cum[::-1])
        best = None
        m = math.floor((lo - target_x) / p)
        while target_x + m * p <= hi + p:
            cand = target_x + m * p
            if lo <= cand <= hi:
                s = float(np.interp(cand, xs_a, cum_a))
                if best is None:
                    best = s
            m += 1
        return best

    if io.index not in fixed:
        hit = refine(float(np.interp(best_e, cum_e, xs_e)) + p / 2.0, cum_o, xs_o)
        if hit is not None:
            best_o = hit
    elif ie.index not in fixed:
        hit = refine(float(np.interp(best_o, cum_o, xs_o)) - p / 2.0, cum_e, xs_e)
        if hit is not None:
            best_e = hit
    crossings[ie.index] = best_e
    crossings[io.index] = best_o
    fixed.update((ie.index, io.index))
    gap = _wrap_half(
        _crossing_x(chart_set, frames, io, ci, best_o)
        - _crossing_x(chart_set, frames, ie, ci, best_e)
        - p / 2.0,
        p,
    )
    if abs(gap) > 1e-9 * p:
        warnings.warn(
            f"turn part {chart_set.decomp.parts[ci].name!r}: interface arcs "
            f"admit no crossing pair half a period apart (off by {gap:.3g}); "
            "winding spacing will be uneven near the interfaces",
            SpiralWarning,
            stacklevel=3,
        )


def _other_line(name):
    return "top" if name == "bottom" else "bottom"


def _nearest_copy(phase_x, target, period):
    return phase_x + period * round((target - phase_x) / period)


def plan_lines(spec, chart_set, x):
    """Plan the straight lines of the curve in every chart.

    Returns one ParamLine per regular part and two per Fermat turn
    part, ordered along the curve.
    """
    decomp = chart_set.decomp
    frames = [_ChartFrame(chart_set, x, ci) for ci in range(len(chart_set.charts))]
    order = _resolve_order(spec, decomp)
    winds = _windings_per_part(spec, decomp)
    steps = _step_interfaces(decomp, order)
    line_of = {}
    for idx, sides in chart_set.sides.items():
        for side in sides:
            line_of[(side.chart, idx)] = side.line

    arc_len = {i.index: _arc_cumlen(chart_set, i)[-1] for i in decomp.interfaces}
    crossings = {}
    fixed = set()
    for idx, s in spec.crossings.items():
        if idx not in arc_len:
            raise SpiralError(f"crossing names unknown interface {idx}")
        if not 0.0 <= s <= arc_len[idx]:
            raise SpiralError(
                f"crossing parameter {s:.6g} outside interface {idx} "
                f"(arc length {arc_len[idx]:.6g})"
            )
        crossings[idx] = float(s)
        fixed.add(idx)

    # turn parts first: their crossings want a half-period offset
    turn_parts = set()
    for pos, pi in enumerate(order):
        if 0 < pos < len(order) - 1:
            ie, io = steps[pos - 1], steps[pos]
            if line_of[(pi, ie.index)] == line_of[(pi, io.index)]:
                turn_parts.add(pi)
                _scan_turn_pair(chart_set, frames, pi, ie, io, fixed, crossings)
    for iface in steps:
        crossings.setdefault(iface.index, arc_len[iface.index] / 2.0)
    for key in spec.turn_points:
        ti = decomp.part_named(key).index if isinstance(key, str) else int(key)
        if ti not in turn_parts:
            raise SpiralError(
                f"part {decomp.parts[ti].name!r} is not a turn in this "
                "traversal; it takes no turn points"
            )

    lines = []
    adv = 1.0  # sign of dx in the current chart's own coordinates
    for pos, pi in enumerate(order):
        fr = frames[pi]
        w = winds[pi]
        p = abs(fr.period)
        ie = steps[pos - 1] if pos > 0 else None
        io = steps[pos] if pos < len(order) - 1 else None
        entry_line = line_of[(pi, ie.index)] if ie else None
        exit_line = line_of[(pi, io.index)] if io else None

        if ie is None:
            start_on = _other_line(exit_line) if exit_line else "bottom"
            if getattr(fr.chart, start_on).kind != "open":
                raise SpiralError(
                    f"first part {decomp.parts[pi].name!r} has no open "
                    "boundary to start the curve from"
                )
            sx = None  # free endpoint: placed w windings before the exit
        else:
            start_on = entry_line
            sx = _crossing_x(chart_set, frames, ie, pi, crossings[ie.index])
        if io is None:
            end_on = _other_line(entry_line) if entry_line else "top"
            if getattr(fr.chart, end_on).kind != "open":
                raise SpiralError(
                    f"last part {decomp.parts[pi].name!r} has no open "
                    "boundary to end the curve on"
                )
            ex = None
        else:
            end_on = exit_line
            ex = _crossing_x(chart_set, frames, io, pi, crossings[io.index])
        # pin the free open-boundary endpoints so the line spans exactly
        # w periods; a part with both ends open starts at the seam corner
        if sx is None and ex is None:
            sx = float(fr.line_x[start_on][0])
            ex = sx + adv * w * p
        elif sx is None:
            sx = ex - adv * w * p
        elif ex is None:
            ex = sx + adv * w * p

        if entry_line is not None and entry_line == exit_line:
            # Fermat turn: wind in to the open line, connect, wind out
            open_on = _other_line(entry_line)
            if getattr(fr.chart, open_on).kind != "open":
                raise SpiralError(
                    f"turn part {decomp.parts[pi].name!r} re-enters its "
                    "transition end but has no open boundary to turn at"
                )
            y_in = fr.line_y[entry_line]
            y_turn = fr.line_y[open_on]
            user = spec.turn_points.get(decomp.parts[pi].name)
            if user is None and pi in spec.turn_points:
                user = spec.turn_points[pi]
            t1 = sx + adv * w * p
            t2 = t1 + adv * 0.5 * p
            if user is not None:
                x1, x2 = float(user[0]), float(user[1])
                span_lo = float(fr.line_x[open_on].min())
                span_hi = float(fr.line_x[open_on].max())
                for val in (x1, x2):
                    if not span_lo - 1e-9 <= val <= span_hi + 1e-9:
                        raise SpiralError(
                            f"turn point {val:.6g} outside the open line "
                            f"span [{span_lo:.6g}, {span_hi:.6g}]"
                        )
                t1 = _nearest_copy(x1, t1, fr.period)
                t2 = _nearest_copy(x2, t2, fr.period)
                if abs(_wrap_half(abs(t2 - t1) - 0.5 * p, p)) > 1e-9 * p:
                    warnings.warn(
                        f"turn points on part {decomp.parts[pi].name!r} are "
                        "not half a period apart; boundary spacing will be "
                        "uneven",
                        SpiralWarning,
                        stacklevel=2,
                    )
            ex_ext = _nearest_copy(ex, t2 - adv * w * p, fr.period)
            lines.append(
                ParamLine(
                    part=pi,
                    index=1,
                    start=np.array([sx, y_in]),
                    end=np.array([t1, y_turn]),
                    start_on=entry_line,
                    end_on=open_on,
                )
            )
            lines.append(
                ParamLine(
                    part=pi,
                    index=2,
                    start=np.array([t2, y_turn]),
                    end=np.array([ex_ext, y_in]),
                    start_on=open_on,
                    end_on=exit_line,
                )
            )
            adv = -adv
        else:
            if ie is not None and io is not None:
                # both endpoints are pinned crossings: span the w periods
                # to the exit representative nearest the exact span
                end_ext = _nearest_copy(ex, sx + adv * w * p, fr.period)
            else:
                end_ext = ex
            lines.append(
                ParamLine(
                    part=pi,
                    index=1,
                    start=np.array([sx, fr.line_y[start_on]]),
                    end=np.array([end_ext, fr.line_y[end_on]]),
                    start_on=start_on,
                    end_on=end_on,
                )
            )
        adv = -adv  # rotation-by-pi gluing flips dx into the next chart
    return lines


# ----------------------------------------------------------------------
# tracing


def _seed(fr, line, tol):
    """Starting (face, entry edge, copy shift) for a line's march."""
    k, phi = fr.wrap(float(line.start[0]), line.start_on)
    chain = fr.chain[line.start_on]
    xs = fr.line_x[line.start_on]
    j, s = _chain_locate(xs, phi, tol)
    d = line.end - line.start
    if s <= tol:
        return _wedge_face(fr, int(chain[j]), k, d)
    if s >= 1 - tol:
        return _wedge_face(fr, int(chain[j + 1]), k, d)
    f, le = fr.boundary_face(int(chain[j]), int(chain[j + 1]))
    return f, le, k


def _wedge_face(fr, v, k, d):
    """Face of v's star whose corner wedge contains direction d."""
    dn = d / np.linalg.norm(d)
    cands = [(v, k)]
    if v in fr.seam_vertex:
        pv, dk = fr.seam_vertex[v]
        cands.append((pv, k + dk))
    best = None
    for vv, kk in cands:
        for f in fr.star[vv]:
            tri = fr.faces[f]
            c = int(np.nonzero(tri == vv)[0][0])
            pts = fr.xy[tri] + kk * fr.step
            e1 = pts[(c + 1) % 3] - pts[c]
            e2 = pts[(c + 2) % 3] - pts[c]
            s1 = _cross(e1, dn) / np.linalg.norm(e1)
            s2 = _cross(dn, e2) / np.linalg.norm(e2)
            score = min(s1, s2)
            if best is None or score > best[0]:
                best = (score, int(f), kk)
    if best is None or best[0] < -1e-9:
        raise SpiralError(
            f"no triangle wedge at vertex {v} contains the line direction"
        )
    return best[1], -1, best[2]


def _emit_span(fr, col, face, k, line, t0, t1, part, lidx):
    """Samples from t0 (exclusive) to t1 (inclusive) inside one face."""
    seg = line.end - line.start
    a = line.start + t0 * seg
    b = line.start + t1 * seg
    lam_a = fr.bary(face, a, k)
    lam_b = fr.bary(face, b, k)
    pa = lam_a @ fr.verts3[fr.faces[face]]
    pb = lam_b @ fr.verts3[fr.faces[face]]
    n = max(1, int(math.ceil(np.linalg.norm(pb - pa) / fr.face_step[face])))
    for i in range(1, n + 1):
        t = t0 + (t1 - t0) * i / n
        col.emit(fr, face, line.start + t * seg, k, part, lidx)


def _march(fr, col, line, max_steps):
    s0 = np.asarray(line.start, dtype=np.float64)
    d = np.asarray(line.end, dtype=np.float64) - s0
    if np.linalg.norm(d) == 0:
        raise SpiralError("degenerate zero-length line")
    face, entry, k = _seed(fr, line, 1e-9)
    col.emit(fr, face, s0, k, line.part, line.index)
    t = 0.0
    for _ in range(max_steps):
        tri = fr.faces[face]
        pts = fr.xy[tri] + k * fr.step
        best = None
        for j in range(3):
            if j == entry:
                continue
            pa = pts[j]
            pb = pts[(j + 1) % 3]
            e = pb - pa
            den = _cross(e, d)
            if abs(den) <= 1e-14 * np.linalg.norm(e) * np.linalg.norm(d):
                continue
            r = pa - s0
            t_hit = _cross(e, r) / den
            u = _cross(d, r) / den
            if t_hit <= t + 1e-9 or u < -1e-9 or u > 1 + 1e-9:
                continue
            if best is None or t_hit < best[0]:
                best = (t_hit, j, u)
        if best is None or best[0] >= 1.0 - 1e-9:
            _emit_span(fr, col, face, k, line, t, 1.0, line.part, line.index)
            return
        t_hit, j, u = best
        _emit_span(fr, col, face, k, line, t, t_hit, line.part, line.index)
        t = t_hit
        a, b = int(tri[j]), int(tri[(j + 1) % 3])
        if u <= 1e-9 or u >= 1 - 1e-9:
            v = a if u <= 1e-9 else b
            face, entry, k = _wedge_face(fr, v, k, d)
            continue
        tw = fr.twin[3 * face + j]
        if tw >= 0:
            face, entry = int(tw) // 3, int(tw) % 3
            continue
        jump = fr.seam_edge.get(_ekey(a, b))
        if jump is None:
            raise SpiralError(
                "line left its chart through a boundary line before its "
                f"endpoint (part {line.part}, t={t_hit:.6g})"
            )
        a2, b2, dk = jump
        k += dk
        face, entry = fr.boundary_face(a2, b2)
    raise SpiralError("marching did not terminate; chart layout is corrupt")


def _walk_open_line(fr, col, name, x_from, x_to, part, lidx):
    """Connector samples along an open boundary line between two phases."""
    if x_to == x_from:
        return
    xs = fr.line_x[name]
    chain = fr.chain[name]
    y = fr.line_y[name]
    p = abs(fr.period)
    lo, hi = min(x_from, x_to), max(x_from, x_to)
    nodes = []
    for i in range(len(chain) - 1):  # last chain vertex repeats the first
        base = float(xs[i])
        m = math.floor((lo - base) / p) + 1
        while base + m * p < hi:
            val = base + m * p
            if val > lo:
                nodes.append(val)
            m += 1
    nodes.sort(reverse=x_to < x_from)
    cur = x_from
    for val in nodes + [x_to]:
        mid = (cur + val) / 2.0
        k, phi = fr.wrap(mid, name)
        j, _ = _chain_locate(xs, phi, 1e-9)
        face, _ = fr.boundary_face(int(chain[j]), int(chain[j + 1]))
        pa = np.array([cur, y])
        pb = np.array([val, y])
        lam_a = fr.bary(face, pa, k)
        lam_b = fr.bary(face, pb, k)
        p3a = lam_a @ fr.verts3[fr.faces[face]]
        p3b = lam_b @ fr.verts3[fr.faces[face]]
        n = max(1, int(math.ceil(np.linalg.norm(p3b - p3a) / fr.face_step[face])))
        for i in range(1, n + 1):
            col.emit(
                fr,
                face,
                pa + (pb - pa) * i / n,
                k,
                part,
                lidx,
            )
        cur = val


def trace_curve(lines, chart_set, x, *, check_simple=True):
    """Lift the planned lines to a single sampled curve on the surface."""
    if not lines:
        raise SpiralError("no lines to trace")
    frames = {}
    col = _Collector()
    for idx, line in enumerate(lines):
        fr = frames.get(line.part)
        if fr is None:
            fr = frames[line.part] = _ChartFrame(chart_set, x, line.part)
        if idx and lines[idx - 1].part == line.part:
            _walk_open_line(
                fr,
                col,
                line.start_on,
                float(lines[idx - 1].end[0]),
                float(line.start[0]),
                line.part,
                0,
            )
        elif idx:
            f, le, k = _seed(fr, line, 1e-9)
            lam = fr.bary(f, line.start, k)
            pos = lam @ fr.verts3[fr.faces[f]]
            gap = float(np.linalg.norm(pos - col.points[-1]))
            if gap > 1e-6 * (1.0 + float(np.linalg.norm(pos))):
                raise SpiralError(
                    f"curve breaks by {gap:.3g} crossing into part {line.part}"
                )
        if line.start_on == line.end_on and line.start[1] == line.end[1]:
            # degenerate line along a boundary: follow the 3D boundary loop
            k, phi = fr.wrap(float(line.start[0]), line.start_on)
            chain = fr.chain[line.start_on]
            j, _ = _chain_locate(fr.line_x[line.start_on], phi, 1e-9)
            face, _ = fr.boundary_face(int(chain[j]), int(chain[j + 1]))
            col.emit(fr, face, line.start, k, line.part, line.index)
            _walk_open_line(
                fr,
                col,
                line.start_on,
                float(line.start[0]),
                float(line.end[0]),
                line.part,
                line.index,
            )
            continue
        # a straight extended-domain line meets each lifted face copy at
        # most once, so the visited-face count is bounded by copies
        span = abs(line.end[0] - line.start[0]) / abs(fr.period)
        max_steps = int((span + 3) * len(fr.faces)) + 100
        _march(fr, col, line, max_steps)
    curve = col.to_curve()
    curve.lines = tuple(lines)
    if check_simple:
        _check_simple(curve, frames)
    return curve


def _check_simple(curve, frames):
    """Reject curves that cross themselves on the surface.

    Works per chart in the extended domain.  Every segment is hashed at
    its own position and at a one-period shift to either side, so pairs
    that straddle the seam are caught; a shared sample endpoint is not a
    crossing (the test is strict).
    """
    for ci, fr in frames.items():
        mask = (curve.part[:-1] == ci) & (curve.part[1:] == ci)
        idx = np.nonzero(mask)[0]
        if len(idx) < 3:
            continue
        a = curve.ext[idx]
        b = curve.ext[idx + 1]
        p = abs(fr.period)
        off = np.array([p, 0.0])
        cell = max(float(np.linalg.norm(b - a, axis=1).max()), 1e-12) * 1.01
        buckets = {}
        for s in range(len(a)):
            for sh in (-1, 0, 1):
                x0, x1 = a[s, 0] + sh * p, b[s, 0] + sh * p
                gx0, gx1 = sorted((int(x0 // cell), int(x1 // cell)))
                gy0, gy1 = sorted((int(a[s, 1] // cell), int(b[s, 1] // cell)))
                for gx in range(gx0, gx1 + 1):
                    for gy in range(gy0, gy1 + 1):
                        buckets.setdefault((gx, gy), set()).add((s, sh))
        tested = set()
        for members in buckets.values():
            mem = sorted(members)
            for ii, (i, si) in enumerate(mem):
                for j, sj in mem[ii + 1 :]:
                    if i == j:
                        continue
                    d = sj - si  # only the relative shift matters
                    key = (i, j, d) if i < j else (j, i, -d)
                    if key in tested:
                        continue
                    tested.add(key)
                    i0, j0, d0 = key
                    if _segments_cross(
                        a[i0], b[i0], a[j0] + d0 * off, b[j0] + d0 * off
                    ):
                        raise SpiralError(
                            f"traced curve self-intersects on part {ci} "
                            f"(samples {idx[i0]} and {idx[j0]})"
                        )


def _segments_cross(p1, p2, q1, q2):
    d1 = _cross(p2 - p1, q1 - p1)
    d2 = _cross(p2 - p1, q2 - p1)
    d3 = _cross(q2 - q1, p1 - q1)
    d4 = _cross(q2 - q1, p2 - q1)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def curve_quality(curve, chart_set, x, n_rulings=64):
    """Winding spacing and smoothness statistics of a traced curve.

    Spacing is measured in 3D between consecutive crossings of vertical
    ruling lines (fixed chart phases), sorted by chart height, which
    handles regular and Fermat windings alike.
    """
    spacings = []
    for ci in np.unique(curve.part):
        fr = _ChartFrame(chart_set, x, int(ci))
        mask = (curve.part[:-1] == ci) & (curve.part[1:] == ci)
        # connector samples (line id 0) run along the boundary between
        # the two turn points; they are not windings
        mask &= (curve.line[:-1] != 0) & (curve.line[1:] != 0)
        idx = np.nonzero(mask)[0]
        if len(idx) == 0:
            continue
        p = abs(fr.period)
        lo = float(fr.line_x["bottom"].min())
        rulings = {}
        g1 = ((curve.ext[idx, 0] - lo) / p) * n_rulings - 0.5
        g2 = ((curve.ext[idx + 1, 0] - lo) / p) * n_rulings - 0.5
        for s, (u1, u2) in enumerate(zip(g1, g2)):
            lo_u, hi_u = (u1, u2) if u1 <= u2 else (u2, u1)
            m = math.ceil(lo_u)
            while m < hi_u:
                t = (m - u1) / (u2 - u1)
                y = (1 - t) * curve.ext[idx[s], 1] + t * curve.ext[idx[s] + 1, 1]
                pt = (1 - t) * curve.points[idx[s]] + t * curve.points[idx[s] + 1]
                rulings.setdefault(m % n_rulings, []).append((y, pt))
                m += 1
        for hits in rulings.values():
            if len(hits) < 2:
                continue
            hits.sort(key=lambda h: h[0])
            for (y0, p0), (y1, p1) in zip(hits, hits[1:]):
                spacings.append(float(np.linalg.norm(p1 - p0)))
    spacings = np.array(spacings)
    seg = np.diff(curve.points, axis=0)
    lens = np.linalg.norm(seg, axis=1)
    good = lens > 0
    dirs = seg[good] / lens[good][:, None]
    dots = np.clip(np.einsum("ij,ij->i", dirs[:-1], dirs[1:]), -1.0, 1.0)
    angles = np.arccos(dots)
    mean = float(spacings.mean()) if len(spacings) else 0.0
    std = float(spacings.std()) if len(spacings) else 0.0
    return CurveQuality(
        total_length=curve.total_length,
        spacing_mean=mean,
        spacing_std=std,
        spacing_cv=std / mean if mean > 0 else 0.0,
        spacing_min=float(spacings.min()) if len(spacings) else 0.0,
        spacings=spacings,
        turning_angles=angles,
        max_turning=float(angles.max()) if len(angles) else 0.0,
        median_turning=float(np.median(angles)) if len(angles) else 0.0,
    )


def lift_point(chart_set, x, ci, point):
    """Locate a chart-domain point: (working face, barycentric, 3D).

    The x coordinate may live in any period copy; the point is wrapped
    into the fundamental domain first.
    """
    fr = _ChartFrame(chart_set, x, ci)
    k0, _ = fr.wrap(float(point[0]), "bottom")
    tri = fr.xy[fr.faces]
    best = None
    for k in (k0 - 1, k0, k0 + 1):
        q = np.asarray(point, dtype=np.float64) - k * fr.step
        v0 = tri[:, 1] - tri[:, 0]
        v1 = tri[:, 2] - tri[:, 0]
        v2 = q[None, :] - tri[:, 0]
        den = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]
        l1 = (v2[:, 0] * v1[:, 1] - v2[:, 1] * v1[:, 0]) / den
        l2 = (v0[:, 0] * v2[:, 1] - v0[:, 1] * v2[:, 0]) / den
        lam = np.column_stack([1.0 - l1 - l2, l1, l2])
        worst = lam.min(axis=1)
        f = int(np.argmax(worst))
        if best is None or worst[f] > best[0]:
            best = (float(worst[f]), f, lam[f])
    if best[0] < -1e-9:
        raise SpiralError(
            f"point {point} outside all triangles by {-best[0]:.3g} "
            "(barycentric tolerance 1e-9)"
        )
    lam = np.clip(best[2], 0.0, None)
    lam = lam / lam.sum()
    face = best[1]
    pos = lam @ fr.verts3[fr.faces[face]]
    return int(fr.work_face[face]), lam, pos
