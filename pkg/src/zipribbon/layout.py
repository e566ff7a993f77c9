"""Bed packing and cut-plan export: SVG/DXF plans with zipper markers."""

import json
from dataclasses import dataclass

import numpy as np

from .mesh import SurfaceMesh


class LayoutError(Exception):
    pass


TICK_LENGTH = 3.0  # marker tick size, mm
LABEL_HEIGHT = 4.0  # sew label text height, mm


@dataclass
class Placement:
    piece: int
    rotation: int  # quarter turns counter-clockwise
    offset: np.ndarray  # (2,) translation applied after rotation
    size: np.ndarray  # (2,) placed bounding box

    def apply(self, pts):
        p = np.asarray(pts, dtype=np.float64)
        k = self.rotation % 4
        if k == 1:
            p = np.stack([-p[..., 1], p[..., 0]], axis=-1)
        elif k == 2:
            p = -p
        elif k == 3:
            p = np.stack([p[..., 1], -p[..., 0]], axis=-1)
        return p + self.offset


@dataclass
class Marker:
    side: int  # zipper tape: 0 left of travel, 1 right
    index: int  # position number, shared between twin sides
    piece: int
    point: np.ndarray  # (2,) bed coords
    tick: np.ndarray  # (2, 2) short segment pointing off the piece


@dataclass
class SewLabel:
    text: str
    piece: int
    point: np.ndarray  # (2,) bed coords


@dataclass
class CutPlan:
    bed: tuple
    spacing: float
    marker_interval: float
    placements: list
    outlines: list  # per piece: closed loops, (m, 2) bed coords each
    markers: list
    labels: list
    zipper_length: float  # one tape side, mm

    @property
    def markers_per_side(self):
        return sum(1 for m in self.markers if m.side == 0)

    def cut_length(self):
        total = 0.0
        for loops in self.outlines:
            for loop in loops:
                d = np.roll(loop, -1, axis=0) - loop
                total += float(np.linalg.norm(d, axis=1).sum())
        return total

    def metadata(self):
        return {
            "bed": [float(self.bed[0]), float(self.bed[1])],
            "spacing": self.spacing,
            "marker_interval": self.marker_interval,
            "pieces": len(self.placements),
            "sew_pairs": len(self.labels) // 2,
            "zipper_length": self.zipper_length,
            "cut_length": self.cut_length(),
            "markers_per_side": self.markers_per_side,
        }

    def metadata_json(self):
        return json.dumps(self.metadata(), sort_keys=True, indent=2) + "\n"


# ----------------------------------------------------------------------
# shelf packing


def _choose_orientation(pi, dims, usable, bed):
    w, h = float(dims[0]), float(dims[1])
    uw, uh = usable
    plain = w <= uw and h <= uh
    turned = h <= uw and w <= uh
    if not (plain or turned):
        raise LayoutError(
            f"piece {pi} ({w:g} x {h:g}) does not fit the "
            f"{bed[0]:g} x {bed[1]:g} bed in any orientation"
        )
    # prefer the flatter orientation so shelves stay low
    if plain and (not turned or h <= w):
        return 0, w, h
    return 1, h, w


def _rotated_origin(rotation, w, h):
    # bbox minimum of the rotated piece, to cancel in the offset
    return [(0.0, 0.0), (-h, 0.0), (-w, -h), (0.0, -w)][rotation % 4]


def _shelf_pack(sizes, bed, spacing):
    """Shelf-pack bounding boxes; returns (rotation, corner) per piece.

    Pieces keep ``spacing`` from each other and from the bed edges.
    Deterministic: shelves fill in order of decreasing placed height,
    ties broken by width, then by input position.
    """
    bw, bh = float(bed[0]), float(bed[1])
    usable = (bw - 2.0 * spacing, bh - 2.0 * spacing)
    order = []
    for pi, dims in enumerate(sizes):
        rot, pw, ph = _choose_orientation(pi, dims, usable, (bw, bh))
        order.append((pi, rot, pw, ph))
    order.sort(key=lambda it: (-it[3], -it[2], it[0]))

    out = [None] * len(sizes)
    x, y, shelf = spacing, spacing, 0.0
    for pi, rot, pw, ph in order:
        if x + pw > bw - spacing:
            x = spacing
            y += shelf + spacing
            shelf = 0.0
        if y + ph > bh - spacing:
            raise LayoutError(f"pieces overflow the {bw:g} x {bh:g} bed")
        out[pi] = (rot, (x, y))
        x += pw + spacing
        shelf = max(shelf, ph)
    return out


def build_plan(flat, bed=(600.0, 400.0), spacing=5.0, marker_interval=50.0):
    """Split a flat ribbon so every piece fits the bed, then pack it.

    The split limit is the bed shrunk by the margins, so any piece the
    splitter produces is guaranteed to pack.
    """
    from .ribbon import SplitPolicy, split_ribbon

    limit = (bed[0] - 2.0 * spacing, bed[1] - 2.0 * spacing)
    if min(limit) <= 0:
        raise LayoutError("spacing leaves no usable bed area")
    split = split_ribbon(flat, SplitPolicy(bed=limit))
    return pack_pieces(
        split, flat, bed=bed, spacing=spacing, marker_interval=marker_interval
    )


def pack_pieces(split, flat, bed=(600.0, 400.0), spacing=5.0, marker_interval=50.0):
    """Pack split pieces onto one cutter bed and compile the cut plan.

    Shelf packing by decreasing placed height; pieces may be rotated by
    quarter turns only, and ``spacing`` is kept between pieces and to
    the bed edge.  Marker points every ``marker_interval`` along both
    zipper tape sides, matched one to one by arc length.  All lengths
    are millimetres.
    """
    pieces = split.pieces
    if not pieces:
        raise LayoutError("no pieces to place")
    bw, bh = float(bed[0]), float(bed[1])
    if bw <= 0 or bh <= 0 or spacing < 0 or marker_interval <= 0:
        raise LayoutError("bed, spacing and marker interval must be positive")

    packed = _shelf_pack([p.bbox() for p in pieces], (bw, bh), spacing)
    placements = []
    for pi, (rot, (x, y)) in enumerate(packed):
        w, h = pieces[pi].bbox()
        ox, oy = _rotated_origin(rot, float(w), float(h))
        placements.append(
            Placement(
                piece=pi,
                rotation=rot,
                offset=np.array([x - ox, y - oy]),
                size=np.array([w, h] if rot % 2 == 0 else [h, w], dtype=np.float64),
            )
        )

    outlines = [_piece_outline(pieces[pi], placements[pi]) for pi in range(len(pieces))]
    tick = min(TICK_LENGTH, spacing) if spacing > 0 else TICK_LENGTH
    markers, tape_length = _zipper_markers(
        split, flat, placements, marker_interval, tick
    )
    labels = _sew_labels(split, placements)
    return CutPlan(
        bed=(bw, bh),
        spacing=float(spacing),
        marker_interval=float(marker_interval),
        placements=placements,
        outlines=outlines,
        markers=markers,
        labels=labels,
        zipper_length=tape_length,
    )


def _piece_outline(piece, placement):
    flat3 = np.hstack([piece.vertices, np.zeros((len(piece.vertices), 1))])
    sub = SurfaceMesh(flat3, piece.local_faces)
    return [
        placement.apply(piece.vertices[np.asarray(loop.vertices)])
        for loop in sub.boundary_loops()
    ]


# ----------------------------------------------------------------------
# zipper markers and sew labels


def _piece_maps(split, flat):
    ribbon = flat.ribbon
    face_piece = np.full(ribbon.mesh.n_faces, -1, dtype=np.int64)
    local = []
    for pi, piece in enumerate(split.pieces):
        face_piece[piece.faces] = pi
        local.append({int(v): k for k, v in enumerate(piece.vertex_ids)})
    if (face_piece < 0).any():
        raise LayoutError("split pieces do not cover the ribbon")
    return face_piece, local


def _tape_rows(split, ribbon, face_piece, local, lookup, side):
    """Per pairing row, in curve order: piece, local start/end, interior point."""
    faces = ribbon.mesh.faces
    rows = []
    for row in ribbon.pairing:
        if side == 0:
            u, v = int(row[0][0]), int(row[0][1])
        else:
            u, v = int(row[1][1]), int(row[1][0])
        h = lookup.get((u, v))
        if h is None:
            h = lookup.get((v, u))
        if h is None:
            raise LayoutError("zipper edge is not an edge of the ribbon")
        pi = int(face_piece[h // 3])
        piece = split.pieces[pi]
        (w,) = [int(c) for c in faces[h // 3] if int(c) not in (u, v)]
        loc = local[pi]
        rows.append(
            (
                pi,
                piece.vertices[loc[u]],
                piece.vertices[loc[v]],
                piece.vertices[loc[w]],
            )
        )
    return rows


def _zipper_markers(split, flat, placements, interval, tick_len):
    ribbon = flat.ribbon
    face_piece, local = _piece_maps(split, flat)
    lookup = ribbon.mesh.halfedge_lookup()
    sides = []
    for side in (0, 1):
        rows = _tape_rows(split, ribbon, face_piece, local, lookup, side)
        lens = np.array([np.linalg.norm(p1 - p0) for _, p0, p1, _ in rows])
        cum = np.concatenate([[0.0], np.cumsum(lens)])
        sides.append((rows, lens, cum))

    tape_length = float(sides[0][2][-1])
    if tape_length == 0.0:
        return [], 0.0
    count = int(tape_length // interval) + 1

    markers = []
    for side, (rows, lens, cum) in enumerate(sides):
        total = float(cum[-1])
        for j in range(count):
            s = min(j * interval, total)
            k = min(int(np.searchsorted(cum, s, side="right")) - 1, len(rows) - 1)
            pi, p0, p1, inside = rows[k]
            t = (s - cum[k]) / lens[k] if lens[k] > 0 else 0.0
            point = p0 + t * (p1 - p0)
            edge = p1 - p0
            n = np.array([-edge[1], edge[0]])
            n /= max(np.linalg.norm(n), 1e-30)
            if np.dot(n, inside - p0) > 0:
                n = -n  # tick points off the piece
            pl = placements[pi]
            markers.append(
                Marker(
                    side=side,
                    index=j,
                    piece=pi,
                    point=pl.apply(point),
                    tick=pl.apply(np.stack([point, point + tick_len * n])),
                )
            )
    return markers, tape_length


def _sew_labels(split, placements):
    labels = []
    locals_ = [
        {int(v): k for k, v in enumerate(p.vertex_ids)} for p in split.pieces
    ]
    for si, sew in enumerate(split.sew_pairs):
        text = f"S{si + 1}"
        for pi in (sew.piece_a, sew.piece_b):
            piece = split.pieces[pi]
            loc = locals_[pi]
            mid = 0.5 * (
                piece.vertices[loc[int(sew.edge[0])]]
                + piece.vertices[loc[int(sew.edge[1])]]
            )
            labels.append(
                SewLabel(text=text, piece=pi, point=placements[pi].apply(mid))
            )
    return labels


# ----------------------------------------------------------------------
# plan emission


def _g(v):
    return f"{float(v):.17g}"


def emit_plan(plan, format="svg"):
    """Serialize a cut plan; returns the file content as a string.

    SVG 1.1 with millimetre user units and layer groups "cut", "mark",
    "label" (y axis flipped so the plan reads top-down); DXF R12 with the
    same layer names, y up, one drawing unit per millimetre.
    """
    if format == "svg":
        return _emit_svg(plan)
    if format == "dxf":
        return _emit_dxf(plan)
    raise LayoutError(f"unknown plan format {format!r}")


def _emit_svg(plan):
    bw, bh = plan.bed

    def xy(p):
        return f"{_g(p[0])} {_g(bh - p[1])}"

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_g(bw)}mm" height="{_g(bh)}mm" '
        f'viewBox="0 0 {_g(bw)} {_g(bh)}">',
        '<g id="cut" fill="none" stroke="#000000" stroke-width="0.1">',
    ]
    for loops in plan.outlines:
        for loop in loops:
            d = "M " + " L ".join(xy(p) for p in loop) + " Z"
            out.append(f'<path d="{d}"/>')
    out.append("</g>")
    out.append('<g id="mark" fill="none" stroke="#ff0000" stroke-width="0.1">')
    for m in plan.markers:
        out.append(f'<path d="M {xy(m.tick[0])} L {xy(m.tick[1])}"/>')
    out.append("</g>")
    out.append(f'<g id="label" fill="#0000ff" font-size="{_g(LABEL_HEIGHT)}">')
    for lb in plan.labels:
        x, y = _g(lb.point[0]), _g(bh - lb.point[1])
        out.append(f'<text x="{x}" y="{y}">{lb.text}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _dxf_records(plan):
    yield from ("0", "SECTION", "2", "HEADER")
    yield from ("9", "$ACADVER", "1", "AC1009")
    yield from ("0", "ENDSEC")
    yield from ("0", "SECTION", "2", "TABLES", "0", "TABLE", "2", "LAYER", "70", "3")
    for name, color in (("cut", "7"), ("mark", "1"), ("label", "3")):
        yield from ("0", "LAYER", "2", name, "70", "0", "62", color)
        yield from ("6", "CONTINUOUS")
    yield from ("0", "ENDTAB", "0", "ENDSEC")
    yield from ("0", "SECTION", "2", "ENTITIES")
    for loops in plan.outlines:
        for loop in loops:
            yield from ("0", "POLYLINE", "8", "cut", "66", "1", "70", "1")
            for p in loop:
                yield from ("0", "VERTEX", "8", "cut")
                yield from ("10", _g(p[0]), "20", _g(p[1]), "30", "0")
            yield from ("0", "SEQEND")
    for m in plan.markers:
        yield from ("0", "LINE", "8", "mark")
        yield from ("10", _g(m.tick[0][0]), "20", _g(m.tick[0][1]), "30", "0")
        yield from ("11", _g(m.tick[1][0]), "21", _g(m.tick[1][1]), "31", "0")
    for lb in plan.labels:
        yield from ("0", "TEXT", "8", "label")
        yield from ("10", _g(lb.point[0]), "20", _g(lb.point[1]), "30", "0")
        yield from ("40", _g(LABEL_HEIGHT), "1", lb.text)
    yield from ("0", "ENDSEC", "0", "EOF")


def _emit_dxf(plan):
    return "\n".join(_dxf_records(plan)) + "\n"
