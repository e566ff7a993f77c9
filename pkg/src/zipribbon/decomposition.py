"""Cylindrical decomposition of a triangle mesh.

The user supplies a segmentation: closed vertex loops that separate the
surface into tube-like parts, optional open-boundary sites (punched
holes or slits), and a traversal order for the spiral.  This module
validates the segmentation, splits the mesh into parts, classifies each
part's two boundary circles, and cuts every part along an interior seam
into a disk chart ready for parameterization.

Vertex ids in a ``Segmentation`` always refer to the input mesh; ids are
remapped internally as open sites change the vertex table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .mesh import (
    MeshError,
    SurfaceMesh,
    cut_along_path,
    insert_open_boundary,
    split_along_edges,
)


class SegmentationError(MeshError):
    """A segmentation that cannot produce a valid cylinder decomposition."""


@dataclass(frozen=True)
class Segmentation:
    """User-authored decomposition recipe, in input-mesh vertex ids.

    ``loops`` are closed simple vertex cycles (first vertex not
    repeated).  ``traversal`` lists parts in spiral order, as indices or
    as entries of ``names``; parts are numbered by their smallest face
    id after open sites are applied.
    """

    loops: tuple[tuple[int, ...], ...]
    open_sites: tuple[dict, ...] = ()
    traversal: tuple[int | str, ...] | None = None
    names: tuple[str, ...] | None = None

    @classmethod
    def from_dict(cls, d):
        return cls(
            loops=tuple(tuple(int(v) for v in loop) for loop in d.get("loops", [])),
            open_sites=tuple(dict(s) for s in d.get("open_sites", [])),
            traversal=tuple(d["traversal"]) if d.get("traversal") is not None else None,
            names=tuple(d["names"]) if d.get("names") is not None else None,
        )

    def to_dict(self):
        out = {
            "loops": [list(loop) for loop in self.loops],
            "open_sites": [dict(s) for s in self.open_sites],
        }
        if self.traversal is not None:
            out["traversal"] = list(self.traversal)
        if self.names is not None:
            out["names"] = list(self.names)
        return out


def load_segmentation(path):
    return Segmentation.from_dict(json.loads(Path(path).read_text()))


def save_segmentation(seg, path):
    Path(path).write_text(json.dumps(seg.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class Interface:
    """Maximal arc of loop edges separating one pair of parts.

    ``vertices`` are working-mesh ids in geometric order along the arc
    (closed loops repeat the first vertex at the end).
    """

    index: int
    parts: tuple[int, int]
    vertices: tuple[int, ...]

    @property
    def n_edges(self):
        return len(self.vertices) - 1


@dataclass(frozen=True)
class PartEnd:
    """One boundary circle of a part.

    ``circle`` holds part-local vertex ids in boundary orientation.
    ``kind`` is "transition" (made of loop edges) or "open" (mesh rim,
    punched hole, or slit).
    """

    circle: tuple[int, ...]
    kind: str
    interfaces: tuple[int, ...]


@dataclass
class Part:
    index: int
    name: str
    faces: np.ndarray  # face ids in the working mesh
    mesh: SurfaceMesh  # compact uncut annulus
    to_work: np.ndarray  # local vertex id -> working-mesh vertex id
    ends: tuple[PartEnd, PartEnd]  # (bottom, top)
    role: str  # single | start | end | through | turn

    @property
    def bottom(self):
        return self.ends[0]

    @property
    def top(self):
        return self.ends[1]


@dataclass
class Decomposition:
    source: SurfaceMesh
    mesh: SurfaceMesh  # working mesh: source with open sites applied
    orig_vertex: np.ndarray  # working vertex id -> source vertex id
    parts: list[Part]
    interfaces: list[Interface]
    traversal: tuple[int, ...]
    junctions: frozenset[int]  # working ids where three or more loop arcs meet

    def part_named(self, name):
        for p in self.parts:
            if p.name == name:
                return p
        raise KeyError(name)


def _remap_state(state, source_vertex, n_prev):
    """Track unique current copies of original vertices across a rebuild.

    state[orig] is the current vertex id, -1 once removed, -2 once
    duplicated (a slit copy, no longer addressable).
    """
    counts = np.bincount(source_vertex, minlength=n_prev)
    first = np.full(n_prev, -1, dtype=np.int64)
    first[source_vertex[::-1]] = np.arange(len(source_vertex) - 1, -1, -1)
    out = state.copy()
    live = state >= 0
    prev = state[live]
    mapped = first[prev]
    mapped[counts[prev] == 0] = -1
    mapped[counts[prev] > 1] = -2
    out[live] = mapped
    return out


def _remap_site(site, state):
    site = dict(site)
    keys = [k for k in ("vertex", "path") if k in site]
    for k in keys:
        ids = np.atleast_1d(np.asarray(site[k], dtype=np.int64))
        cur = state[ids]
        if np.any(cur < 0):
            raise SegmentationError(
                "open site references a vertex removed or split by an earlier site"
            )
        site[k] = int(cur[0]) if k == "vertex" else [int(v) for v in cur]
    return site


def _check_loop(mesh, loop, index):
    if len(loop) < 3:
        raise SegmentationError(f"loop {index} has fewer than 3 vertices")
    if len(set(loop)) != len(loop):
        raise SegmentationError(f"loop {index} revisits a vertex")
    lookup = mesh.halfedge_lookup()
    for a, b in zip(loop, loop[1:] + (loop[0],)):
        if (a, b) not in lookup and (b, a) not in lookup:
            raise SegmentationError(f"loop {index} uses (original) non-edge pair")
    boundary = mesh.is_boundary_vertex()
    if np.any(boundary[list(loop)]):
        raise SegmentationError(f"loop {index} touches an open boundary")


def _face_parts(mesh, cut_edges):
    """Union faces across every interior edge not in the cut set."""
    parent = np.arange(mesh.n_faces, dtype=np.int64)

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    twin = mesh.twin
    org, dst = mesh.he_origin, mesh.he_dest
    for h in range(len(twin)):
        t = twin[h]
        if t < h:  # visit each interior edge once
            continue
        key = (org[h], dst[h]) if org[h] < dst[h] else (dst[h], org[h])
        if key in cut_edges:
            continue
        ra, rb = find(h // 3), find(t // 3)
        if ra != rb:
            parent[ra] = rb
    roots = np.array([find(f) for f in range(mesh.n_faces)])
    order = {}
    labels = np.empty(mesh.n_faces, dtype=np.int64)
    for f in range(mesh.n_faces):
        labels[f] = order.setdefault(roots[f], len(order))
    return labels, len(order)


def _cut_graph_arcs(mesh, cut_edges, face_part, orig_vertex):
    """Split the union of loop edges into maximal arcs by part pair.

    Returns (interfaces, edge_to_interface, junction set).  Arcs run
    junction to junction; loops without junctions become one closed arc.
    Orientation is deterministic: the smaller original id leads.
    """
    lookup = mesh.halfedge_lookup()
    adj = {}
    pair_of = {}
    for u, v in cut_edges:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
        h = lookup.get((u, v))
        t = mesh.twin[h]
        if t < 0:
            raise SegmentationError(f"loop edge ({u}, {v}) lies on the boundary")
        pa, pb = int(face_part[h // 3]), int(face_part[t // 3])
        if pa == pb:
            raise SegmentationError(
                f"loop edge ({int(orig_vertex[u])}, {int(orig_vertex[v])}) does not "
                "separate two parts"
            )
        pair_of[(u, v) if u < v else (v, u)] = (min(pa, pb), max(pa, pb))
    junctions = {v for v, nb in adj.items() if len(nb) >= 3}

    seen = set()
    chains = []

    def walk(a, b):
        """Collect the arc starting with edge a->b until the next junction."""
        chain = [a, b]
        key = (a, b) if a < b else (b, a)
        seen.add(key)
        while chain[-1] not in junctions:
            nxt = [w for w in adj[chain[-1]] if w != chain[-2]]
            if not nxt:  # degree-1 cut vertex cannot happen on valid loops
                raise SegmentationError("loop arcs do not close up")
            chain.append(nxt[0])
            key = (chain[-2], chain[-1]) if chain[-2] < chain[-1] else (chain[-1], chain[-2])
            if key in seen:
                break
            seen.add(key)
        return chain

    for j in sorted(junctions, key=lambda v: int(orig_vertex[v])):
        for nb in sorted(adj[j], key=lambda v: int(orig_vertex[v])):
            key = (j, nb) if j < nb else (nb, j)
            if key not in seen:
                chains.append(walk(j, nb))
    for (u, v) in sorted(cut_edges, key=lambda e: (int(orig_vertex[e[0]]), int(orig_vertex[e[1]]))):
        if ((u, v) if u < v else (v, u)) in seen:
            continue
        # junction-free closed loop: start at its smallest original id.
        # walk() stops only after re-appending the first edge, so drop it.
        loop_verts = walk(u, v)[:-2]
        k = min(range(len(loop_verts)), key=lambda i: int(orig_vertex[loop_verts[i]]))
        cycle = loop_verts[k:] + loop_verts[:k]
        after, before = cycle[1], cycle[-1]
        if int(orig_vertex[before]) < int(orig_vertex[after]):
            cycle = [cycle[0]] + cycle[:0:-1]
        chains.append(cycle + [cycle[0]])

    def canon(chain):
        a, b = int(orig_vertex[chain[0]]), int(orig_vertex[chain[-1]])
        if b < a or (b == a and int(orig_vertex[chain[-2]]) < int(orig_vertex[chain[1]])):
            return chain[::-1]
        return chain

    chains = [canon(c) for c in chains]
    chains.sort(key=lambda c: [int(orig_vertex[v]) for v in c])
    interfaces, edge_to_iface = [], {}
    for i, chain in enumerate(chains):
        key0 = (chain[0], chain[1]) if chain[0] < chain[1] else (chain[1], chain[0])
        interfaces.append(Interface(i, pair_of[key0], tuple(chain)))
        for a, b in zip(chain, chain[1:]):
            edge_to_iface[(a, b) if a < b else (b, a)] = i
    return interfaces, edge_to_iface, frozenset(junctions)


def _submesh(mesh, face_ids):
    faces = mesh.faces[face_ids]
    used = np.unique(faces)
    local = np.full(mesh.n_vertices, -1, dtype=np.int64)
    local[used] = np.arange(len(used))
    sub = SurfaceMesh(mesh.vertices[used], local[faces])
    return sub, used


def _resolve_traversal(seg, n_parts, names):
    if seg.traversal is None:
        if n_parts == 1:
            return (0,)
        raise SegmentationError("traversal order is required for multi-part meshes")
    trav = []
    for entry in seg.traversal:
        if isinstance(entry, str):
            if entry not in names:
                raise SegmentationError(f"traversal names unknown part {entry!r}")
            trav.append(names.index(entry))
        else:
            trav.append(int(entry))
    if sorted(trav) != list(range(n_parts)):
        raise SegmentationError(
            f"traversal must visit each of the {n_parts} parts exactly once"
        )
    return tuple(trav)


def apply_segmentation(mesh, seg):
    """Validate a segmentation and split the mesh into cylinder parts."""
    if isinstance(seg, dict):
        seg = Segmentation.from_dict(seg)

    work = mesh
    state = np.arange(mesh.n_vertices, dtype=np.int64)
    orig_vertex = np.arange(mesh.n_vertices, dtype=np.int64)
    for site in seg.open_sites:
        n_prev = work.n_vertices
        # rebuild without source_vertex so the new mapping is one step
        base = SurfaceMesh(work.vertices, work.faces)
        work = insert_open_boundary(base, _remap_site(site, state))
        state = _remap_state(state, work.source_vertex, n_prev)
        orig_vertex = orig_vertex[work.source_vertex]

    loops = []
    for i, loop in enumerate(seg.loops):
        ids = np.asarray(loop, dtype=np.int64)
        if np.any(ids < 0) or np.any(ids >= len(state)):
            raise SegmentationError(f"loop {i} references a vertex out of range")
        cur = state[ids]
        if np.any(cur < 0):
            raise SegmentationError(
                f"loop {i} touches an open boundary site or removed vertex"
            )
        loops.append(tuple(int(v) for v in cur))
        _check_loop(work, loops[-1], i)

    cut_edges = set()
    for loop in loops:
        for a, b in zip(loop, loop[1:] + (loop[0],)):
            cut_edges.add((a, b) if a < b else (b, a))

    face_part, n_parts = _face_parts(work, cut_edges)
    if seg.names is not None and len(seg.names) != n_parts:
        raise SegmentationError(
            f"{len(seg.names)} names given but the loops produce {n_parts} parts"
        )
    names = list(seg.names) if seg.names is not None else [f"part{i}" for i in range(n_parts)]

    if cut_edges:
        interfaces, edge_to_iface, junctions = _cut_graph_arcs(
            work, cut_edges, face_part, orig_vertex
        )
    else:
        interfaces, edge_to_iface, junctions = [], {}, frozenset()

    split = split_along_edges(SurfaceMesh(work.vertices, work.faces), cut_edges)
    parts = []
    for pi in range(n_parts):
        face_ids = np.flatnonzero(face_part == pi)
        sub, to_split = _submesh(split, face_ids)
        to_work = split.source_vertex[to_split]
        circles = sub.boundary_loops()
        if sub.euler_characteristic() != 0 or len(circles) != 2:
            raise SegmentationError(
                f"part {pi} ({names[pi]}) is not a topological cylinder: "
                f"{len(circles)} boundary circles, euler characteristic "
                f"{sub.euler_characteristic()}"
            )
        ends = []
        for circ in circles:
            kinds = set()
            ifaces = set()
            cv = list(circ.vertices)
            for a, b in zip(cv, cv[1:] + cv[:1]):
                wa, wb = int(to_work[a]), int(to_work[b])
                key = (wa, wb) if wa < wb else (wb, wa)
                if key in edge_to_iface:
                    kinds.add("transition")
                    ifaces.add(edge_to_iface[key])
                else:
                    kinds.add("open")
            if len(kinds) != 1:
                raise SegmentationError(
                    f"part {pi} ({names[pi]}) has a boundary circle mixing loop "
                    "edges and open boundary"
                )
            ends.append(PartEnd(tuple(cv), kinds.pop(), tuple(sorted(ifaces))))
        parts.append(
            Part(
                index=pi,
                name=names[pi],
                faces=face_ids,
                mesh=sub,
                to_work=to_work,
                ends=(ends[0], ends[1]),
                role="",
            )
        )

    traversal = _resolve_traversal(seg, n_parts, names)
    _assign_roles(parts, interfaces, traversal)
    return Decomposition(
        source=mesh,
        mesh=work,
        orig_vertex=orig_vertex,
        parts=parts,
        interfaces=interfaces,
        traversal=traversal,
        junctions=junctions,
    )


def _connecting_interface(interfaces, pa, pb, names):
    found = [i for i in interfaces if i.parts == (min(pa, pb), max(pa, pb))]
    if not found:
        raise SegmentationError(
            f"traversal steps between parts {names[pa]!r} and {names[pb]!r} "
            "which share no loop arc"
        )
    if len(found) > 1:
        raise SegmentationError(
            f"parts {names[pa]!r} and {names[pb]!r} share {len(found)} loop arcs; "
            "the transition is ambiguous"
        )
    return found[0].index


def _assign_roles(parts, interfaces, traversal):
    names = [p.name for p in parts]
    if len(parts) == 1:
        p = parts[0]
        if any(e.kind != "open" for e in p.ends):
            raise SegmentationError("a single-part mesh cannot carry loops")
        bottom, top = sorted(p.ends, key=lambda e: min(e.circle))
        p.ends, p.role = (bottom, top), "single"
        return

    entry = {}
    exit_ = {}
    for a, b in zip(traversal, traversal[1:]):
        i = _connecting_interface(interfaces, a, b, names)
        exit_[a] = i
        entry[b] = i

    for p in parts:
        def circle_with(iface):
            for e in p.ends:
                if iface in e.interfaces:
                    return e
            raise SegmentationError(
                f"part {p.name!r} does not touch its traversal transition arc"
            )

        other = lambda e: p.ends[1] if e is p.ends[0] else p.ends[0]  # noqa: E731
        if p.index not in entry:  # first part
            top = circle_with(exit_[p.index])
            bottom = other(top)
            if bottom.kind != "open":
                raise SegmentationError(
                    f"first part {p.name!r} needs an open end to start the curve"
                )
            p.ends, p.role = (bottom, top), "start"
        elif p.index not in exit_:  # last part
            bottom = circle_with(entry[p.index])
            top = other(bottom)
            if top.kind != "open":
                raise SegmentationError(
                    f"last part {p.name!r} needs an open end to finish the curve"
                )
            p.ends, p.role = (bottom, top), "end"
        else:
            e_in = circle_with(entry[p.index])
            e_out = circle_with(exit_[p.index])
            if e_in is not e_out:
                p.ends, p.role = (e_in, e_out), "through"
            else:
                bottom = other(e_in)
                if bottom.kind != "open":
                    raise SegmentationError(
                        f"part {p.name!r} enters and leaves through the same circle "
                        "and needs an open end to turn around"
                    )
                p.ends, p.role = (bottom, e_in), "turn"


def summary(decomp):
    """Human-readable decomposition report (also used by the CLI)."""
    parts = []
    for p in decomp.parts:
        parts.append(
            {
                "index": p.index,
                "name": p.name,
                "role": p.role,
                "faces": int(len(p.faces)),
                "bottom": {"kind": p.bottom.kind, "edges": len(p.bottom.circle)},
                "top": {"kind": p.top.kind, "edges": len(p.top.circle)},
            }
        )
    return {
        "parts": parts,
        "interfaces": [
            {
                "index": i.index,
                "parts": list(i.parts),
                "edges": i.n_edges,
                "closed": i.vertices[0] == i.vertices[-1],
            }
            for i in decomp.interfaces
        ],
        "traversal": [decomp.parts[i].name for i in decomp.traversal],
        "junctions": sorted(int(decomp.orig_vertex[j]) for j in decomp.junctions),
    }


# ----------------------------------------------------------------------
# per-part disk charts


@dataclass(frozen=True)
class LineArc:
    """Run of consecutive line edges lying on one interface (or open)."""

    interface: int | None
    lo: int  # first vertex index into the line chain
    hi: int  # last vertex index (inclusive)


@dataclass
class LineChain:
    """One horizontal chart boundary line, left seam copy to right."""

    vertices: np.ndarray  # chart vertex ids, seam-left end first
    arcs: list[LineArc]
    kind: str  # transition | open


@dataclass
class PartChart:
    part: Part
    mesh: SurfaceMesh  # the annulus cut along its seam: a disk
    to_part: np.ndarray  # chart vertex id -> part-local vertex id
    to_work: np.ndarray  # chart vertex id -> working-mesh vertex id
    seam_left: np.ndarray  # chart ids along the seam, bottom to top
    seam_right: np.ndarray
    bottom: LineChain
    top: LineChain

    @property
    def n_vertices(self):
        return self.mesh.n_vertices


@dataclass(frozen=True)
class InterfaceSide:
    chart: int
    line: str  # "bottom" | "top"
    lo: int
    hi: int
    forward: bool  # line run follows Interface.vertices order


@dataclass
class ChartSet:
    decomp: Decomposition
    charts: list[PartChart]
    sides: dict[int, tuple[InterfaceSide, InterfaceSide]]
    offsets: np.ndarray  # chart i owns unknowns [offsets[i], offsets[i+1])

    @property
    def n_unknowns(self):
        return int(self.offsets[-1])


def _canonical_vertex(part, end, junctions, orig_vertex):
    work_ids = part.to_work[list(end.circle)]
    on_circle = [
        (int(orig_vertex[w]), local)
        for local, w in zip(end.circle, work_ids)
        if int(w) in junctions
    ]
    if not on_circle:
        on_circle = [
            (int(orig_vertex[w]), local) for local, w in zip(end.circle, work_ids)
        ]
    return min(on_circle)[1]


def _seam_path(part, a, b):
    """Shortest interior path between the two canonical end vertices."""
    mesh = part.mesh
    blocked = mesh.is_boundary_vertex().copy()
    blocked[[a, b]] = False
    edges = mesh.edges()
    keep = ~(blocked[edges[:, 0]] | blocked[edges[:, 1]])
    edges = edges[keep]
    w = np.linalg.norm(
        mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]], axis=1
    )
    n = mesh.n_vertices
    g = csr_matrix(
        (np.r_[w, w], (np.r_[edges[:, 0], edges[:, 1]], np.r_[edges[:, 1], edges[:, 0]])),
        shape=(n, n),
    )
    dist, pred = dijkstra(g, indices=a, return_predecessors=True)
    if not np.isfinite(dist[b]):
        raise SegmentationError(
            f"part {part.name!r} has no interior seam path between its ends"
        )
    path = [b]
    while path[-1] != a:
        path.append(int(pred[path[-1]]))
    return path[::-1]


def _chain_between(loop, a, b, exclude):
    """Cyclic slice of ``loop`` from a to b avoiding the excluded ids."""
    n = len(loop)
    start = loop.index(a)
    for step in (1, -1):
        chain = [a]
        i = start
        while chain[-1] != b:
            i = (i + step) % n
            chain.append(loop[i])
            if loop[i] in exclude or len(chain) > n:
                break
        if chain[-1] == b:
            return chain
    raise AssertionError("disk boundary does not link the seam corners")


def _line_arcs(chain, to_work, edge_to_iface):
    arcs = []
    cur, lo = "unset", 0
    for k in range(len(chain) - 1):
        wa, wb = int(to_work[chain[k]]), int(to_work[chain[k + 1]])
        key = (wa, wb) if wa < wb else (wb, wa)
        iface = edge_to_iface.get(key)
        if cur == "unset":
            cur, lo = iface, 0
        elif iface != cur:
            arcs.append(LineArc(cur, lo, k))
            cur, lo = iface, k
    arcs.append(LineArc(cur, lo, len(chain) - 1))
    return arcs


def build_charts(decomp):
    """Cut every part along its seam and index the chart boundary lines."""
    edge_to_iface = {}
    for iface in decomp.interfaces:
        for a, b in zip(iface.vertices, iface.vertices[1:]):
            edge_to_iface[(a, b) if a < b else (b, a)] = iface.index

    charts = []
    for part in decomp.parts:
        ca = _canonical_vertex(part, part.bottom, decomp.junctions, decomp.orig_vertex)
        cb = _canonical_vertex(part, part.top, decomp.junctions, decomp.orig_vertex)
        cut = cut_along_path(part.mesh, _seam_path(part, ca, cb))
        disk = cut.mesh
        seam = cut.seams[0]
        left = np.asarray(seam.left, dtype=np.int64)
        right = np.asarray(seam.right, dtype=np.int64)
        loops = disk.boundary_loops()
        assert len(loops) == 1 and disk.euler_characteristic() == 1
        loop = list(loops[0].vertices)
        corners = {int(left[0]), int(right[0]), int(left[-1]), int(right[-1])}
        to_part = disk.source_vertex
        to_work = part.to_work[to_part]

        bottom_chain = _chain_between(loop, int(left[0]), int(right[0]), corners)
        top_chain = _chain_between(loop, int(left[-1]), int(right[-1]), corners)
        bottom_circle = set(part.bottom.circle)
        assert all(int(to_part[v]) in bottom_circle for v in bottom_chain)

        lines = {}
        for name, chain, end in (
            ("bottom", bottom_chain, part.bottom),
            ("top", top_chain, part.top),
        ):
            lines[name] = LineChain(
                vertices=np.asarray(chain, dtype=np.int64),
                arcs=_line_arcs(chain, to_work, edge_to_iface),
                kind=end.kind,
            )
        charts.append(
            PartChart(
                part=part,
                mesh=disk,
                to_part=to_part,
                to_work=to_work,
                seam_left=left,
                seam_right=right,
                bottom=lines["bottom"],
                top=lines["top"],
            )
        )

    sides = {}
    for ci, chart in enumerate(charts):
        for line_name in ("bottom", "top"):
            line = getattr(chart, line_name)
            for arc in line.arcs:
                if arc.interface is None:
                    continue
                iface = decomp.interfaces[arc.interface]
                run = [int(chart.to_work[v]) for v in line.vertices[arc.lo : arc.hi + 1]]
                if tuple(run) == iface.vertices:
                    forward = True
                elif tuple(run[::-1]) == iface.vertices:
                    forward = False
                else:
                    raise AssertionError(
                        f"chart line run does not match interface {arc.interface}"
                    )
                sides.setdefault(arc.interface, []).append(
                    InterfaceSide(ci, line_name, arc.lo, arc.hi, forward)
                )

    for iface in decomp.interfaces:
        got = sides.get(iface.index, [])
        assert len(got) == 2, f"interface {iface.index} has {len(got)} chart sides"
        sides[iface.index] = tuple(got)

    sizes = [2 * c.n_vertices for c in charts]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    return ChartSet(decomp=decomp, charts=charts, sides=sides, offsets=offsets)
