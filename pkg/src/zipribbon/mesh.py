"""Halfedge triangle mesh with topological cutting.

The mesh is stored as flat numpy arrays.  Halfedge ``h`` lives in face
``h // 3`` at corner ``h % 3``; it runs from ``faces[f, k]`` to
``faces[f, (k + 1) % 3]``.  ``twin[h]`` is the opposite halfedge or -1 on
the boundary.  All faces are oriented counterclockwise when viewed from
outside, and construction rejects meshes where that cannot hold (a
directed edge appearing twice).

Cutting never moves geometry: it duplicates vertices along marked edges
so that the surface opens up, and it records which copies came from the
same source vertex so the cut can be glued back exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MeshError(ValueError):
    """Raised for non-manifold, degenerate, or otherwise invalid input."""


def _as_vertex_array(vertices):
    v = np.asarray(vertices, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] != 3:
        raise MeshError("vertices must be an (n, 3) array")
    if not np.isfinite(v).all():
        raise MeshError("vertex coordinates must be finite")
    return v


def _as_face_array(faces):
    f = np.asarray(faces, dtype=np.int64)
    if f.ndim != 2 or f.shape[1] != 3:
        raise MeshError("faces must be an (m, 3) array of vertex ids")
    return f


class SurfaceMesh:
    """Oriented manifold triangle mesh (boundary allowed).

    Parameters
    ----------
    vertices : (n, 3) float array
    faces : (m, 3) int array
        Counterclockwise vertex ids.
    source_vertex : (n,) int array, optional
        For meshes produced by cutting: the vertex id each vertex
        descends from in the mesh the cut was applied to.

    Raises
    ------
    MeshError
        If a face references a missing vertex, a face repeats a vertex,
        a face has zero area, or an edge is non-manifold / inconsistently
        oriented.  Error messages name the offending face or edge.
    """

    def __init__(self, vertices, faces, source_vertex=None):
        self.vertices = _as_vertex_array(vertices)
        self.faces = _as_face_array(faces)
        n, m = len(self.vertices), len(self.faces)
        if m == 0:
            raise MeshError("mesh has no faces")
        if self.faces.min() < 0 or self.faces.max() >= n:
            bad = int(np.argmax((self.faces < 0) | (self.faces >= n)).item() // 3)
            raise MeshError(f"face {bad} references a vertex outside 0..{n - 1}")
        same = (
            (self.faces[:, 0] == self.faces[:, 1])
            | (self.faces[:, 1] == self.faces[:, 2])
            | (self.faces[:, 2] == self.faces[:, 0])
        )
        if same.any():
            raise MeshError(f"face {int(np.argmax(same))} repeats a vertex")
        area2 = np.linalg.norm(self.face_normals_unnormalized(), axis=1)
        scale = max(self.vertices.max() - self.vertices.min(), 1.0)
        if (area2 <= 1e-14 * scale * scale).any():
            bad = int(np.argmax(area2 <= 1e-14 * scale * scale))
            raise MeshError(f"face {bad} is degenerate (zero area)")
        if source_vertex is None:
            self.source_vertex = np.arange(n, dtype=np.int64)
        else:
            self.source_vertex = np.asarray(source_vertex, dtype=np.int64).copy()

        # Halfedge tables.  origin/dest are (3m,) views in halfedge order.
        self.he_origin = self.faces.reshape(-1)
        self.he_dest = self.faces[:, [1, 2, 0]].reshape(-1)
        self.twin = self._build_twins()

    # ------------------------------------------------------------------
    # construction helpers

    def _build_twins(self):
        key = self.he_origin.astype(np.int64) * (len(self.vertices) + 1) + self.he_dest
        order = np.argsort(key, kind="stable")
        sk = key[order]
        dup = np.nonzero(sk[1:] == sk[:-1])[0]
        if len(dup):
            h = int(order[dup[0]])
            raise MeshError(
                "non-manifold or inconsistently oriented edge "
                f"({int(self.he_origin[h])}, {int(self.he_dest[h])})"
            )
        # twin of (u, v) is the halfedge keyed (v, u)
        rev = self.he_dest.astype(np.int64) * (len(self.vertices) + 1) + self.he_origin
        pos = np.searchsorted(sk, rev)
        pos_c = np.clip(pos, 0, len(sk) - 1)
        found = sk[pos_c] == rev
        twin = np.where(found, order[pos_c], -1).astype(np.int64)
        return twin

    # ------------------------------------------------------------------
    # basic queries

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    def he_next(self, h):
        return (h // 3) * 3 + (h + 1) % 3

    def he_prev(self, h):
        return (h // 3) * 3 + (h + 2) % 3

    def edges(self):
        """Unique undirected edges as an (e, 2) array with u < v."""
        e = np.stack([self.he_origin, self.he_dest], axis=1)
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def n_edges(self):
        return len(self.edges())

    def euler_characteristic(self):
        return self.n_vertices - self.n_edges() + self.n_faces

    def face_normals_unnormalized(self):
        p = self.vertices[self.faces]
        return np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])

    def face_areas(self):
        return 0.5 * np.linalg.norm(self.face_normals_unnormalized(), axis=1)

    def edge_lengths(self):
        e = self.edges()
        return np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)

    def is_boundary_vertex(self):
        """Boolean mask of vertices that touch an open edge."""
        mask = np.zeros(self.n_vertices, dtype=bool)
        b = self.twin < 0
        mask[self.he_origin[b]] = True
        mask[self.he_dest[b]] = True
        return mask

    def halfedge_lookup(self):
        """dict (u, v) -> halfedge id for all directed edges."""
        return {
            (int(u), int(v)): h
            for h, (u, v) in enumerate(zip(self.he_origin, self.he_dest))
        }

    def vertex_neighbors(self):
        """list of sorted neighbor id arrays, one per vertex."""
        e = self.edges()
        both = np.concatenate([e, e[:, ::-1]])
        order = np.argsort(both[:, 0], kind="stable")
        both = both[order]
        splits = np.searchsorted(both[:, 0], np.arange(self.n_vertices + 1))
        return [np.sort(both[splits[i]:splits[i + 1], 1]) for i in range(self.n_vertices)]

    # ------------------------------------------------------------------
    # boundary loops

    def boundary_loops(self):
        """All boundary loops of the mesh.

        Returns
        -------
        list of BoundaryLoop, ordered by their smallest vertex id.  Each
        loop's vertex cycle follows the loop so that the surface lies on
        its left, starting from the loop's smallest vertex id.
        """
        bh = np.nonzero(self.twin < 0)[0]
        if len(bh) == 0:
            return []
        # Walking with surface on the left means traversing each open
        # halfedge against its face direction, so the next open halfedge
        # is the one whose dest equals the current origin.
        by_dest = {}
        for h in bh:
            d = int(self.he_dest[h])
            if d in by_dest:
                raise MeshError(f"non-manifold boundary vertex {d}")
            by_dest[d] = int(h)
        seen = set()
        loops = []
        for h0 in sorted(by_dest.values()):
            if h0 in seen:
                continue
            cycle = []
            h = h0
            while True:
                cycle.append(h)
                seen.add(h)
                h = by_dest[int(self.he_origin[h])]
                if h == h0:
                    break
            verts = [int(self.he_dest[h]) for h in cycle]
            k = int(np.argmin(verts))
            verts = verts[k:] + verts[:k]
            cycle = cycle[k:] + cycle[:k]
            loops.append(BoundaryLoop(halfedges=tuple(cycle), vertices=tuple(verts)))
        loops.sort(key=lambda lp: lp.vertices[0])
        return loops

    def genus(self):
        """Genus from Euler characteristic and boundary loop count."""
        chi = self.euler_characteristic()
        b = len(self.boundary_loops())
        g2 = 2 - chi - b
        if g2 % 2:
            raise MeshError("surface is not orientable-consistent (odd genus count)")
        return g2 // 2

    def length_of(self, vertex_cycle, closed=True):
        ids = np.asarray(vertex_cycle, dtype=np.int64)
        p = self.vertices[ids]
        d = np.linalg.norm(np.diff(p, axis=0), axis=1).sum()
        if closed:
            d += float(np.linalg.norm(p[0] - p[-1]))
        return float(d)

    def copy(self):
        return SurfaceMesh(self.vertices.copy(), self.faces.copy(), self.source_vertex)


@dataclass(frozen=True)
class BoundaryLoop:
    """One boundary loop: open halfedges plus the vertex cycle.

    ``vertices[i]`` is the dest of ``halfedges[i]`` walked with the
    surface on the left; consecutive vertices share an open edge.
    """

    halfedges: tuple
    vertices: tuple

    def __len__(self):
        return len(self.vertices)


@dataclass(frozen=True)
class CutPath:
    """A simple chain of vertex ids connected by mesh edges."""

    vertices: tuple

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(int(v) for v in self.vertices))
        if len(self.vertices) < 2:
            raise MeshError("cut path needs at least two vertices")
        interior = self.vertices if self.is_loop() else self.vertices
        body = interior[:-1] if self.is_loop() else interior
        if len(set(body)) != len(body):
            raise MeshError("cut path revisits a vertex")

    def is_loop(self):
        return self.vertices[0] == self.vertices[-1]

    def edge_list(self):
        return list(zip(self.vertices[:-1], self.vertices[1:]))


@dataclass
class Seam:
    """Two copies of one cut path, pairwise aligned.

    ``left[i]`` and ``right[i]`` are the two copies of the same source
    vertex; ``left`` holds the copies attached to the faces on the left
    of the directed path.
    """

    left: tuple
    right: tuple
    kind: str = "cut"
    label: str = ""

    def __post_init__(self):
        if len(self.left) != len(self.right):
            raise MeshError("seam sides must pair up one-to-one")

    def pairs(self):
        return list(zip(self.left, self.right))


@dataclass
class CutMesh:
    """Result of cutting: the opened mesh plus seam bookkeeping."""

    mesh: SurfaceMesh
    seams: list = field(default_factory=list)

    @property
    def source_vertex(self):
        return self.mesh.source_vertex

    def glue(self):
        """Reconstruct the pre-cut connectivity (same face order)."""
        faces = self.mesh.source_vertex[self.mesh.faces]
        used = np.unique(faces)
        keep = np.zeros(int(used.max()) + 1, dtype=np.int64)
        keep[used] = np.arange(len(used))
        first = np.full(int(used.max()) + 1, -1, dtype=np.int64)
        for i, s in enumerate(self.mesh.source_vertex):
            if first[s] < 0:
                first[s] = int(i)
        verts = self.mesh.vertices[first[used]]
        return SurfaceMesh(verts, keep[faces])


def _corner_of(mesh, face, vertex):
    row = mesh.faces[face]
    for k in range(3):
        if row[k] == vertex:
            return k
    raise MeshError(f"vertex {vertex} not in face {face}")


def split_along_edges(mesh, cut_edges):
    """Duplicate vertices so that every marked interior edge opens up.

    Corners around each vertex are grouped into wedges separated by cut
    edges and existing boundary; every wedge gets its own vertex copy.
    A path-interior vertex (two cut edges) therefore splits in two, a
    junction with k cut edges splits k ways, and a dead-end interior
    vertex (one cut edge) does not split at all.

    Parameters
    ----------
    mesh : SurfaceMesh
    cut_edges : iterable of (u, v)
        Undirected interior edges.  Boundary or missing edges raise.

    Returns
    -------
    SurfaceMesh
        Same faces in the same order, rewritten to the new vertex ids;
        ``source_vertex`` maps every new vertex to its source.
    """
    lookup = mesh.halfedge_lookup()
    cut = set()
    for u, v in cut_edges:
        u, v = int(u), int(v)
        h = lookup.get((u, v))
        if h is None:
            raise MeshError(f"cut edge ({u}, {v}) is not a mesh edge")
        if mesh.twin[h] < 0:
            raise MeshError(f"cut edge ({u}, {v}) is already on the boundary")
        cut.add((min(u, v), max(u, v)))

    # Union-find over face corners: corners sharing an uncut interior
    # edge at the same vertex belong to one wedge.
    n_corners = 3 * mesh.n_faces
    parent = np.arange(n_corners, dtype=np.int64)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for h in range(n_corners):
        t = mesh.twin[h]
        if t < 0 or t < h:
            continue
        u, v = int(mesh.he_origin[h]), int(mesh.he_dest[h])
        if (min(u, v), max(u, v)) in cut:
            continue
        # corner at u: h itself; in the twin face u is the dest corner,
        # i.e. the corner of he_next(t).
        union(h, (t // 3) * 3 + (t + 1) % 3)
        # corner at v: next(h) in f, and twin's own corner in the other.
        union((h // 3) * 3 + (h + 1) % 3, int(t))

    reps = np.array([find(c) for c in range(n_corners)], dtype=np.int64)
    uniq, new_ids = np.unique(reps, return_inverse=True)
    new_faces = new_ids.reshape(-1, 3)
    src = mesh.he_origin[uniq]
    new_vertices = mesh.vertices[src]
    out = SurfaceMesh(new_vertices, new_faces, source_vertex=mesh.source_vertex[src])
    return out


def _seam_from_split(mesh, cut_mesh, path):
    """Align the two copies of a cut path in the split mesh."""
    lookup = mesh.halfedge_lookup()
    left, right = [], []
    edges = path.edge_list()
    for i, (u, v) in enumerate(edges):
        h = lookup[(u, v)]
        t = int(mesh.twin[h])
        fl, fr = h // 3, t // 3
        lu = int(cut_mesh.faces[fl, _corner_of(mesh, fl, u)])
        lv = int(cut_mesh.faces[fl, _corner_of(mesh, fl, v)])
        ru = int(cut_mesh.faces[fr, _corner_of(mesh, fr, u)])
        rv = int(cut_mesh.faces[fr, _corner_of(mesh, fr, v)])
        if i == 0:
            left.append(lu)
            right.append(ru)
        else:
            if left[-1] != lu or right[-1] != ru:
                raise MeshError("seam sides disagree mid-path")
        left.append(lv)
        right.append(rv)
    return Seam(left=tuple(left), right=tuple(right))


def cut_along_path(mesh, path):
    """Cut the surface open along a vertex path.

    The path must either be a closed loop of interior edges or a simple
    chain; chain endpoints may lie on the boundary (they split) or in
    the interior (they stay single, producing a slit).

    Returns
    -------
    CutMesh
        With one Seam pairing the two copies of every path vertex.
        Gluing the seam reproduces the input connectivity exactly.
    """
    if not isinstance(path, CutPath):
        path = CutPath(tuple(path))
    out = split_along_edges(mesh, path.edge_list())
    seam = _seam_from_split(mesh, out, path)
    if path.is_loop():
        seam = Seam(left=seam.left, right=seam.right, kind="loop")
    return CutMesh(mesh=out, seams=[seam])


def insert_hole(mesh, vertex):
    """Open the surface by removing the one-ring of an interior vertex.

    Returns the new mesh; the hole's boundary loop is the vertex link.
    Raises if the vertex or any ring vertex already touches a boundary.
    """
    vertex = int(vertex)
    if vertex < 0 or vertex >= mesh.n_vertices:
        raise MeshError(f"hole site {vertex} is not a vertex")
    on_b = mesh.is_boundary_vertex()
    if on_b[vertex]:
        raise MeshError(f"hole site {vertex} lies on an existing boundary")
    star = np.nonzero((mesh.faces == vertex).any(axis=1))[0]
    ring = np.unique(mesh.faces[star])
    ring = ring[ring != vertex]
    if on_b[ring].any():
        bad = int(ring[on_b[ring]][0])
        raise MeshError(
            f"hole at {vertex} touches the existing boundary (ring vertex {bad})"
        )
    keep = np.ones(mesh.n_faces, dtype=bool)
    keep[star] = False
    faces = mesh.faces[keep]
    used = np.unique(faces)
    remap = np.full(mesh.n_vertices, -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    out = SurfaceMesh(
        mesh.vertices[used], remap[faces], source_vertex=mesh.source_vertex[used]
    )
    return out


def insert_slit(mesh, path):
    """Open the surface along an interior edge chain (a slit).

    Both endpoints must be interior vertices; the slit boundary loop has
    twice as many edges as the chain.
    """
    if not isinstance(path, CutPath):
        path = CutPath(tuple(path))
    if path.is_loop():
        raise MeshError("a slit must be an open chain, not a loop")
    on_b = mesh.is_boundary_vertex()
    for v in path.vertices:
        if on_b[v]:
            raise MeshError(f"slit vertex {v} lies on an existing boundary")
    return split_along_edges(mesh, path.edge_list())


def insert_open_boundary(mesh, site):
    """Insert a user-chosen open boundary.

    ``site`` is ``{"type": "hole", "vertex": v}`` or
    ``{"type": "slit", "path": [v0, v1, ...]}``.
    """
    kind = site.get("type")
    if kind == "hole":
        return insert_hole(mesh, site["vertex"])
    if kind == "slit":
        return insert_slit(mesh, site["path"])
    raise MeshError(f"unknown open boundary type {kind!r}")


# ----------------------------------------------------------------------
# OBJ files


def load_obj(path):
    """Read an ASCII OBJ file (triangles only).

    Faces with more than three corners raise MeshError, as do negative
    or out-of-range indices.  Texture/normal slots in face tokens are
    ignored.
    """
    verts, faces = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tok = line.split()
            if tok[0] == "v":
                if len(tok) < 4:
                    raise MeshError(f"{path}:{ln}: vertex needs 3 coordinates")
                verts.append([float(tok[1]), float(tok[2]), float(tok[3])])
            elif tok[0] == "f":
                ids = [t.split("/")[0] for t in tok[1:]]
                if len(ids) != 3:
                    raise MeshError(
                        f"{path}:{ln}: face has {len(ids)} corners, only triangles are supported"
                    )
                face = []
                for t in ids:
                    i = int(t)
                    if i == 0:
                        raise MeshError(f"{path}:{ln}: OBJ indices are 1-based")
                    face.append(i - 1 if i > 0 else len(verts) + i)
                faces.append(face)
    if not faces:
        raise MeshError(f"{path}: no faces found")
    return SurfaceMesh(np.array(verts, dtype=np.float64), np.array(faces))


def save_obj(path, vertices, faces, comment=None):
    """Write an ASCII OBJ file with deterministic float formatting."""
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        for v in np.asarray(vertices, dtype=np.float64):
            fh.write("v %.17g %.17g %.17g\n" % (v[0], v[1], v[2]))
        for f in np.asarray(faces, dtype=np.int64):
            fh.write("f %d %d %d\n" % (f[0] + 1, f[1] + 1, f[2] + 1))
