"""Area-weighted symmetric Dirichlet energy of a chart layout.

Each triangle carries an isometric 2D rest frame taken from its 3D
shape.  For a chart position vector X (interleaved x, y per vertex) the
per-triangle Jacobian J maps rest frame to chart, and the distortion

    D(J) = (1 + det(J)^-2) * ||J||_F^2

equals sigma1^2 + sigma2^2 + sigma1^-2 + sigma2^-2 in singular values,
reaching its minimum 4 exactly at rotations, so a layout with mean
distortion 4 is an isometry.  The energy is the 3D-area-weighted sum.

Triangles flipped in the chart (det(J) <= 0) put the energy at its
barrier: ``value`` returns inf, and ``max_step`` bounds line searches so
Newton iterates stay flip-free.

Gradient and Hessian are analytic.  The Hessian of D in vec(J) is

    2(1 + I3^-2) I - 4 I3^-3 (j k' + k j') + 6 I1 I3^-4 k k' - 2 I1 I3^-3 K

with I1 = ||J||^2, I3 = det J, k = K j the det gradient, and per-vertex
6x6 blocks are made positive definite by an eigenvalue clamp so the
Newton system is always solvable.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import coo_matrix

EIG_FLOOR = 1e-9


def rest_frames(vertices, faces):
    """Isometric 2D frames per triangle: inverse rest matrix and area.

    The frame puts corner 0 at the origin and corner 1 on the +x axis,
    so the rest triangle is counterclockwise and det(J) > 0 means the
    chart triangle is counterclockwise too.
    """
    p = np.asarray(vertices, dtype=np.float64)[np.asarray(faces)]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    l1 = np.linalg.norm(e1, axis=1)
    cross = np.cross(e1, e2)
    area2 = np.linalg.norm(cross, axis=1)  # twice the area
    if np.any(area2 <= 0) or np.any(l1 <= 0):
        raise ValueError("degenerate rest triangle")
    r01 = np.einsum("ij,ij->i", e1, e2) / l1
    r11 = area2 / l1
    # rest matrix R = [[l1, r01], [0, r11]]; B = R^-1
    b = np.zeros((len(p), 2, 2))
    b[:, 0, 0] = 1.0 / l1
    b[:, 0, 1] = -r01 / (l1 * r11)
    b[:, 1, 1] = 1.0 / r11
    return b, 0.5 * area2


def _vec_map(b):
    """Constant 4x6 map per triangle from corner coords to vec(J)."""
    t = len(b)
    g = np.zeros((t, 4, 6))
    c0 = -(b[:, 0, :] + b[:, 1, :])  # coefficient of corner 0, per J column
    for col in range(2):  # chart coordinate: 0 -> rows J0*, 1 -> rows J1*
        for jcol in range(2):
            row = 2 * col + jcol
            g[:, row, col] = c0[:, jcol]
            g[:, row, 2 + col] = b[:, 0, jcol]
            g[:, row, 4 + col] = b[:, 1, jcol]
    return g


class DirichletEnergy:
    """Stacked symmetric Dirichlet energy over one or more charts."""

    def __init__(self, faces, rest_inv, areas, n_vertices):
        self.faces = np.asarray(faces, dtype=np.int64)
        self.rest_inv = rest_inv
        self.areas = np.asarray(areas, dtype=np.float64)
        self.n_vertices = int(n_vertices)
        self.total_area = float(self.areas.sum())
        self._g = _vec_map(rest_inv)
        cols = np.empty((len(self.faces), 6), dtype=np.int64)
        cols[:, 0::2] = 2 * self.faces
        cols[:, 1::2] = 2 * self.faces + 1
        self._cols = cols
        self._hrows = np.repeat(cols[:, :, None], 6, axis=2).reshape(-1)
        self._hcols = np.repeat(cols[:, None, :], 6, axis=1).reshape(-1)

    @classmethod
    def from_mesh(cls, mesh, chart_faces=None):
        faces = mesh.faces if chart_faces is None else chart_faces
        b, a = rest_frames(mesh.vertices, mesh.faces)
        return cls(faces, b, a, mesh.n_vertices)

    @classmethod
    def from_charts(cls, chart_set):
        """One energy over all charts, in chart-set unknown numbering.

        Rest frames come from the 3D positions of the chart vertices,
        which are exact copies of the part surface.
        """
        faces, binv, areas = [], [], []
        for c, off in zip(chart_set.charts, chart_set.offsets[:-1]):
            b, a = rest_frames(c.mesh.vertices, c.mesh.faces)
            faces.append(c.mesh.faces + off // 2)
            binv.append(b)
            areas.append(a)
        return cls(
            np.concatenate(faces),
            np.concatenate(binv),
            np.concatenate(areas),
            chart_set.n_unknowns // 2,
        )

    # ------------------------------------------------------------------

    def jacobians(self, x):
        u = x.reshape(-1, 2)[self.faces]  # (T, 3, 2)
        umat = np.stack([u[:, 1] - u[:, 0], u[:, 2] - u[:, 0]], axis=2)
        return umat @ self.rest_inv

    def dets(self, x):
        j = self.jacobians(x)
        return j[:, 0, 0] * j[:, 1, 1] - j[:, 0, 1] * j[:, 1, 0]

    def n_flipped(self, x):
        return int(np.count_nonzero(self.dets(x) <= 0))

    def distortion(self, x):
        """Per-triangle D; inf where flipped."""
        j = self.jacobians(x).reshape(-1, 4)
        i1 = np.einsum("ij,ij->i", j, j)
        i3 = j[:, 0] * j[:, 3] - j[:, 1] * j[:, 2]
        d = np.full(len(j), np.inf)
        ok = i3 > 0
        d[ok] = i1[ok] * (1.0 + i3[ok] ** -2)
        return d

    def value(self, x):
        d = self.distortion(x)
        if not np.all(np.isfinite(d)):
            return np.inf
        return float(self.areas @ d)

    def mean_distortion(self, x):
        return self.value(x) / self.total_area

    def _invariants(self, x):
        j = self.jacobians(x).reshape(-1, 4)
        i1 = np.einsum("ij,ij->i", j, j)
        i3 = j[:, 0] * j[:, 3] - j[:, 1] * j[:, 2]
        k = np.stack([j[:, 3], -j[:, 2], -j[:, 1], j[:, 0]], axis=1)
        return j, i1, i3, k

    def gradient(self, x):
        j, i1, i3, k = self._invariants(x)
        if np.any(i3 <= 0):
            raise FloatingPointError("gradient requested at a flipped layout")
        gd = 2.0 * (1.0 + i3**-2)[:, None] * j - (2.0 * i1 * i3**-3)[:, None] * k
        per_tri = self.areas[:, None] * np.einsum("trc,tr->tc", self._g, gd)
        out = np.zeros(2 * self.n_vertices)
        np.add.at(out, self._cols.reshape(-1), per_tri.reshape(-1))
        return out

    def hessian(self, x, project=True):
        """Sparse Hessian; with ``project`` each 6x6 block is clamped PSD."""
        j, i1, i3, k = self._invariants(x)
        if np.any(i3 <= 0):
            raise FloatingPointError("hessian requested at a flipped layout")
        t = len(j)
        eye = np.eye(4)
        kmat = np.zeros((4, 4))
        kmat[0, 3] = kmat[3, 0] = 1.0
        kmat[1, 2] = kmat[2, 1] = -1.0
        jk = np.einsum("ti,tj->tij", j, k)
        hj = (
            2.0 * (1.0 + i3**-2)[:, None, None] * eye
            - (4.0 * i3**-3)[:, None, None] * (jk + jk.transpose(0, 2, 1))
            + (6.0 * i1 * i3**-4)[:, None, None] * np.einsum("ti,tj->tij", k, k)
            - (2.0 * i1 * i3**-3)[:, None, None] * kmat
        )
        blocks = self.areas[:, None, None] * np.einsum(
            "tri,trs,tsj->tij", self._g, hj, self._g
        )
        if project:
            w, v = np.linalg.eigh(blocks)
            w = np.maximum(w, EIG_FLOOR)
            blocks = np.einsum("tik,tk,tjk->tij", v, w, v)
        h = coo_matrix(
            (blocks.reshape(-1), (self._hrows, self._hcols)),
            shape=(2 * self.n_vertices, 2 * self.n_vertices),
        )
        return h.tocsr()

    def max_step(self, x, dx):
        """Largest flip-safe step: 0.9 of the first det root along dx.

        Returns inf when no triangle determinant hits zero for alpha>0.
        """
        j = self.jacobians(x)
        dj = self.jacobians(x + dx) - j  # linear in dx
        a0 = j[:, 0, 0] * j[:, 1, 1] - j[:, 0, 1] * j[:, 1, 0]
        a1 = (
            j[:, 0, 0] * dj[:, 1, 1]
            + dj[:, 0, 0] * j[:, 1, 1]
            - j[:, 0, 1] * dj[:, 1, 0]
            - dj[:, 0, 1] * j[:, 1, 0]
        )
        a2 = dj[:, 0, 0] * dj[:, 1, 1] - dj[:, 0, 1] * dj[:, 1, 0]
        best = np.inf
        quad = np.abs(a2) > 1e-300
        with np.errstate(invalid="ignore", divide="ignore"):
            disc = a1**2 - 4.0 * a2 * a0
            ok = quad & (disc >= 0)
            sq = np.sqrt(np.where(ok, disc, 0.0))
            for sign in (-1.0, 1.0):
                r = np.where(ok, (-a1 + sign * sq) / (2.0 * a2), np.inf)
                r = np.where(r > 1e-14, r, np.inf)
                best = min(best, float(r.min(initial=np.inf)))
            lin = ~quad & (np.abs(a1) > 1e-300)
            r = np.where(lin, -a0 / np.where(lin, a1, 1.0), np.inf)
            r = np.where(r > 1e-14, r, np.inf)
            best = min(best, float(r.min(initial=np.inf)))
        return 0.9 * best
