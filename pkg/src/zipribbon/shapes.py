"""Procedural test shapes.

Every generator returns a SurfaceMesh with a documented, deterministic
vertex layout so tests and demos can address rings and loops by id.
Grid tubes use ``vertex id = ring * n_theta + slot``.
"""

from __future__ import annotations

import numpy as np

from .mesh import SurfaceMesh


def tube(radius=1.0, height=3.0, n_theta=25, n_z=40):
    """Open right cylinder; rings run bottom (z=0) to top (z=height).

    2 * n_theta * n_z triangles.  Ring ``i`` holds vertex ids
    ``i*n_theta .. i*n_theta + n_theta - 1``.
    """
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    ring = np.stack([radius * np.cos(theta), radius * np.sin(theta)], axis=1)
    verts = []
    for i in range(n_z + 1):
        z = height * i / n_z
        verts.append(np.column_stack([ring, np.full(n_theta, z)]))
    verts = np.concatenate(verts)
    faces = _grid_faces(n_theta, n_z)
    return SurfaceMesh(verts, faces)


def _grid_faces(n_theta, n_rows, wrap=True, offset=0):
    faces = []
    cols = n_theta if wrap else n_theta - 1
    for i in range(n_rows):
        for j in range(cols):
            a = offset + i * n_theta + j
            b = offset + i * n_theta + (j + 1) % n_theta
            c = offset + (i + 1) * n_theta + j
            d = offset + (i + 1) * n_theta + (j + 1) % n_theta
            faces.append([a, b, d])
            faces.append([a, d, c])
    return np.array(faces, dtype=np.int64)


def ring_ids(n_theta, i):
    """Vertex ids of grid ring ``i``."""
    return list(range(i * n_theta, (i + 1) * n_theta))


def noisy_tube(radius=1.0, height=3.0, n_theta=24, n_z=30, amplitude=0.05, seed=0):
    """Tube with seeded radial and axial jitter on interior rings."""
    m = tube(radius, height, n_theta, n_z)
    rng = np.random.default_rng(seed)
    v = m.vertices.copy()
    r = np.linalg.norm(v[:, :2], axis=1)
    jig = rng.uniform(-amplitude, amplitude, size=(len(v), 2))
    interior = (v[:, 2] > 1e-12) & (v[:, 2] < height - 1e-12)
    scale = np.where(interior, 1.0, 0.0)
    v[:, :2] *= ((r + scale * jig[:, 0] * radius) / r)[:, None]
    v[:, 2] += scale * jig[:, 1] * height / n_z
    return SurfaceMesh(v, m.faces)


def vase(radius=1.0, height=3.0, n_theta=24, n_z=40, bulge=0.35):
    """Open tube with a smooth radius bulge (both ends open)."""
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    verts = []
    for i in range(n_z + 1):
        z = height * i / n_z
        r = radius * (1.0 + bulge * np.sin(np.pi * i / n_z))
        verts.append(
            np.column_stack(
                [r * np.cos(theta), r * np.sin(theta), np.full(n_theta, z)]
            )
        )
    return SurfaceMesh(np.concatenate(verts), _grid_faces(n_theta, n_z))


def swept_tube(path, radius=0.3, n_theta=16):
    """Sweep a circle along an open 3D polyline with twist-free frames.

    ``path`` is (k, 3); ``radius`` a scalar or (k,) profile.  Rings keep
    the grid layout of :func:`tube`.
    """
    path = np.asarray(path, dtype=np.float64)
    k = len(path)
    radii = np.broadcast_to(np.asarray(radius, dtype=np.float64), (k,))
    tang = np.gradient(path, axis=0)
    tang /= np.linalg.norm(tang, axis=1)[:, None]
    # parallel transport an initial normal along the path
    seed = np.array([1.0, 0.0, 0.0])
    if abs(np.dot(seed, tang[0])) > 0.9:
        seed = np.array([0.0, 1.0, 0.0])
    n = seed - np.dot(seed, tang[0]) * tang[0]
    n /= np.linalg.norm(n)
    normals = [n]
    for i in range(1, k):
        t0, t1 = tang[i - 1], tang[i]
        axis = np.cross(t0, t1)
        s = np.linalg.norm(axis)
        c = float(np.clip(np.dot(t0, t1), -1.0, 1.0))
        if s < 1e-14:
            normals.append(normals[-1])
            continue
        axis = axis / s
        ang = np.arctan2(s, c)
        v = normals[-1]
        v = (
            v * np.cos(ang)
            + np.cross(axis, v) * np.sin(ang)
            + axis * np.dot(axis, v) * (1 - np.cos(ang))
        )
        v = v - np.dot(v, tang[i]) * tang[i]
        normals.append(v / np.linalg.norm(v))
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    verts = []
    for i in range(k):
        b = np.cross(tang[i], normals[i])
        circle = (
            path[i]
            + radii[i] * np.outer(np.cos(theta), normals[i])
            + radii[i] * np.outer(np.sin(theta), b)
        )
        verts.append(circle)
    return SurfaceMesh(np.concatenate(verts), _grid_faces(n_theta, k - 1))


def bent_tube(bend_angle=2.0, bend_radius=2.0, radius=0.4, n_theta=20, n_len=40):
    """Tube swept along a circular arc (constant curvature)."""
    t = np.linspace(0.0, bend_angle, n_len + 1)
    path = np.column_stack(
        [bend_radius * np.cos(t), bend_radius * np.sin(t), np.zeros_like(t)]
    )
    return swept_tube(path, radius=radius, n_theta=n_theta)


def knotted_tube(radius=0.22, n_theta=18, n_len=80):
    """Open tube along a loosely knotted space curve (curvature + torsion)."""
    t = np.linspace(0.25, 2.4 * np.pi, n_len + 1)
    path = np.column_stack(
        [
            (1.6 + 0.6 * np.cos(1.5 * t)) * np.cos(t),
            (1.6 + 0.6 * np.cos(1.5 * t)) * np.sin(t),
            0.9 * np.sin(1.5 * t),
        ]
    )
    return swept_tube(path, radius=radius, n_theta=n_theta)


def uv_sphere(radius=1.0, n_theta=24, n_phi=16):
    """Closed sphere with polar fans; pole vertices are ids 0 and 1."""
    verts = [np.array([0.0, 0.0, radius]), np.array([0.0, 0.0, -radius])]
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    for i in range(1, n_phi):
        phi = np.pi * i / n_phi
        verts.append(
            np.column_stack(
                [
                    radius * np.sin(phi) * np.cos(theta),
                    radius * np.sin(phi) * np.sin(theta),
                    np.full(n_theta, radius * np.cos(phi)),
                ]
            ).reshape(-1, 3)
        )
    verts = np.vstack([np.array(verts[0])[None], np.array(verts[1])[None]] + verts[2:])
    faces = []
    first = lambda i: 2 + (i - 1) * n_theta  # noqa: E731 - tiny index helper
    for j in range(n_theta):
        jn = (j + 1) % n_theta
        faces.append([0, first(1) + j, first(1) + jn])
        faces.append([1, first(n_phi - 1) + jn, first(n_phi - 1) + j])
    for i in range(1, n_phi - 1):
        for j in range(n_theta):
            jn = (j + 1) % n_theta
            a, b = first(i) + j, first(i) + jn
            c, d = first(i + 1) + j, first(i + 1) + jn
            faces.append([a, d, b])
            faces.append([a, c, d])
    return SurfaceMesh(np.asarray(verts), np.array(faces, dtype=np.int64))


def torus(major=2.0, minor=0.6, n_u=24, n_v=16):
    """Closed torus grid (genus 1)."""
    verts = []
    for i in range(n_u):
        u = 2 * np.pi * i / n_u
        for j in range(n_v):
            v = 2 * np.pi * j / n_v
            r = major + minor * np.cos(v)
            verts.append([r * np.cos(u), r * np.sin(u), minor * np.sin(v)])
    faces = []
    for i in range(n_u):
        for j in range(n_v):
            a = i * n_v + j
            b = i * n_v + (j + 1) % n_v
            c = ((i + 1) % n_u) * n_v + j
            d = ((i + 1) % n_u) * n_v + (j + 1) % n_v
            faces.append([a, b, d])
            faces.append([a, d, c])
    return SurfaceMesh(np.array(verts), np.array(faces, dtype=np.int64))


def t_shape(n_theta=16, n_leg=8, n_arm=8, junction_radius=1.0, leg_length=2.5,
            arm_length=2.2, arm_radius=0.8, arm_lift=0.25):
    """Closed three-branch T: a leg tube and two arm tubes meeting at a
    shared junction curve (two junction points, three arcs), each branch
    capped by a fan.

    Returns
    -------
    (SurfaceMesh, dict)
        The dict carries ``loops`` (the two separating vertex loops whose
        edge union is the junction curve), ``hole_sites`` (the three cap
        center vertices, last three ids), ``names`` and ``traversal``
        (arm_left, leg, arm_right), and the id blocks of the junction
        circle and crotch arc.
    """
    if n_theta % 4:
        raise ValueError("n_theta must be a multiple of 4")
    nt, half = n_theta, n_theta // 2
    R, H, L = junction_radius, leg_length, arm_length
    ra, zc = arm_radius, arm_lift * junction_radius

    verts = []
    # junction circle (leg's top ring), ids 0..nt-1; slot 0 is J1=(0,R,0)
    th = np.pi / 2 + 2 * np.pi * np.arange(nt) / nt
    ring0 = np.column_stack([R * np.cos(th), R * np.sin(th), np.zeros(nt)])
    verts.extend(ring0)
    # crotch arc interior, ids nt..nt+half-2, from J1 toward J2 over +z
    m_ids = []
    for j in range(1, half):
        phi = np.pi * j / half
        m_ids.append(len(verts))
        verts.append(np.array([0.0, R * np.cos(phi), R * np.sin(phi)]))

    def leg_ring(i):
        z = -H * i / n_leg
        return np.column_stack([R * np.cos(th), R * np.sin(th), np.full(nt, z)])

    leg_base = len(verts)
    for i in range(1, n_leg + 1):
        verts.extend(leg_ring(i))
    leg_ids = lambda i, t: (t % nt) if i == 0 else leg_base + (i - 1) * nt + (t % nt)  # noqa: E731

    # arm base cycles (ids into existing vertices)
    base_left = [t for t in range(half + 1)] + [m_ids[half - 1 - j] for j in range(1, half)]
    base_right = [(half + t) % nt for t in range(half + 1)] + [m_ids[j - 1] for j in range(1, half)]

    def arm_tip(sign):
        psi0 = 0.0 if sign < 0 else np.pi
        psi = psi0 + 2 * np.pi * np.arange(nt) / nt
        return np.column_stack(
            [np.full(nt, sign * L), ra * np.cos(psi), zc + ra * np.sin(psi)]
        )

    def build_arm(base_ids, sign):
        base_pts = np.array([verts[i] for i in base_ids])
        tip = arm_tip(sign)
        sec_ids = [list(base_ids)]
        for s in range(1, n_arm + 1):
            u = s / n_arm
            sec = (1 - u) * base_pts + u * tip
            ids = list(range(len(verts), len(verts) + nt))
            verts.extend(sec)
            sec_ids.append(ids)
        tris = []
        for s in range(n_arm):
            for t in range(nt):
                a = sec_ids[s][t]
                b = sec_ids[s][(t + 1) % nt]
                ap = sec_ids[s + 1][t]
                bp = sec_ids[s + 1][(t + 1) % nt]
                tris.append([a, b, bp])
                tris.append([a, bp, ap])
        return tris, sec_ids[-1]

    faces = []
    for i in range(n_leg):
        for t in range(nt):
            a, b = leg_ids(i, t), leg_ids(i, t + 1)
            ap, bp = leg_ids(i + 1, t), leg_ids(i + 1, t + 1)
            faces.append([a, ap, bp])
            faces.append([a, bp, b])
    left_faces, left_tip = build_arm(base_left, -1)
    right_faces, right_tip = build_arm(base_right, +1)
    faces.extend(left_faces)
    faces.extend(right_faces)

    # caps last: their centers are the final three vertex ids, and their
    # fan faces are the final face block, so hole insertion keeps every
    # other id stable.
    cap_faces = []
    c_leg = len(verts)
    verts.append(np.array([0.0, 0.0, -H]))
    bottom = [leg_ids(n_leg, t) for t in range(nt)]
    for t in range(nt):
        cap_faces.append([c_leg, bottom[(t + 1) % nt], bottom[t]])
    c_left = len(verts)
    verts.append(np.array([-L, 0.0, zc]))
    for t in range(nt):
        cap_faces.append([c_left, left_tip[t], left_tip[(t + 1) % nt]])
    c_right = len(verts)
    verts.append(np.array([L, 0.0, zc]))
    for t in range(nt):
        cap_faces.append([c_right, right_tip[t], right_tip[(t + 1) % nt]])
    faces.extend(cap_faces)

    mesh = SurfaceMesh(np.array(verts), np.array(faces, dtype=np.int64))
    info = {
        "loops": [
            list(base_left),
            list(base_right),
        ],
        "hole_sites": [c_leg, c_left, c_right],
        "junction_ring": list(range(nt)),
        "crotch_arc": [0] + m_ids + [half],
        "names": ["leg", "arm_left", "arm_right"],
        "traversal": ["arm_left", "leg", "arm_right"],
    }
    return mesh, info


def t_shape_segmentation(info):
    """Segmentation dict for :func:`t_shape` output."""
    return {
        "loops": info["loops"],
        "open_sites": [{"type": "hole", "vertex": v} for v in info["hole_sites"]],
        "traversal": info["traversal"],
        "names": info["names"],
    }
