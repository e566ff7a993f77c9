"""Artifact files: JSON with fixed float formatting, OBJ meshes and polylines.

Every float is written with 17 significant digits so artifacts round-trip
exactly and identical runs produce byte-identical files.
"""

import json
import math
from pathlib import Path

import numpy as np


class SerializeError(Exception):
    pass


def format_float(v):
    v = float(v)
    if not math.isfinite(v):
        raise SerializeError("non-finite number in artifact")
    return f"{v:.17g}"


def _scalar(obj):
    if obj is None or obj is True or obj is False:
        return {None: "null", True: "true", False: "false"}[obj]
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    return None


def _emit(obj, lines, indent):
    pad = "  " * indent
    s = _scalar(obj)
    if s is not None:
        lines[-1] += s
        return
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        flat = [_scalar(v) for v in obj]
        if all(v is not None for v in flat):
            lines[-1] += "[" + ", ".join(flat) + "]"
            return
        lines[-1] += "["
        for i, v in enumerate(obj):
            lines.append(pad + "  ")
            _emit(v, lines, indent + 1)
            if i < len(obj) - 1:
                lines[-1] += ","
        lines.append(pad + "]")
        return
    if isinstance(obj, dict):
        if not obj:
            lines[-1] += "{}"
            return
        lines[-1] += "{"
        keys = sorted(obj, key=str)
        for i, k in enumerate(keys):
            lines.append(pad + "  " + json.dumps(str(k)) + ": ")
            _emit(obj[k], lines, indent + 1)
            if i < len(keys) - 1:
                lines[-1] += ","
        lines.append(pad + "}")
        return
    raise SerializeError(f"cannot serialize {type(obj).__name__} in artifact")


def dumps(obj):
    """Deterministic JSON: sorted keys, %.17g floats, scalar rows inline."""
    lines = [""]
    _emit(obj, lines, 0)
    return "\n".join(lines) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def read_json(path):
    return json.loads(Path(path).read_text())


# ----------------------------------------------------------------------
# OBJ


def write_obj(path, vertices, faces=None, polylines=None, comment=None):
    """Triangle mesh or polyline as Wavefront OBJ (indices 1-based)."""
    v = np.asarray(vertices, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] not in (2, 3):
        raise SerializeError("vertices must be (n, 2) or (n, 3)")
    if v.shape[1] == 2:
        v = np.hstack([v, np.zeros((len(v), 1))])
    rows = []
    if comment:
        rows.append(f"# {comment}")
    for p in v:
        rows.append(f"v {format_float(p[0])} {format_float(p[1])} {format_float(p[2])}")
    if faces is not None:
        for f in np.asarray(faces, dtype=np.int64):
            rows.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    if polylines is not None:
        for chain in polylines:
            ids = " ".join(str(int(i) + 1) for i in chain)
            rows.append(f"l {ids}")
    Path(path).write_text("\n".join(rows) + "\n")


def parse_obj(text, source="<obj>"):
    """(vertices, faces) from OBJ text; triangle faces only."""
    verts = []
    faces = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        tok = raw.split()
        if not tok or tok[0].startswith("#"):
            continue
        if tok[0] == "v":
            if len(tok) < 4:
                raise SerializeError(f"{source}:{ln}: vertex needs 3 coordinates")
            verts.append([float(t) for t in tok[1:4]])
        elif tok[0] == "f":
            idx = []
            for t in tok[1:]:
                i = int(t.split("/")[0])
                idx.append(i - 1 if i > 0 else len(verts) + i)
            if len(idx) != 3:
                raise SerializeError(
                    f"{source}:{ln}: face has {len(idx)} corners; "
                    "triangle meshes only"
                )
            faces.append(idx)
        # vt/vn/l/g/o/s/usemtl/mtllib carry nothing the pipeline needs
    if not verts:
        raise SerializeError(f"{source}: no vertices")
    return (
        np.asarray(verts, dtype=np.float64),
        np.asarray(faces, dtype=np.int64).reshape(-1, 3),
    )


def read_obj(path):
    """(vertices, faces) from an OBJ file; triangle faces only."""
    return parse_obj(Path(path).read_text(), source=str(path))
