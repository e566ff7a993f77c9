"""HTTP/JSON facade over the pipeline for the interactive design loop.

Sessions live in memory (optionally mirrored to a directory); each one
caches the pipeline artifacts and invalidates everything downstream
when an upstream input changes.  Stage computations share the exact
code paths the batch driver uses, so service output is bit-identical
to a CLI run on the same inputs.
"""

import itertools
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.middleware.cors import CORSMiddleware

from .decomposition import SegmentationError, Segmentation, apply_segmentation, build_charts
from .layout import LayoutError, build_plan, emit_plan
from .mesh import MeshError, SurfaceMesh
from .ribbon import RemeshConfig, RibbonError, remesh_rulings, unfold
from .serialize import SerializeError, parse_obj, write_json, write_obj
from .solver import SolverConfig, parameterize
from .spiral import SpiralError, SpiralSpec, curve_quality, plan_lines, trace_curve

MODULE_OF = {
    SegmentationError: "decomposition",
    MeshError: "mesh",
    SpiralError: "spiral",
    RibbonError: "ribbon",
    LayoutError: "layout",
    SerializeError: "serialize",
}


def _validation(exc):
    for cls, module in MODULE_OF.items():
        if isinstance(exc, cls):
            break
    else:
        module = "request"
    raise HTTPException(
        422, {"code": "validation", "module": module, "message": str(exc)}
    )


def _stage_order(message):
    raise HTTPException(409, {"code": "stage-order", "message": message})


@dataclass
class Session:
    sid: str
    mesh: SurfaceMesh
    seg: Segmentation = None
    spec: SpiralSpec = None
    decomp: object = None
    charts: object = None
    x: object = None
    report: dict = None
    curve: object = None
    ribbon: object = None
    flat: object = None
    busy: bool = False
    error: str = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    def stages(self):
        return {
            "mesh": True,
            "segmentation": self.charts is not None,
            "parameterization": self.x is not None,
            "curve": self.curve is not None,
            "ribbon": self.ribbon is not None,
        }


def _flat_mesh(vertices, faces):
    """Preview geometry as flat position/index arrays."""
    return {
        "positions": [float(v) for v in vertices.reshape(-1)],
        "indices": [int(i) for i in faces.reshape(-1)],
    }


def create_app(data_dir=None):
    app = FastAPI(title="zipribbon design service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    sessions = {}
    registry_lock = threading.Lock()
    ids = itertools.count(1)
    root = Path(data_dir) if data_dir is not None else None

    def session_dir(sid):
        if root is None:
            return None
        d = root / sid
        d.mkdir(parents=True, exist_ok=True)
        return d

    def get(sid):
        with registry_lock:
            s = sessions.get(sid)
        if s is None:
            raise HTTPException(
                404, {"code": "unknown-session", "message": f"no session {sid}"}
            )
        return s

    def claim(s):
        """Reject with 409 while a job is running; single-writer."""
        if s.busy:
            raise HTTPException(
                409, {"code": "busy", "message": "a job is already running"}
            )

    async def read_json_body(request, default=None):
        body = await request.body()
        if not body:
            return default
        try:
            import json

            return json.loads(body)
        except ValueError as exc:
            _validation(exc)

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        body = await request.body()
        try:
            text = body.decode("utf-8")
            mesh = SurfaceMesh(*parse_obj(text, source="upload"))
        except (UnicodeDecodeError, SerializeError, MeshError) as exc:
            _validation(exc)
        with registry_lock:
            sid = str(next(ids))
            sessions[sid] = Session(sid=sid, mesh=mesh)
        d = session_dir(sid)
        if d is not None:
            write_obj(d / "mesh.obj", mesh.vertices, mesh.faces)
        return {
            "id": sid,
            "vertices": mesh.n_vertices,
            "faces": mesh.n_faces,
            "boundary_loops": len(mesh.boundary_loops()),
        }

    @app.get("/sessions/{sid}/status")
    def status(sid: str):
        s = get(sid)
        with s.lock:
            return {
                "running": s.busy,
                "error": s.error,
                "stages": s.stages(),
                "report": s.report,
            }

    @app.put("/sessions/{sid}/segmentation")
    async def put_segmentation(sid: str, request: Request):
        s = get(sid)
        data = await read_json_body(request)
        if not isinstance(data, dict):
            _validation(ValueError("segmentation body must be a JSON object"))
        with s.lock:
            claim(s)
            try:
                seg = Segmentation.from_dict(data)
                decomp = apply_segmentation(s.mesh, seg)
                charts = build_charts(decomp)
            except (MeshError, SegmentationError) as exc:
                _validation(exc)
            s.seg = seg
            s.decomp = decomp
            s.charts = charts
            # everything downstream of the decomposition is now stale
            s.x = None
            s.report = None
            s.curve = None
            s.ribbon = None
            s.flat = None
            s.error = None
        d = session_dir(sid)
        if d is not None:
            write_json(d / "seg.json", seg.to_dict())
        return {
            "parts": [
                {
                    "index": p.index,
                    "name": p.name,
                    "faces": len(p.faces),
                    "role": p.role,
                }
                for p in decomp.parts
            ],
            "interfaces": [
                {"index": i.index, "parts": list(i.parts), "edges": i.n_edges}
                for i in decomp.interfaces
            ],
            "traversal": list(decomp.traversal),
        }

    @app.post("/sessions/{sid}/parameterize", status_code=202)
    async def post_parameterize(sid: str, request: Request):
        s = get(sid)
        data = await read_json_body(request, default={})
        try:
            config = SolverConfig(**data)
        except TypeError as exc:
            _validation(exc)
        with s.lock:
            claim(s)
            if s.charts is None:
                _stage_order("no segmentation; upload one first")
            s.busy = True
            s.error = None
            s.x = None
            s.report = None
            s.curve = None
            s.ribbon = None
            s.flat = None
            charts = s.charts

        def run():
            try:
                x, report, _, _ = parameterize(charts, config)
                with s.lock:
                    s.x = x
                    s.report = report.to_dict()
            except Exception as exc:  # surfaced via status polling
                with s.lock:
                    s.error = str(exc)
            finally:
                with s.lock:
                    s.busy = False

        threading.Thread(target=run, daemon=True).start()
        return {"status": "running"}

    @app.put("/sessions/{sid}/spiral")
    async def put_spiral(sid: str, request: Request):
        s = get(sid)
        data = await read_json_body(request, default={})
        if not isinstance(data, dict):
            _validation(ValueError("spiral spec body must be a JSON object"))
        with s.lock:
            claim(s)
            if s.x is None:
                _stage_order("no parameterization; run parameterize first")
            try:
                spec = SpiralSpec.from_dict(data)
                lines = plan_lines(spec, s.charts, s.x)
                curve = trace_curve(lines, s.charts, s.x)
                quality = curve_quality(curve, s.charts, s.x)
            except (SpiralError, KeyError, ValueError) as exc:
                _validation(exc)
            s.spec = spec
            s.curve = curve
            s.ribbon = None
            s.flat = None
        d = session_dir(sid)
        if d is not None:
            write_json(d / "spec.json", spec.to_dict())
        return {
            "curve": {"points": [float(v) for v in curve.points.reshape(-1)]},
            "quality": {
                "samples": curve.n_samples,
                "total_length": quality.total_length,
                "spacing_mean": quality.spacing_mean,
                "spacing_std": quality.spacing_std,
                "spacing_cv": quality.spacing_cv,
                "spacing_min": quality.spacing_min,
                "max_turning": quality.max_turning,
                "median_turning": quality.median_turning,
            },
        }

    @app.post("/sessions/{sid}/ribbon")
    async def post_ribbon(sid: str, request: Request):
        s = get(sid)
        data = await read_json_body(request, default={})
        width = data.get("width") if isinstance(data, dict) else None
        with s.lock:
            claim(s)
            if s.curve is None:
                _stage_order("no curve; set the spiral first")
            try:
                ribbon = remesh_rulings(
                    s.curve, s.charts, s.x, RemeshConfig(target_width=width)
                )
                flat = unfold(ribbon)
            except RibbonError as exc:
                _validation(exc)
            s.ribbon = ribbon
            s.flat = flat
        flat3 = np.hstack([flat.vertices, np.zeros((len(flat.vertices), 1))])
        return {
            "ribbon": _flat_mesh(ribbon.mesh.vertices, ribbon.mesh.faces),
            "flat": _flat_mesh(flat3, flat.faces),
            "zipper_length": ribbon.zipper_length,
            "units": len(ribbon.units),
        }

    @app.post("/sessions/{sid}/export")
    async def post_export(sid: str, request: Request):
        s = get(sid)
        data = await read_json_body(request, default={})
        if not isinstance(data, dict):
            _validation(ValueError("export body must be a JSON object"))
        bed = data.get("bed", (600.0, 400.0))
        fmt = data.get("format", "svg")
        spacing = data.get("spacing", 5.0)
        interval = data.get("interval", 50.0)
        with s.lock:
            claim(s)
            if s.flat is None:
                _stage_order("no ribbon; build it first")
            try:
                plan = build_plan(
                    s.flat,
                    bed=(float(bed[0]), float(bed[1])),
                    spacing=float(spacing),
                    marker_interval=float(interval),
                )
                text = emit_plan(plan, fmt)
            except (LayoutError, RibbonError, TypeError, ValueError) as exc:
                _validation(exc)
        media = "image/svg+xml" if fmt == "svg" else "application/dxf"
        return Response(content=text, media_type=media)

    return app
