"""HTTP API for the segmentation tuner.

All segmentation happens server-side; the browser only posts parameter
documents and renders the responses. The one piece of shared mutable
state is the current parameter document, guarded by a lock (single
writer, many readers).
"""
from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from .raster import binarize_otsu, load_image, png_bytes
from .segmentation import (
    SegParams,
    render_overlay,
    segment_page,
    segmentation_to_dict,
    validate_seg_params,
)

IMAGE_SUFFIXES = (".png", ".pgm")


def _params_from_query(current: dict, query: dict) -> dict:
    doc = dict(current)
    for key in ("connectivity", "small_blob_area", "line_gap"):
        if query.get(key) is not None:
            doc[key] = query[key]
    if query.get("reading_order") is not None:
        doc["reading_order"] = query["reading_order"]
    return doc


def create_app(image_dir, initial_params: SegParams | None = None,
               static_dir=None) -> FastAPI:
    image_dir = Path(image_dir)
    app = FastAPI(title="scriptorium tuner api")
    state = {"params": (initial_params or SegParams()).to_dict()}
    lock = threading.Lock()

    def list_images() -> dict[str, Path]:
        out: dict[str, Path] = {}
        for p in sorted(image_dir.iterdir()) if image_dir.is_dir() else []:
            if p.suffix.lower() in IMAGE_SUFFIXES:
                out[p.stem] = p
        return out

    def binarized(image_id: str):
        path = list_images().get(image_id)
        if path is None:
            return None
        gray = load_image(path)
        binary, _ = binarize_otsu(gray)
        return gray, binary

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.get("/api/images")
    def images():
        out = []
        for image_id, path in list_images().items():
            gray = load_image(path)
            out.append({"id": image_id, "width": gray.width, "height": gray.height})
        return out

    @app.get("/api/image/{image_id}")
    def image(image_id: str):
        loaded = binarized(image_id)
        if loaded is None:
            return JSONResponse({"errors": {"image_id": "unknown image"}}, status_code=404)
        gray, _ = loaded
        return Response(png_bytes(gray.pixels), media_type="image/png")

    @app.post("/api/segment")
    async def segment(body: dict):
        image_id = body.get("image_id")
        if not isinstance(image_id, str):
            return JSONResponse({"errors": {"image_id": "required string"}}, status_code=400)
        with lock:
            doc = dict(state["params"])
        doc.update(body.get("params") or {})
        errors = validate_seg_params(doc)
        if errors:
            return JSONResponse({"errors": errors}, status_code=400)
        loaded = binarized(image_id)
        if loaded is None:
            return JSONResponse({"errors": {"image_id": "unknown image"}}, status_code=404)
        _, binary = loaded
        seg = segment_page(binary, SegParams(**doc))
        return segmentation_to_dict(seg)

    @app.get("/api/overlay/{image_id}")
    def overlay(image_id: str, connectivity: int | None = None,
                small_blob_area: int | None = None, line_gap: int | None = None,
                reading_order: str | None = None):
        with lock:
            doc = _params_from_query(state["params"], {
                "connectivity": connectivity,
                "small_blob_area": small_blob_area,
                "line_gap": line_gap,
                "reading_order": reading_order,
            })
        errors = validate_seg_params(doc)
        if errors:
            return JSONResponse({"errors": errors}, status_code=400)
        loaded = binarized(image_id)
        if loaded is None:
            return JSONResponse({"errors": {"image_id": "unknown image"}}, status_code=404)
        _, binary = loaded
        seg = segment_page(binary, SegParams(**doc))
        rgb = render_overlay(binary, seg)
        return Response(png_bytes(rgb), media_type="image/png")

    @app.get("/api/params")
    def get_params():
        with lock:
            return dict(state["params"])

    @app.put("/api/params")
    async def put_params(body: dict):
        errors = validate_seg_params(body)
        if errors:
            return JSONResponse({"errors": errors}, status_code=400)
        full = SegParams(**body).to_dict()
        with lock:
            state["params"] = full
        return full

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
