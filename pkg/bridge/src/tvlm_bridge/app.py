"""FastAPI application implementing the embedding wire protocol.

POST /embed accepts {"image": base64 8-bit RGB bytes row-major,
"height", "width", "channels", "text"} and returns {"tokens":
[[d_h floats] x l_f], "token_types": ["text"|"visual" x l_f]}.
GET /health reports {"status", "model", "l_f", "d_h"}. Schema
violations return 400 with a field path; payloads over 8 MiB return
413. Echo mode needs no model weights; real mode serves a frozen
backbone and degrades (503 on /embed) if it cannot load.
"""

from __future__ import annotations

import base64
import binascii
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .backbone import BackboneLoadError, ViltBackbone, fit_to_length
from .echo import echo_embed

MAX_PAYLOAD_BYTES = 8 * 1024 * 1024
DEFAULT_BACKBONE = "dandelin/vilt-b32-finetuned-coco"


@dataclass
class BridgeConfig:
    backbone: str = DEFAULT_BACKBONE
    port: int = 8808
    mode: str = "echo"  # echo | real
    l_f: int = 156
    d_h: int = 768

    def __post_init__(self):
        if self.mode not in ("echo", "real"):
            raise ValueError(f"mode must be echo|real, got {self.mode!r}")
        if self.l_f < 2 or self.d_h < 1:
            raise ValueError(f"unusable shape l_f={self.l_f} d_h={self.d_h}")


class EmbedRequest(BaseModel):
    image: str
    height: int
    width: int
    channels: int
    text: str


def _field_path(exc: RequestValidationError) -> str:
    errors = exc.errors()
    if not errors:
        return "request"
    loc = errors[0].get("loc", ())
    return ".".join(str(p) for p in loc if p != "body") or "request"


def create_app(config: BridgeConfig) -> FastAPI:
    app = FastAPI(title="embedding bridge")
    app.state.config = config
    app.state.backbone = None
    app.state.load_error = None

    if config.mode == "real":
        try:
            app.state.backbone = ViltBackbone(config.backbone, config.d_h)
        except BackboneLoadError as exc:
            app.state.load_error = str(exc)

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"error": f"invalid field: {_field_path(exc)}"})

    @app.middleware("http")
    async def payload_cap(request: Request, call_next):
        length = request.headers.get("content-length")
        if length is not None and int(length) > MAX_PAYLOAD_BYTES:
            return JSONResponse(status_code=413,
                                content={"error": "payload over 8 MiB"})
        return await call_next(request)

    @app.get("/health")
    def health():
        if config.mode == "echo":
            return {"status": "ok", "model": "echo", "l_f": config.l_f,
                    "d_h": config.d_h}
        if app.state.backbone is None:
            return {"status": "degraded", "model": config.backbone,
                    "l_f": config.l_f, "d_h": config.d_h,
                    "detail": app.state.load_error}
        return {"status": "ok", "model": config.backbone, "l_f": config.l_f,
                "d_h": config.d_h}

    @app.post("/embed")
    def embed(req: EmbedRequest):
        try:
            raw = base64.b64decode(req.image, validate=True)
        except (binascii.Error, ValueError):
            return JSONResponse(status_code=400,
                                content={"error": "invalid field: image (bad base64)"})
        expected = req.height * req.width * req.channels
        if req.height < 1 or req.width < 1 or req.channels not in (1, 3):
            return JSONResponse(
                status_code=400,
                content={"error": "invalid field: height/width/channels"})
        if len(raw) != expected:
            return JSONResponse(
                status_code=400,
                content={"error": f"invalid field: image ({len(raw)} bytes, "
                                  f"expected {expected})"})

        if config.mode == "echo":
            tokens, types = echo_embed(req.image, req.height, req.width,
                                       req.channels, req.text,
                                       config.l_f, config.d_h)
            return {"tokens": tokens, "token_types": types}

        if app.state.backbone is None:
            return JSONResponse(status_code=503,
                                content={"error": "backbone unavailable: "
                                                  + str(app.state.load_error)})
        pixels = np.frombuffer(raw, dtype=np.uint8).reshape(
            req.height, req.width, req.channels)
        hidden, types = app.state.backbone.embed(pixels, req.text)
        hidden, types = fit_to_length(hidden, types, config.l_f)
        return {"tokens": hidden.tolist(), "token_types": types}

    return app
