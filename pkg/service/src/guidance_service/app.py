"""FastAPI application exposing the guidance wire protocol.

Endpoints:
  GET  /v1/health     readiness probe; 503 until the models are loaded
  POST /v1/image_sds  single-image gradient
  POST /v1/video_sds  per-frame gradients for a frame sequence

Malformed payloads answer 400; requests before the models finish
loading answer 503.
"""

from contextlib import asynccontextmanager
from typing import List, Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from guidance_service.backend import SyntheticScoreModel
from guidance_service.codec import PayloadError, decode_image, encode_image
from guidance_service.config import ServiceConfig


class ImagePayload(BaseModel):
    h: int
    w: int
    data: str


class ImageSDSRequest(BaseModel):
    prompt: str
    cfg: float = 7.5
    t: float
    seed: int = 0
    image: ImagePayload


class VideoSDSRequest(BaseModel):
    prompt: str
    cfg: float = 30.0
    t: float
    seed: int = 0
    frames: List[ImagePayload]


class ModelRegistry:
    """Owns the loaded backends; requests are refused until load() ran."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.image_model: Optional[SyntheticScoreModel] = None
        self.video_model: Optional[SyntheticScoreModel] = None

    @property
    def ready(self) -> bool:
        return self.image_model is not None and self.video_model is not None

    def load(self) -> None:
        cfg = self.config
        self.image_model = SyntheticScoreModel(cfg.image_model, cfg.model_seed,
                                               cfg.features)
        self.video_model = SyntheticScoreModel(cfg.video_model, cfg.model_seed + 1,
                                               cfg.features)


def _bad_request(detail: str) -> JSONResponse:
    return JSONResponse(status_code=400, content={"detail": detail})


def _unready() -> JSONResponse:
    return JSONResponse(status_code=503, content={"detail": "models not loaded"})


def create_app(config: Optional[ServiceConfig] = None) -> FastAPI:
    config = config or ServiceConfig()
    registry = ModelRegistry(config)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        registry.load()
        yield

    app = FastAPI(title="guidance-service", lifespan=lifespan)
    app.state.registry = registry

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return _bad_request(str(exc.errors()[:3]))

    @app.get("/v1/health")
    async def health():
        if not registry.ready:
            return _unready()
        return {"status": "ok", "image_model": config.image_model,
                "video_model": config.video_model, "device": config.device}

    @app.post("/v1/image_sds")
    async def image_sds(req: ImageSDSRequest):
        if not registry.ready:
            return _unready()
        if not 0.0 < req.t < 1.0:
            return _bad_request(f"t must lie in (0, 1), got {req.t}")
        try:
            image = decode_image(req.image.model_dump())
        except PayloadError as exc:
            return _bad_request(str(exc))
        grad = registry.image_model.image_grad(image, req.prompt, req.cfg,
                                               req.t, req.seed)
        return {"grad": encode_image(grad), "weight": 1.0}

    @app.post("/v1/video_sds")
    async def video_sds(req: VideoSDSRequest):
        if not registry.ready:
            return _unready()
        if not 0.0 < req.t < 1.0:
            return _bad_request(f"t must lie in (0, 1), got {req.t}")
        if not req.frames:
            return _bad_request("frames must not be empty")
        try:
            frames = [decode_image(f.model_dump()) for f in req.frames]
        except PayloadError as exc:
            return _bad_request(str(exc))
        shapes = {f.shape for f in frames}
        if len(shapes) != 1:
            return _bad_request(f"mismatched frame sizes: {sorted(shapes)}")
        grads = registry.video_model.video_grads(frames, req.prompt, req.cfg,
                                                 req.t, req.seed)
        return {"grads": [encode_image(g) for g in grads], "weight": 1.0}

    return app
