"""HTTP service exposing classification and moderation.

Endpoints: POST /classify, POST /moderate, GET /health, GET /model.
No inference endpoint answers before the checkpoint has loaded; requests
beyond the configured body size get 413; malformed JSON gets 400. A
semaphore bounds concurrent inference over the shared eval-mode model.
"""

from __future__ import annotations

import hashlib
import threading
from contextlib import asynccontextmanager
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .corpus import LABEL_NAMES
from .moderation import RewriterConfig, classify, make_rewriter, moderate
from .models import load_checkpoint
from .textprep import load_tokenizer

RESPONSE_SCHEMA_VERSION = 1


@dataclass
class ServiceConfig:
    checkpoint_path: str
    tokenizer_path: str
    host: str = "127.0.0.1"
    port: int = 8000
    rewriter: RewriterConfig = field(default_factory=RewriterConfig)
    fail_open: bool = False
    max_body_bytes: int = 16384
    max_concurrent: int = 4


class TextRequest(BaseModel):
    text: str


def _file_sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def create_app(config: ServiceConfig, rewriter_transport=None) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        handle = load_checkpoint(config.checkpoint_path)
        handle.module.eval()
        app.state.handle = handle
        app.state.tokenizer = load_tokenizer(config.tokenizer_path)
        app.state.rewriter = make_rewriter(config.rewriter, transport=rewriter_transport)
        app.state.checkpoint_hash = _file_sha256(config.checkpoint_path)
        app.state.ready = True
        yield
        app.state.ready = False

    app = FastAPI(lifespan=lifespan)
    app.state.ready = False
    inference_slots = threading.Semaphore(config.max_concurrent)

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": "malformed request body"})

    @app.middleware("http")
    async def _body_size_guard(request: Request, call_next):
        length = request.headers.get("content-length")
        if length and int(length) > config.max_body_bytes:
            return JSONResponse(status_code=413, content={"error": "request body too large"})
        return await call_next(request)

    def _not_ready():
        return JSONResponse(status_code=503, content={"error": "model not loaded yet"})

    @app.get("/health")
    def health():
        if not app.state.ready:
            return JSONResponse(status_code=503, content={"status": "loading"})
        return {"status": "ready"}

    @app.get("/model")
    def model_info():
        if not app.state.ready:
            return _not_ready()
        return {
            "spec": app.state.handle.spec.to_dict(),
            "checkpoint_sha256": app.state.checkpoint_hash,
            "parameter_count": app.state.handle.parameter_count,
        }

    @app.post("/classify")
    def classify_endpoint(body: TextRequest):
        if not app.state.ready:
            return _not_ready()
        with inference_slots:
            label, probs, _ = classify(body.text, app.state.handle, app.state.tokenizer)
        return {
            "schema_version": RESPONSE_SCHEMA_VERSION,
            "label": label,
            "label_name": LABEL_NAMES[label],
            "probabilities": probs,
        }

    @app.post("/moderate")
    def moderate_endpoint(body: TextRequest):
        if not app.state.ready:
            return _not_ready()
        with inference_slots:
            result = moderate(
                body.text,
                app.state.handle,
                app.state.tokenizer,
                app.state.rewriter,
                fail_open=config.fail_open,
            )
        payload = {"schema_version": RESPONSE_SCHEMA_VERSION, **result.to_dict()}
        payload["label_name"] = LABEL_NAMES[result.label]
        if result.action == "error":
            return JSONResponse(status_code=502, content=payload)
        return payload

    return app


def run(config: ServiceConfig) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port)
