"""HTTP facade for the interactive workbench.

Sessions are kept in memory with LRU eviction. Heavy artifacts
(reliable image, DNN output, confidence map) are computed once per
session and reused across fusion-weight changes; only the fusion itself
reruns when the query parameters change.
"""

from __future__ import annotations

import io
import math
import threading
import time
import uuid
from collections import OrderedDict
from dataclasses import replace

import numpy as np
from fastapi import FastAPI, Form, HTTPException, Query, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import Response
from PIL import Image as PILImage
from pydantic import BaseModel

from . import metrics as metrics_mod
from .filters import ReliableFilterSpec
from .fusion import FusionParams, fuse
from .imagecore import ImageIOError, NoiseSpec, add_noise, load_image, quantize
from .nnet import load_params
from .pipeline import colorize_confidence, compute_artifacts

MAX_UPLOAD_BYTES = 16 * 1024 * 1024
DEFAULT_MAX_SESSIONS = 32


class SessionCreated(BaseModel):
    id: str
    height: int
    width: int


class ConfidenceGrid(BaseModel):
    gh: int
    gw: int
    values: list[float]  # row-major


class MetricsResponse(BaseModel):
    # psnr is null when the images are identical (infinite PSNR).
    psnr: float | None
    ssim: float
    mse: float


class Session:
    def __init__(self, noisy: np.ndarray, clean: np.ndarray | None):
        self.noisy = noisy
        self.clean = clean
        self.artifacts: dict[str, np.ndarray] = {}
        self.created_at = time.time()
        self.lock = threading.Lock()
        self.denoise_calls = 0


def png_bytes(img: np.ndarray) -> bytes:
    """Encode a [0,1] grayscale or (H,W,3) color image as PNG."""
    data = quantize(img)
    mode = "L" if img.ndim == 2 else "RGB"
    buf = io.BytesIO()
    PILImage.fromarray(data.astype(np.uint8), mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def _png_response(img: np.ndarray) -> Response:
    return Response(content=png_bytes(img), media_type="image/png")


def create_app(
    denoiser_path=None,
    confidence_path=None,
    denoiser_params: dict[str, np.ndarray] | None = None,
    confidence_params: dict[str, np.ndarray] | None = None,
    reliable_spec: ReliableFilterSpec | None = None,
    max_sessions: int = DEFAULT_MAX_SESSIONS,
) -> FastAPI:
    """Build the service app. Model parameters are read-only shared state
    loaded once at startup; they may also be passed in directly."""
    if denoiser_params is None and denoiser_path is not None:
        denoiser_params = load_params(denoiser_path)
    if confidence_params is None and confidence_path is not None:
        confidence_params = load_params(confidence_path)
    if reliable_spec is None:
        reliable_spec = ReliableFilterSpec()

    app = FastAPI(title="ccid", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    sessions: OrderedDict[str, Session] = OrderedDict()
    registry_lock = threading.Lock()
    app.state.sessions = sessions

    def get_session(session_id: str) -> Session:
        with registry_lock:
            session = sessions.get(session_id)
            if session is None:
                raise HTTPException(status_code=404, detail="unknown session")
            sessions.move_to_end(session_id)
            return session

    def ensure_artifacts(session: Session) -> dict[str, np.ndarray]:
        if denoiser_params is None:
            raise HTTPException(status_code=503, detail="denoiser model not loaded")
        with session.lock:
            if not session.artifacts:
                session.artifacts = compute_artifacts(
                    session.noisy, reliable_spec, denoiser_params, confidence_params
                )
                session.denoise_calls += 1
            return session.artifacts

    def parse_fusion(method: str, w: float, guided: bool, threshold: float,
                     levels: int) -> FusionParams:
        params = FusionParams(method=method, weight=w, guided=guided,
                              threshold=threshold, levels=levels)
        try:
            params.validate()
        except ValueError as e:
            raise HTTPException(status_code=422, detail=str(e)) from e
        return params

    def fused_image(session: Session, params: FusionParams) -> np.ndarray:
        artifacts = ensure_artifacts(session)
        conf = None
        if params.guided:
            conf = artifacts.get("confidence")
            if conf is None:
                raise HTTPException(status_code=503, detail="confidence model not loaded")
        return fuse(artifacts["reliable"], artifacts["dnn"], params, conf=conf)

    async def read_upload(upload: UploadFile) -> np.ndarray:
        raw = await upload.read()
        if len(raw) > MAX_UPLOAD_BYTES:
            raise HTTPException(status_code=413, detail="upload exceeds 16 MB")
        try:
            return load_image(io.BytesIO(raw))
        except ImageIOError as e:
            raise HTTPException(status_code=400, detail=str(e)) from e

    @app.post("/api/sessions", response_model=SessionCreated)
    async def create_session(
        image: UploadFile,
        clean: UploadFile | None = None,
        noise_kind: str | None = Form(default=None),
        noise_sigma: float = Form(default=25.0),
        noise_seed: int = Form(default=0),
    ):
        img = await read_upload(image)
        clean_img = await read_upload(clean) if clean is not None else None
        if noise_kind is not None:
            spec = NoiseSpec(kind=noise_kind, sigma=noise_sigma, seed=noise_seed)
            try:
                spec.validate()
            except ValueError as e:
                raise HTTPException(status_code=422, detail=str(e)) from e
            if clean_img is None:
                clean_img = img
            img = add_noise(img, spec)
        session = Session(img, clean_img)
        session_id = uuid.uuid4().hex
        with registry_lock:
            sessions[session_id] = session
            while len(sessions) > max_sessions:
                sessions.popitem(last=False)
        return SessionCreated(id=session_id, height=img.shape[0], width=img.shape[1])

    @app.get("/api/sessions/{session_id}/noisy")
    def get_noisy(session_id: str):
        return _png_response(get_session(session_id).noisy)

    @app.get("/api/sessions/{session_id}/reliable")
    def get_reliable(session_id: str):
        return _png_response(ensure_artifacts(get_session(session_id))["reliable"])

    @app.get("/api/sessions/{session_id}/dnn")
    def get_dnn(session_id: str):
        return _png_response(ensure_artifacts(get_session(session_id))["dnn"])

    @app.get("/api/sessions/{session_id}/residual")
    def get_residual(session_id: str):
        # Residuals are signed; display around mid gray.
        return _png_response(ensure_artifacts(get_session(session_id))["residual"] + 0.5)

    @app.get("/api/sessions/{session_id}/fused")
    def get_fused(
        session_id: str,
        method: str = Query(default="dct"),
        w: float = Query(default=0.5),
        guided: bool = Query(default=False),
        threshold: float = Query(default=0.8),
        levels: int = Query(default=3),
    ):
        session = get_session(session_id)
        params = parse_fusion(method, w, guided, threshold, levels)
        return _png_response(fused_image(session, params))

    @app.get("/api/sessions/{session_id}/confidence")
    def get_confidence(
        session_id: str,
        format: str = Query(default="json"),
        threshold: float = Query(default=0.8),
    ):
        session = get_session(session_id)
        if confidence_params is None:
            raise HTTPException(status_code=503, detail="confidence model not loaded")
        conf = ensure_artifacts(session)["confidence"]
        if format == "png":
            return _png_response(colorize_confidence(conf, threshold))
        if format != "json":
            raise HTTPException(status_code=422, detail="format must be json or png")
        return ConfidenceGrid(gh=conf.shape[0], gw=conf.shape[1],
                              values=[float(v) for v in conf.ravel()])

    @app.get("/api/sessions/{session_id}/metrics", response_model=MetricsResponse)
    def get_metrics(
        session_id: str,
        method: str = Query(default="dct"),
        w: float = Query(default=0.5),
        guided: bool = Query(default=False),
        threshold: float = Query(default=0.8),
        levels: int = Query(default=3),
    ):
        session = get_session(session_id)
        if session.clean is None:
            raise HTTPException(status_code=409, detail="session has no ground truth")
        params = parse_fusion(method, w, guided, threshold, levels)
        fused = fused_image(session, params)
        p = metrics_mod.psnr(fused, session.clean)
        return MetricsResponse(
            psnr=None if math.isinf(p) else p,
            ssim=metrics_mod.ssim(fused, session.clean),
            mse=metrics_mod.mse(fused, session.clean),
        )

    @app.get("/api/sessions/{session_id}/error")
    def get_error(
        session_id: str,
        method: str = Query(default="dct"),
        w: float = Query(default=0.5),
        guided: bool = Query(default=False),
        threshold: float = Query(default=0.8),
        levels: int = Query(default=3),
        gain: float = Query(default=5.0),
    ):
        """Amplified |fused - ground truth| heatmap for the UI."""
        session = get_session(session_id)
        if session.clean is None:
            raise HTTPException(status_code=409, detail="session has no ground truth")
        params = parse_fusion(method, w, guided, threshold, levels)
        fused = fused_image(session, params)
        return _png_response(np.clip(np.abs(fused - session.clean) * gain, 0.0, 1.0))

    return app
