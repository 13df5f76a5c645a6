"""FastAPI wrapper around a loaded model.

One model per app instance, loaded once at construction. Inference
endpoints never mutate parameters, so concurrent requests are safe.
Input problems (undecodable WAV, wrong rate, wrong feature dim) map to
HTTP 400 with the underlying message as the detail.
"""

from __future__ import annotations

import base64
import binascii

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..audio import AudioError, decode_wav, encode_wav
from ..checkpoint import load_model
from ..metrics import benchmark_model, evaluate_pair, snr
from ..model import BiVocoder, FeatureSequence, preset_name
from .schemas import (
    BenchmarkRequest,
    BenchmarkResponse,
    CopySynthesisRequest,
    CopySynthesisResponse,
    EvaluateRequest,
    EvaluateResponse,
    ExtractRequest,
    FeaturePayload,
    HealthResponse,
    ModelInfo,
    SynthesizeRequest,
    WavResponse,
)

_BAD_INPUT = (AudioError, ValueError)


def _b64_bytes(field: str, value: str) -> bytes:
    try:
        return base64.b64decode(value.encode("ascii"), validate=True)
    except (binascii.Error, UnicodeEncodeError) as e:
        raise HTTPException(400, f"{field}: invalid base64: {e}") from e


def _request_wav(field: str, value: str, sample_rate: int) -> np.ndarray:
    try:
        return decode_wav(_b64_bytes(field, value), sample_rate)
    except AudioError as e:
        raise HTTPException(400, f"{field}: {e}") from e


def _wav_response(samples: np.ndarray, sample_rate: int) -> WavResponse:
    return WavResponse(wav_base64=base64.b64encode(
        encode_wav(samples, sample_rate)).decode("ascii"),
        samples=len(samples), sample_rate=sample_rate)


def _feature_payload(feats: FeatureSequence) -> FeaturePayload:
    data = np.ascontiguousarray(feats.data, dtype="<f4")
    return FeaturePayload(frames=feats.frames, dim=feats.dim,
                          sample_rate=feats.sample_rate,
                          frame_shift=feats.frame_shift,
                          data_base64=base64.b64encode(data.tobytes()).decode("ascii"))


def _payload_features(p: FeaturePayload) -> FeatureSequence:
    raw = _b64_bytes("features.data_base64", p.data_base64)
    if len(raw) != 4 * p.frames * p.dim:
        raise HTTPException(400, f"features.data_base64: got {len(raw)} bytes, "
                                 f"expected {4 * p.frames * p.dim}")
    data = np.frombuffer(raw, dtype="<f4").reshape(p.frames, p.dim).copy()
    return FeatureSequence(data, sample_rate=p.sample_rate, frame_shift=p.frame_shift)


def create_app(model: BiVocoder | None = None, checkpoint=None,
               step: int = 0) -> FastAPI:
    """Build the service around an in-memory model or a checkpoint path."""
    if model is None:
        if checkpoint is None:
            raise ValueError("create_app needs a model or a checkpoint path")
        model, ck = load_model(checkpoint)
        step = ck.step
    rate = model.config.stft.sample_rate

    app = FastAPI(title="bivocoder", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.get("/model", response_model=ModelInfo)
    def model_info() -> ModelInfo:
        return ModelInfo(preset=preset_name(model.config),
                         parameters=model.parameter_count(),
                         step=step, sample_rate=rate,
                         feature_dim=model.config.feature_dim,
                         feature_shift=model.config.feature_shift,
                         config=model.config.to_dict())

    @app.post("/extract", response_model=FeaturePayload)
    def extract(req: ExtractRequest) -> FeaturePayload:
        x = _request_wav("wav_base64", req.wav_base64, rate)
        try:
            return _feature_payload(model.extract_features(x))
        except _BAD_INPUT as e:
            raise HTTPException(400, str(e)) from e

    @app.post("/synthesize", response_model=WavResponse)
    def synthesize(req: SynthesizeRequest) -> WavResponse:
        feats = _payload_features(req.features)
        if feats.dim != model.config.feature_dim:
            raise HTTPException(400, f"feature dim {feats.dim} does not match "
                                     f"the model's {model.config.feature_dim}")
        length = req.length or feats.frames * feats.frame_shift
        try:
            y = model.synthesize(feats, length)
        except _BAD_INPUT as e:
            raise HTTPException(400, str(e)) from e
        return _wav_response(y, rate)

    @app.post("/copy-synthesis", response_model=CopySynthesisResponse)
    def copy_synthesis(req: CopySynthesisRequest) -> CopySynthesisResponse:
        x = _request_wav("wav_base64", req.wav_base64, rate)
        try:
            y = model.analysis_synthesis(x)
        except _BAD_INPUT as e:
            raise HTTPException(400, str(e)) from e
        out = _wav_response(y, rate)
        value = None
        if req.include_metrics:
            value = snr(x.astype(np.float64), y.astype(np.float64))
        return CopySynthesisResponse(snr_db=value, **out.model_dump())

    @app.post("/evaluate", response_model=EvaluateResponse)
    def evaluate(req: EvaluateRequest) -> EvaluateResponse:
        ref = _request_wav("reference_wav_base64", req.reference_wav_base64, rate)
        deg = _request_wav("degraded_wav_base64", req.degraded_wav_base64, rate)
        try:
            m = evaluate_pair(req.name, ref, deg, model.config.stft)
        except _BAD_INPUT as e:
            raise HTTPException(400, str(e)) from e
        return EvaluateResponse(**m.to_record())

    @app.post("/benchmark", response_model=BenchmarkResponse)
    def benchmark(req: BenchmarkRequest) -> BenchmarkResponse:
        rep = benchmark_model(model, audio_seconds=req.seconds,
                              repeats=req.repeats)
        return BenchmarkResponse(**rep.to_record())

    return app
