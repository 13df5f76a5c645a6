"""Request/response models for the HTTP service.

Binary payloads travel as base64 strings: WAV fields hold a complete
RIFF file (16 kHz mono 16-bit PCM), feature payloads hold frame-major
float32 little-endian values, the same layout the feature-file format
uses on disk.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class ModelInfo(BaseModel):
    preset: str
    parameters: int
    step: int
    sample_rate: int
    feature_dim: int
    feature_shift: int
    config: dict


class ExtractRequest(BaseModel):
    wav_base64: str


class FeaturePayload(BaseModel):
    frames: int = Field(ge=0)
    dim: int = Field(ge=1)
    sample_rate: int = Field(ge=1)
    frame_shift: int = Field(ge=1)
    data_base64: str


class SynthesizeRequest(BaseModel):
    features: FeaturePayload
    length: int | None = Field(default=None, ge=1,
                               description="samples; default frames * frame_shift")


class WavResponse(BaseModel):
    wav_base64: str
    samples: int
    sample_rate: int


class CopySynthesisRequest(BaseModel):
    wav_base64: str
    include_metrics: bool = False


class CopySynthesisResponse(WavResponse):
    snr_db: float | None = None


class EvaluateRequest(BaseModel):
    name: str = "pair"
    reference_wav_base64: str
    degraded_wav_base64: str


class EvaluateResponse(BaseModel):
    name: str
    n_samples: int
    snr_db: float
    las_rmse_db: float
    mcd_db: float
    f0_rmse_cents: float | None
    vuv_error_percent: float


class BenchmarkRequest(BaseModel):
    seconds: float = Field(default=1.0, ge=0.1, le=60.0)
    repeats: int = Field(default=3, ge=1, le=50)


class BenchmarkResponse(BaseModel):
    audio_seconds: float
    rtf: float
    speed_factor: float
    run_seconds: list[float]
