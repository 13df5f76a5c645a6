"""HTTP service: every endpoint once, plus the 400 paths."""

import base64

import numpy as np
import pytest
from fastapi.testclient import TestClient

from bivocoder.audio import decode_wav, encode_wav
from bivocoder.service import create_app

from conftest import vowel_like


@pytest.fixture(scope="module")
def client(tmp_path_factory):
    from bivocoder.checkpoint import save_checkpoint
    from bivocoder.model import BiVocoder, preset_config

    model = BiVocoder(preset_config("tiny"), seed=3)
    path = tmp_path_factory.mktemp("svc") / "tiny.bvck"
    save_checkpoint(path, model, step=123)
    return TestClient(create_app(checkpoint=path))


def _wav_b64(x):
    return base64.b64encode(encode_wav(x)).decode("ascii")


@pytest.fixture(scope="module")
def voice_b64():
    return _wav_b64(vowel_like(8000))


class TestInfo:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"
        assert body["version"]

    def test_model_info(self, client):
        r = client.get("/model")
        assert r.status_code == 200
        body = r.json()
        assert body["preset"] == "tiny"
        assert body["parameters"] == 159_099
        assert body["step"] == 123
        assert body["sample_rate"] == 16000
        assert body["feature_dim"] == 32
        assert body["feature_shift"] == 320
        assert body["config"]["channels"] == 8


class TestExtract:
    def test_feature_payload(self, client, voice_b64):
        r = client.post("/extract", json={"wav_base64": voice_b64})
        assert r.status_code == 200
        body = r.json()
        assert (body["frames"], body["dim"]) == (26, 32)
        assert body["sample_rate"] == 16000
        assert body["frame_shift"] == 320
        raw = base64.b64decode(body["data_base64"])
        assert len(raw) == 26 * 32 * 4
        data = np.frombuffer(raw, dtype="<f4")
        assert np.all(np.isfinite(data))

    def test_bad_base64(self, client):
        r = client.post("/extract", json={"wav_base64": "@@not base64@@"})
        assert r.status_code == 400
        assert "base64" in r.json()["detail"]

    def test_non_wav_bytes(self, client):
        blob = base64.b64encode(b"plainly not audio").decode()
        r = client.post("/extract", json={"wav_base64": blob})
        assert r.status_code == 400

    def test_wrong_rate_wav(self, client):
        blob = base64.b64encode(
            encode_wav(vowel_like(800), rate=8000)).decode()
        r = client.post("/extract", json={"wav_base64": blob})
        assert r.status_code == 400
        assert "8000" in r.json()["detail"]


class TestSynthesize:
    def _features(self, client, voice_b64):
        return client.post("/extract", json={"wav_base64": voice_b64}).json()

    def test_default_length(self, client, voice_b64):
        feats = self._features(client, voice_b64)
        r = client.post("/synthesize", json={"features": feats})
        assert r.status_code == 200
        body = r.json()
        assert body["samples"] == 26 * 320
        wav = decode_wav(base64.b64decode(body["wav_base64"]))
        assert wav.shape == (8320,)

    def test_explicit_length(self, client, voice_b64):
        feats = self._features(client, voice_b64)
        r = client.post("/synthesize", json={"features": feats,
                                             "length": 8000})
        assert r.status_code == 200
        assert r.json()["samples"] == 8000

    def test_unreachable_length(self, client, voice_b64):
        feats = self._features(client, voice_b64)
        r = client.post("/synthesize", json={"features": feats,
                                             "length": 10 ** 6})
        assert r.status_code == 400
        assert "not reachable" in r.json()["detail"]

    def test_dim_mismatch(self, client):
        data = base64.b64encode(np.zeros(5 * 7, "<f4").tobytes()).decode()
        feats = {"frames": 5, "dim": 7, "sample_rate": 16000,
                 "frame_shift": 320, "data_base64": data}
        r = client.post("/synthesize", json={"features": feats})
        assert r.status_code == 400

    def test_payload_length_mismatch(self, client):
        data = base64.b64encode(b"\x00" * 12).decode()
        feats = {"frames": 5, "dim": 32, "sample_rate": 16000,
                 "frame_shift": 320, "data_base64": data}
        r = client.post("/synthesize", json={"features": feats})
        assert r.status_code == 400
        assert "expected" in r.json()["detail"]

    def test_negative_length_rejected_by_schema(self, client, voice_b64):
        feats = self._features(client, voice_b64)
        r = client.post("/synthesize", json={"features": feats, "length": -5})
        assert r.status_code == 422


class TestCopySynthesis:
    def test_with_metrics(self, client, voice_b64):
        r = client.post("/copy-synthesis", json={"wav_base64": voice_b64,
                                                 "include_metrics": True})
        assert r.status_code == 200
        body = r.json()
        assert body["samples"] == 8000
        assert isinstance(body["snr_db"], float)

    def test_without_metrics(self, client, voice_b64):
        r = client.post("/copy-synthesis", json={"wav_base64": voice_b64})
        assert r.status_code == 200
        assert r.json()["snr_db"] is None


class TestEvaluate:
    def test_metric_record(self, client):
        ref = vowel_like(4000, seed=1)
        deg = ref + 0.01 * np.random.default_rng(2).standard_normal(4000) \
            .astype(np.float32)
        r = client.post("/evaluate", json={
            "name": "pair0",
            "reference_wav_base64": _wav_b64(ref),
            "degraded_wav_base64": _wav_b64(deg)})
        assert r.status_code == 200
        body = r.json()
        assert body["name"] == "pair0"
        assert body["n_samples"] == 4000
        assert body["snr_db"] > 10
        assert body["mcd_db"] >= 0
        assert "f0_rmse_cents" in body
        assert body["vuv_error_percent"] >= 0

    def test_length_mismatch(self, client):
        r = client.post("/evaluate", json={
            "name": "bad",
            "reference_wav_base64": _wav_b64(vowel_like(4000)),
            "degraded_wav_base64": _wav_b64(vowel_like(4040))})
        assert r.status_code == 400


class TestBenchmark:
    def test_report(self, client):
        r = client.post("/benchmark", json={"seconds": 0.2, "repeats": 3})
        assert r.status_code == 200
        body = r.json()
        assert body["audio_seconds"] == 0.2
        assert body["rtf"] > 0
        assert len(body["run_seconds"]) == 3
        np.testing.assert_allclose(body["rtf"] * body["speed_factor"], 1.0,
                                   rtol=1e-9)

    def test_schema_bounds(self, client):
        assert client.post("/benchmark", json={"seconds": 0}).status_code == 422
        assert client.post("/benchmark",
                           json={"repeats": 0}).status_code == 422
