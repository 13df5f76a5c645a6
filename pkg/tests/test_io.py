"""WAV and feature file round trips plus corruption handling."""

import struct
import wave

import numpy as np
import pytest

from bivocoder.audio import (AudioError, decode_wav, encode_wav, read_wav,
                             write_wav)
from bivocoder.features import (FeatureFileError, read_feature_file,
                                write_feature_file)
from bivocoder.model import FeatureSequence


def _write_custom_wav(path, rate=16000, channels=1, width=2, n=100):
    with wave.open(str(path), "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(width)
        w.setframerate(rate)
        w.writeframes(b"\x00" * (n * channels * width))


class TestWav:
    def test_roundtrip_within_quantization(self, tmp_path):
        rng = np.random.default_rng(0)
        x = (rng.uniform(-1.0, 1.0, 5000) * 0.9).astype(np.float32)
        path = tmp_path / "x.wav"
        write_wav(path, x)
        back = read_wav(path)
        assert back.dtype == np.float32
        assert back.shape == x.shape
        # write scales by 32767, read by 1/32768: half a step of rounding
        # plus one part in 32768 of skew
        assert np.abs(back - x).max() <= 1.5 / 32768.0
        np.testing.assert_array_equal(read_wav(path), back)

    def test_full_scale_clipping(self, tmp_path):
        path = tmp_path / "c.wav"
        write_wav(path, np.array([2.0, -2.0, 0.5, 0.0], np.float32))
        back = read_wav(path)
        assert back[0] == pytest.approx(32767 / 32768.0)
        assert back[1] == -1.0
        assert back[2] == 0.5
        assert back[3] == 0.0

    def test_encode_decode_match_file_io(self, tmp_path):
        x = np.random.default_rng(1).uniform(-0.5, 0.5, 800).astype(np.float32)
        blob = encode_wav(x)
        path = tmp_path / "x.wav"
        write_wav(path, x)
        assert blob == path.read_bytes()
        np.testing.assert_array_equal(decode_wav(blob), read_wav(path))

    def test_stereo_rejected(self, tmp_path):
        path = tmp_path / "st.wav"
        _write_custom_wav(path, channels=2)
        with pytest.raises(AudioError, match="mono"):
            read_wav(path)

    def test_eight_bit_rejected(self, tmp_path):
        path = tmp_path / "w8.wav"
        _write_custom_wav(path, width=1)
        with pytest.raises(AudioError, match="16-bit"):
            read_wav(path)

    def test_wrong_rate_rejected(self, tmp_path):
        path = tmp_path / "r.wav"
        _write_custom_wav(path, rate=22050)
        with pytest.raises(AudioError, match="16000 Hz, got 22050"):
            read_wav(path)
        # but an explicit expected rate accepts it
        assert read_wav(path, expected_rate=22050).shape == (100,)

    def test_empty_rejected(self, tmp_path):
        path = tmp_path / "e.wav"
        _write_custom_wav(path, n=0)
        with pytest.raises(AudioError, match="empty"):
            read_wav(path)

    def test_missing_and_garbage_files(self, tmp_path):
        with pytest.raises(AudioError, match="cannot read"):
            read_wav(tmp_path / "missing.wav")
        bad = tmp_path / "junk.wav"
        bad.write_bytes(b"not audio at all")
        with pytest.raises(AudioError, match="cannot read"):
            read_wav(bad)

    def test_non_1d_write_rejected_before_touching_file(self, tmp_path):
        path = tmp_path / "keep.wav"
        path.write_bytes(b"precious")
        with pytest.raises(AudioError, match="1-d"):
            write_wav(path, np.zeros((2, 10), np.float32))
        assert path.read_bytes() == b"precious"

    def test_decode_error_labels_bytes_not_path(self):
        with pytest.raises(AudioError, match="<wav bytes>"):
            decode_wav(b"\x00\x01\x02")


def _feats(frames=26, dim=32, seed=2):
    data = np.random.default_rng(seed).standard_normal((frames, dim))
    return FeatureSequence(data.astype(np.float32), 16000, 320)


class TestFeatureFile:
    def test_roundtrip_bit_identical(self, tmp_path):
        feats = _feats()
        path = tmp_path / "f.bvf"
        write_feature_file(path, feats)
        back = read_feature_file(path)
        assert back.sample_rate == 16000
        assert back.frame_shift == 320
        assert back.data.dtype == np.float32
        np.testing.assert_array_equal(back.data, feats.data)

    def test_header_layout(self, tmp_path):
        path = tmp_path / "f.bvf"
        write_feature_file(path, _feats(frames=3, dim=5))
        head = path.read_bytes()[:20]
        magic, version, rate, shift, dim, frames = struct.unpack("<4sHIIHI",
                                                                 head)
        assert (magic, version) == (b"BVF1", 1)
        assert (rate, shift, dim, frames) == (16000, 320, 5, 3)
        assert path.stat().st_size == 20 + 4 * 3 * 5

    def test_float64_input_written_as_float32(self, tmp_path):
        feats = FeatureSequence(np.ones((2, 4), np.float64), 16000, 320)
        path = tmp_path / "f.bvf"
        write_feature_file(path, feats)
        assert read_feature_file(path).data.dtype == np.float32

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "f.bvf"
        path.write_bytes(b"BVF1\x01\x00")
        with pytest.raises(FeatureFileError, match="truncated header"):
            read_feature_file(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "f.bvf"
        write_feature_file(path, _feats())
        blob = bytearray(path.read_bytes())
        blob[:4] = b"WAVE"
        path.write_bytes(bytes(blob))
        with pytest.raises(FeatureFileError, match="bad magic"):
            read_feature_file(path)

    def test_bad_version(self, tmp_path):
        path = tmp_path / "f.bvf"
        write_feature_file(path, _feats())
        blob = bytearray(path.read_bytes())
        blob[4:6] = struct.pack("<H", 9)
        path.write_bytes(bytes(blob))
        with pytest.raises(FeatureFileError, match="unsupported version 9"):
            read_feature_file(path)

    def test_payload_length_mismatch(self, tmp_path):
        path = tmp_path / "f.bvf"
        write_feature_file(path, _feats())
        blob = path.read_bytes()
        path.write_bytes(blob[:-4])
        with pytest.raises(FeatureFileError, match="payload"):
            read_feature_file(path)
        path.write_bytes(blob + b"\x00\x00")
        with pytest.raises(FeatureFileError, match="payload"):
            read_feature_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FeatureFileError, match="cannot read|truncated"):
            read_feature_file(tmp_path / "missing.bvf")
