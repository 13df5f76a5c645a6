"""Training config parsing, dataset handling, and short loop runs."""

import dataclasses
import json

import numpy as np
import pytest

from bivocoder.audio import write_wav
from bivocoder.checkpoint import load_checkpoint
from bivocoder.dsp import frame_count
from bivocoder.numerics import Tensor
from bivocoder.training import (TrainConfig, Trainer, Utterance,
                                format_train_config, load_dataset,
                                parse_train_config, sample_batch,
                                split_train_val, synthesis_graph, train)

from conftest import vowel_like


class TestConfigParsing:
    def test_format_parse_roundtrip(self, tmp_path):
        cfg = TrainConfig(data_dir="d", out_dir="o", preset="tiny",
                          max_steps=7, learning_rate=3e-4, val_fraction=0.25)
        path = tmp_path / "t.cfg"
        path.write_text(format_train_config(cfg))
        assert parse_train_config(path) == cfg

    def test_comments_and_blanks_ignored(self, tmp_path):
        path = tmp_path / "t.cfg"
        path.write_text("# top comment\n\ndata_dir=d\nout_dir=o\n"
                        "preset=tiny\nmax_steps=3  # trailing comment\n")
        cfg = parse_train_config(path)
        assert cfg.max_steps == 3
        assert cfg.preset == "tiny"

    def test_defaults_preserved_for_unset_keys(self, tmp_path):
        path = tmp_path / "t.cfg"
        path.write_text("data_dir=d\nout_dir=o\n")
        cfg = parse_train_config(path)
        assert cfg.learning_rate == 2e-4
        assert cfg.batch_size == 16
        assert cfg.lambda_phase == 100.0

    def test_missing_equals_names_line(self, tmp_path):
        path = tmp_path / "t.cfg"
        path.write_text("data_dir=d\nnot a setting\n")
        with pytest.raises(ValueError, match=r"t\.cfg:2: expected key=value"):
            parse_train_config(path)

    def test_unknown_key_named(self, tmp_path):
        path = tmp_path / "t.cfg"
        path.write_text("data_dir=d\nout_dir=o\nmomentum=0.9\n")
        with pytest.raises(ValueError, match="unknown key 'momentum'"):
            parse_train_config(path)

    def test_bad_value_named(self, tmp_path):
        path = tmp_path / "t.cfg"
        path.write_text("data_dir=d\nout_dir=o\nmax_steps=soon\n")
        with pytest.raises(ValueError, match="bad value for 'max_steps'"):
            parse_train_config(path)

    @pytest.mark.parametrize("line,msg", [
        ("preset=giant", "unknown preset"),
        ("batch_size=0", "must be >= 1"),
        ("val_fraction=1.0", "val_fraction"),
    ])
    def test_semantic_validation(self, tmp_path, line, msg):
        path = tmp_path / "t.cfg"
        path.write_text(f"data_dir=d\nout_dir=o\n{line}\n")
        with pytest.raises(ValueError, match=msg):
            parse_train_config(path)

    def test_loss_weights_mapping(self):
        cfg = TrainConfig(data_dir="d", out_dir="o", lambda_phase=7.0,
                          lambda_feature_matching=3.0)
        w = cfg.loss_weights()
        assert w.phase == 7.0
        assert w.feature_matching == 3.0
        assert w.amplitude == 45.0


class TestDataset:
    def _write_corpus(self, root, lengths):
        root.mkdir(exist_ok=True)
        for i, n in enumerate(lengths):
            wav = vowel_like(n=n, seed=i).astype(np.float32)
            write_wav(root / f"utt{i}.wav", wav)

    def test_load_dataset_sorted(self, tmp_path):
        self._write_corpus(tmp_path / "d", [800, 1200, 1000])
        utts = load_dataset(tmp_path / "d")
        assert [u.name for u in utts] == ["utt0", "utt1", "utt2"]
        assert [len(u.samples) for u in utts] == [800, 1200, 1000]

    def test_load_dataset_errors(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="not found"):
            load_dataset(tmp_path / "missing")
        (tmp_path / "empty").mkdir()
        with pytest.raises(FileNotFoundError, match="no .wav files"):
            load_dataset(tmp_path / "empty")

    def test_split_deterministic_and_never_empty(self):
        utts = [Utterance(str(i), np.zeros(10, np.float32)) for i in range(10)]
        t1, v1 = split_train_val(utts, 0.3, seed=5)
        t2, v2 = split_train_val(utts, 0.3, seed=5)
        assert [u.name for u in t1] == [u.name for u in t2]
        assert [u.name for u in v1] == [u.name for u in v2]
        assert len(v1) == 3
        # even absurd fractions keep at least one training utterance
        t3, v3 = split_train_val(utts[:2], 0.99, seed=0)
        assert len(t3) >= 1
        assert len(t3) + len(v3) == 2

    def test_split_zero_fraction(self):
        utts = [Utterance(str(i), np.zeros(4, np.float32)) for i in range(3)]
        t, v = split_train_val(utts, 0.0, seed=1)
        assert len(t) == 3 and v == []

    def test_sample_batch_pads_short_crops_long(self):
        short = Utterance("s", np.ones(50, np.float32))
        long = Utterance("l", np.arange(200, dtype=np.float32))
        rng = np.random.default_rng(7)
        batch = sample_batch([short], 80, 4, rng)
        assert batch.shape == (4, 80)
        np.testing.assert_array_equal(batch[:, :50], 1.0)
        np.testing.assert_array_equal(batch[:, 50:], 0.0)
        crops = sample_batch([long], 80, 8, rng)
        # every crop is a contiguous run from the ramp
        for row in crops:
            assert row[0] in long.samples
            np.testing.assert_array_equal(np.diff(row), 1.0)

    def test_sample_batch_deterministic_per_seed(self):
        utts = [Utterance("u", np.random.default_rng(0)
                          .standard_normal(300).astype(np.float32))]
        a = sample_batch(utts, 100, 3, np.random.default_rng(9))
        b = sample_batch(utts, 100, 3, np.random.default_rng(9))
        np.testing.assert_array_equal(a, b)

    def test_sample_batch_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            sample_batch([], 10, 1, np.random.default_rng(0))


class TestSynthesisGraph:
    def test_shapes_align_for_loss_terms(self, tiny_model):
        y = Tensor(np.random.default_rng(0).standard_normal((2, 1000))
                   .astype(np.float32))
        spec_true, spec_pred, wav_pred = synthesis_graph(tiny_model, y)
        frames = frame_count(1000, tiny_model.config.stft)
        assert spec_true.amplitude.shape == (2, frames, 513)
        assert spec_pred.amplitude.shape == (2, frames, 513)
        assert spec_pred.phase.shape == (2, frames, 513)
        assert wav_pred.shape == (2, 1000)


def _corpus_and_config(tmp_path, **overrides):
    data = tmp_path / "data"
    data.mkdir()
    for i in range(3):
        write_wav(data / f"u{i}.wav", vowel_like(n=1600, seed=i))
    defaults = dict(data_dir=str(data), out_dir=str(tmp_path / "run"),
                    preset="tiny", max_steps=4, batch_size=2, crop_length=800,
                    log_interval=1, checkpoint_interval=2, val_fraction=0.34,
                    seed=77)
    defaults.update(overrides)
    return TrainConfig(**defaults)


class TestTrainLoop:
    def test_short_run_artifacts(self, tmp_path):
        cfg = _corpus_and_config(tmp_path)
        trainer, records = train(cfg)
        assert trainer.state.step == 4

        out = tmp_path / "run"
        assert (out / "checkpoint_00000002.bvck").exists()
        assert (out / "checkpoint_00000004.bvck").exists()
        assert (out / "latest.bvck").exists()
        assert load_checkpoint(out / "latest.bvck").step == 4

        lines = [json.loads(l) for l in
                 (out / "train_log.ndjson").read_text().splitlines()]
        assert lines[0]["event"] == "config"
        assert lines[0]["max_steps"] == 4
        steps = [r for r in lines if r["event"] == "train_step"]
        assert [r["step"] for r in steps] == [1, 2, 3, 4]
        for r in steps:
            assert np.isfinite(r["total"])
            assert np.isfinite(r["d_loss"])
            assert r["lr"] > 0
        assert any(r["event"] == "validation" for r in lines)
        assert records == lines

    def test_resume_continues_and_appends(self, tmp_path):
        cfg = _corpus_and_config(tmp_path)
        train(cfg)
        more = dataclasses.replace(cfg, max_steps=6)
        trainer, _ = train(more, resume_from=tmp_path / "run" / "latest.bvck")
        assert trainer.state.step == 6
        lines = [json.loads(l) for l in
                 (tmp_path / "run" / "train_log.ndjson").read_text().splitlines()]
        steps = [r["step"] for r in lines if r["event"] == "train_step"]
        assert steps == [1, 2, 3, 4, 5, 6]
        assert sum(r["event"] == "config" for r in lines) == 1

    def test_resume_restores_trainer_state(self, tmp_path):
        cfg = _corpus_and_config(tmp_path)
        trainer, _ = train(cfg)
        fresh = Trainer(cfg)
        fresh.resume(load_checkpoint(tmp_path / "run" / "latest.bvck"))
        assert fresh.state.step == 4
        for (na, a), (nb, b) in zip(trainer.model.named_parameters(),
                                    fresh.model.named_parameters()):
            assert na == nb
            np.testing.assert_array_equal(a.data, b.data)
        assert (fresh.data_rng.bit_generator.state
                == trainer.data_rng.bit_generator.state)

    def test_resume_rejects_other_architecture(self, tmp_path):
        cfg = _corpus_and_config(tmp_path)
        train(cfg)
        other = Trainer(dataclasses.replace(cfg, preset="base"))
        with pytest.raises(ValueError, match="does not match"):
            other.resume(load_checkpoint(tmp_path / "run" / "latest.bvck"))

    def test_lr_follows_epoch_decay(self, tmp_path):
        cfg = _corpus_and_config(tmp_path)
        trainer = Trainer(cfg)
        trainer.state.steps_per_epoch = 2
        assert trainer.current_lr() == cfg.learning_rate
        trainer.state.step = 2
        np.testing.assert_allclose(trainer.current_lr(),
                                   cfg.learning_rate * cfg.lr_decay)
        trainer.state.step = 7
        np.testing.assert_allclose(trainer.current_lr(),
                                   cfg.learning_rate * cfg.lr_decay ** 3)
