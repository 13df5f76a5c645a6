"""Command-line surface: train, extract, synth, copysynth, eval, bench,
serve.

Exit codes: 0 success, 2 bad usage or bad input, 1 internal error.
Diagnostics go to stderr; command results (metrics, benchmark lines) go
to stdout so they can be piped.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .audio import AudioError, read_wav, write_wav
from .checkpoint import CheckpointError, load_model
from .dsp import StftConfig
from .features import FeatureFileError, read_feature_file, write_feature_file
from .metrics import MetricReport, benchmark_model, evaluate_pair, snr
from .model import preset_name
from .training import parse_train_config, train

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2

# Anything input-shaped maps to exit 2; the rest is a bug and maps to 1.
_INPUT_ERRORS = (AudioError, CheckpointError, FeatureFileError,
                 FileNotFoundError, ValueError)


class CliError(Exception):
    """Usage or input problem detected by a command itself."""


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---- commands ----------------------------------------------------------------


def cmd_train(args) -> int:
    config_path = Path(args.config)
    if not config_path.is_file():
        raise CliError(f"config file not found: {config_path}")
    cfg = parse_train_config(config_path)
    _log(f"training preset={cfg.preset} steps={cfg.max_steps} "
         f"data={cfg.data_dir} out={cfg.out_dir}")
    trainer, _ = train(cfg, resume_from=args.resume, log_fn=_train_progress)
    _log(f"finished at step {trainer.state.step}")
    return EXIT_OK


def _train_progress(rec: dict) -> None:
    if rec.get("event") == "train_step":
        _log(f"step {rec['step']}: g={rec['total']:.3f} d={rec['d_loss']:.3f} "
             f"mel={rec['mel']:.3f} lr={rec['lr']:.2e}")
    elif rec.get("event") == "validation":
        _log(f"step {rec['step']}: val_snr={rec['val_snr']:.2f} dB "
             f"val_mel={rec['val_mel']:.3f}")


def cmd_extract(args) -> int:
    model, _ = load_model(args.ckpt)
    x = read_wav(args.infile)
    feats = model.extract_features(x)
    write_feature_file(args.out, feats)
    _log(f"{args.infile}: {len(x)} samples -> {feats.frames} x {feats.dim} "
         f"features -> {args.out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    model, _ = load_model(args.ckpt)
    feats = read_feature_file(args.infile)
    if feats.dim != model.config.feature_dim:
        raise CliError(f"{args.infile}: feature dim {feats.dim} does not match "
                       f"the checkpoint's {model.config.feature_dim}")
    if feats.sample_rate != model.config.stft.sample_rate:
        raise CliError(f"{args.infile}: sample rate {feats.sample_rate} does not "
                       f"match the checkpoint's {model.config.stft.sample_rate}")
    length = args.length if args.length is not None else feats.frames * feats.frame_shift
    if length < 1:
        raise CliError(f"--len must be >= 1, got {length}")
    y = model.synthesize(feats, length)
    write_wav(args.out, y)
    _log(f"{args.infile}: {feats.frames} frames -> {length} samples -> {args.out}")
    return EXIT_OK


def cmd_copysynth(args) -> int:
    model, _ = load_model(args.ckpt)
    x = read_wav(args.infile)
    y = model.analysis_synthesis(x)
    write_wav(args.out, y)
    _log(f"{args.infile}: {len(x)} samples -> {args.out}")
    if args.ref_metrics:
        value = snr(x.astype(np.float64), y.astype(np.float64))
        print(f"{Path(args.infile).name} snr_db={value:.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    ref_dir, deg_dir = Path(args.ref), Path(args.deg)
    for d in (ref_dir, deg_dir):
        if not d.is_dir():
            raise CliError(f"directory not found: {d}")
    ref_names = {p.name for p in ref_dir.glob("*.wav")}
    deg_names = {p.name for p in deg_dir.glob("*.wav")}
    matched = sorted(ref_names & deg_names)

    records: list[dict] = []
    for name in sorted(ref_names ^ deg_names):
        missing_from = "degraded" if name in ref_names else "reference"
        _log(f"skipping {name}: missing from the {missing_from} directory")
        records.append({"record": "skipped", "name": name,
                        "missing_from": missing_from})

    report = MetricReport()
    config = StftConfig()
    for name in matched:
        try:
            m = evaluate_pair(name, read_wav(ref_dir / name),
                              read_wav(deg_dir / name), config)
        except (AudioError, ValueError) as e:
            _log(f"{name}: {e}")
            records.append({"record": "error", "name": name, "message": str(e)})
            continue
        report.utterances.append(m)
        records.append({"record": "utterance", **m.to_record()})
    records.append({"record": "summary", **report.summary()})

    with open(args.report, "w") as f:
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True) + "\n")
    _log(f"evaluated {len(report.utterances)}/{len(matched)} pairs -> {args.report}")
    if not matched:
        raise CliError("no filename is present in both directories")
    if not report.utterances:
        raise CliError("every matched pair failed evaluation")
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.seconds < 1:
        raise CliError(f"--seconds must be >= 1, got {args.seconds}")
    if args.repeats < 3:
        raise CliError(f"--repeats must be >= 3 for a usable median, got {args.repeats}")
    model, _ = load_model(args.ckpt)
    _log(f"timing {args.repeats} runs of {args.seconds} s synthesis")
    rep = benchmark_model(model, audio_seconds=float(args.seconds),
                          repeats=args.repeats)
    print(f"rtf={rep.rtf:.9g} xrt={rep.speed_factor:.9g} "
          f"device=cpu/{platform.machine()} preset={preset_name(model.config)}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(checkpoint=args.ckpt)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


# ---- wiring --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="bivocoder",
        description="Bidirectional vocoder: feature extraction and waveform synthesis.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    t = sub.add_parser("train", help="train from a key=value config file")
    t.add_argument("--config", required=True, help="path to the config file")
    t.add_argument("--resume", default=None, metavar="CKPT",
                   help="checkpoint to continue from (config digests must match)")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("extract", help="waveform -> feature file")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--in", dest="infile", required=True, metavar="WAV")
    e.add_argument("--out", required=True, metavar="BVF")
    e.set_defaults(fn=cmd_extract)

    s = sub.add_parser("synth", help="feature file -> waveform")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--in", dest="infile", required=True, metavar="BVF")
    s.add_argument("--out", required=True, metavar="WAV")
    s.add_argument("--len", dest="length", type=int, default=None, metavar="SAMPLES",
                   help="output length (default: frames x frame shift)")
    s.set_defaults(fn=cmd_synth)

    c = sub.add_parser("copysynth", help="waveform -> features -> waveform")
    c.add_argument("--ckpt", required=True)
    c.add_argument("--in", dest="infile", required=True, metavar="WAV")
    c.add_argument("--out", required=True, metavar="WAV")
    c.add_argument("--ref-metrics", action="store_true",
                   help="print per-file SNR against the input")
    c.set_defaults(fn=cmd_copysynth)

    v = sub.add_parser("eval", help="objective metrics over paired directories")
    v.add_argument("--ref", required=True, metavar="DIR")
    v.add_argument("--deg", required=True, metavar="DIR")
    v.add_argument("--report", required=True, metavar="NDJSON")
    v.set_defaults(fn=cmd_eval)

    b = sub.add_parser("bench", help="real-time factor of waveform generation")
    b.add_argument("--ckpt", required=True)
    b.add_argument("--seconds", type=float, default=4.0)
    b.add_argument("--repeats", type=int, default=5)
    b.set_defaults(fn=cmd_bench)

    r = sub.add_parser("serve", help="run the HTTP inference service")
    r.add_argument("--ckpt", required=True)
    r.add_argument("--host", default="127.0.0.1")
    r.add_argument("--port", type=int, default=8000)
    r.set_defaults(fn=cmd_serve)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError as e:
        _log(f"error: {e}")
        return EXIT_USAGE
    except _INPUT_ERRORS as e:
        _log(f"error: {e}")
        return EXIT_USAGE
    except Exception as e:  # pragma: no cover - last-resort diagnostic
        _log(f"internal error: {type(e).__name__}: {e}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
