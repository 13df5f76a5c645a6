"""Bidirectional neural vocoder: waveforms to compact STFT-domain
features and back, with the training and evaluation stack around it."""

__version__ = "0.1.0"
