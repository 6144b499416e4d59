"""Shared synthetic-signal builders for the test suite."""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make `oracles` importable

from neurocodec.codec_dipole import HeadModel, lead_field
from neurocodec.ingest import Recording, SignalMatrix

CHB_LABELS = [
    "FP1-F7", "F7-T7", "T7-P7", "P7-O1", "FP1-F3", "F3-C3", "C3-P3", "P3-O1",
    "FP2-F4", "F4-C4", "C4-P4", "P4-O2", "FP2-F8", "F8-T8", "T8-P8", "P8-O2",
    "FZ-CZ", "CZ-PZ", "T7-C3",
]


def smooth_eeg(n_channels: int, n_samples: int, fs: float = 256.0, seed: int = 0,
               amplitude: float = 50.0) -> np.ndarray:
    """Correlated low-frequency multichannel signal with a little noise."""
    rng = np.random.default_rng(seed)
    t = np.arange(n_samples) / fs
    sources = np.stack([
        np.sin(2 * np.pi * 6.5 * t),
        np.sin(2 * np.pi * 10.0 * t + 0.7),
        np.sin(2 * np.pi * 3.0 * t + 1.9),
    ])
    mixing = rng.normal(size=(n_channels, 3))
    x = mixing @ sources + 0.05 * rng.normal(size=(n_channels, n_samples))
    return amplitude * x


def dipole_eeg(model: HeadModel, n_samples: int, fs: float = 256.0, seed: int = 0,
               position=None, freqs=(5.0, 9.0, 3.0), amp: float = 1e-8) -> np.ndarray:
    """Noiseless multichannel EEG generated by one dipole with moving moment."""
    rng = np.random.default_rng(seed)
    if position is None:
        position = 0.3 * model.radius * np.array([0.8, -0.5, 1.0]) / np.linalg.norm([0.8, -0.5, 1.0])
    t = np.arange(n_samples) / fs
    phases = rng.uniform(0, 2 * np.pi, size=3)
    moments = amp * np.stack([
        np.sin(2 * np.pi * freqs[0] * t + phases[0]),
        0.6 * np.sin(2 * np.pi * freqs[1] * t + phases[1]),
        0.3 * np.sin(2 * np.pi * freqs[2] * t + phases[2]),
    ])
    return lead_field(np.asarray(position), model) @ moments


def burst_recording(n_channels: int = 4, fs: int = 256, dur_s: float = 300.0,
                    burst_start_s: float = 150.0, burst_dur_s: float = 60.0,
                    energy_gain: float = 8.0, seed: int = 3) -> Recording:
    """Stationary rhythmic background with one injected high-energy burst."""
    rng = np.random.default_rng(seed)
    n = int(dur_s * fs)
    t = np.arange(n) / fs
    data = np.zeros((n_channels, n))
    for ch in range(n_channels):
        data[ch] = 20.0 * np.sin(2 * np.pi * 5.0 * t + rng.uniform(0, 2 * np.pi))
        data[ch] += 2.0 * rng.normal(size=n)
    lo, hi = int(burst_start_s * fs), int((burst_start_s + burst_dur_s) * fs)
    gain = np.sqrt(energy_gain)
    for ch in range(n_channels):
        data[ch, lo:hi] += gain * 20.0 * np.sin(2 * np.pi * 12.0 * t[lo:hi] + 0.3 * ch)
    labels = [f"ch{i:02d}" for i in range(n_channels)]
    return Recording("synthetic", labels, fs, SignalMatrix(data))


@pytest.fixture
def chb_model() -> HeadModel:
    return HeadModel.standard_10_20(CHB_LABELS)
