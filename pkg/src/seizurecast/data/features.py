"""
Spectrogram features.

Per channel: frames of ``nfft_sec`` seconds every ``hop_sec`` seconds, a
periodic Hann taper, one-sided FFT magnitude. Bins are cropped to
[fmin_hz, min(fmax_hz, fs/2)], adjacent bins are averaged in groups of
``band_pool`` (a short last group is averaged over what it has) and the
result is compressed with log(1 + ·).

Output layout is C × F × T: channel, frequency band (ascending), frame.
"""

from __future__ import annotations

from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft as sp_fft
from scipy.signal import windows as sp_windows

from seizurecast.core.config import SpectrogramConfig
from seizurecast.core.contracts import ContractError, DimensionError
from seizurecast.core.types import FloatArray


def frame_lengths(fs: float, cfg: SpectrogramConfig) -> Tuple[int, int]:
    """(nfft, hop) in samples."""
    nfft = max(2, int(round(cfg.nfft_sec * fs)))
    hop = max(1, int(round(cfg.hop_sec * fs)))
    return nfft, hop


def stft_magnitude(signal: np.ndarray, nfft: int, hop: int) -> FloatArray:
    """|STFT| of a C×n signal as C × (nfft//2 + 1) × frames."""
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise DimensionError(f"signal must be C×n, got {x.shape}")
    if x.shape[1] < nfft:
        raise ContractError(f"window of {x.shape[1]} samples is shorter than the FFT size {nfft}")
    frames = sliding_window_view(x, nfft, axis=-1)[:, ::hop, :]
    taper = sp_windows.hann(nfft, sym=False)
    spec = np.abs(sp_fft.rfft(frames * taper, axis=-1))
    return np.ascontiguousarray(spec.transpose(0, 2, 1))


def _crop(fs: float, nfft: int, cfg: SpectrogramConfig) -> np.ndarray:
    freqs = sp_fft.rfftfreq(nfft, d=1.0 / fs)
    top = min(cfg.fmax_hz, fs / 2.0)
    keep = np.flatnonzero((freqs >= cfg.fmin_hz) & (freqs <= top))
    if keep.size == 0:
        raise ContractError(f"no FFT bins in [{cfg.fmin_hz}, {top}] Hz at fs={fs}")
    return keep


def _pool(x: FloatArray, size: int, axis: int) -> FloatArray:
    if size <= 1:
        return x
    n = x.shape[axis]
    edges = np.arange(0, n, size)
    sums = np.add.reduceat(x, edges, axis=axis)
    counts = np.minimum(edges + size, n) - edges
    shape = [1] * x.ndim
    shape[axis] = counts.size
    return sums / counts.reshape(shape)


def spectrogram(window: np.ndarray, fs: float, cfg: SpectrogramConfig) -> FloatArray:
    """Log-magnitude spectrogram of a C×n raw window."""
    nfft, hop = frame_lengths(fs, cfg)
    mag = stft_magnitude(window, nfft, hop)
    mag = mag[:, _crop(fs, nfft, cfg), :]
    return np.log1p(_pool(mag, cfg.band_pool, axis=1))


def spectrogram_frequencies(fs: float, cfg: SpectrogramConfig) -> FloatArray:
    """Centre frequency (Hz) of every output band."""
    nfft, _ = frame_lengths(fs, cfg)
    freqs = sp_fft.rfftfreq(nfft, d=1.0 / fs)[_crop(fs, nfft, cfg)]
    return _pool(freqs[None, :], cfg.band_pool, axis=1)[0]


def feature_shape(
    n_channels: int, window_sec: float, fs: float, cfg: SpectrogramConfig
) -> Tuple[int, int, int]:
    """C × F × T produced for a window of *window_sec* seconds."""
    nfft, hop = frame_lengths(fs, cfg)
    n = int(round(window_sec * fs))
    if n < nfft:
        raise ContractError(f"window of {n} samples is shorter than the FFT size {nfft}")
    n_bands = spectrogram_frequencies(fs, cfg).size
    return (n_channels, n_bands, (n - nfft) // hop + 1)
