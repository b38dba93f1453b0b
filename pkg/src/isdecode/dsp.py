"""Temporal preprocessing and per-trial spectral/statistical features."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal

from .dataset import TrialSet
from .errors import ParameterError

__all__ = [
    "FilterSpec", "SpectrogramSpec",
    "filter_trials", "resample_trials", "trim_trials",
    "dft_features", "dft_bin_count", "spectrogram_features", "statistical_features",
]


@dataclass(frozen=True)
class FilterSpec:
    """Butterworth filter description.

    ``cutoffs`` is one frequency for ``kind="lowpass"`` and a ``(low, high)``
    pair for ``kind="bandpass"``, both in Hz. A bandpass design of order N
    has 2N poles, as usual for Butterworth band designs.
    """

    kind: str = "lowpass"
    cutoffs: Union[float, Tuple[float, float]] = 40.0
    order: int = 4
    zero_phase: bool = True

    def edges(self):
        return np.atleast_1d(np.asarray(self.cutoffs, dtype=np.float64))

    def validate(self, fs):
        if self.kind not in ("lowpass", "bandpass"):
            raise ParameterError(f"unknown filter kind {self.kind!r}")
        if int(self.order) < 1:
            raise ParameterError(f"filter order must be >= 1, got {self.order}")
        edges = self.edges()
        want = 1 if self.kind == "lowpass" else 2
        if edges.size != want:
            raise ParameterError(f"{self.kind} filter needs {want} cutoff(s), got {edges.size}")
        if np.any(edges <= 0) or np.any(edges >= fs / 2):
            raise ParameterError(f"cutoffs {edges.tolist()} Hz must lie inside (0, {fs / 2})")
        if want == 2 and not edges[0] < edges[1]:
            raise ParameterError("bandpass cutoffs must be increasing")

    def sos(self, fs):
        self.validate(fs)
        edges = self.edges()
        wn = edges[0] if edges.size == 1 else edges
        return signal.butter(int(self.order), wn, btype=self.kind, fs=fs, output="sos")


@dataclass(frozen=True)
class SpectrogramSpec:
    """Hann-window STFT layout: ``window`` samples per frame, ``overlap`` shared."""

    window: int = 64
    overlap: int = 32

    @property
    def hop(self):
        return self.window - self.overlap

    def validate(self, n_samples):
        if not 0 <= self.overlap < self.window:
            raise ParameterError(f"need 0 <= overlap < window, got {self.overlap}, {self.window}")
        if self.window > n_samples:
            raise ParameterError(f"window {self.window} longer than trial ({n_samples} samples)")

    def n_frames(self, n_samples):
        return 1 + (n_samples - self.window) // self.hop


def _apply_filter(x, spec: FilterSpec, fs):
    sos = spec.sos(fs)
    if spec.zero_phase:
        return signal.sosfiltfilt(sos, x, axis=-1)
    return signal.sosfilt(sos, x, axis=-1)


def filter_trials(ts: TrialSet, spec: FilterSpec) -> TrialSet:
    """Filter every channel of every trial along time."""
    return ts.replace(data=_apply_filter(ts.data, spec, ts.fs))


def resample_trials(ts: TrialSet, new_fs) -> TrialSet:
    """Downsample to ``new_fs`` Hz.

    A zero-phase order-4 lowpass at ``0.45 * new_fs`` runs first. Integer
    rate ratios then keep every q-th sample; other ratios interpolate
    linearly at the new sample instants. The output has
    ``floor(n_samples * new_fs / fs)`` samples.
    """
    new_fs = float(new_fs)
    if not 0 < new_fs < ts.fs:
        raise ParameterError(f"new rate {new_fs} Hz must be in (0, {ts.fs})")
    n_new = int(np.floor(ts.n_samples * new_fs / ts.fs + 1e-9))
    if n_new < 1:
        raise ParameterError("resampling leaves no samples")
    x = _apply_filter(ts.data, FilterSpec("lowpass", 0.45 * new_fs, 4, True), ts.fs)
    ratio = ts.fs / new_fs
    q = int(round(ratio))
    if abs(ratio - q) < 1e-12:
        y = x[..., ::q][..., :n_new]
    else:
        pos = np.arange(n_new) * ratio
        i0 = np.minimum(np.floor(pos).astype(np.int64), ts.n_samples - 1)
        i1 = np.minimum(i0 + 1, ts.n_samples - 1)
        frac = pos - i0
        y = x[..., i0] * (1 - frac) + x[..., i1] * frac
    return ts.replace(data=y, fs=new_fs)


def trim_trials(ts: TrialSet, n) -> TrialSet:
    """Keep the first ``n`` samples of each trial."""
    n = int(n)
    if not 1 <= n <= ts.n_samples:
        raise ParameterError(f"trim length must be in [1, {ts.n_samples}], got {n}")
    if n == ts.n_samples:
        return ts
    return ts.replace(data=ts.data[..., :n])


def dft_bin_count(n_samples, fs, max_hz):
    """Number of one-sided DFT bins with frequency in ``[0, max_hz]``."""
    return int(np.floor(max_hz * n_samples / fs + 1e-9)) + 1


def dft_features(ts: TrialSet, max_hz=None, representation="magnitude"):
    """Fourier coefficients up to ``max_hz`` per channel, channel-major.

    Parameters
    ----------
    ts : TrialSet
    max_hz : float, optional
        Highest frequency kept. ``None`` returns all ``n_samples`` bins of the
        two-sided spectrum.
    representation : {"magnitude", "complex"}
        ``"complex"`` emits interleaved (real, imag) pairs per bin.

    Returns
    -------
    (n_trials, n_features) ndarray
    """
    if max_hz is None:
        coef = np.fft.fft(ts.data, axis=-1)
    else:
        if not 0 <= max_hz <= ts.fs / 2:
            raise ParameterError(f"max_hz must be in [0, {ts.fs / 2}], got {max_hz}")
        nb = dft_bin_count(ts.n_samples, ts.fs, max_hz)
        coef = np.fft.rfft(ts.data, axis=-1)[..., :nb]
    if representation == "magnitude":
        out = np.abs(coef)
    elif representation == "complex":
        out = np.stack([coef.real, coef.imag], axis=-1)
    else:
        raise ParameterError(f"unknown DFT representation {representation!r}")
    return out.reshape(ts.n_trials, -1)


def stft_magnitude(x, spec: SpectrogramSpec):
    """|STFT| of ``x`` along its last axis, shape ``(..., n_freqs, n_frames)``."""
    window = signal.get_window("hann", spec.window)
    frames = sliding_window_view(x, spec.window, axis=-1)[..., ::spec.hop, :]
    spec_ = np.abs(np.fft.rfft(frames * window, axis=-1))
    return np.swapaxes(spec_, -1, -2)


def spectrogram_features(ts: TrialSet, spec: SpectrogramSpec):
    """Per-trial ``[f, t, c]`` magnitude spectrogram flattened row-major."""
    spec.validate(ts.n_samples)
    mag = stft_magnitude(ts.data, spec)          # (n, c, f, t)
    return np.transpose(mag, (0, 2, 3, 1)).reshape(ts.n_trials, -1)


def statistical_features(ts: TrialSet):
    """Mean, unbiased variance, std and skewness per channel, 4 values each.

    Skewness is ``m3 / m2**1.5`` with population central moments, and 0
    for a channel with zero variance.
    """
    if ts.n_samples < 2:
        raise ParameterError("statistical features need at least 2 samples")
    x = ts.data
    mean = x.mean(axis=-1)
    dev = x - mean[..., None]
    m2 = np.mean(dev ** 2, axis=-1)
    m3 = np.mean(dev ** 3, axis=-1)
    n = ts.n_samples
    var = m2 * n / (n - 1)
    # a constant channel leaves rounding residue in dev; treat tiny m2 as zero
    flat = m2 <= (np.finfo(float).eps * np.maximum(np.abs(mean), 1.0)) ** 2
    safe = np.where(flat, 1.0, m2)
    skew = np.where(flat, 0.0, m3 / safe ** 1.5)
    var = np.where(flat, 0.0, var)
    feats = np.stack([mean, var, np.sqrt(var), skew], axis=-1)
    return feats.reshape(ts.n_trials, -1)
