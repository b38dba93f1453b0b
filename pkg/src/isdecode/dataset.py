"""Trial containers, file I/O, synthetic data and fold planning.

Trials are stored as a ``(n_trials, n_channels, n_samples)`` float64 array.
On disk they live in the little-endian ISD1 container::

    magic      b"ISD1"
    u32        n_trials, n_channels, n_samples
    f32        fs
    u32        n_classes
    n_classes  x (u16 byte length, UTF-8 name)
    n_trials   x u16 label
    f32        samples, [trial][channel][sample] order

Samples are stored as float32; everything in memory is float64.
"""
from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ._rng import derive_rng
from .errors import DataError, FormatError, ParameterError, StratificationError

__all__ = [
    "TrialSet", "FoldPlan", "SynthSpec",
    "load_trialset", "save_trialset", "load_delimited", "save_delimited",
    "synth_trialset", "reject_amplitude", "stratified_kfold",
]

MAGIC = b"ISD1"
_HEADER = struct.Struct("<4sIIIfI")


@dataclass(frozen=True)
class TrialSet:
    """EEG trials with one integer label each.

    Parameters
    ----------
    data : (n_trials, n_channels, n_samples) array_like
        Signal amplitudes.
    labels : (n_trials,) array_like of int
        0-based class ids indexing ``class_names``.
    fs : float
        Sampling rate in Hz.
    class_names : sequence of str
        Ordered class names.
    meta : dict
        Free-form annotations (not persisted to ISD1).
    """

    data: np.ndarray
    labels: np.ndarray
    fs: float
    class_names: tuple
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int64).reshape(-1)
        names = tuple(str(n) for n in self.class_names)
        if data.ndim != 3:
            raise DataError(f"trial data must be 3-D, got shape {data.shape}")
        if labels.shape[0] != data.shape[0]:
            raise DataError(f"{labels.shape[0]} labels for {data.shape[0]} trials")
        if not np.isfinite(self.fs) or self.fs <= 0:
            raise DataError(f"sampling rate must be positive, got {self.fs}")
        if labels.size and (labels.min() < 0 or labels.max() >= len(names)):
            raise DataError(f"labels must lie in [0, {len(names)})")
        if not np.all(np.isfinite(data)):
            raise DataError("trial data contains non-finite samples")
        data.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "fs", float(self.fs))
        object.__setattr__(self, "class_names", names)

    @property
    def n_trials(self):
        return self.data.shape[0]

    @property
    def n_channels(self):
        return self.data.shape[1]

    @property
    def n_samples(self):
        return self.data.shape[2]

    @property
    def n_classes(self):
        return len(self.class_names)

    @property
    def shape(self):
        return self.data.shape

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.n_classes)

    def replace(self, **changes) -> "TrialSet":
        """Return a copy with some fields replaced (``meta`` is carried over)."""
        fields = dict(data=self.data, labels=self.labels, fs=self.fs,
                      class_names=self.class_names, meta=dict(self.meta))
        fields.update(changes)
        return TrialSet(**fields)

    def subset(self, index) -> "TrialSet":
        return self.replace(data=self.data[index], labels=self.labels[index])


# ---------------------------------------------------------------------------
# ISD1 container

def save_trialset(ts: TrialSet, path) -> None:
    """Write ``ts`` to ``path`` in the ISD1 container."""
    if ts.n_trials < 1:
        raise FormatError("ISD1 container requires at least one trial")
    if ts.n_classes > 0xFFFF:
        raise FormatError("ISD1 labels are u16; too many classes")
    parts = [_HEADER.pack(MAGIC, ts.n_trials, ts.n_channels, ts.n_samples,
                          ts.fs, ts.n_classes)]
    for name in ts.class_names:
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise FormatError(f"class name too long: {name[:20]}...")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
    parts.append(ts.labels.astype("<u2").tobytes())
    payload = ts.data.astype("<f4")
    if not np.all(np.isfinite(payload)):
        raise DataError("samples overflow float32 storage")
    parts.append(payload.tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_trialset(path) -> TrialSet:
    """Read an ISD1 file.

    Raises
    ------
    FormatError
        Bad magic, truncated header or payload, or trailing bytes.
    DataError
        Non-finite samples.
    """
    buf = Path(path).read_bytes()
    if len(buf) < _HEADER.size:
        raise FormatError(f"{path}: file too short for an ISD1 header ({len(buf)} bytes)")
    magic, n_trials, n_channels, n_samples, fs, n_classes = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if n_trials < 1:
        raise FormatError(f"{path}: container holds no trials")
    pos = _HEADER.size
    names = []
    for _ in range(n_classes):
        if pos + 2 > len(buf):
            raise FormatError(f"{path}: truncated class-name table")
        (length,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        if pos + length > len(buf):
            raise FormatError(f"{path}: truncated class-name table")
        try:
            names.append(buf[pos:pos + length].decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise FormatError(f"{path}: class name is not UTF-8") from exc
        pos += length
    n_label_bytes = 2 * n_trials
    n_payload_bytes = 4 * n_trials * n_channels * n_samples
    if len(buf) - pos != n_label_bytes + n_payload_bytes:
        raise FormatError(
            f"{path}: expected {n_label_bytes + n_payload_bytes} bytes after header, "
            f"found {len(buf) - pos}")
    labels = np.frombuffer(buf, dtype="<u2", count=n_trials, offset=pos)
    pos += n_label_bytes
    data = np.frombuffer(buf, dtype="<f4", offset=pos).reshape(n_trials, n_channels, n_samples)
    if labels.size and labels.max() >= n_classes:
        raise FormatError(f"{path}: label {labels.max()} out of range for {n_classes} classes")
    if not np.all(np.isfinite(data)):
        raise DataError(f"{path}: payload contains non-finite samples")
    if not np.isfinite(fs) or fs <= 0:
        raise FormatError(f"{path}: invalid sampling rate {fs}")
    return TrialSet(data, labels, float(fs), names)


# ---------------------------------------------------------------------------
# Delimited text

def load_delimited(path, delimiter=",") -> TrialSet:
    """Import trials from delimited text.

    The first line is ``n_trials,n_channels,n_samples,fs`` optionally
    followed by the class names. Every following line is one trial:
    the label then ``n_channels * n_samples`` samples in channel-major order.
    """
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty file")
    head = [h.strip() for h in lines[0].split(delimiter)]
    if len(head) < 4:
        raise FormatError(f"{path}: header needs n_trials, n_channels, n_samples, fs")
    try:
        n_trials, n_channels, n_samples = (int(h) for h in head[:3])
        fs = float(head[3])
    except ValueError as exc:
        raise FormatError(f"{path}: malformed header line {lines[0]!r}") from exc
    rows = lines[1:]
    if len(rows) != n_trials:
        raise FormatError(f"{path}: header announces {n_trials} trials, found {len(rows)} rows")
    try:
        table = np.array([[float(v) for v in r.split(delimiter)] for r in rows])
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric value in trial rows") from exc
    if table.ndim != 2 or table.shape[1] != 1 + n_channels * n_samples:
        raise FormatError(f"{path}: each row needs 1 + {n_channels * n_samples} values")
    labels = table[:, 0]
    if np.any(labels != np.round(labels)) or np.any(labels < 0):
        raise FormatError(f"{path}: labels must be non-negative integers")
    labels = labels.astype(np.int64)
    names = head[4:] or [str(i) for i in range(int(labels.max()) + 1)]
    return TrialSet(table[:, 1:].reshape(n_trials, n_channels, n_samples), labels, fs, names)


def save_delimited(ts: TrialSet, path, delimiter=",") -> None:
    head = [str(ts.n_trials), str(ts.n_channels), str(ts.n_samples), repr(ts.fs), *ts.class_names]
    out = [delimiter.join(head)]
    flat = ts.data.reshape(ts.n_trials, -1)
    for label, row in zip(ts.labels, flat):
        out.append(delimiter.join([str(int(label))] + [repr(float(v)) for v in row]))
    Path(path).write_text("\n".join(out) + "\n")


# ---------------------------------------------------------------------------
# Synthetic data

@dataclass
class SynthSpec:
    """Recipe for a synthetic multichannel data set.

    Class ``c`` trials are ``mixing[c] @ (oscillators + noise)``. Source ``j``
    oscillates at a frequency drawn per trial from ``bands[c][j % len(bands[c])]``
    with a random phase, and carries white Gaussian noise of std ``noise``.

    ``mixing`` defaults to ``I + mixing_strength * G_c / sqrt(n_channels)``
    with Gaussian ``G_c`` drawn from the seed, so per-class spatial
    covariances differ by construction.
    """

    n_classes: int = 2
    trials_per_class: int = 100
    n_channels: int = 8
    n_samples: int = 256
    fs: float = 256.0
    mixing: Optional[Sequence] = None
    bands: Optional[Sequence] = None
    noise: float = 1.0
    seed: int = 0
    mixing_strength: float = 0.5

    def validate(self):
        for name in ("n_classes", "trials_per_class", "n_channels", "n_samples"):
            if int(getattr(self, name)) < 1:
                raise ParameterError(f"{name} must be >= 1")
        if self.fs <= 0:
            raise ParameterError("fs must be positive")
        if self.noise < 0:
            raise ParameterError("noise amplitude must be >= 0")
        for lo, hi in (b for cls in self.class_bands() for b in cls):
            if not (0 < lo <= hi < self.fs / 2):
                raise ParameterError(f"band ({lo}, {hi}) Hz is outside (0, {self.fs / 2})")
        mats = self.mixing_matrices()
        if len(mats) != self.n_classes:
            raise ParameterError(f"need {self.n_classes} mixing matrices, got {len(mats)}")
        for m in mats:
            if m.shape != (self.n_channels, self.n_channels):
                raise ParameterError(f"mixing matrix shape {m.shape} != {(self.n_channels,) * 2}")

    def class_bands(self):
        if self.bands is not None:
            bands = [[tuple(map(float, b)) for b in cls] for cls in self.bands]
            if len(bands) != self.n_classes:
                raise ParameterError(f"need bands for {self.n_classes} classes, got {len(bands)}")
            if any(len(cls) == 0 for cls in bands):
                raise ParameterError("every class needs at least one band")
            return bands
        nyq = self.fs / 2
        default = [b for b in ((4.0, 8.0), (8.0, 13.0), (13.0, 30.0)) if b[1] < nyq]
        if not default:
            default = [(nyq / 4, nyq / 2)]
        return [list(default) for _ in range(self.n_classes)]

    def mixing_matrices(self):
        if self.mixing is not None:
            return [np.asarray(m, dtype=np.float64) for m in self.mixing]
        c = self.n_channels
        mats = []
        for k in range(self.n_classes):
            g = derive_rng(self.seed, "mixing", k).standard_normal((c, c))
            mats.append(np.eye(c) + self.mixing_strength * g / np.sqrt(c))
        return mats


def synth_trialset(spec: SynthSpec) -> TrialSet:
    """Generate a labelled synthetic TrialSet; deterministic in ``spec.seed``.

    Classes are appended sequentially (all class-0 trials first).
    """
    spec.validate()
    rng = derive_rng(spec.seed, "trials")
    t = np.arange(spec.n_samples) / spec.fs
    n, c = spec.trials_per_class, spec.n_channels
    chunks = []
    for mix, bands in zip(spec.mixing_matrices(), spec.class_bands()):
        lo = np.array([bands[j % len(bands)][0] for j in range(c)])
        hi = np.array([bands[j % len(bands)][1] for j in range(c)])
        freqs = lo + (hi - lo) * rng.random((n, c))
        phases = 2 * np.pi * rng.random((n, c))
        sources = np.sin(2 * np.pi * freqs[..., None] * t + phases[..., None])
        sources += spec.noise * rng.standard_normal(sources.shape)
        chunks.append(mix @ sources)
    labels = np.repeat(np.arange(spec.n_classes), n)
    meta = {"synthetic": True, "seed": spec.seed}
    if spec.n_classes < 2:
        meta["single_class"] = True
        warnings.warn("synthetic set has a single class; unusable for classification",
                      stacklevel=2)
    names = [f"class{k}" for k in range(spec.n_classes)]
    return TrialSet(np.concatenate(chunks), labels, spec.fs, names, meta)


# ---------------------------------------------------------------------------
# Rejection and folds

def reject_amplitude(ts: TrialSet, low, high) -> TrialSet:
    """Drop every trial with any sample outside ``[low, high]``."""
    if not low < high:
        raise ParameterError(f"need low < high, got {low} >= {high}")
    keep = np.all((ts.data >= low) & (ts.data <= high), axis=(1, 2))
    if not keep.any():
        raise DataError("amplitude rejection removed every trial")
    if keep.all():
        return ts
    return ts.subset(np.flatnonzero(keep))


@dataclass(frozen=True)
class FoldPlan:
    """Fold index per trial for k-fold cross-validation."""

    k: int
    assignments: np.ndarray
    seed: int

    def test_indices(self, fold):
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold):
        return np.flatnonzero(self.assignments != fold)

    def split(self):
        """Yield ``(train_idx, test_idx)`` for each fold in order."""
        for f in range(self.k):
            yield self.train_indices(f), self.test_indices(f)


def stratified_kfold(labels, k, seed=0) -> FoldPlan:
    """Assign trials to ``k`` folds keeping class proportions.

    Each class is shuffled and dealt round-robin; the starting fold rotates
    between classes so overall fold sizes also differ by at most one.
    """
    labels = np.asarray(labels).reshape(-1)
    k = int(k)
    if k < 2:
        raise ParameterError(f"need k >= 2 folds, got {k}")
    classes, counts = np.unique(labels, return_counts=True)
    if labels.size == 0:
        raise StratificationError("no labels to split")
    small = classes[counts < k]
    if small.size:
        raise StratificationError(
            f"classes {small.tolist()} have fewer than k={k} members")
    rng = derive_rng(seed, "folds")
    assignments = np.empty(labels.size, dtype=np.int64)
    offset = 0
    for cls in classes:
        idx = rng.permutation(np.flatnonzero(labels == cls))
        assignments[idx] = (offset + np.arange(idx.size)) % k
        offset = (offset + idx.size) % k
    return FoldPlan(k, assignments, int(seed))
