# # Filtering, resampling and spectral features
#
# The preprocessing protocols in the library are a 40 Hz lowpass, downsampling
# from 1000 Hz to 128 Hz, trimming to a fixed length and an 80-125 Hz
# bandpass for high-frequency content. All filters run forward and backward,
# so they do not shift the signal in time.

import numpy as np

from isdecode import (FilterSpec, SpectrogramSpec, TrialSet, dft_features, filter_trials,
                      resample_trials, spectrogram_features, statistical_features, trim_trials)

fs = 1000.0
t = np.arange(2000) / fs
x = np.sin(2 * np.pi * 10 * t) + 0.5 * np.sin(2 * np.pi * 100 * t)
ts = TrialSet(np.stack([x, np.roll(x, 7)])[None], [0], fs, ["demo"])


def power(sig):
    return float(np.mean(sig ** 2))


# ## 40 Hz lowpass: the 100 Hz component goes away

low = filter_trials(ts, FilterSpec("lowpass", 40.0))
print("power before/after:", power(ts.data), power(low.data))  # ~0.625 -> ~0.5

# ## Downsample and trim

small = trim_trials(resample_trials(low, 128.0), 200)
print("resampled shape:", small.shape, "fs:", small.fs)

# ## High-frequency band

hfc = filter_trials(ts, FilterSpec("bandpass", (80.0, 125.0)))
print("80-125 Hz power:", power(hfc.data[..., 250:-250]))  # ~0.125

# ## Features
#
# DFT magnitudes up to a cutoff, a flattened Hann-window spectrogram and four
# moments per channel.

print("dft up to 40 Hz:", dft_features(small, max_hz=40.0).shape)
print("spectrogram:", spectrogram_features(small, SpectrogramSpec(window=64, overlap=32)).shape)
print("stats:", np.round(statistical_features(small), 3))
