"""Signal processing for the road-roughness workload.

The roughness score of an accelerometer window is computed as:

    y[n] = z[n] - mean(z)            vertical axis, mean removed
    w[n] = hann[n] * y[n]            Hann window against spectral leakage
    X    = FFT(w)                    unnormalized forward DFT
    E_b  = sum over one-sided bins m in band b of |X[m]|^2   (m in 1..N/2)
    score = sum_b weight_b * E_b

A bin m (frequency m*fs/N) belongs to band (f_lo, f_hi) iff f_lo <= f < f_hi.
Bands must be non-overlapping and inside [0, fs/2].

Energy bookkeeping follows Parseval on the *windowed* signal:
sum(w[n]^2) == (1/N) * sum(|X[m]|^2) over all N bins.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass


def fft(signal: list[complex]) -> list[complex]:
    """Iterative radix-2 forward DFT, X[m] = sum_n x[n] * e^(-2*pi*i*m*n/N).

    Length must be a power of two, >= 2. Output is unnormalized.
    """
    n = len(signal)
    if n < 2 or n & (n - 1):
        raise ValueError(f"fft length must be a power of two >= 2, got {n}")
    x = [complex(v) for v in signal]
    # bit-reversal permutation
    j = 0
    for i in range(1, n):
        bit = n >> 1
        while j & bit:
            j ^= bit
            bit >>= 1
        j |= bit
        if i < j:
            x[i], x[j] = x[j], x[i]
    size = 2
    while size <= n:
        half = size // 2
        step = cmath.exp(-2j * math.pi / size)
        for start in range(0, n, size):
            w = 1.0 + 0j
            for k in range(start, start + half):
                u = x[k]
                v = x[k + half] * w
                x[k] = u + v
                x[k + half] = u - v
                w *= step
        size *= 2
    return x


def hann_window(n: int) -> list[float]:
    """Periodic Hann window of length n."""
    return [0.5 - 0.5 * math.cos(2.0 * math.pi * i / n) for i in range(n)]


@dataclass(frozen=True)
class RoughnessConfig:
    window_size: int = 256
    sample_rate: float = 100.0
    bands: tuple[tuple[float, float], ...] = ((0.5, 4.0), (4.0, 12.0), (12.0, 30.0))
    weights: tuple[float, ...] = (0.2, 0.5, 0.3)
    start_threshold: float = 1.0
    stop_threshold: float = 0.8

    def __post_init__(self):
        n = self.window_size
        if n < 2 or n & (n - 1):
            raise ValueError("window_size must be a power of two >= 2")
        if len(self.bands) != len(self.weights):
            raise ValueError("bands and weights must have the same length")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be non-negative")
        nyquist = self.sample_rate / 2.0
        last_hi = 0.0
        for lo, hi in sorted(self.bands):
            if lo < 0 or hi > nyquist or lo >= hi:
                raise ValueError(f"band ({lo}, {hi}) outside [0, {nyquist}]")
            if lo < last_hi:
                raise ValueError("bands must not overlap")
            last_hi = hi
        if self.stop_threshold > self.start_threshold:
            raise ValueError("stop_threshold must be <= start_threshold (hysteresis)")


def band_energies(spectrum: list[complex], sample_rate: float, bands) -> list[float]:
    """One-sided band energies over bins 1..N/2 of an N-point spectrum."""
    n = len(spectrum)
    out = []
    for lo, hi in bands:
        energy = 0.0
        for m in range(1, n // 2 + 1):
            freq = m * sample_rate / n
            if lo <= freq < hi:
                energy += abs(spectrum[m]) ** 2
        out.append(energy)
    return out


def roughness_score(vertical_accel: list[float], cfg: RoughnessConfig) -> float:
    """Weighted band-energy score of one accelerometer window."""
    n = cfg.window_size
    if len(vertical_accel) != n:
        raise ValueError(f"window length {len(vertical_accel)} != configured {n}")
    mean = sum(vertical_accel) / n
    window = hann_window(n)
    shaped = [(v - mean) * w for v, w in zip(vertical_accel, window)]
    spectrum = fft(shaped)
    energies = band_energies(spectrum, cfg.sample_rate, cfg.bands)
    return sum(w * e for w, e in zip(cfg.weights, energies))
