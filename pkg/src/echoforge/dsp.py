"""Transmit-side signal chain: FMCW sweep synthesis, band-pass filter design,
zero-phase filtering, and sweep-aligned framing.

The whole pipeline runs at a fixed 50 kHz rate. With the round-trip distance
mapping d = c*t/2 at c = 343 m/s this puts one correlation lag at exactly
3.43 mm, and a 12 ms sweep at exactly 600 samples.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve, firwin, freqz
from scipy.signal.windows import tukey

from .errors import ConfigError, FilterDesignError

RATE = 50_000
SPEED_OF_SOUND = 343.0
SWEEP_SECONDS = 0.012
SWEEP_SAMPLES = int(round(SWEEP_SECONDS * RATE))  # 600

# Emission bands of the two speakers.
BAND_LOW = (18_000.0, 21_000.0)
BAND_HIGH = (21_500.0, 24_500.0)


class Mic(enum.Enum):
    MIC1 = 1
    MIC2 = 2


@dataclass(frozen=True)
class SweepConfig:
    """One speaker's linear up-chirp.

    ``edge_taper`` is the Tukey fade fraction applied to the sweep edges.
    Untapered 12 ms chirps leak roughly -26 dB of spectral energy into the
    neighbouring band, which no receive filter can remove; a 0.3 taper keeps
    cross-band leakage below -45 dB while leaving the flat-top peak at
    ``amplitude``.
    """

    f_start: float
    f_end: float
    duration: float = SWEEP_SECONDS
    sample_rate: int = RATE
    amplitude: float = 0.8
    edge_taper: float = 0.3

    def __post_init__(self) -> None:
        if not (0.0 < self.f_start <= self.f_end < self.sample_rate / 2):
            raise ConfigError(
                f"sweep band {self.f_start}-{self.f_end} Hz violates "
                f"0 < f_start <= f_end < Nyquist ({self.sample_rate / 2} Hz)"
            )
        n = self.duration * self.sample_rate
        if abs(n - round(n)) > 1e-6 or round(n) <= 0:
            raise ConfigError(
                f"duration {self.duration} s is not a whole number of samples "
                f"at {self.sample_rate} Hz"
            )
        if not (0.0 < self.amplitude <= 1.0):
            raise ConfigError(f"amplitude {self.amplitude} outside (0, 1]")
        if not (0.0 <= self.edge_taper <= 1.0):
            raise ConfigError(f"edge_taper {self.edge_taper} outside [0, 1]")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))


# Default sweeps for the two speakers.
SWEEP_LOW = SweepConfig(*BAND_LOW)
SWEEP_HIGH = SweepConfig(*BAND_HIGH)


@dataclass
class PcmStream:
    """A mono PCM signal, unit amplitude scale, at the pipeline rate."""

    samples: np.ndarray
    sample_rate: int = RATE
    channel: Mic | None = None

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ConfigError(f"PcmStream expects 1-D samples, got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ConfigError("PcmStream contains non-finite samples")

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class FilterSpec:
    """Band-pass design requirements.

    The designed kernel must reach ``stop_attenuation`` dB of rejection at
    ``transition_width`` Hz beyond the passband edges and stay there.
    """

    pass_low: float
    pass_high: float
    transition_width: float = 500.0
    stop_attenuation: float = 40.0
    tap_count: int = 255

    def __post_init__(self) -> None:
        if not (0.0 < self.pass_low < self.pass_high):
            raise ConfigError(f"bad passband {self.pass_low}-{self.pass_high} Hz")
        if self.tap_count % 2 != 1 or self.tap_count < 3:
            raise ConfigError(f"tap_count must be odd and >= 3, got {self.tap_count}")
        if self.transition_width <= 0 or self.stop_attenuation <= 0:
            raise ConfigError("transition_width and stop_attenuation must be positive")


@dataclass(frozen=True)
class FilterKernel:
    taps: np.ndarray
    spec: FilterSpec
    achieved_attenuation: float  # measured dB at/beyond the transition edges

    def __post_init__(self) -> None:
        object.__setattr__(self, "taps", np.asarray(self.taps, dtype=np.float64))


FILTER_LOW = FilterSpec(*BAND_LOW)
FILTER_HIGH = FilterSpec(*BAND_HIGH)


def generate_sweep(cfg: SweepConfig) -> PcmStream:
    """Synthesize one linear up-chirp frame.

    Instantaneous frequency rises linearly from f_start to f_end over the
    sweep; the default band/duration choices give an integer cycle count so
    back-to-back sweeps are phase continuous.
    """
    n = cfg.n_samples
    t = np.arange(n) / cfg.sample_rate
    rate_of_sweep = (cfg.f_end - cfg.f_start) / cfg.duration
    phase = 2.0 * np.pi * (cfg.f_start * t + 0.5 * rate_of_sweep * t * t)
    x = cfg.amplitude * np.sin(phase)
    if cfg.edge_taper > 0.0:
        x = x * tukey(n, cfg.edge_taper)
    return PcmStream(x, cfg.sample_rate)


def design_bandpass(spec: FilterSpec, sample_rate: int = RATE) -> FilterKernel:
    """Design a linear-phase windowed-sinc band-pass FIR kernel.

    Raises FilterDesignError, naming the attenuation actually achieved, when
    the spec is infeasible with the requested tap count.
    """
    nyquist = sample_rate / 2
    if spec.pass_high + spec.transition_width > nyquist + 1e-9:
        raise ConfigError(
            f"stopband edge {spec.pass_high + spec.transition_width} Hz exceeds "
            f"Nyquist ({nyquist} Hz)"
        )
    taps = firwin(
        spec.tap_count,
        [spec.pass_low, spec.pass_high],
        window="hamming",
        pass_zero=False,
        fs=sample_rate,
    )

    freqs, response = freqz(taps, worN=8192, fs=sample_rate)
    mag_db = 20.0 * np.log10(np.maximum(np.abs(response), 1e-300))

    stop = (freqs <= spec.pass_low - spec.transition_width) | (
        freqs >= spec.pass_high + spec.transition_width
    )
    achieved = -float(mag_db[stop].max()) if stop.any() else np.inf
    if achieved < spec.stop_attenuation:
        raise FilterDesignError(
            f"{spec.tap_count}-tap design achieves {achieved:.1f} dB stopband "
            f"attenuation, below the required {spec.stop_attenuation:.1f} dB"
        )

    mid = np.argmin(np.abs(freqs - 0.5 * (spec.pass_low + spec.pass_high)))
    if abs(mag_db[mid]) > 0.5:
        raise FilterDesignError(
            f"mid-passband gain off unity by {mag_db[mid]:.2f} dB (limit 0.5 dB)"
        )
    return FilterKernel(taps, spec, achieved)


def apply_filter(stream: PcmStream, kernel: FilterKernel) -> PcmStream:
    """Filter a stream with zero-phase (group-delay compensated) convolution.

    Output length equals input length; echo timing is unbiased because the
    symmetric kernel's delay of (taps-1)/2 samples is removed by centering.
    """
    if len(stream) == 0:
        raise ConfigError("cannot filter an empty stream")
    out = fftconvolve(stream.samples, kernel.taps, mode="same")
    return PcmStream(out, stream.sample_rate, stream.channel)


def segment_frames(stream: PcmStream, frame_len: int, t0: int = 0) -> np.ndarray:
    """Cut a stream into consecutive non-overlapping frames of frame_len
    starting at sample t0. The trailing partial frame is discarded.

    Returns an array of shape (n_frames, frame_len); empty (0, frame_len)
    when the stream is too short.
    """
    if frame_len <= 0:
        raise ConfigError(f"frame_len must be positive, got {frame_len}")
    if t0 < 0:
        raise ConfigError(f"t0 must be non-negative, got {t0}")
    usable = len(stream) - t0
    n = max(usable // frame_len, 0)
    view = stream.samples[t0 : t0 + n * frame_len]
    return view.reshape(n, frame_len).copy()
