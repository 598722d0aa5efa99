"""Echo-profile computation: correlation of received frames against the
transmitted sweep, distance mapping, differential profiles, and assembly of
the 8-channel classifier input tensor.

An echo profile is a 2-D matrix of correlation strength, rows indexed by
round-trip distance (3.43 mm per bin at 50 kHz) and columns by sweep frame
(12 ms per frame). Four propagation channels exist: each of the two
microphones hears both speaker bands. SS channels pair a microphone with the
speaker on its own side, DS channels with the opposite speaker.
"""

from __future__ import annotations

import enum
import functools
import struct
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np
from PIL import Image

from . import dsp
from .errors import ConfigError, IngestError

if TYPE_CHECKING:
    from .dataset import GestureLabel

METERS_PER_BIN = dsp.SPEED_OF_SOUND / (2.0 * dsp.RATE)  # 0.00343 m
SECONDS_PER_FRAME = dsp.SWEEP_SECONDS

# Classifier input window: 155 frames (1.86 s) by 70 bins (24 cm) by
# 4 original + 4 differential channels.
TENSOR_FRAMES = 155
TENSOR_BINS = 70
TENSOR_CHANNELS = 8


class Channel(enum.IntEnum):
    SS1 = 0  # mic 1, low band (same-side speaker)
    DS1 = 1  # mic 1, high band
    DS2 = 2  # mic 2, low band
    SS2 = 3  # mic 2, high band


CHANNEL_ORDER = (Channel.SS1, Channel.DS1, Channel.DS2, Channel.SS2)


@dataclass
class EchoProfile:
    """Correlation strength indexed by (distance bin, time frame)."""

    values: np.ndarray
    channel: Channel
    meters_per_bin: float = METERS_PER_BIN
    seconds_per_frame: float = SECONDS_PER_FRAME

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ConfigError(f"echo profile must be 2-D, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ConfigError("echo profile contains non-finite values")

    @property
    def n_bins(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


@dataclass
class EchoTensor:
    """Stacked classifier input: shape (155, 70, 8).

    Channels 0-3 hold the original profiles in CHANNEL_ORDER, channels 4-7
    their differentials in the same order.
    """

    data: np.ndarray
    label: "GestureLabel | None" = None

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data)
        expected = (TENSOR_FRAMES, TENSOR_BINS, TENSOR_CHANNELS)
        if self.data.shape != expected:
            raise ConfigError(f"echo tensor shape {self.data.shape} != {expected}")
        if not np.all(np.isfinite(self.data)):
            raise ConfigError("echo tensor contains non-finite values")


def _as_array(x) -> np.ndarray:
    if isinstance(x, dsp.PcmStream):
        return x.samples
    return np.asarray(x, dtype=np.float64)


def correlate_frames(frames: np.ndarray, reference) -> np.ndarray:
    """Circular cross-correlation of many frames against one reference.

    frames: (n_frames, frame_len); returns (frame_len, n_frames) with rows
    indexed by lag: out[l, t] = sum_n reference[n] * frames[t, (n + l) % N].
    """
    ref = _as_array(reference)
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[1] != len(ref):
        raise ConfigError(
            f"frame length {frames.shape[-1] if frames.ndim else '?'} "
            f"does not match reference length {len(ref)}"
        )
    n = len(ref)
    spec = np.fft.rfft(frames, axis=1) * np.conj(np.fft.rfft(ref))
    corr = np.fft.irfft(spec, n=n, axis=1)
    return corr.T


def cross_correlate(frame, reference) -> np.ndarray:
    """Circular cross-correlation of one received frame with the transmitted
    sweep, computed in the frequency domain.

    Lag l carries the correlation with the reference delayed by l samples, so
    an echo arriving l samples late peaks at index l.
    """
    f = _as_array(frame)
    if f.ndim != 1:
        raise ConfigError("cross_correlate expects a single 1-D frame")
    return correlate_frames(f[None, :], reference)[:, 0]


def build_echo_profile(frames: np.ndarray, reference, channel: Channel) -> EchoProfile:
    """Correlate every frame against the transmitted sweep and stack the
    per-lag columns into an echo profile.

    Row r maps to round-trip distance r * 3.43 mm (d = c * lag / (2 * fs)).
    """
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise ConfigError("build_echo_profile needs a non-empty (n, frame_len) array")
    return EchoProfile(correlate_frames(frames, reference), channel)


def differential_profile(ep: EchoProfile) -> EchoProfile:
    """Frame-to-frame difference along the time axis.

    D[r, t] = E[r, t] - E[r, t-1]; the first column is zero-filled so the
    output keeps the input's shape. Static reflections cancel, motion stands
    out.
    """
    if ep.n_frames < 2:
        raise ConfigError("differential profile needs at least 2 time frames")
    d = np.zeros_like(ep.values)
    d[:, 1:] = ep.values[:, 1:] - ep.values[:, :-1]
    return EchoProfile(d, ep.channel, ep.meters_per_bin, ep.seconds_per_frame)


def crop_window(
    ep: EchoProfile,
    start_bin: int = 0,
    n_bins: int = TENSOR_BINS,
    start_frame: int = 0,
    n_frames: int = TENSOR_FRAMES,
) -> EchoProfile:
    """Extract the (distance, time) window of interest as an exact sub-matrix."""
    if min(start_bin, n_bins, start_frame, n_frames) < 0:
        raise ConfigError("crop window indices must be non-negative")
    over_bins = start_bin + n_bins - ep.n_bins
    over_frames = start_frame + n_frames - ep.n_frames
    if over_bins > 0 or over_frames > 0:
        raise ConfigError(
            f"crop window exceeds profile by {max(over_bins, 0)} bins "
            f"and {max(over_frames, 0)} frames "
            f"(profile is {ep.n_bins}x{ep.n_frames})"
        )
    sub = ep.values[start_bin : start_bin + n_bins, start_frame : start_frame + n_frames]
    return EchoProfile(sub.copy(), ep.channel, ep.meters_per_bin, ep.seconds_per_frame)


def stack_tensor(
    profiles: Sequence[EchoProfile], diffs: Sequence[EchoProfile]
) -> EchoTensor:
    """Stack 4 original + 4 differential 70x155 windows into a (155, 70, 8)
    tensor, channel order SS1, DS1, DS2, SS2 for both halves."""
    if len(profiles) != 4 or len(diffs) != 4:
        raise ConfigError("stack_tensor needs exactly 4 profiles and 4 differentials")
    data = np.empty((TENSOR_FRAMES, TENSOR_BINS, TENSOR_CHANNELS), dtype=np.float64)
    for i, (ep, want) in enumerate(zip(list(profiles) + list(diffs), CHANNEL_ORDER * 2)):
        if ep.channel != want:
            raise ConfigError(
                f"channel order mismatch at slot {i}: got {ep.channel.name}, "
                f"expected {want.name}"
            )
        if ep.values.shape != (TENSOR_BINS, TENSOR_FRAMES):
            raise ConfigError(
                f"slot {i} window is {ep.values.shape}, "
                f"expected ({TENSOR_BINS}, {TENSOR_FRAMES})"
            )
        data[:, :, i] = ep.values.T
    return EchoTensor(data)


def unstack_tensor(t: EchoTensor) -> tuple[list[EchoProfile], list[EchoProfile]]:
    """Inverse of stack_tensor: recover the 8 windows."""
    profiles = [
        EchoProfile(t.data[:, :, i].T.copy(), CHANNEL_ORDER[i]) for i in range(4)
    ]
    diffs = [
        EchoProfile(t.data[:, :, 4 + i].T.copy(), CHANNEL_ORDER[i]) for i in range(4)
    ]
    return profiles, diffs


# ---------------------------------------------------------------------------
# Four-channel pipeline front end

@functools.lru_cache(maxsize=None)
def default_kernels() -> tuple[dsp.FilterKernel, dsp.FilterKernel]:
    """Band-separation kernels for the two speaker bands."""
    return dsp.design_bandpass(dsp.FILTER_LOW), dsp.design_bandpass(dsp.FILTER_HIGH)


def compute_channel_profiles(
    mic1: dsp.PcmStream,
    mic2: dsp.PcmStream,
    sweep_low: dsp.SweepConfig = dsp.SWEEP_LOW,
    sweep_high: dsp.SweepConfig = dsp.SWEEP_HIGH,
    kernels: tuple[dsp.FilterKernel, dsp.FilterKernel] | None = None,
    t0: int = 0,
) -> dict[Channel, EchoProfile]:
    """Split each microphone stream into its two speaker bands and build the
    four full-length echo profiles."""
    if kernels is None:
        kernels = default_kernels()
    kernel_low, kernel_high = kernels
    ref_low = dsp.generate_sweep(sweep_low)
    ref_high = dsp.generate_sweep(sweep_high)
    frame_len = sweep_low.n_samples

    routing = {
        Channel.SS1: (mic1, kernel_low, ref_low),
        Channel.DS1: (mic1, kernel_high, ref_high),
        Channel.DS2: (mic2, kernel_low, ref_low),
        Channel.SS2: (mic2, kernel_high, ref_high),
    }
    profiles = {}
    for channel, (mic, kernel, ref) in routing.items():
        filtered = dsp.apply_filter(mic, kernel)
        frames = dsp.segment_frames(filtered, frame_len, t0)
        profiles[channel] = build_echo_profile(frames, ref, channel)
    return profiles


def window_and_stack(
    profiles: dict[Channel, EchoProfile],
    start_bin: int = 0,
    start_frame: int = 0,
) -> EchoTensor:
    """Crop each channel to the 70x155 window, compute differentials inside
    the window, and stack the classifier tensor."""
    windows, diffs = [], []
    for channel in CHANNEL_ORDER:
        win = crop_window(profiles[channel], start_bin, TENSOR_BINS, start_frame, TENSOR_FRAMES)
        windows.append(win)
        diffs.append(differential_profile(win))
    return stack_tensor(windows, diffs)


def tensor_from_mic_streams(
    mic1: dsp.PcmStream,
    mic2: dsp.PcmStream,
    start_bin: int = 0,
    start_frame: int = 0,
    t0: int = 0,
    kernels: tuple[dsp.FilterKernel, dsp.FilterKernel] | None = None,
) -> EchoTensor:
    """Full front end: two microphone streams to one classifier tensor."""
    profiles = compute_channel_profiles(mic1, mic2, kernels=kernels, t0=t0)
    return window_and_stack(profiles, start_bin, start_frame)


# ---------------------------------------------------------------------------
# Serialization

_EPRF_MAGIC = b"EPRF"
_EPRF_VERSION = 1
_EPRF_HEADER = struct.Struct("<4sHBII")


def save_eprf(ep: EchoProfile, path) -> None:
    """Write a profile as the EPRF binary container: magic, u16 version,
    u8 channel id, u32 rows, u32 cols, then row-major little-endian f32."""
    header = _EPRF_HEADER.pack(
        _EPRF_MAGIC, _EPRF_VERSION, int(ep.channel), ep.n_bins, ep.n_frames
    )
    body = np.ascontiguousarray(ep.values, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


def load_eprf(path) -> EchoProfile:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _EPRF_HEADER.size:
        raise IngestError(f"{path}: truncated EPRF header")
    magic, version, channel, rows, cols = _EPRF_HEADER.unpack_from(raw)
    if magic != _EPRF_MAGIC:
        raise IngestError(f"{path}: bad magic {magic!r}")
    if version != _EPRF_VERSION:
        raise IngestError(f"{path}: unsupported EPRF version {version}")
    expected = _EPRF_HEADER.size + rows * cols * 4
    if len(raw) != expected:
        raise IngestError(f"{path}: EPRF payload is {len(raw)} bytes, expected {expected}")
    values = np.frombuffer(raw, dtype="<f4", offset=_EPRF_HEADER.size)
    return EchoProfile(values.reshape(rows, cols).astype(np.float64), Channel(channel))


def save_heatmap_png(ep: EchoProfile, path, cmap: str = "gray") -> None:
    """Render a profile as a PNG heatmap with distance bin 0 at the bottom.

    "gray" writes a linear grayscale image; "viridis" applies the matplotlib
    viridis ramp. Output bytes are deterministic for identical profiles.
    """
    v = ep.values
    span = v.max() - v.min()
    norm = (v - v.min()) / span if span > 0 else np.zeros_like(v)
    img = np.flipud(norm)  # row 0 at the bottom of the image
    if cmap == "gray":
        Image.fromarray((img * 255.0).astype(np.uint8), mode="L").save(path)
    elif cmap == "viridis":
        from matplotlib import colormaps

        rgba = colormaps["viridis"](img)
        Image.fromarray((rgba[:, :, :3] * 255.0).astype(np.uint8), mode="RGB").save(path)
    else:
        raise ValueError(f"unknown colormap {cmap!r}; use 'gray' or 'viridis'")
