"""Synthetic acoustic scenes: point reflectors on scripted trajectories.

The model is deliberately simple and fully analytic so it can serve as
ground truth for the echo pipeline: single bounce, inverse-square amplitude,
nearest-sample round-trip delay, distance sampled once per 12 ms frame at the
frame midpoint. A reflector at distance d therefore lands its correlation
peak at lag round(2*d*fs/c), i.e. distance bin round(d / 3.43 mm).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import dsp, echo
from .dataset import (
    LabeledInstance,
    Marker,
    SessionMeta,
    instance_id,
    save_session,
)
from .errors import ConfigError
from .labels import GestureLabel

D_MIN = 0.01  # clamp against inverse-square blow-up near the sensor
DEFAULT_CHANNEL_GAINS = (1.0, 0.85, 0.8, 0.95)


@dataclass(frozen=True)
class Reflector:
    """A point reflector on a piecewise-linear distance trajectory.

    keyframes are (time s, distance m) pairs; distance is held constant
    outside the keyframed range.
    """

    keyframes: tuple[tuple[float, float], ...]
    reflectivity: float = 0.002

    def __post_init__(self) -> None:
        if not self.keyframes:
            raise ConfigError("reflector needs at least one keyframe")
        times = [t for t, _ in self.keyframes]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("reflector keyframe times must be strictly increasing")
        if any(not 0.0 <= d <= 1.0 for _, d in self.keyframes):
            raise ConfigError("reflector distances must lie in [0, 1] m")
        if not 0.0 < self.reflectivity <= 1.0:
            raise ConfigError(f"reflectivity {self.reflectivity} outside (0, 1]")

    @classmethod
    def static(cls, distance: float, reflectivity: float = 0.002) -> "Reflector":
        return cls(((0.0, distance),), reflectivity)

    def distance_at(self, t: np.ndarray) -> np.ndarray:
        times = np.array([k[0] for k in self.keyframes])
        dists = np.array([k[1] for k in self.keyframes])
        return np.interp(np.asarray(t, dtype=np.float64), times, dists)


@dataclass(frozen=True)
class Scene:
    reflectors: tuple[Reflector, ...]
    duration: float
    noise_rms: float = 0.0
    channel_gains: tuple[float, float, float, float] = DEFAULT_CHANNEL_GAINS
    label: GestureLabel | None = None

    def __post_init__(self) -> None:
        frames = self.duration / dsp.SWEEP_SECONDS
        if abs(frames - round(frames)) > 1e-9 or round(frames) <= 0:
            raise ConfigError(
                f"scene duration {self.duration} s is not a whole number of "
                f"{dsp.SWEEP_SECONDS * 1000:.0f} ms frames"
            )
        if self.noise_rms < 0:
            raise ConfigError("noise_rms must be non-negative")
        if len(self.channel_gains) != 4:
            raise ConfigError("channel_gains must have exactly 4 entries")

    @property
    def n_frames(self) -> int:
        return int(round(self.duration / dsp.SWEEP_SECONDS))


def _render_echo(scene: Scene, sweep: dsp.SweepConfig, gain: float = 1.0) -> np.ndarray:
    """Noiseless echo sum for one sweep band. Reflector contributions are
    accumulated in order, so rendering reflectors jointly equals the
    sample-wise sum of rendering them separately."""
    chirp = dsp.generate_sweep(sweep).samples
    frame_len = sweep.n_samples
    n_total = scene.n_frames * frame_len
    out = np.zeros(n_total)
    t_mid = (np.arange(scene.n_frames) + 0.5) * dsp.SWEEP_SECONDS
    frame_starts = np.arange(scene.n_frames) * frame_len
    for refl in scene.reflectors:
        dist = refl.distance_at(t_mid)
        lags = np.rint(2.0 * dist * sweep.sample_rate / dsp.SPEED_OF_SOUND).astype(int)
        amps = gain * refl.reflectivity / np.maximum(dist, D_MIN) ** 2
        for start, lag, amp in zip(frame_starts, lags, amps):
            begin = start + lag
            end = min(begin + frame_len, n_total)
            if begin < n_total:
                out[begin:end] += amp * chirp[: end - begin]
    return out


def render_received(scene: Scene, sweep: dsp.SweepConfig, seed: int) -> dsp.PcmStream:
    """Render the received stream for one propagation path: delayed,
    inverse-square-attenuated sweep echoes plus white Gaussian noise at
    scene.noise_rms. Deterministic for a given seed."""
    out = _render_echo(scene, sweep)
    if scene.noise_rms > 0:
        rng = np.random.default_rng(seed)
        out = out + rng.normal(0.0, scene.noise_rms, len(out))
    return dsp.PcmStream(out, sweep.sample_rate)


def render_mic_streams(
    scene: Scene,
    seed: int,
    sweep_low: dsp.SweepConfig = dsp.SWEEP_LOW,
    sweep_high: dsp.SweepConfig = dsp.SWEEP_HIGH,
) -> tuple[dsp.PcmStream, dsp.PcmStream]:
    """Render both microphones. Each mic hears both bands, weighted by the
    scene's per-channel gains (SS1, DS1, DS2, SS2); each mic gets independent
    noise."""
    g_ss1, g_ds1, g_ds2, g_ss2 = scene.channel_gains
    echo_low = _render_echo(scene, sweep_low)
    echo_high = _render_echo(scene, sweep_high)
    mic1 = g_ss1 * echo_low + g_ds1 * echo_high
    mic2 = g_ds2 * echo_low + g_ss2 * echo_high
    if scene.noise_rms > 0:
        rng = np.random.default_rng(seed)
        mic1 = mic1 + rng.normal(0.0, scene.noise_rms, len(mic1))
        mic2 = mic2 + rng.normal(0.0, scene.noise_rms, len(mic2))
    return (
        dsp.PcmStream(mic1, sweep_low.sample_rate, dsp.Mic.MIC1),
        dsp.PcmStream(mic2, sweep_low.sample_rate, dsp.Mic.MIC2),
    )


# ---------------------------------------------------------------------------
# Scripted synthetic gestures

TENSOR_DURATION = echo.TENSOR_FRAMES * dsp.SWEEP_SECONDS  # 1.86 s


@dataclass(frozen=True)
class SyntheticGestureScript:
    """A labeled motion template for desk-scale gesture synthesis.

    Each instance realization jitters the whole geometry by one distance
    offset (uniform +-dist_jitter) and rescales keyframe times by one factor
    (uniform 1 +- time_jitter), so repetitions of a class vary while staying
    kinematically consistent.
    """

    label: GestureLabel
    reflectors: tuple[Reflector, ...]
    dist_jitter: float = 0.003
    time_jitter: float = 0.03

    def realize(
        self,
        rng: np.random.Generator,
        extra_offset: float = 0.0,
        tempo: float = 1.0,
        noise_rms: float = 0.0,
        channel_gains: tuple[float, float, float, float] = DEFAULT_CHANNEL_GAINS,
        duration: float = TENSOR_DURATION,
    ) -> Scene:
        offset = rng.uniform(-self.dist_jitter, self.dist_jitter) + extra_offset
        scale = tempo * (1.0 + rng.uniform(-self.time_jitter, self.time_jitter))
        jittered = []
        for refl in self.reflectors:
            keyframes = tuple(
                (min(t * scale, duration), d + offset) for t, d in refl.keyframes
            )
            jittered.append(replace(refl, keyframes=keyframes))
        return Scene(
            tuple(jittered), duration, noise_rms, channel_gains, label=self.label
        )


def _script(gesture: str, finger_keyframes, hand_shift=None) -> SyntheticGestureScript:
    hand_base, object_base = 0.085, 0.16
    if hand_shift is None:
        hand = Reflector.static(hand_base, 0.002)
        obj = Reflector.static(object_base, 0.002)
    else:
        hand = Reflector(tuple((t, hand_base + s) for t, s in hand_shift), 0.002)
        obj = Reflector(tuple((t, object_base + s) for t, s in hand_shift), 0.002)
    finger = Reflector(tuple(finger_keyframes), 0.001)
    return SyntheticGestureScript(
        GestureLabel("Cylindrical", gesture), (hand, obj, finger)
    )


def builtin_scripts() -> tuple[SyntheticGestureScript, ...]:
    """Six kinematically distinct desk-scale scripts, one per gesture of the
    cylindrical family: static hold, a monotone finger slide, single and
    double finger taps, and whole-geometry wrist shifts."""
    f = 0.115  # resting finger distance
    return (
        _script("Hold", [(0.0, f)]),
        # monotone 6 cm slide inward, stays in
        _script("PointerIn", [(0.0, f), (0.4, f), (1.2, f - 0.06), (1.86, f - 0.06)]),
        # single 4 cm out-and-back tap
        _script("PointerTap", [(0.0, f), (0.5, f), (0.7, f + 0.04), (0.9, f), (1.86, f)]),
        # double 3 cm tap, distinct temporal signature
        _script(
            "MiddleTap",
            [(0.0, f), (0.35, f), (0.5, f + 0.03), (0.65, f), (0.95, f),
             (1.1, f + 0.03), (1.25, f), (1.86, f)],
        ),
        # whole geometry shifts +4 cm / -4 cm and stays
        _script(
            "WristRight",
            [(0.0, f), (0.5, f), (0.9, f + 0.04), (1.86, f + 0.04)],
            hand_shift=[(0.0, 0.0), (0.5, 0.0), (0.9, 0.04), (1.86, 0.04)],
        ),
        _script(
            "WristLeft",
            [(0.0, f), (0.5, f), (0.9, f - 0.04), (1.86, f - 0.04)],
            hand_shift=[(0.0, 0.0), (0.5, 0.0), (0.9, -0.04), (1.86, -0.04)],
        ),
    )


def _check_scripts(scripts: Sequence[SyntheticGestureScript]) -> None:
    if len(scripts) < 2:
        raise ConfigError("need at least 2 gesture scripts")
    labels = [s.label for s in scripts]
    if len(set(labels)) != len(labels):
        raise ConfigError("gesture scripts must have distinct labels")
    for a in scripts:
        for b in scripts:
            if a.label != b.label and a.reflectors == b.reflectors:
                raise ConfigError(
                    f"scripts {a.label} and {b.label} share identical motion keyframes"
                )


def synth_gesture_set(
    scripts: Sequence[SyntheticGestureScript],
    n_per_class: int,
    seed: int,
    noise_rms: float = 0.002,
    start_bin: int = 0,
) -> list[echo.EchoTensor]:
    """Render a class-balanced labeled tensor set: each script is realized
    n_per_class times with jittered parameters and run through the echo
    pipeline."""
    _check_scripts(scripts)
    if n_per_class < 1:
        raise ConfigError("n_per_class must be >= 1")
    rng = np.random.default_rng(seed)
    tensors: list[echo.EchoTensor] = []
    for script in scripts:
        for _ in range(n_per_class):
            scene = script.realize(rng, noise_rms=noise_rms)
            instance_seed = int(rng.integers(0, 2**63))
            mic1, mic2 = render_mic_streams(scene, instance_seed)
            tensor = echo.tensor_from_mic_streams(mic1, mic2, start_bin=start_bin)
            tensor.label = script.label
            tensors.append(tensor)
    return tensors


# ---------------------------------------------------------------------------
# Multi-participant synthetic corpora

def build_synthetic_instances(
    participants: Sequence[str] = ("P1", "P2", "P3"),
    sessions: int = 6,
    reps_per_session: int | Sequence[int] = 2,
    seed: int = 0,
    scripts: Sequence[SyntheticGestureScript] | None = None,
    participant_spread: float = 0.008,
    participant_tempo: float = 0.10,
    session_spread: float = 0.003,
    noise_rms: float = 0.002,
    object_name: str = "demo_object",
) -> list[LabeledInstance]:
    """In-memory labeled corpus with participant- and session-level variation:
    each wearer gets a geometry offset (device position) and a gesture tempo
    bias (personal execution speed); each session adds a small remount offset.

    reps_per_session may be one count for all sessions or a per-session
    sequence (to hit uneven per-class totals)."""
    if scripts is None:
        scripts = builtin_scripts()
    _check_scripts(scripts)
    if isinstance(reps_per_session, int):
        reps_per_session = (reps_per_session,) * sessions
    if len(reps_per_session) != sessions:
        raise ConfigError(
            f"{len(reps_per_session)} rep counts for {sessions} sessions"
        )
    rng = np.random.default_rng(seed)
    grasp = scripts[0].label.grasp
    instances: list[LabeledInstance] = []
    for participant in participants:
        p_offset = rng.uniform(-participant_spread, participant_spread)
        p_tempo = 1.0 + rng.uniform(-participant_tempo, participant_tempo)
        for session in range(1, sessions + 1):
            s_offset = rng.uniform(-session_spread, session_spread)
            meta = SessionMeta(participant, grasp, object_name, session)
            counter = 0
            for rep in range(1, reps_per_session[session - 1] + 1):
                for script in scripts:
                    scene = script.realize(
                        rng, extra_offset=p_offset + s_offset, tempo=p_tempo,
                        noise_rms=noise_rms,
                    )
                    instance_seed = int(rng.integers(0, 2**63))
                    mic1, mic2 = render_mic_streams(scene, instance_seed)
                    tensor = echo.tensor_from_mic_streams(mic1, mic2)
                    tensor.label = script.label
                    instances.append(
                        LabeledInstance(
                            instance_id(meta, counter),
                            tensor,
                            script.label,
                            meta,
                            (rep - 1) % 4 + 1,
                        )
                    )
                    counter += 1
    return instances


# Session streams are assembled from fixed-size slots: 6 silent frames, the
# 155-frame gesture render, then 6 more silent frames. Slot length is a
# multiple of the sweep length so frame alignment holds across the stream.
SLOT_LEAD_FRAMES = 6
SLOT_FRAMES = SLOT_LEAD_FRAMES + echo.TENSOR_FRAMES + 6  # 167 frames, 2.004 s


def write_synthetic_corpus(
    root: str | os.PathLike,
    participants: Sequence[str] = ("P1",),
    sessions: int = 2,
    reps_per_session: int = 1,
    seed: int = 0,
    scripts: Sequence[SyntheticGestureScript] | None = None,
    participant_spread: float = 0.008,
    participant_tempo: float = 0.10,
    session_spread: float = 0.003,
    noise_rms: float = 0.002,
    object_name: str = "demo_object",
    fmt: str = "float32",
) -> Path:
    """Materialize a synthetic corpus as on-disk session containers, one
    directory per participant/session, with cue markers in the manifest."""
    if scripts is None:
        scripts = builtin_scripts()
    _check_scripts(scripts)
    root = Path(root)
    rng = np.random.default_rng(seed)
    grasp = scripts[0].label.grasp
    slot_len = SLOT_FRAMES * dsp.SWEEP_SAMPLES
    paste_at = SLOT_LEAD_FRAMES * dsp.SWEEP_SAMPLES

    for participant in participants:
        p_offset = rng.uniform(-participant_spread, participant_spread)
        p_tempo = 1.0 + rng.uniform(-participant_tempo, participant_tempo)
        for session in range(1, sessions + 1):
            s_offset = rng.uniform(-session_spread, session_spread)
            plan = [
                (script, rep)
                for rep in range(1, reps_per_session + 1)
                for script in scripts
            ]
            n_slots = len(plan)
            mic1 = np.zeros(n_slots * slot_len)
            mic2 = np.zeros(n_slots * slot_len)
            markers = []
            for slot, (script, rep) in enumerate(plan):
                scene = script.realize(
                    rng, extra_offset=p_offset + s_offset, tempo=p_tempo, noise_rms=0.0
                )
                instance_seed = int(rng.integers(0, 2**63))
                m1, m2 = render_mic_streams(scene, instance_seed)
                begin = slot * slot_len + paste_at
                mic1[begin : begin + len(m1)] += m1.samples
                mic2[begin : begin + len(m2)] += m2.samples
                markers.append(
                    Marker(slot * slot_len, script.label.gesture, (rep - 1) % 4 + 1)
                )
            if noise_rms > 0:
                mic1 += rng.normal(0.0, noise_rms, len(mic1))
                mic2 += rng.normal(0.0, noise_rms, len(mic2))
            meta = SessionMeta(participant, grasp, object_name, session)
            save_session(
                root / participant / f"session{session}",
                dsp.PcmStream(mic1, dsp.RATE, dsp.Mic.MIC1),
                dsp.PcmStream(mic2, dsp.RATE, dsp.Mic.MIC2),
                meta,
                markers,
                fmt=fmt,
            )
    return root


# ---------------------------------------------------------------------------
# Scene files

def save_scene(scene: Scene, path: str | os.PathLike) -> None:
    doc = {
        "duration": scene.duration,
        "noise_rms": scene.noise_rms,
        "channel_gains": list(scene.channel_gains),
        "reflectors": [
            {
                "reflectivity": r.reflectivity,
                "keyframes": [{"t": t, "d": d} for t, d in r.keyframes],
            }
            for r in scene.reflectors
        ],
    }
    if scene.label is not None:
        doc["label"] = str(scene.label)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_scene(path: str | os.PathLike) -> Scene:
    with open(path) as fh:
        doc = json.load(fh)
    try:
        reflectors = tuple(
            Reflector(
                tuple((k["t"], k["d"]) for k in entry["keyframes"]),
                entry.get("reflectivity", 0.002),
            )
            for entry in doc["reflectors"]
        )
        label = GestureLabel.from_string(doc["label"]) if "label" in doc else None
        return Scene(
            reflectors,
            doc["duration"],
            doc.get("noise_rms", 0.0),
            tuple(doc.get("channel_gains", DEFAULT_CHANNEL_GAINS)),
            label=label,
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: malformed scene file ({exc})") from None
