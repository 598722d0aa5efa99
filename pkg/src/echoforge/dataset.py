"""Recording containers, instance slicing, and train/test split planning.

A session container is a directory holding manifest.json plus mic1.wav and
mic2.wav at 50 kHz. The manifest records who/what/when and the per-instance
cue markers (sample offsets into the streams). Continuous recordings are cut
into 1.86 s (155-frame) labeled windows, one per marker.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import dsp, echo, wav
from .errors import ConfigError, IngestError
from .labels import (
    GESTURES_BY_GRASP,
    GESTURES_PER_GRASP,
    GRASPS,
    N_CLASSES,
    GestureLabel,
    all_labels,
)

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1

# The gesture is performed in a 2 s cue window; the 155-frame (1.86 s) model
# window sits centered inside it, 0.07 s after the cue.
WINDOW_OFFSET_SECONDS = 0.07
SESSIONS_PER_POSE = 6
REPETITIONS = 4


@dataclass(frozen=True)
class SessionMeta:
    participant: str
    grasp: str
    object_name: str
    session: int
    remounted: bool = True

    def __post_init__(self) -> None:
        if self.grasp not in GRASPS:
            raise ConfigError(f"unknown grasp {self.grasp!r}")
        if not 1 <= self.session <= SESSIONS_PER_POSE:
            raise ConfigError(f"session index {self.session} outside [1, {SESSIONS_PER_POSE}]")


@dataclass(frozen=True)
class Marker:
    """Start of one 2 s gesture window, in samples into the session stream."""

    sample: int
    gesture: str
    repetition: int

    def __post_init__(self) -> None:
        if not 1 <= self.repetition <= REPETITIONS:
            raise ConfigError(f"repetition {self.repetition} outside [1, {REPETITIONS}]")


@dataclass
class LabeledInstance:
    id: str
    tensor: echo.EchoTensor
    label: GestureLabel
    meta: SessionMeta
    repetition: int


@dataclass(frozen=True)
class SplitPlan:
    name: str
    train: tuple[str, ...]
    test: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.train or not self.test:
            raise ConfigError(f"split {self.name!r} has an empty side")
        if set(self.train) & set(self.test):
            raise ConfigError(f"split {self.name!r} has overlapping train/test sets")


# ---------------------------------------------------------------------------
# Container I/O

def instance_id(meta: SessionMeta, marker_index: int) -> str:
    return (
        f"{meta.participant}:{meta.grasp}:{meta.object_name}"
        f":s{meta.session}:m{marker_index:03d}"
    )


def save_session(
    directory: str | os.PathLike,
    mic1: dsp.PcmStream,
    mic2: dsp.PcmStream,
    meta: SessionMeta,
    markers: Sequence[Marker],
    fmt: str = "float32",
) -> Path:
    """Write a session container (manifest.json + mic1.wav + mic2.wav)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    wav.write_wav(directory / "mic1.wav", mic1.samples, mic1.sample_rate, fmt)
    wav.write_wav(directory / "mic2.wav", mic2.samples, mic2.sample_rate, fmt)
    manifest = {
        "format": "echoforge-session",
        "version": MANIFEST_VERSION,
        "participant": meta.participant,
        "grasp": meta.grasp,
        "object": meta.object_name,
        "session": meta.session,
        "remounted": meta.remounted,
        "sample_rate": mic1.sample_rate,
        "markers": [
            {"sample": m.sample, "gesture": m.gesture, "repetition": m.repetition}
            for m in markers
        ],
    }
    with open(directory / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return directory


def load_session(
    directory: str | os.PathLike,
) -> tuple[dict[str, dsp.PcmStream], SessionMeta, list[Marker]]:
    """Load and validate a session container.

    Returns the two microphone streams, the session metadata, and the
    per-instance markers.
    """
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.exists():
        raise IngestError(f"no {MANIFEST_NAME} in {directory}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise IngestError(f"{manifest_path}: invalid JSON ({exc})") from None

    for key in ("participant", "grasp", "object", "session", "markers", "sample_rate"):
        if key not in manifest:
            raise IngestError(f"{manifest_path}: missing field {key!r}")
    if manifest.get("version", 1) != MANIFEST_VERSION:
        raise IngestError(f"{manifest_path}: unsupported version {manifest.get('version')}")

    meta = SessionMeta(
        participant=str(manifest["participant"]),
        grasp=manifest["grasp"],
        object_name=str(manifest["object"]),
        session=int(manifest["session"]),
        remounted=bool(manifest.get("remounted", True)),
    )

    streams = {}
    lengths = {}
    for name in ("mic1", "mic2"):
        path = directory / f"{name}.wav"
        if not path.exists():
            raise IngestError(f"missing channel {name} ({path})")
        data, rate = wav.read_wav(path)
        if rate != dsp.RATE:
            raise IngestError(f"{path}: sample rate {rate} Hz, pipeline requires {dsp.RATE} Hz")
        if data.ndim != 1:
            raise IngestError(f"{path}: expected mono, got shape {data.shape}")
        mic = dsp.Mic.MIC1 if name == "mic1" else dsp.Mic.MIC2
        streams[name] = dsp.PcmStream(data, rate, mic)
        lengths[name] = len(data)
    if lengths["mic1"] != lengths["mic2"]:
        short = min(lengths, key=lengths.get)
        raise IngestError(
            f"channel {short} is truncated: {lengths[short]} samples vs "
            f"{max(lengths.values())} in the other channel"
        )

    markers = []
    for entry in manifest["markers"]:
        gesture = entry["gesture"]
        if gesture not in GESTURES_BY_GRASP[meta.grasp]:
            raise IngestError(
                f"{manifest_path}: gesture {gesture!r} is not defined for grasp {meta.grasp}"
            )
        markers.append(
            Marker(int(entry["sample"]), gesture, int(entry.get("repetition", 1)))
        )
    return streams, meta, markers


@dataclass(frozen=True)
class SkippedInstance:
    marker_index: int
    reason: str


def slice_instances(
    streams: Mapping[str, dsp.PcmStream],
    meta: SessionMeta,
    markers: Sequence[Marker],
    start_bin: int = 0,
    kernels=None,
) -> tuple[list[LabeledInstance], list[SkippedInstance]]:
    """Cut a continuous session into one labeled 155x70x8 tensor per marker.

    The window starts 0.07 s after the cue, rounded up to the next sweep
    boundary so frames stay aligned with the transmitted sweep train. Markers
    whose window would run past the end of the stream are skipped and
    reported.
    """
    if any(b.sample <= a.sample for a, b in zip(markers, markers[1:])):
        raise ConfigError("markers must be strictly increasing")

    profiles = echo.compute_channel_profiles(
        streams["mic1"], streams["mic2"], kernels=kernels
    )
    total_frames = next(iter(profiles.values())).n_frames
    frame_len = dsp.SWEEP_SAMPLES
    offset = int(round(WINDOW_OFFSET_SECONDS * dsp.RATE))

    instances: list[LabeledInstance] = []
    skipped: list[SkippedInstance] = []
    for i, marker in enumerate(markers):
        start_frame = -((marker.sample + offset) // -frame_len)  # ceil division
        if start_frame + echo.TENSOR_FRAMES > total_frames:
            skipped.append(
                SkippedInstance(
                    i,
                    f"window needs frames {start_frame}..{start_frame + echo.TENSOR_FRAMES} "
                    f"but the stream has {total_frames}",
                )
            )
            continue
        tensor = echo.window_and_stack(profiles, start_bin=start_bin, start_frame=start_frame)
        label = GestureLabel(meta.grasp, marker.gesture)
        tensor.label = label
        instances.append(
            LabeledInstance(instance_id(meta, i), tensor, label, meta, marker.repetition)
        )
    return instances, skipped


def apply_exclusions(
    instances: Sequence[LabeledInstance], exclusions_path: str | os.PathLike
) -> tuple[list[LabeledInstance], int, int]:
    """Apply a review overlay without touching raw containers.

    CSV columns: instance_id, action [exclude|relabel], gesture (new label,
    relabel only). Returns (instances, n_excluded, n_relabeled).
    """
    actions: dict[str, tuple[str, str]] = {}
    with open(exclusions_path, newline="") as fh:
        for row in csv.DictReader(fh):
            actions[row["instance_id"]] = (row["action"], row.get("gesture", ""))

    kept: list[LabeledInstance] = []
    n_excluded = n_relabeled = 0
    for inst in instances:
        action = actions.get(inst.id)
        if action is None:
            kept.append(inst)
            continue
        kind, gesture = action
        if kind == "exclude":
            n_excluded += 1
        elif kind == "relabel":
            new_label = GestureLabel(inst.meta.grasp, gesture)
            inst.label = new_label
            inst.tensor.label = new_label
            kept.append(inst)
            n_relabeled += 1
        else:
            raise IngestError(f"{exclusions_path}: unknown action {kind!r} for {inst.id}")
    return kept, n_excluded, n_relabeled


def load_corpus(root: str | os.PathLike) -> list[LabeledInstance]:
    """Ingest every session container below root, in sorted path order.

    An exclusions.csv at the root is applied as an overlay if present.
    """
    root = Path(root)
    session_dirs = sorted(p.parent for p in root.rglob(MANIFEST_NAME))
    if not session_dirs:
        raise IngestError(f"no session containers found under {root}")
    instances: list[LabeledInstance] = []
    for directory in session_dirs:
        streams, meta, markers = load_session(directory)
        got, _ = slice_instances(streams, meta, markers)
        instances.extend(got)
    overlay = root / "exclusions.csv"
    if overlay.exists():
        instances, _, _ = apply_exclusions(instances, overlay)
    return instances


def write_labels_csv(instances: Sequence[LabeledInstance], path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["instance_id", "participant", "grasp", "object", "session",
             "repetition", "gesture", "class_index"]
        )
        for inst in instances:
            writer.writerow(
                [inst.id, inst.meta.participant, inst.meta.grasp, inst.meta.object_name,
                 inst.meta.session, inst.repetition, inst.label.gesture,
                 inst.label.class_index]
            )


def instances_to_arrays(
    instances: Sequence[LabeledInstance],
) -> tuple[np.ndarray, np.ndarray]:
    """Stack instances into (X, y) training arrays: float32 tensors and
    int64 class indices."""
    x = np.stack([inst.tensor.data for inst in instances]).astype(np.float32)
    y = np.array([inst.label.class_index for inst in instances], dtype=np.int64)
    return x, y


# ---------------------------------------------------------------------------
# Split planning

@dataclass(frozen=True)
class Lopo:
    """Leave-one-participant-out: test on every instance of one participant."""

    participant: str


@dataclass(frozen=True)
class Loso:
    """Leave-one-session-out within one participant: train on the other
    sessions, test on session k."""

    participant: str
    session: int


@dataclass(frozen=True)
class ObjectIndependent:
    """Within one grasp: test on one object's instances across participants,
    train on the grasp's other objects."""

    grasp: str
    object_name: str


@dataclass(frozen=True)
class FineTuneBudget:
    """Personalization budget: train on the target participant's first
    n_sessions sessions (excluding the held-out one), test on the held-out
    session."""

    participant: str
    n_sessions: int
    held_out_session: int = SESSIONS_PER_POSE


def make_split(instances: Sequence[LabeledInstance], scheme) -> SplitPlan:
    """Build a disjoint train/test plan over instance ids for one scheme."""
    by_id = {inst.id: inst for inst in instances}
    if len(by_id) != len(instances):
        raise ConfigError("duplicate instance ids in the corpus")

    if isinstance(scheme, Lopo):
        participants = {i.meta.participant for i in instances}
        if scheme.participant not in participants:
            raise ConfigError(f"unknown participant {scheme.participant!r}")
        test = [i.id for i in instances if i.meta.participant == scheme.participant]
        train = [i.id for i in instances if i.meta.participant != scheme.participant]
        name = f"lopo-{scheme.participant}"

    elif isinstance(scheme, Loso):
        mine = [i for i in instances if i.meta.participant == scheme.participant]
        if not mine:
            raise ConfigError(f"unknown participant {scheme.participant!r}")
        sessions = {i.meta.session for i in mine}
        if scheme.session not in sessions:
            raise ConfigError(
                f"participant {scheme.participant} has no session {scheme.session}"
            )
        test = [i.id for i in mine if i.meta.session == scheme.session]
        train = [i.id for i in mine if i.meta.session != scheme.session]
        name = f"loso-{scheme.participant}-s{scheme.session}"

    elif isinstance(scheme, ObjectIndependent):
        in_grasp = [i for i in instances if i.meta.grasp == scheme.grasp]
        if not in_grasp:
            raise ConfigError(f"no instances for grasp {scheme.grasp!r}")
        objects = {i.meta.object_name for i in in_grasp}
        if scheme.object_name not in objects:
            raise ConfigError(
                f"grasp {scheme.grasp} has no object {scheme.object_name!r}"
            )
        test = [i.id for i in in_grasp if i.meta.object_name == scheme.object_name]
        train = [i.id for i in in_grasp if i.meta.object_name != scheme.object_name]
        name = f"object-indep-{scheme.grasp}-{scheme.object_name}"

    elif isinstance(scheme, FineTuneBudget):
        mine = [i for i in instances if i.meta.participant == scheme.participant]
        if not mine:
            raise ConfigError(f"unknown participant {scheme.participant!r}")
        sessions = sorted({i.meta.session for i in mine})
        if scheme.held_out_session not in sessions:
            raise ConfigError(
                f"participant {scheme.participant} has no session "
                f"{scheme.held_out_session}"
            )
        available = [s for s in sessions if s != scheme.held_out_session]
        if not 1 <= scheme.n_sessions <= len(available):
            raise ConfigError(
                f"budget {scheme.n_sessions} outside [1, {len(available)}] "
                f"available sessions"
            )
        chosen = set(available[: scheme.n_sessions])
        test = [i.id for i in mine if i.meta.session == scheme.held_out_session]
        train = [i.id for i in mine if i.meta.session in chosen]
        name = f"finetune-{scheme.participant}-n{scheme.n_sessions}"

    else:
        raise ConfigError(f"unknown split scheme {type(scheme).__name__}")

    return SplitPlan(name, tuple(train), tuple(test))


def select(instances: Sequence[LabeledInstance], ids: Iterable[str]) -> list[LabeledInstance]:
    by_id = {inst.id: inst for inst in instances}
    return [by_id[i] for i in ids]
