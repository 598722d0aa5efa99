"""Command-line front end: scene simulation, echo-profile extraction, and
classifier training/evaluation as reproducible pipelines.

Exit codes: 0 success, 2 usage or configuration error, 3 data/ingest error,
4 numeric failure. Logs go to stderr; artifacts only to the --out directory.
Every run drops a config_snapshot.json that can be replayed with --config.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

# Cap worker threads before numpy spins up its BLAS pools. Effective at
# process start only; inside an already-running interpreter it is a no-op.
_threads = os.environ.get("ECHOFORGE_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

from pathlib import Path

import numpy as np

from . import dataset, dsp, echo, metrics, model, simulate
from . import wav as wavio
from .augment import AugmentPolicy
from .errors import ConfigError, IngestError, NumericError
from .train import TrainConfig, metrics_to_csv
from .train import train as run_training

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

SPLIT_CHOICES = ("loso", "lopo", "object-independent", "finetune-budget=N")


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _write_snapshot(args: argparse.Namespace, out_dir: Path) -> None:
    doc = {
        k: v for k, v in vars(args).items()
        if k not in ("func", "config") and not callable(v)
    }
    with open(out_dir / "config_snapshot.json", "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# simulate

def cmd_simulate(args) -> int:
    if not args.scene:
        raise ConfigError("a scene file is required (positional or via --config)")
    scene_path = Path(args.scene)
    if not scene_path.exists():
        raise IngestError(f"scene file not found: {scene_path}")
    scene = simulate.load_scene(scene_path)
    if args.duration is not None or args.noise is not None:
        from dataclasses import replace

        scene = replace(
            scene,
            duration=args.duration if args.duration is not None else scene.duration,
            noise_rms=args.noise if args.noise is not None else scene.noise_rms,
        )
    out = _out_dir(args)
    mic1, mic2 = simulate.render_mic_streams(scene, args.seed)
    wavio.write_wav(out / "mic1.wav", mic1.samples, mic1.sample_rate, args.fmt)
    wavio.write_wav(out / "mic2.wav", mic2.samples, mic2.sample_rate, args.fmt)
    with open(out / "labels.csv", "w") as fh:
        fh.write("instance_id,label,seed\n")
        label = str(scene.label) if scene.label else ""
        fh.write(f"{scene_path.stem},{label},{args.seed}\n")
    _write_snapshot(args, out)
    _log(f"simulate: wrote mic1.wav, mic2.wav, labels.csv to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# profile

def _load_mic_streams(paths: list[str]) -> tuple[dsp.PcmStream, dsp.PcmStream]:
    if len(paths) == 1:
        data, rate = wavio.read_wav(paths[0])
        if rate != dsp.RATE:
            raise IngestError(f"{paths[0]}: sample rate {rate} Hz, expected {dsp.RATE}")
        if data.ndim != 2 or data.shape[1] != 2:
            raise IngestError(f"{paths[0]}: need a 2-channel file or two mono files")
        return (
            dsp.PcmStream(data[:, 0], rate, dsp.Mic.MIC1),
            dsp.PcmStream(data[:, 1], rate, dsp.Mic.MIC2),
        )
    streams = []
    for path, mic in zip(paths, (dsp.Mic.MIC1, dsp.Mic.MIC2)):
        data, rate = wavio.read_wav(path)
        if rate != dsp.RATE:
            raise IngestError(f"{path}: sample rate {rate} Hz, expected {dsp.RATE}")
        if data.ndim != 1:
            raise IngestError(f"{path}: expected mono when passing two files")
        streams.append(dsp.PcmStream(data, rate, mic))
    return streams[0], streams[1]


def cmd_profile(args) -> int:
    if not args.wavs:
        raise ConfigError("one stereo or two mono WAV inputs are required")
    if len(args.wavs) > 2:
        raise ConfigError(f"expected 1 or 2 WAV inputs, got {len(args.wavs)}")
    mic1, mic2 = _load_mic_streams(args.wavs)
    out = _out_dir(args)
    profiles = echo.compute_channel_profiles(mic1, mic2, t0=args.t0)

    crop_requested = any(
        v is not None for v in (args.start_bin, args.n_bins, args.start_frame, args.n_frames)
    )
    results = {}
    for channel, ep in profiles.items():
        if crop_requested:
            ep = echo.crop_window(
                ep,
                args.start_bin or 0,
                args.n_bins if args.n_bins is not None else echo.TENSOR_BINS,
                args.start_frame or 0,
                args.n_frames if args.n_frames is not None else min(echo.TENSOR_FRAMES, ep.n_frames),
            )
        results[channel] = ep

    for channel, ep in results.items():
        stem = channel.name.lower()
        echo.save_eprf(ep, out / f"{stem}.eprf")
        diff = echo.differential_profile(ep)
        echo.save_eprf(diff, out / f"{stem}_diff.eprf")
        if args.png:
            echo.save_heatmap_png(ep, out / f"{stem}.png", cmap=args.cmap)
            echo.save_heatmap_png(diff, out / f"{stem}_diff.png", cmap=args.cmap)

    if args.assert_row is not None:
        for channel, ep in results.items():
            rows = ep.values.argmax(axis=0)
            bad = np.abs(rows - args.assert_row) > 1
            if bad.any():
                raise NumericError(
                    f"channel {channel.name}: {int(bad.sum())}/{len(rows)} columns "
                    f"peak off row {args.assert_row} (first offenders at rows "
                    f"{rows[bad][:5].tolist()})"
                )
        _log(f"profile: all columns peak at row {args.assert_row} +-1")
    _write_snapshot(args, out)
    _log(f"profile: wrote 8 EPRF files to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train / eval

def _parse_scheme(args, corpus):
    split = args.split
    if split == "lopo":
        if not args.participant:
            raise ConfigError("--split lopo requires --participant")
        return dataset.Lopo(args.participant)
    if split == "loso":
        if not args.participant or args.session is None:
            raise ConfigError("--split loso requires --participant and --session")
        return dataset.Loso(args.participant, args.session)
    if split == "object-independent":
        if not args.grasp or not args.object:
            raise ConfigError("--split object-independent requires --grasp and --object")
        return dataset.ObjectIndependent(args.grasp, args.object)
    if split.startswith("finetune-budget="):
        try:
            budget = int(split.partition("=")[2])
        except ValueError:
            raise ConfigError(f"bad finetune budget in {split!r}") from None
        if not args.participant:
            raise ConfigError("--split finetune-budget=N requires --participant")
        held_out = args.session if args.session is not None else dataset.SESSIONS_PER_POSE
        return dataset.FineTuneBudget(args.participant, budget, held_out)
    raise ConfigError(
        f"unknown split {split!r}; valid schemes: {', '.join(SPLIT_CHOICES)}"
    )


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        epochs_base=args.epochs,
        epochs_finetune=args.epochs,
        seed=args.seed,
        augment=AugmentPolicy(max_shift=args.max_shift, jitter_prob=args.jitter_prob),
    )


def _evaluate_and_report(params, test_data, out: Path, fold_name: str) -> float:
    pred, _ = model.predict(params, test_data[0])
    cm = metrics.confusion(test_data[1], pred)
    report = metrics.fold_average([(fold_name, {"accuracy": float((pred == test_data[1]).mean()),
                                                "confusion": cm})])
    metrics.report_json(report, out / "report.json")
    metrics.report_csv(report, out / "report.csv")
    metrics.per_class_csv(cm, out / "per_class.csv")
    metrics.confusion_png(cm, out / "confusion.png")
    return report["mean_accuracy"]


def cmd_train(args) -> int:
    if not args.dataset:
        raise ConfigError("a dataset directory is required (positional or via --config)")
    corpus = dataset.load_corpus(args.dataset)
    scheme = _parse_scheme(args, corpus)
    plan = dataset.make_split(corpus, scheme)
    train_data = dataset.instances_to_arrays(dataset.select(corpus, plan.train))
    test_data = dataset.instances_to_arrays(dataset.select(corpus, plan.test))
    out = _out_dir(args)
    config = _train_config(args)

    if args.base_checkpoint:
        params = model.load_checkpoint(args.base_checkpoint)
        _log(f"train: starting from checkpoint {args.base_checkpoint}")
    else:
        params = model.init_params(model.ModelSpec(), args.seed)

    if args.epochs > 0:
        params, log = run_training(
            params, train_data, config, val_data=test_data, epochs=args.epochs
        )
        metrics_to_csv(log, out / "metrics.csv")
    else:
        if not args.base_checkpoint:
            raise ConfigError("--epochs 0 needs --base-checkpoint to evaluate")
        _log("train: --epochs 0, evaluation only")

    model.save_checkpoint(params, out / "checkpoint.ckpt", extra=config.to_dict())
    acc = _evaluate_and_report(params, test_data, out, plan.name)
    _write_snapshot(args, out)
    _log(f"train: split {plan.name}, test accuracy {metrics.format_accuracy(acc)}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if not args.dataset:
        raise ConfigError("a dataset directory is required (positional or via --config)")
    if not args.checkpoint:
        raise ConfigError("--checkpoint is required")
    corpus = dataset.load_corpus(args.dataset)
    scheme = _parse_scheme(args, corpus)
    plan = dataset.make_split(corpus, scheme)
    test_data = dataset.instances_to_arrays(dataset.select(corpus, plan.test))
    params = model.load_checkpoint(args.checkpoint)
    out = _out_dir(args)
    acc = _evaluate_and_report(params, test_data, out, plan.name)
    _write_snapshot(args, out)
    _log(f"eval: split {plan.name}, test accuracy {metrics.format_accuracy(acc)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser

def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--out", default="out", help="output directory")
    sub.add_argument("--seed", type=int, default=42)
    sub.add_argument("--config", help="JSON config snapshot to replay (flags override)")


_SUBPARSERS: dict[str, argparse.ArgumentParser] = {}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="echoforge",
        description="Dual-band ultrasonic sensing pipelines: simulate scenes, "
        "compute echo profiles, train and evaluate the gesture classifier.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="render a scene file to microphone WAVs")
    sim.add_argument("scene", nargs="?", help="scene JSON file")
    sim.add_argument("--duration", type=float, help="override scene duration (s)")
    sim.add_argument("--noise", type=float, help="override scene noise RMS")
    sim.add_argument("--fmt", choices=("float32", "int16"), default="float32")
    _add_common(sim)
    sim.set_defaults(func=cmd_simulate)

    prof = subs.add_parser("profile", help="compute echo profiles from WAV input")
    prof.add_argument("wavs", nargs="*", help="one stereo or two mono WAV files")
    prof.add_argument("--png", action="store_true", help="also render PNG heatmaps")
    prof.add_argument("--cmap", choices=("gray", "viridis"), default="gray")
    prof.add_argument("--t0", type=int, default=0, help="frame alignment offset, samples")
    prof.add_argument("--start-bin", type=int, default=None)
    prof.add_argument("--n-bins", type=int, default=None)
    prof.add_argument("--start-frame", type=int, default=None)
    prof.add_argument("--n-frames", type=int, default=None)
    prof.add_argument(
        "--assert-row", type=int, default=None,
        help="fail (exit 4) unless every column peaks at this row +-1",
    )
    _add_common(prof)
    prof.set_defaults(func=cmd_profile)

    def add_split_flags(sub):
        sub.add_argument("--split", default="loso",
                         help=f"split scheme: {', '.join(SPLIT_CHOICES)}")
        sub.add_argument("--participant")
        sub.add_argument("--session", type=int)
        sub.add_argument("--object")
        sub.add_argument("--grasp")

    tr = subs.add_parser("train", help="train the classifier on a session corpus")
    tr.add_argument("dataset", nargs="?", help="corpus directory of session containers")
    add_split_flags(tr)
    tr.add_argument("--epochs", type=int, default=150)
    tr.add_argument("--lr", type=float, default=0.0002)
    tr.add_argument("--batch-size", type=int, default=8)
    tr.add_argument("--max-shift", type=int, default=6)
    tr.add_argument("--jitter-prob", type=float, default=0.8)
    tr.add_argument("--base-checkpoint", help="start from this checkpoint (two-step)")
    _add_common(tr)
    tr.set_defaults(func=cmd_train)

    ev = subs.add_parser("eval", help="evaluate a checkpoint on a split")
    ev.add_argument("dataset", nargs="?", help="corpus directory of session containers")
    add_split_flags(ev)
    ev.add_argument("--checkpoint", help="checkpoint to evaluate")
    _add_common(ev)
    ev.set_defaults(func=cmd_eval)
    _SUBPARSERS.update(simulate=sim, profile=prof, train=tr, eval=ev)
    return parser


def _merge_snapshot(args, snapshot: dict, argv: list[str]) -> None:
    """Fill in values from a replayed config snapshot.

    Precedence: explicit command-line flags beat the snapshot, the snapshot
    beats parser defaults. A flag counts as explicit when its option string
    appears in argv; positionals count when they parsed to a value.
    """
    sub = _SUBPARSERS[args.command]
    for action in sub._actions:
        dest = action.dest
        if dest in ("help", "config") or dest not in snapshot:
            continue
        if action.option_strings:
            explicit = any(
                tok in action.option_strings
                or any(tok.startswith(opt + "=") for opt in action.option_strings)
                for tok in argv
            )
        else:
            explicit = getattr(args, dest, None) not in (None, [])
        if not explicit:
            setattr(args, dest, snapshot[dest])


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "config", None):
        try:
            snapshot = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            _log(f"error: config snapshot not found: {args.config}")
            return EXIT_DATA
        except json.JSONDecodeError as exc:
            _log(f"error: bad config snapshot {args.config}: {exc}")
            return EXIT_USAGE
        if snapshot.get("command", args.command) != args.command:
            _log(
                f"error: snapshot is for {snapshot['command']!r}, "
                f"not {args.command!r}"
            )
            return EXIT_USAGE
        _merge_snapshot(args, snapshot, list(argv))
    try:
        return args.func(args)
    except ConfigError as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE
    except (IngestError, FileNotFoundError) as exc:
        _log(f"error: {exc}")
        return EXIT_DATA
    except NumericError as exc:
        _log(f"error: {exc}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
