"""Command-line umbrella: synth, gen-clips, extract, train, predict, eval.

Every command exits 0 on success and nonzero with a stage-tagged message on
stderr otherwise. File outputs are deterministic given the same inputs,
configuration and seeds.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .clips import ClipOptions, ClipSet, GrayFrame, generate_clips, write_pgm
from .config import parse_int_list, read_kv
from .errors import SkelclipError, StageError
from .experiments import (
    FeatureScaler,
    PipelineConfig,
    SplitProtocol,
    directory_loader,
    render_results,
    render_table,
    run_experiment,
    train_mode,
)
from .features import (
    ExtractorSpec,
    build_time_step_features,
    load_feature_map_stack,
    stack_time_step_features,
)
from .layouts import load_layout
from .multitask import (
    TrainConfig,
    baseline_inputs,
    load_checkpoint,
    predict_multi_sample,
    save_checkpoint,
)
from .skeleton_io import load_sequences, parse_manifest, write_canonical, write_manifest
from .synthetic import SynthConfig, generate_synthetic
from .tensorio import read_tensor, write_tensor


def _cmd_synth(args) -> int:
    layout = load_layout(args.layout)
    cfg = SynthConfig(
        layout=layout,
        n_classes=args.classes,
        t_min=args.t_min,
        t_max=args.t_max,
        sigma=args.sigma,
        samples_per_class=args.per_class,
        seed=args.seed,
    )
    manifest, sequences = generate_synthetic(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for entry, seq in zip(manifest.entries, sequences):
        (out / entry.path).write_text(write_canonical(seq), encoding="utf-8")
    (out / "manifest.txt").write_text(write_manifest(manifest), encoding="utf-8")
    print(f"wrote {len(sequences)} sequences and manifest.txt to {out}")
    return 0


def _cmd_gen_clips(args) -> int:
    layout = load_layout(args.layout)
    options = ClipOptions(coords=args.coords, scale_scope=args.scale, size=args.size)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    src = Path(args.input)
    bodies = load_sequences(src, layout)
    for i, seq in enumerate(bodies):
        cs = generate_clips(seq, options)
        stem = src.stem if len(bodies) == 1 else f"{src.stem}.b{i}"
        write_tensor(out / f"{stem}.clips.sktf", cs.as_array())
        if args.pgm:
            for c, channel in enumerate(cs.channels):
                for r in range(4):
                    write_pgm(cs.clips[c][r], out / f"{stem}.{channel}.ref{r}.pgm")
    print(f"wrote {len(bodies)} clip set(s) to {out}")
    return 0


def _cmd_extract(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    clip_dir = Path(args.clips)
    count = 0
    if args.extractor == "builtin":
        spec = ExtractorSpec(channels=args.channels, seed=args.seed)
        for path in sorted(clip_dir.glob("*.clips.sktf")):
            arr = read_tensor(path)
            cs = ClipSet(
                clips=tuple(
                    tuple(GrayFrame(pixels=arr[c, r]) for r in range(4)) for c in range(3)
                )
            )
            feats = stack_time_step_features(build_time_step_features(cs, spec))
            write_tensor(out / f"{path.name[:-len('.clips.sktf')]}.feat.sktf",
                         feats.astype(np.float32))
            count += 1
    else:
        for path in sorted(clip_dir.glob("*.fmaps.sktf")):
            feats = stack_time_step_features(load_feature_map_stack(path))
            write_tensor(out / f"{path.name[:-len('.fmaps.sktf')]}.feat.sktf",
                         feats.astype(np.float32))
            count += 1
    if count == 0:
        raise StageError("extract", f"no input tensors found in {clip_dir}")
    print(f"wrote {count} feature file(s) to {out}")
    return 0


def _feature_files_for(feature_dir: Path, entry_path: str) -> list[Path]:
    stem = Path(entry_path).stem
    exact = feature_dir / f"{stem}.feat.sktf"
    if exact.exists():
        return [exact]
    return sorted(feature_dir.glob(f"{stem}.b*.feat.sktf"))


def _cmd_train(args) -> int:
    layout = load_layout(args.layout)
    manifest = parse_manifest(
        Path(args.manifest).read_text(encoding="utf-8"), layout, class_count=args.classes
    )
    feature_dir = Path(args.features)
    xs, ys = [], []
    for entry in manifest.entries:
        files = _feature_files_for(feature_dir, entry.path)
        if not files:
            raise StageError("train", f"no feature file for manifest entry {entry.path}")
        for path in files:
            xs.append(read_tensor(path).astype(np.float64))
            ys.append(entry.label)
    x = np.stack(xs)
    y = np.array(ys, dtype=np.intp)

    if args.no_standardize:
        scaler = FeatureScaler.identity(x.shape[1], x.shape[2])
    else:
        scaler = FeatureScaler.fit(x)
    x = scaler.apply(x)

    cfg = TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch,
        epochs=args.epochs,
        seed=args.seed,
        mode=args.mode,
        hidden=args.hidden,
    )
    models, curves = train_mode(args.mode, x, y, cfg, manifest.class_count)
    named = (
        {"model": models[0]}
        if len(models) == 1
        else {f"frame{i}": m for i, m in enumerate(models)}
    )
    save_checkpoint(
        args.out,
        named,
        mode=args.mode,
        seed=args.seed,
        extra_tensors={
            "feat_mean": scaler.mean,
            "feat_scale": np.array([scaler.scale]),
        },
    )
    print(f"trained {len(models)} net(s) on {len(x)} samples; "
          f"final epoch mean loss {curves[0][-1]:.4f}; saved to {args.out}")
    return 0


def _cmd_predict(args) -> int:
    models, meta, extra = load_checkpoint(args.model)
    mode = meta.get("mode", "mtln")
    scaler = FeatureScaler(
        mean=extra["feat_mean"], scale=float(extra["feat_scale"][0])
    ) if "feat_mean" in extra else None

    feature_dir = Path(args.features)
    files = sorted(feature_dir.glob("*.feat.sktf"))
    if not files:
        raise StageError("predict", f"no feature files in {feature_dir}")
    ordered = [models[k] for k in sorted(models)]
    for path in files:
        feats = read_tensor(path).astype(np.float64)
        if scaler is not None:
            feats = scaler.apply(feats)
        inputs = [
            baseline_inputs(mode, feats, i if mode == "frame" else None)
            for i in range(len(ordered))
        ]
        probs = np.mean(
            [
                predict_multi_sample(m, [inp])[1]
                for m, inp in zip(ordered, inputs)
            ],
            axis=0,
        )
        name = path.name[: -len(".feat.sktf")]
        print(f"{name} {int(np.argmax(probs))}")
    return 0


def _protocol_from_config(kv: dict[str, str]) -> tuple[SplitProtocol, int]:
    kind = kv.get("protocol", "cross-subject")
    split_seed = int(kv.get("split_seed", "0"))
    if kind == "k-fold":
        return SplitProtocol(kind="k-fold", fold_count=int(kv.get("folds", "5"))), split_seed
    if kind == "cross-subject":
        train_ids = frozenset(parse_int_list(kv["train_subjects"]))
        test_ids = frozenset(parse_int_list(kv["test_subjects"]))
    elif kind == "cross-view":
        train_ids = frozenset(parse_int_list(kv["train_cameras"]))
        test_ids = frozenset(parse_int_list(kv["test_cameras"]))
    else:
        raise ValueError(f"unknown protocol {kind!r}")
    return SplitProtocol(kind=kind, train_ids=train_ids, test_ids=test_ids), split_seed


def pipeline_from_config(kv: dict[str, str]) -> PipelineConfig:
    return PipelineConfig(
        clip_options=ClipOptions(
            coords=kv.get("coords", "cylindrical"),
            scale_scope=kv.get("scale", "frame"),
            size=int(kv.get("size", "224")),
        ),
        extractor=ExtractorSpec(
            channels=int(kv.get("channels", "64")),
            seed=int(kv.get("extractor_seed", "0")),
        ),
        train=TrainConfig(
            learning_rate=float(kv.get("lr", "0.001")),
            batch_size=int(kv.get("batch", "100")),
            epochs=int(kv.get("epochs", "35")),
            seed=int(kv.get("train_seed", "0")),
            hidden=int(kv.get("hidden", "512")),
        ),
        augment_count=int(kv.get("augment", "0")),
        augment_seed=int(kv.get("augment_seed", "0")),
        standardize=kv.get("standardize", "true").lower() != "false",
        test_average_crops=kv.get("test_average_crops", "false").lower() == "true",
    )


def _cmd_eval(args) -> int:
    kv = read_kv(args.config)
    layout = load_layout(kv.get("layout", "figure2-16"))
    data = Path(args.data)
    manifest_path = data / kv.get("manifest", "manifest.txt")
    class_count = int(kv["classes"]) if "classes" in kv else None
    manifest = parse_manifest(
        manifest_path.read_text(encoding="utf-8"), layout, class_count=class_count
    )
    protocol, split_seed = _protocol_from_config(kv)
    config = pipeline_from_config(kv)
    modes = [m.strip() for m in kv.get("modes", "mtln").split(",") if m.strip()]
    report = run_experiment(
        manifest,
        directory_loader(data, manifest),
        protocol,
        config,
        modes=modes,
        split_seed=split_seed,
    )
    table = render_table(report)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(table, encoding="utf-8")
    (out / "results.txt").write_text(render_results(report), encoding="utf-8")
    print(table, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skelclip",
        description="Skeleton clip encoding, frozen-feature extraction and "
                    "multi-task action classification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic benchmark dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--layout", default="figure2-16")
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--per-class", type=int, default=60)
    p.add_argument("--t-min", type=int, default=20)
    p.add_argument("--t-max", type=int, default=60)
    p.add_argument("--sigma", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("gen-clips", help="encode a sequence file as clips")
    p.add_argument("--input", required=True)
    p.add_argument("--layout", required=True)
    p.add_argument("--coords", choices=["cylindrical", "cartesian"], default="cylindrical")
    p.add_argument("--scale", choices=["frame", "clip"], default="frame")
    p.add_argument("--size", type=int, default=224)
    p.add_argument("--out", required=True)
    p.add_argument("--pgm", action="store_true", help="also write PGM images")
    p.set_defaults(func=_cmd_gen_clips)

    p = sub.add_parser("extract", help="clips -> pooled time-step features")
    p.add_argument("--clips", required=True)
    p.add_argument("--extractor", choices=["builtin", "precomputed"], default="builtin")
    p.add_argument("--channels", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("train", help="train a classifier on extracted features")
    p.add_argument("--features", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--layout", default="figure2-16")
    p.add_argument("--classes", type=int, default=None)
    p.add_argument("--mode", choices=["mtln", "frame", "concat", "maxpool"], default="mtln")
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--batch", type=int, default=100)
    p.add_argument("--epochs", type=int, default=35)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", type=int, default=512)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="predict classes for feature files")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("eval", help="run a full experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SkelclipError as exc:
        print(f"skelclip: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        print(f"skelclip: [{args.command}] {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
