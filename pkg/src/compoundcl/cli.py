"""Command-line entry point.

Subcommands: train-basic, continual, fewshot, gradcam, synth-gen, eval.
Every command is deterministic given (config, seed); primary outputs are
byte-identical on rerun. Exit codes: 0 success, 1 runtime failure,
2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness, metrics
from .config import RunConfig, load_config
from .data.dataset import subject_kfold
from .data.manifest import export_dataset, load_manifest
from .data.synth import generate
from .errors import ConfigError, ManifestError, VersionError
from .gradcam import gradcam, save_heatmap, save_overlay
from .model import Architecture, ModelState, TeacherSnapshot
from .nn import load_params, save_params
from .registry import ClassRegistry
from .rng import substream

OUTPUT_DIR_ENV = "COMPOUNDCL_OUTPUT_DIR"


def _out_dir(cfg: RunConfig, args) -> Path:
    import os

    if getattr(args, "output_dir", None):
        return Path(args.output_dir)
    if os.environ.get(OUTPUT_DIR_ENV):
        return Path(os.environ[OUTPUT_DIR_ENV])
    return Path(cfg.output_dir)


def _basic_label_names(cfg: RunConfig) -> list:
    if cfg.data.source == "synthetic":
        return list(cfg.synth_spec().basic)
    return list(cfg.data.basic_labels)


def _prepare_dataset(cfg: RunConfig):
    if cfg.data.source == "synthetic":
        return generate(cfg.synth_spec(), cfg.seed)
    manifest = Path(cfg.data.manifest)
    root = Path(cfg.data.root) if cfg.data.root else manifest.parent
    return load_manifest(root, manifest, cfg.data.image_size, basic_labels=cfg.data.basic_labels)


def _save_model_checkpoint(path, model: ModelState, extra: dict):
    meta = {
        "arch": model.arch.to_dict(),
        "registry": model.registry.to_dict(),
        "rng": {"root_seed": extra.get("root_seed")},
    }
    meta.update(extra)
    save_params(path, model.params, extra=meta)


def _load_model_checkpoint(path) -> tuple[ModelState, dict]:
    params, extra = load_params(path)
    arch = Architecture.from_dict(extra["arch"])
    registry = ClassRegistry.from_dict(extra["registry"])
    return ModelState(arch, params, registry), extra


def _load_teacher_checkpoint(path) -> TeacherSnapshot:
    params, extra = load_params(path)
    for t in params.tensors.values():
        t.setflags(write=False)
    return TeacherSnapshot(
        Architecture.from_dict(extra["arch"]), params, ClassRegistry.from_dict(extra["registry"])
    )


def _check_checkpoint_matches(cfg: RunConfig, extra: dict):
    expected = _basic_label_names(cfg)
    got = list(ClassRegistry.from_dict(extra["registry"]).basic_labels)
    if got != expected:
        raise VersionError(
            f"checkpoint basic classes {got} do not match config basic classes {expected}"
        )


def cmd_train_basic(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(cfg, args)
    out.mkdir(parents=True, exist_ok=True)
    dataset = _prepare_dataset(cfg)
    basic_names = _basic_label_names(cfg)
    basic_ds = dataset.filter_labels(basic_names)
    folds = subject_kfold(basic_ds, cfg.data.folds, substream(cfg.seed, "folds"))
    result = harness.train_basic_phase(basic_ds, folds, cfg.arch, cfg.phase, cfg.seed, basic_names)

    extra = {"kind": "model", "best_fold": result.best_fold, "root_seed": cfg.seed}
    _save_model_checkpoint(out / "basic_model.ckpt", result.model, extra)
    save_params(
        out / "teacher.ckpt",
        result.teacher.params,
        extra={
            "kind": "teacher",
            "arch": result.teacher.arch.to_dict(),
            "registry": result.teacher.registry.to_dict(),
            "best_fold": result.best_fold,
            "root_seed": cfg.seed,
            "rng": {"root_seed": cfg.seed},
        },
    )
    with open(out / "basic_folds.csv", "w", encoding="utf-8") as f:
        f.write("fold,test_accuracy\n")
        for i, acc in enumerate(result.fold_accuracies):
            f.write(f"{i},{acc:.10f}\n")
    with open(out / "basic_summary.json", "w", encoding="utf-8") as f:
        json.dump(
            {"best_fold": result.best_fold, **{k: round(v, 10) for k, v in result.stats.items()}},
            f,
            indent=2,
            sort_keys=True,
        )
        f.write("\n")
    print(f"basic phase done: mean={result.stats['mean']:.4f} max={result.stats['max']:.4f}")
    print(f"wrote {out / 'basic_model.ckpt'}, {out / 'teacher.ckpt'}, {out / 'basic_folds.csv'}")
    return 0


def _continual_phase_cfg(cfg: RunConfig, args):
    phase = cfg.phase
    distill = cfg.continual.distill
    if getattr(args, "no_distill", False):
        distill = False
    replay_mode = phase.replay_mode
    if getattr(args, "replay_mode", None):
        replay_mode = args.replay_mode
    if getattr(args, "no_replay", False):
        replay_mode = "none"
    from dataclasses import replace

    return replace(phase, replay_mode=replay_mode, distill=distill)


def cmd_continual(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(cfg, args)
    out.mkdir(parents=True, exist_ok=True)
    model, extra = _load_model_checkpoint(args.checkpoint)
    _check_checkpoint_matches(cfg, extra)
    teacher_path = args.teacher or str(Path(args.checkpoint).with_name("teacher.ckpt"))
    teacher = _load_teacher_checkpoint(teacher_path)

    dataset = _prepare_dataset(cfg)
    folds = subject_kfold(
        dataset.filter_labels(_basic_label_names(cfg)), cfg.data.folds, substream(cfg.seed, "folds")
    )
    train_ds, test_ds = harness.split_for_fold(dataset, folds, extra["best_fold"])

    phase = _continual_phase_cfg(cfg, args)
    orderings = args.orderings or cfg.continual.orderings
    exclude = args.exclude_singular or cfg.continual.exclude_singular
    logs = harness.run_ordering_battery(
        model,
        teacher,
        train_ds,
        test_ds,
        phase,
        cfg.seed,
        orderings,
        exclude_singular=exclude,
        singular_labels=cfg.continual.singular_labels,
        jobs=args.jobs,
    )
    for log in logs:
        harness.write_run_jsonl(out / f"run_{log.ordering_id:02d}.jsonl", log)
    rows = metrics.battery_step_table(logs)
    metrics.write_step_csv(out / "battery_steps.csv", rows)
    summary = metrics.write_summary_json(
        out / "battery_summary.json", logs, include_step0=cfg.continual.include_step0
    )
    final = logs[0].steps[-1]
    labels = list(model.registry.labels) + logs[0].ordering
    metrics.write_confusion_csv(
        out / "confusion_run_00.csv",
        metrics.confusion_matrix(final.truth, final.pred, len(labels)),
        labels,
    )
    print(
        f"battery done: {len(logs)} orderings, overall accuracy "
        f"(new={summary['overall_accuracy_new']:.4f}, "
        f"all={summary['overall_accuracy_all']['with_step0']:.4f})"
    )
    return 0


def cmd_fewshot(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(cfg, args)
    out.mkdir(parents=True, exist_ok=True)
    model, extra = _load_model_checkpoint(args.checkpoint)
    _check_checkpoint_matches(cfg, extra)
    teacher_path = args.teacher or str(Path(args.checkpoint).with_name("teacher.ckpt"))
    teacher = _load_teacher_checkpoint(teacher_path)

    dataset = _prepare_dataset(cfg)
    folds = subject_kfold(
        dataset.filter_labels(_basic_label_names(cfg)), cfg.data.folds, substream(cfg.seed, "folds")
    )
    train_ds, test_ds = harness.split_for_fold(dataset, folds, extra["best_fold"])

    shots_list = args.shots or cfg.fewshot.shots
    for s in shots_list:
        if s < 1:
            raise ConfigError(f"shot counts must be >= 1, got {s}")
        if s not in (1, 3, 5):
            print(f"warning: unusual shot count {s}", file=sys.stderr)
    phase = cfg.fewshot_phase()
    if args.no_distill:
        from dataclasses import replace

        phase = replace(phase, distill=False)

    labels = harness.compound_ordering_pool(
        dataset.registry, cfg.continual.exclude_singular, cfg.continual.singular_labels
    )
    warnings = 0
    rows = []
    for shots in shots_list:
        for label in labels:
            try:
                r = harness.run_fewshot(
                    model, teacher, label, shots, train_ds, test_ds, phase, cfg.seed,
                    monitor=cfg.fewshot.monitor,
                )
            except ValueError as e:
                rows.append((label, shots, "", "", "", "skipped"))
                print(f"warning: skipped {label!r} at {shots} shots: {e}", file=sys.stderr)
                warnings += 1
                continue
            rows.append(
                (label, shots, f"{r.new_class_accuracy:.10f}", f"{r.all_class_accuracy:.10f}", r.train_steps, "ok")
            )
    with open(out / "fewshot.csv", "w", encoding="utf-8") as f:
        f.write("label,shots,new_class_accuracy,all_class_accuracy,steps,status\n")
        for row in rows:
            f.write(",".join(str(c) for c in row) + "\n")
    print(f"fewshot done: {len(rows)} experiments, {warnings} skipped -> {out / 'fewshot.csv'}")
    return 0


def cmd_gradcam(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(cfg, args)
    out.mkdir(parents=True, exist_ok=True)
    model, _ = _load_model_checkpoint(args.checkpoint)
    if args.class_name not in model.registry:
        print(
            f"error: unknown class {args.class_name!r}; registered classes: "
            f"{', '.join(model.registry.labels)}",
            file=sys.stderr,
        )
        return 2
    from PIL import Image

    from .data.preprocess import normalize

    size = model.arch.input_size
    with Image.open(args.image) as im:
        rgb = im.convert("RGB").resize((size, size), Image.BILINEAR)
    image = normalize(np.asarray(rgb))
    heat = gradcam(model, image, model.registry.index_of(args.class_name), args.target_layer)
    heat_path = out / (args.prefix + (".pgm" if args.pgm else ".png"))
    save_heatmap(heat_path, heat)
    overlay_path = out / (args.prefix + "_overlay.png")
    save_overlay(overlay_path, image, heat)
    print(f"wrote {heat_path} and {overlay_path}")
    return 0


def cmd_synth_gen(args) -> int:
    cfg = load_config(args.config)
    if cfg.data.source != "synthetic":
        raise ConfigError("synth-gen requires data.source = synthetic")
    out = _out_dir(cfg, args)
    dataset = generate(cfg.synth_spec(), cfg.seed)
    manifest = export_dataset(dataset, out)
    print(f"wrote {len(dataset)} samples and {manifest}")
    return 0


def cmd_eval(args) -> int:
    paths = []
    for entry in args.logs:
        p = Path(entry)
        if p.is_dir():
            paths.extend(sorted(p.glob("run_*.jsonl")))
        else:
            paths.append(p)
    if not paths:
        print("error: no log files found", file=sys.stderr)
        return 2
    logs = [harness.read_run_jsonl(p) for p in paths]
    out = Path(args.output_dir) if args.output_dir else Path(paths[0]).parent
    rows = metrics.battery_step_table(logs)
    metrics.write_step_csv(out / "eval_steps.csv", rows)
    summary = metrics.write_summary_json(out / "eval_summary.json", logs, include_step0=not args.no_step0)
    final = logs[0].steps[-1]
    k = int(max(final.truth.max(), final.pred.max())) + 1
    metrics.write_confusion_csv(
        out / "eval_confusion_run_00.csv", metrics.confusion_matrix(final.truth, final.pred, k)
    )
    print(
        f"eval done: overall accuracy (new={summary['overall_accuracy_new']:.4f}, "
        f"all={summary['overall_accuracy_all']['with_step0']:.4f})"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="compoundcl",
        description="Continual and few-shot learning of compound classes by "
        "distilling a basic-phase teacher with predictive-sorting memory replay.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-basic", help="train the basic-phase model with k-fold evaluation")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_train_basic)

    p = sub.add_parser("continual", help="run the class-incremental ordering battery")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--teacher", help="teacher checkpoint (default: teacher.ckpt beside the model)")
    p.add_argument("--output-dir")
    p.add_argument("--orderings", type=int)
    p.add_argument("--exclude-singular", action="store_true")
    p.add_argument("--no-distill", action="store_true")
    p.add_argument("--no-replay", action="store_true")
    p.add_argument("--replay-mode", choices=["psmr", "random", "none"])
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_continual)

    p = sub.add_parser("fewshot", help="few-shot experiments per compound class")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--teacher")
    p.add_argument("--output-dir")
    p.add_argument("--shots", type=int, nargs="+")
    p.add_argument("--no-distill", action="store_true")
    p.set_defaults(func=cmd_fewshot)

    p = sub.add_parser("gradcam", help="write a class activation heatmap for an image")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--class-name", required=True)
    p.add_argument("--target-layer")
    p.add_argument("--prefix", default="heatmap")
    p.add_argument("--pgm", action="store_true", help="write the heatmap as binary PGM")
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_gradcam)

    p = sub.add_parser("synth-gen", help="write the synthetic dataset as PNGs + manifest")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_synth_gen)

    p = sub.add_parser("eval", help="recompute metrics from run JSONL logs")
    p.add_argument("--logs", nargs="+", required=True, help="log files or directories")
    p.add_argument("--output-dir")
    p.add_argument("--no-step0", action="store_true")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, VersionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ManifestError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
