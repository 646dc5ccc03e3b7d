"""Operator commands: aggregate, split, stats, train, eval, sweep, serve."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import datamodel, metrics, serve as serve_mod, trainer, videopipe
from .datamodel import (
    CATEGORIES,
    UsageError,
    ValidationError,
    aggregate_frame_labels,
    load_annotation_record,
    load_catalog,
    load_split,
    make_split,
    save_catalog,
    save_split,
)
from .heads import LossConfig
from .metrics import ScoredTrack, accuracy, confusion, roc_auc, save_roc_curve
from .model import ModelConfig, SegmentModel
from .trainer import Checkpoint, TrainConfig, build_examples, predict_video, train
from .videopipe import BackboneSpec, SegmentConfig


class CliError(SystemExit):
    def __init__(self, message):
        print(f"error: {message}", file=sys.stderr)
        super().__init__(1)


# ---------------------------------------------------------------------------
# Run configuration: JSON file with strictly validated sections.

CONFIG_SECTIONS = {
    "segment": {"frames_per_clip", "clips_per_segment"},
    "backbone": {"kind", "feature_root", "seed"},
    "model": {"hidden_channels", "layers", "trunk_dims"},
    "train": {"learning_rate", "weight_decay", "batch_size", "max_epochs",
              "seed", "checkpoint_every"},
    "loss": {"lambda1", "lambda2", "gamma"},
    "paths": {"catalog", "split", "out_dir"},
}


class RunConfig:
    def __init__(self, data: dict):
        for section, keys in data.items():
            if section not in CONFIG_SECTIONS:
                raise ValidationError(f"unknown config section {section!r}")
            unknown = set(keys) - CONFIG_SECTIONS[section]
            if unknown:
                raise ValidationError(
                    f"unknown config keys in [{section}]: {sorted(unknown)}"
                )
        self.data = data
        seg = data.get("segment", {})
        self.segment = SegmentConfig(
            frames_per_clip=seg.get("frames_per_clip", 16),
            clips_per_segment=seg.get("clips_per_segment", 5),
        )
        bb = data.get("backbone", {})
        self.backbone = BackboneSpec(
            kind=bb.get("kind", "import_rgb_flow"),
            feature_root=bb.get("feature_root"),
            seed=bb.get("seed", 0),
        )
        mdl = data.get("model", {})
        self.model = ModelConfig(
            input_channels=self.backbone.grid_channels,
            hidden_channels=mdl.get("hidden_channels", 128),
            layers=mdl.get("layers", 2),
            trunk_dims=tuple(mdl.get("trunk_dims", (1024, 512))),
            score_len=self.segment.segment_frames,
        )
        loss = data.get("loss", {})
        tr = data.get("train", {})
        self.train = TrainConfig(
            learning_rate=tr.get("learning_rate", 3e-4),
            weight_decay=tr.get("weight_decay", 5e-4),
            batch_size=tr.get("batch_size", 60),
            max_epochs=tr.get("max_epochs", 10),
            seed=tr.get("seed", 0),
            checkpoint_every=tr.get("checkpoint_every", 0),
            loss=LossConfig(
                lambda1=loss.get("lambda1", 1.0),
                lambda2=loss.get("lambda2", 10.0),
                gamma=loss.get("gamma", 0.0),
            ),
        )
        paths = data.get("paths", {})
        self.catalog_path = paths.get("catalog")
        self.split_path = paths.get("split")
        self.out_dir = Path(paths.get("out_dir", "."))

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            return cls(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from exc


def _load_inputs(config: RunConfig):
    if not config.catalog_path:
        raise ValidationError("config paths.catalog is required")
    catalog = load_catalog(config.catalog_path)
    if not config.split_path:
        raise ValidationError("config paths.split is required")
    split = load_split(config.split_path)
    return catalog, split


# ---------------------------------------------------------------------------
# Commands

def cmd_aggregate(args):
    annot_dir = Path(args.annotation_dir)
    files = sorted(annot_dir.glob("*.json")) if annot_dir.is_dir() else []
    if not files:
        raise CliError("no annotation records found")
    base = load_catalog(args.catalog)
    by_id = {e.video_id: e for e in base}
    records: dict[str, list] = {}
    for path in files:
        try:
            rec = load_annotation_record(path)
        except ValidationError as exc:
            raise CliError(f"malformed record file {path}: {exc}")
        records.setdefault(rec.video_id, []).append(rec)
    for vid, recs in sorted(records.items()):
        entry = by_id.get(vid)
        if entry is None:
            raise CliError(f"annotation for unknown video {vid!r}")
        try:
            entry.frame_labels = aggregate_frame_labels(recs, entry.frame_count)
        except (ValidationError, UsageError) as exc:
            raise CliError(f"video {vid!r}: {exc}")
        print(f"{vid}\tannotators={len(recs)}\t"
              f"abnormal_frames={int(entry.frame_labels.labels.sum())}")
    save_catalog(base, args.out)
    print(f"wrote catalog with {len(records)} aggregated label tracks to {args.out}")
    return 0


def cmd_split(args):
    catalog = load_catalog(args.catalog)
    try:
        split = make_split(catalog, args.mode,
                           (args.test_abnormal, args.test_normal), seed=args.seed)
    except ValidationError as exc:
        raise CliError(str(exc))
    save_split(split, args.out)
    by_id = {e.video_id: e for e in catalog}
    train_abn = sum(by_id[v].is_abnormal for v in split.train_ids)
    test_abn = sum(by_id[v].is_abnormal for v in split.test_ids)
    print(f"mode\ttrain\ttest\ttrain_abnormal\ttest_abnormal")
    print(f"{split.mode}\t{len(split.train_ids)}\t{len(split.test_ids)}"
          f"\t{train_abn}\t{test_abn}")
    return 0


def cmd_stats(args):
    catalog = load_catalog(args.catalog)
    stats = datamodel.compute_stats(catalog)
    print("category\tanomaly_ratio")
    for cat in CATEGORIES:
        ratio = stats.per_category_ratio[cat]
        print(f"{cat}\t{'absent' if ratio is None else f'{ratio:.4f}'}")
    counts = np.array(list(stats.frame_counts.values()))
    print(f"videos\t{len(catalog)}")
    print(f"frames_total\t{int(counts.sum())}")
    print(f"frames_mean\t{counts.mean():.1f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "per_video_ratio.tsv").open("w") as fh:
            for vid, ratio in sorted(stats.per_video_ratio.items()):
                fh.write(f"{vid}\t{ratio:.6f}\n")
        with (out / "frame_counts.tsv").open("w") as fh:
            for vid, n in sorted(stats.frame_counts.items()):
                fh.write(f"{vid}\t{n}\n")
    return 0


def cmd_train(args):
    config = RunConfig.from_file(args.config)
    catalog, split = _load_inputs(config)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    try:
        examples = build_examples(split, catalog, config.segment, config.backbone)
    except (ValidationError, UsageError) as exc:
        raise CliError(str(exc))
    model = SegmentModel.create(config.model, seed=config.train.seed)
    try:
        ckpt = train(config.train, examples, model,
                     log_path=config.out_dir / "train.log",
                     checkpoint_dir=config.out_dir)
    except ValidationError as exc:
        raise CliError(str(exc))
    ckpt_path = config.out_dir / "model.ckpt"
    ckpt.save(ckpt_path)
    print(f"trained {config.train.max_epochs} epochs on {len(examples)} segments; "
          f"checkpoint at {ckpt_path}")
    return 0


def _evaluate(model, catalog, split, seg_config, backbone):
    by_id = {e.video_id: e for e in catalog}
    tracks, preds, trues = [], [], []
    for vid in split.test_ids:
        entry = by_id[vid]
        try:
            scores, category = predict_video(entry, model, seg_config, backbone)
        except ValidationError as exc:
            raise CliError(f"video {vid!r}: {exc}")
        tracks.append(ScoredTrack(vid, scores, entry.frame_labels.labels))
        preds.append(category)
        trues.append(entry.category)
    return tracks, preds, trues


def cmd_eval(args):
    config = RunConfig.from_file(args.config)
    catalog, split = _load_inputs(config)
    try:
        ckpt = Checkpoint.load(args.checkpoint)
        model = ckpt.to_model()
    except ValidationError as exc:
        raise CliError(str(exc))
    if (ckpt.model_config.input_channels != config.model.input_channels
            or ckpt.model_config.score_len != config.model.score_len):
        raise CliError(
            "checkpoint/config mismatch: checkpoint expects "
            f"{ckpt.model_config.input_channels} input channels and "
            f"{ckpt.model_config.score_len} frame scores"
        )
    tracks, preds, trues = _evaluate(model, catalog, split,
                                     config.segment, config.backbone)
    try:
        roc = roc_auc(tracks)
    except metrics.UndefinedAUCError as exc:
        raise CliError(str(exc))
    acc = accuracy(preds, trues)
    cm = confusion(preds, trues)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    save_roc_curve(roc, config.out_dir / "roc.tsv")
    cm.save(config.out_dir / "confusion.tsv")
    print(f"frame_auc\t{100 * roc.auc:.2f}")
    print(f"accuracy\t{100 * acc:.1f}")
    return 0


SWEEP_PARAMETERS = ("K", "lambda2", "backbone")


def cmd_sweep(args):
    config = RunConfig.from_file(args.config)
    if args.parameter not in SWEEP_PARAMETERS:
        raise CliError(f"unknown sweep parameter {args.parameter!r}")
    catalog, split = _load_inputs(config)
    rows = []
    failures = 0
    for value in args.values:
        seg, backbone, model_cfg, train_cfg = (config.segment, config.backbone,
                                               config.model, config.train)
        try:
            if args.parameter == "K":
                seg = replace(seg, clips_per_segment=int(value))
                model_cfg = replace(model_cfg, score_len=seg.segment_frames)
            elif args.parameter == "lambda2":
                train_cfg = replace(
                    train_cfg, loss=replace(train_cfg.loss, lambda2=float(value))
                )
            else:
                backbone = replace(backbone, kind=value)
                model_cfg = replace(model_cfg,
                                    input_channels=backbone.grid_channels)
                print(f"# backbone {value}: grid channels {backbone.grid_channels}")
        except (ValueError, ValidationError) as exc:
            print(f"warning: skipping value {value!r}: {exc}", file=sys.stderr)
            failures += 1
            continue
        try:
            examples = build_examples(split, catalog, seg, backbone)
            model = SegmentModel.create(model_cfg, seed=train_cfg.seed)
            train(train_cfg, examples, model)
            tracks, _, _ = _evaluate(model, catalog, split, seg, backbone)
            auc = roc_auc(tracks).auc
        except (ValidationError, UsageError, metrics.UndefinedAUCError,
                CliError) as exc:
            print(f"warning: skipping value {value!r}: {exc}", file=sys.stderr)
            failures += 1
            continue
        rows.append((value, auc))
    if not rows:
        raise CliError("all sweep values failed")
    config.out_dir.mkdir(parents=True, exist_ok=True)
    out = config.out_dir / f"sweep_{args.parameter}.tsv"
    with out.open("w") as fh:
        fh.write(f"# {args.parameter}\tauc\n")
        for value, auc in rows:
            line = f"{value}\t{100 * auc:.2f}"
            fh.write(line + "\n")
            print(line)
    return 0


def cmd_serve(args):
    catalog = load_catalog(args.catalog)
    server = serve_mod.serve(catalog, args.frames_root, args.annotations,
                             port=args.port, host=args.host, ui_root=args.ui_root)
    print(f"annotation endpoint on http://{args.host}:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ctxvad",
        description="Video anomaly detection: training, evaluation, and the "
                    "annotation workflow.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("aggregate", help="aggregate annotator records into catalog labels")
    p.add_argument("annotation_dir")
    p.add_argument("--catalog", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_aggregate)

    p = sub.add_parser("split", help="generate a train/test split")
    p.add_argument("--catalog", required=True)
    p.add_argument("--mode", choices=datamodel.SPLIT_MODES, default="fully")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-abnormal", type=int, default=20)
    p.add_argument("--test-normal", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_split)

    p = sub.add_parser("stats", help="catalog statistics")
    p.add_argument("--catalog", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("train", help="train on the configured split")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("sweep", help="retrain/evaluate over parameter values")
    p.add_argument("--config", required=True)
    p.add_argument("--parameter", required=True, choices=SWEEP_PARAMETERS)
    p.add_argument("--values", nargs="+", required=True)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("serve", help="run the annotation-exchange endpoint")
    p.add_argument("--catalog", required=True)
    p.add_argument("--frames-root")
    p.add_argument("--annotations", required=True)
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui-root")
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError:
        raise
    except (ValidationError, UsageError) as exc:
        raise CliError(str(exc))


if __name__ == "__main__":
    sys.exit(main())
