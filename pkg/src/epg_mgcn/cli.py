"""Command-line interface.

Subcommands: ``prepare`` (raw tables to canonical samples), ``train``,
``eval``, ``ablate``, ``what-if``, and ``render``. Exit codes: 0 success,
2 usage error, 3 data/format error, 4 numeric failure, 5 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .ablation import run_ablation
from .errors import DataError, DimensionError, NumericError, UsageError
from .metrics import evaluate
from .model import ModelConfig, ModelParams, load_params, save_params
from .render import render_scene
from .scene import (DatasetConfig, load_trajectory_table, read_canonical,
                    window_samples, write_canonical)
from .training import TrainConfig, checkpoint_load, train
from .whatif import what_if

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_IO = 5

GRAPH_CHOICES = ("distance", "visibility", "planning", "category")


def _load_any_params(path) -> ModelParams:
    """Accept either a bare parameter checkpoint or a trainer checkpoint."""
    with np.load(path, allow_pickle=False) as archive:
        trainer_style = any(k.startswith("param.") for k in archive.files)
    if trainer_style:
        params, _, _, _, _ = checkpoint_load(path)
        return params
    return load_params(path)


def _model_config_from_args(args, overrides=None) -> ModelConfig:
    cfg = dict(overrides or {})
    if args.model_config:
        with open(args.model_config, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        cfg.update(loaded.get("model", loaded))
    if getattr(args, "channels", None) is not None:
        cfg["channels"] = args.channels
    if getattr(args, "graphs", None):
        cfg["enabled_graphs"] = tuple(args.graphs.split(","))
    if getattr(args, "no_plan_fusion", False):
        cfg["planning_fusion_enabled"] = False
    if getattr(args, "shared_decoder", False):
        cfg["category_specific_decoders"] = False
    if getattr(args, "t_obs", None) is not None:
        cfg["t_obs_points"] = args.t_obs
    if getattr(args, "t_pred", None) is not None:
        cfg["t_pred"] = args.t_pred
    if getattr(args, "d_d", None) is not None:
        cfg["d_d"] = args.d_d
    if getattr(args, "beta", None) is not None:
        cfg["beta_degrees"] = args.beta
    return ModelConfig.from_dict(cfg)


def _train_config_from_args(args) -> TrainConfig:
    cfg = {}
    if args.model_config:
        with open(args.model_config, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        cfg.update(loaded.get("train", {}))
    for key, attr in (("batch_size", "batch_size"), ("initial_lr", "lr"),
                      ("decay_every_epochs", "decay_every"),
                      ("lr_decay_factor", "decay_factor"),
                      ("max_epochs", "epochs"), ("seed", "seed"),
                      ("precision", "precision")):
        value = getattr(args, attr, None)
        if value is not None:
            cfg[key] = value
    return TrainConfig(**cfg)


def _infer_shape_config(samples):
    first = samples[0]
    return {"t_obs_points": first.t_obs_points, "t_pred": first.t_pred}


def cmd_prepare(args) -> int:
    config = DatasetConfig(
        t_obs_points=args.t_obs, t_pred_frames=args.t_pred, d_d=args.d_d,
        beta_degrees=args.beta, neighborhood=args.neighborhood,
        frame_rate=args.frame_rate, node_scope=args.node_scope,
        window_stride=args.stride,
    )
    selection = "given_id" if args.ego_id is not None else "every_complete_agent"
    samples = []
    for path in sorted(args.input):
        tracks = load_trajectory_table(path, args.format)
        samples.extend(window_samples(tracks, config, ego_selection=selection,
                                      ego_id=args.ego_id))
    write_canonical(samples, args.output)
    print(f"prepare: wrote {len(samples)} samples to {args.output}")
    return 0


def cmd_train(args) -> int:
    samples = read_canonical(args.data)
    if not samples:
        raise DataError(f"no samples in {args.data}")
    model_config = _model_config_from_args(args, _infer_shape_config(samples))
    train_config = _train_config_from_args(args)
    out_dir = Path(args.out_dir)
    result = train(samples, model_config, train_config, run_dir=out_dir,
                   checkpoint_every=args.checkpoint_every,
                   progress=(None if args.quiet else _print_epoch))
    save_params(result.params, out_dir / "params.npz")
    final = result.record.epochs[-1].mean_loss if result.record.epochs else float("nan")
    print(f"train: {train_config.max_epochs} epochs, final loss {final:.6f}; "
          f"wrote {out_dir / 'checkpoint.npz'}")
    return 0


def _print_epoch(record):
    print(f"epoch {record.epoch}: loss {record.mean_loss:.6f} "
          f"lr {record.learning_rate:g} ({record.seconds:.2f}s)")


def cmd_eval(args) -> int:
    samples = read_canonical(args.data)
    if not samples:
        raise DataError(f"no samples in {args.data}")
    params = _load_any_params(args.checkpoint)
    report = evaluate(samples, params.config, params)
    print(report.format_table())
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
            fh.write("\n")
        print(f"eval: wrote {args.report}")
    return 0


def cmd_ablate(args) -> int:
    samples = read_canonical(args.data)
    if not samples:
        raise DataError(f"no samples in {args.data}")
    base = _model_config_from_args(args, _infer_shape_config(samples))
    train_config = _train_config_from_args(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = run_ablation(
        samples, base, train_config,
        progress=None if args.quiet else
        (lambda row: print(f"{row.label}: "
                           f"{row.wsade if row.wsade is not None else row.error}")))
    print(table.format_table())
    path = out_dir / "ablation.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(table.to_json_lines())
        fh.write("\n")
    print(f"ablate: wrote {path}")
    return 0


def cmd_what_if(args) -> int:
    samples = read_canonical(args.data)
    if not 0 <= args.index < len(samples):
        raise UsageError(f"sample index {args.index} out of range "
                         f"(file has {len(samples)})")
    sample = samples[args.index]
    params = _load_any_params(args.checkpoint)
    with open(args.plans, "r", encoding="utf-8") as fh:
        plans = {name: np.asarray(plan, dtype=np.float64)
                 for name, plan in json.load(fh).items()}
    base, results = what_if(sample, plans, params, params.config)
    print(f"what-if on sample {args.index}: base plan plus {len(results)} alternatives")
    for res in results:
        print(f"  {res.name}: max coord diff {res.max_coordinate_diff:.6f} m, "
              f"planning edges {int(res.planning_column.sum())} "
              f"(base {int(base.planning_column.sum())})")
    if args.report:
        payload = {
            "base": _whatif_dict(base),
            "alternatives": [_whatif_dict(r) for r in results],
        }
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)
            fh.write("\n")
        print(f"what-if: wrote {args.report}")
    return 0


def _whatif_dict(res):
    return {
        "name": res.name,
        "predictions": res.predictions.tolist(),
        "planning_column": res.planning_column.tolist(),
        "divergence": res.divergence.tolist(),
        "max_coordinate_diff": res.max_coordinate_diff,
    }


def cmd_render(args) -> int:
    samples = read_canonical(args.data)
    if not 0 <= args.index < len(samples):
        raise UsageError(f"sample index {args.index} out of range "
                         f"(file has {len(samples)})")
    sample = samples[args.index]
    predictions = None
    if args.checkpoint:
        from .model import predict

        params = _load_any_params(args.checkpoint)
        predictions = predict(sample, params.config, params)
    render_scene(sample, predictions, args.output)
    print(f"render: wrote {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epg-mgcn",
        description="Ego-planning guided multi-graph trajectory prediction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="raw trajectory tables -> canonical samples")
    p.add_argument("--format", required=True, choices=("apollo_like", "ngsim_like"))
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--t-obs", type=int, default=6, dest="t_obs")
    p.add_argument("--t-pred", type=int, default=6, dest="t_pred")
    p.add_argument("--d-d", type=float, default=10.0, dest="d_d")
    p.add_argument("--beta", type=float, default=20.0)
    p.add_argument("--neighborhood", choices=("radius", "highway_band"),
                   default="radius")
    p.add_argument("--frame-rate", type=float, default=2.0, dest="frame_rate")
    p.add_argument("--node-scope", type=float, default=3.0, dest="node_scope")
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--ego-id", type=int, default=None, dest="ego_id")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train a model on canonical samples")
    _add_model_args(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None, dest="batch_size")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--decay-every", type=int, default=None, dest="decay_every")
    p.add_argument("--decay-factor", type=float, default=None, dest="decay_factor")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--precision", choices=("double", "single"), default=None)
    p.add_argument("--checkpoint-every", type=int, default=None,
                   dest="checkpoint_every")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on canonical samples")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run the six-row ablation ladder")
    _add_model_args(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", required=True, dest="out_dir")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None, dest="batch_size")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--decay-every", type=int, default=None, dest="decay_every")
    p.add_argument("--decay-factor", type=float, default=None, dest="decay_factor")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--precision", choices=("double", "single"), default=None)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("what-if", help="predict under alternative ego plans")
    p.add_argument("--data", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--plans", required=True,
                   help="JSON file: {name: [[x, y], ...]}")
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_what_if)

    p = sub.add_parser("render", help="draw a sample (and predictions) as SVG")
    p.add_argument("--data", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_render)
    return parser


def _add_model_args(p):
    p.add_argument("--config", default=None, dest="model_config",
                   help="JSON run config with 'model' and 'train' sections")
    p.add_argument("--channels", type=int, default=None)
    p.add_argument("--graphs", default=None,
                   help="comma-separated subset of " + ",".join(GRAPH_CHOICES))
    p.add_argument("--no-plan-fusion", action="store_true", dest="no_plan_fusion")
    p.add_argument("--shared-decoder", action="store_true", dest="shared_decoder")
    p.add_argument("--t-obs", type=int, default=None, dest="t_obs")
    p.add_argument("--t-pred", type=int, default=None, dest="t_pred")
    p.add_argument("--d-d", type=float, default=None, dest="d_d")
    p.add_argument("--beta", type=float, default=None)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, DimensionError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
