"""Command-line entry point: ``oocstance <command> ...``.

Configuration precedence is defaults < ``--config`` JSON file < flags. Reports
are line-oriented ``key: value`` text (valid YAML) ending with the effective
configuration as a JSON mapping.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import detector, stats
from .config import ABLATIONS, RunConfig, merge
from .data import DatasetError, SynthProfile, dataset_dims, ingest, synth_generate, write_dataset
from .detector import prepare
from .sen import FUSION_STRATEGIES

ZETA_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)
G_A_GRID = (0.0, 1.0, 2.0, 4.0, 8.0)
G_B_GRID = (1, 2)

METRIC_KEYS = (
    "accuracy_all",
    "accuracy_pristine",
    "accuracy_falsified",
    "accuracy_scenario_a",
    "accuracy_scenario_b",
    "accuracy_scenario_c",
    "accuracy_scenario_d",
)


class CliError(Exception):
    pass


def _fmt(v) -> str:
    if v is None:
        return "absent"
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def format_report(values: dict, config: RunConfig, keys=None) -> str:
    keys = list(values) if keys is None else keys
    lines = [f"{k}: {_fmt(values[k])}" for k in keys]
    lines.append("config: " + json.dumps(config.to_dict(), sort_keys=True))
    return "\n".join(lines) + "\n"


def metrics_report(metrics: dict, config: RunConfig, extra: dict | None = None) -> str:
    keys = list(METRIC_KEYS) + [k for k in metrics if k.startswith("count_")]
    values = {k: metrics[k] for k in keys}
    if extra:
        values.update(extra)
        keys += list(extra)
    return format_report(values, config, keys)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _echo_config(config: RunConfig) -> None:
    print("config: " + json.dumps(config.to_dict(), sort_keys=True), file=sys.stderr)


# config assembly ---------------------------------------------------------------


def _flag_overrides(args) -> dict:
    over: dict = {}

    def put(section, key, value):
        if value is not None:
            over.setdefault(section, {})[key] = value

    put("srs", "zeta_mode", getattr(args, "zeta_mode", None))
    put("srs", "zeta_scale", getattr(args, "zeta_scale", None))
    put("srs", "g_a", getattr(args, "g_a", None))
    put("srs", "g_b", getattr(args, "g_b", None))
    put("srs", "variant", getattr(args, "srs_variant", None))
    put("srs", "tau_cap", getattr(args, "tau_cap", None))
    for name in ("text_tau", "image_tau"):
        v = getattr(args, name, None)
        prefix = name.split("_")[0]
        put("clusters", f"{prefix}_tau_s", v)
        put("clusters", f"{prefix}_tau_r", v)
    put("train", "epochs", getattr(args, "epochs", None))
    put("train", "batch_size", getattr(args, "batch_size", None))
    put("train", "lr_min", getattr(args, "lr_min", None))
    put("train", "lr_max", getattr(args, "lr_max", None))
    put("train", "train_fraction", getattr(args, "train_fraction", None))
    put("train", "val_fraction", getattr(args, "val_fraction", None))
    put("dims", "d_visual", getattr(args, "d_visual", None))
    put("dims", "d_textual", getattr(args, "d_textual", None))
    put("dims", "hidden", getattr(args, "hidden", None))
    put("ablation", "fusion", getattr(args, "fusion", None))
    put("ablation", "textual_head", getattr(args, "stance", None))
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    return over


def build_config(args, instances=None) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = merge(cfg, json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}") from None
    cfg = merge(cfg, _flag_overrides(args))
    abl = cfg.ablation
    for name in getattr(args, "ablate", None) or []:
        abl = abl.with_ablation(name)
    cfg = dataclasses.replace(cfg, ablation=abl)
    if instances:
        d = dataset_dims(instances)
        cfg = dataclasses.replace(
            cfg,
            dims=dataclasses.replace(cfg.dims, text_in=d["text_in"], visual_in=d["visual_in"], aux_dim=d["aux_dim"]),
        )
    return cfg


def _load(path) -> list:
    if not Path(path).exists():
        raise CliError(f"no such dataset: {path}")
    return ingest(path)


# commands ----------------------------------------------------------------------


def cmd_synth(args) -> None:
    profile = SynthProfile(
        text_dim=args.text_dim,
        visual_dims=(args.visual_dim, args.visual_dim),
        aux_dim=args.aux_dim,
    )
    write_dataset(synth_generate(args.n, args.seed, profile), args.out)


def _jsonl(rows, out):
    text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)
    _emit(text, out)


def cmd_score(args) -> None:
    data = _load(args.dataset)
    cfg = build_config(args, data)
    _echo_config(cfg)
    rows = []
    for inst in data:
        p = prepare(inst, cfg)
        rows.append({"id": inst.id, "srs": p.text_srs, "entity_srs": p.entity_srs})
    _jsonl(rows, args.out)


def cmd_cluster(args) -> None:
    data = _load(args.dataset)
    cfg = build_config(args, data)
    _echo_config(cfg)
    rows = []
    for inst in data:
        p = prepare(inst, cfg)
        rows.append({"id": inst.id, **{k: a.to_dict() for k, a in p.assignments.items()}})
    _jsonl(rows, args.out)


def _split(args, data, cfg):
    if getattr(args, "val", None):
        return data, _load(args.val)
    return detector.split_validation(data, cfg.train.val_fraction, cfg.seed)


def cmd_train(args) -> None:
    data = _load(args.dataset)
    if not data:
        raise CliError("dataset is empty")
    cfg = build_config(args, data)
    tr, val = _split(args, data, cfg)
    log = (lambda s: print(s, file=sys.stderr)) if args.verbose else None
    model, history = detector.train(tr, cfg, val_set=val or None, log=log)
    detector.save_checkpoint(model, args.out, history)
    extra = {"train_size": history["train_size"], "best_epoch": history["best_epoch"]}
    if val:
        report = metrics_report(detector.evaluate(model, val), cfg, extra)
    else:
        report = format_report(extra, cfg)
    _emit(report, args.report)


def cmd_eval(args) -> None:
    if not Path(args.checkpoint).exists():
        raise CliError(f"no such checkpoint: {args.checkpoint}")
    model, _ = detector.load_checkpoint(args.checkpoint)
    data = _load(args.dataset)
    metrics = detector.evaluate(model, data)
    _emit(metrics_report(metrics, model.config), args.out)


def gridsearch_cells():
    """(table, settings) for every cell of the SRS hyperparameter grids."""
    cells = []
    for a in ZETA_GRID:
        cells.append(("zeta_proportion", {"zeta_mode": "proportion", "zeta_scale": a}))
    for b in ZETA_GRID:
        cells.append(("zeta_binarization", {"zeta_mode": "binarization", "zeta_scale": b}))
    for a in G_A_GRID:
        for b in G_B_GRID:
            cells.append(("g", {"zeta_mode": "binarization", "zeta_scale": 1.0, "g_a": a, "g_b": b}))
    return cells


def cmd_gridsearch(args) -> None:
    data = _load(args.dataset)
    cfg = build_config(args, data)
    tr, val = _split(args, data, cfg)
    if not val:
        raise CliError("grid search needs a validation set (--val or --val-fraction > 0)")
    lines = ["table\tzeta_mode\tzeta_scale\tg_a\tg_b\tval_accuracy"]
    for table, settings in gridsearch_cells():
        cell_cfg = dataclasses.replace(cfg, srs=dataclasses.replace(cfg.srs, **settings))
        model, _ = detector.train(tr, cell_cfg, val_set=val)
        acc = detector.evaluate(model, val)["accuracy_all"]
        s = cell_cfg.srs
        lines.append(f"{table}\t{s.zeta_mode}\t{s.zeta_scale:g}\t{s.g_a:g}\t{s.g_b}\t{acc:.6f}")
        if args.verbose:
            print(lines[-1], file=sys.stderr)
    lines.append("# config: " + json.dumps(cfg.to_dict(), sort_keys=True))
    _emit("\n".join(lines) + "\n", args.out)


def cmd_ztest(args) -> None:
    data = _load(args.dataset)
    cfg = build_config(args, data)
    res = stats.sample_srs_ztest(data, args.gamma, args.sample_size, cfg.seed, cfg.effective_srs())
    values = {
        "z": res.z,
        "p_value": res.p_value,
        "gamma": res.gamma,
        "mean_pristine": res.mean_pristine,
        "mean_falsified": res.mean_falsified,
        "n_pristine": res.n_pristine,
        "n_falsified": res.n_falsified,
    }
    _emit(format_report(values, cfg), args.out)


def cmd_heatmap(args) -> None:
    data = _load(args.dataset)
    cfg = build_config(args, data)
    _echo_config(cfg)
    stats.export_heatmap(stats.summarize_srs(data, cfg.effective_srs()), args.out)


# parser ------------------------------------------------------------------------


def _common(p, srs=True, clusters=False, model=False):
    p.add_argument("--config", help="JSON config file (nested by section)")
    p.add_argument("--seed", type=int)
    if srs:
        g = p.add_argument_group("SRS")
        g.add_argument("--zeta-mode", choices=("binarization", "proportion"))
        g.add_argument("--zeta-scale", type=float, help="beta (binarization) or alpha (proportion)")
        g.add_argument("--g-a", type=float)
        g.add_argument("--g-b", type=int)
        g.add_argument("--tau-cap", type=int)
        g.add_argument(
            "--srs-variant",
            choices=("full", "positive_only", "negative_fixed_one", "g_fixed_half", "zeta_fixed_two", "binary_nei"),
        )
    if clusters or model:
        g = p.add_argument_group("clustering")
        g.add_argument("--text-tau", type=float, help="textual SuC/ReC threshold")
        g.add_argument("--image-tau", type=float, help="visual SuC/ReC threshold")
    if model:
        g = p.add_argument_group("model and training")
        g.add_argument("--ablate", action="append", choices=sorted(ABLATIONS))
        g.add_argument("--fusion", choices=FUSION_STRATEGIES)
        g.add_argument("--stance", choices=("sen", "memory", "signed", "arith"))
        g.add_argument("--train-fraction", type=float)
        g.add_argument("--val-fraction", type=float)
        g.add_argument("--val", help="validation dataset (default: split off --val-fraction)")
        g.add_argument("--epochs", type=int)
        g.add_argument("--batch-size", type=int)
        g.add_argument("--lr-min", type=float)
        g.add_argument("--lr-max", type=float)
        g.add_argument("--d-visual", type=int)
        g.add_argument("--d-textual", type=int)
        g.add_argument("--hidden", type=int)
        g.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oocstance", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--text-dim", type=int, default=16)
    p.add_argument("--visual-dim", type=int, default=12)
    p.add_argument("--aux-dim", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("score", help="per-instance SRS vectors (JSON lines)")
    p.add_argument("dataset")
    p.add_argument("--out")
    _common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("cluster", help="per-instance SuC/ReC/CoC assignments (JSON lines)")
    p.add_argument("dataset")
    p.add_argument("--out")
    _common(p, clusters=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("train", help="train a detector and write a checkpoint")
    p.add_argument("dataset")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--report", help="metrics report path (default: stdout)")
    _common(p, model=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("checkpoint")
    p.add_argument("dataset")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gridsearch-srs", help="validation accuracy over the SRS grids")
    p.add_argument("dataset")
    p.add_argument("--out")
    _common(p, model=True)
    p.set_defaults(func=cmd_gridsearch)

    p = sub.add_parser("ztest", help="one-tail z-test on per-instance mean SRS")
    p.add_argument("dataset")
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--sample-size", type=int, default=500)
    p.add_argument("--out")
    _common(p)
    p.set_defaults(func=cmd_ztest)

    p = sub.add_parser("heatmap", help="export SRS summary table")
    p.add_argument("dataset")
    p.add_argument("--out", required=True)
    _common(p)
    p.set_defaults(func=cmd_heatmap)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (CliError, DatasetError, ValueError, OSError) as exc:
        print(f"oocstance {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
