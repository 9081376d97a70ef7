"""Command-line interface: one entry point chaining the whole pipeline.

Exit codes: 0 success, 1 usage error, 2 data/model error.  Verbosity is
controlled by the AGCKAN_LOG environment variable (DEBUG/INFO/WARNING).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import dataset as ds
from .attacks import AttackConfig, sample_attack_spec
from .errors import AgcKanError, InvalidArgumentError
from .evaluation import report, write_report_csv, write_report_json
from .features import Standardizer, export_features_csv, extract_feature_matrix
from .kan import build_network, forward, load_checkpoint, save_checkpoint, update_grid
from .pipeline import TOOL_VERSION, PipelineConfig, run_pipeline
from .simulator import DisturbanceEvent, SimConfig, export_trace_csv, simulate
from .symbolic import (SymbolicModel, eval_expression_batch, export_r2_csv,
                       polish, render, symbolify)
from .training import TrainConfig, finetune, prune, train

log = logging.getLogger("agckan")


class _UsageError(InvalidArgumentError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser():
    p = _Parser(prog="agckan", description="Interpretable FDIA detection for two-area AGC systems")
    p.add_argument("--version", action="version", version=TOOL_VERSION)
    sub = p.add_subparsers(dest="cmd", required=True)

    def add(name, help_, **flags):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--config", type=str, default=None,
                        help="simulation config JSON")
        sp.add_argument("--out", type=str, default=".", help="output directory")
        for flag, kw in flags.items():
            sp.add_argument(flag, **kw)
        return sp

    add("simulate", "run one simulation and export its trace CSV",
        **{"--attacked": dict(action="store_true", help="inject a sampled attack")})
    add("gen-dataset", "generate a labeled dataset file",
        **{"--n": dict(type=int, default=2000)})
    add("features", "extract the 18-feature matrix from a dataset",
        **{"--data": dict(type=str, required=True)})
    add("train", "train a KAN on a dataset",
        **{"--data": dict(type=str, required=True),
           "--arch": dict(type=str, default="18,5,1"),
           "--epochs": dict(type=int, default=50),
           "--lambda": dict(type=float, default=0.0, dest="l1")})
    add("prune", "remove low-importance edges from a trained model",
        **{"--data": dict(type=str, required=True),
           "--model": dict(type=str, required=True),
           "--threshold": dict(type=float, default=0.01)})
    add("finetune", "retrain the surviving parameters of a pruned model",
        **{"--data": dict(type=str, required=True),
           "--model": dict(type=str, required=True),
           "--epochs": dict(type=int, default=50)})
    add("symbolify", "extract the symbolic expression from a model",
        **{"--data": dict(type=str, required=True),
           "--model": dict(type=str, required=True)})
    add("eval", "evaluate model and expression on the test split",
        **{"--data": dict(type=str, required=True),
           "--model": dict(type=str, required=True),
           "--symbolic": dict(type=str, required=True)})
    add("pipeline", "run an experiment end to end",
        **{"--mode": dict(type=str, default="experiment1",
                          choices=["experiment1", "experiment2"]),
           "--n": dict(type=int, default=2000),
           "--arch": dict(type=str, default="18,5,1"),
           "--epochs": dict(type=int, default=50),
           "--lambda": dict(type=float, default=None, dest="l1"),
           "--threshold": dict(type=float, default=0.01)})
    add("plot", "SVG plot of clean-vs-attacked twin traces")
    return p


def _sim_config(args) -> SimConfig:
    cfg = SimConfig.from_file(args.config) if args.config else SimConfig()
    cfg.validate()
    return cfg


def _parse_arch(text):
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError as exc:
        raise _UsageError(f"bad --arch {text!r}: expected e.g. 18,5,1") from exc


def _load_split(path, seed, standardizer=None):
    """Dataset file -> standardized (train, val, test) feature splits."""
    dset = ds.read_dataset(path)
    x = extract_feature_matrix(dset.samples)
    y = np.array([s.label for s in dset.samples], dtype=np.int64)
    splits = ds.split(dset, (0.6, 0.2, 0.2), seed)
    std = standardizer or Standardizer.fit(x[splits.train])
    return std, tuple((std.transform(x[idx]), y[idx])
                      for idx in (splits.train, splits.val, splits.test))


def _out_path(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _cmd_simulate(args):
    cfg = _sim_config(args)
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 0xd15]))
    dist = [DisturbanceEvent(area=0, onset=float(rng.uniform(5.0, 20.0)),
                             magnitude=float(rng.uniform(0.01, 0.05)))]
    attack = sample_attack_spec(rng, AttackConfig()) if args.attacked else None
    sample = simulate(cfg, dist, attack, args.seed)
    path = _out_path(args, "trace.csv")
    export_trace_csv(sample, path)
    print(path)
    return 0


def _cmd_gen_dataset(args):
    cfg = _sim_config(args)
    dset = ds.generate_dataset(args.n, 0.5, cfg, AttackConfig(), args.seed)
    path = _out_path(args, "dataset.bin")
    ds.write_dataset(dset, path)
    print(path)
    return 0


def _cmd_features(args):
    dset = ds.read_dataset(args.data)
    x = extract_feature_matrix(dset.samples)
    y = [s.label for s in dset.samples]
    path = _out_path(args, "features.csv")
    export_features_csv(x, y, path)
    print(path)
    return 0


def _cmd_train(args):
    std, ((z_tr, y_tr), (z_va, y_va), _) = _load_split(args.data, args.seed)
    net = build_network(_parse_arch(args.arch), seed=args.seed)
    net.standardizer = std
    update_grid(net, z_tr)
    cfg = TrainConfig(epochs=args.epochs, l1=args.l1, seed=args.seed)
    net, rep = train(net, z_tr, y_tr, z_va, y_va, cfg)
    save_checkpoint(net, _out_path(args, "model.json"))
    rep.export_csv(_out_path(args, "train_log.csv"))
    print(_out_path(args, "model.json"))
    return 0


def _cmd_prune(args):
    net = load_checkpoint(args.model)
    _, ((z_tr, _), _, _) = _load_split(args.data, args.seed, net.standardizer)
    pruned = prune(net, z_tr, args.threshold)
    save_checkpoint(pruned, _out_path(args, "model_pruned.json"))
    print(_out_path(args, "model_pruned.json"))
    return 0


def _cmd_finetune(args):
    net = load_checkpoint(args.model)
    _, ((z_tr, y_tr), (z_va, y_va), _) = _load_split(args.data, args.seed, net.standardizer)
    cfg = TrainConfig(epochs=args.epochs, l1=0.0, seed=args.seed)
    net, rep = finetune(net, z_tr, y_tr, z_va, y_va, cfg)
    save_checkpoint(net, _out_path(args, "model_finetuned.json"))
    rep.export_csv(_out_path(args, "finetune_log.csv"))
    print(_out_path(args, "model_finetuned.json"))
    return 0


def _cmd_symbolify(args):
    net = load_checkpoint(args.model)
    _, ((z_tr, _), _, _) = _load_split(args.data, args.seed, net.standardizer)
    sym = symbolify(net, z_tr, seed=args.seed)
    sym = polish(sym, z_tr, forward(net, z_tr))
    sym.save(_out_path(args, "symbolic.json"))
    with open(_out_path(args, "formula.txt"), "w", encoding="utf-8") as fh:
        fh.write(render(sym) + "\n")
    export_r2_csv(sym, _out_path(args, "edge_r2.csv"))
    print(_out_path(args, "formula.txt"))
    return 0


def _cmd_eval(args):
    net = load_checkpoint(args.model)
    sym = SymbolicModel.load(args.symbolic)
    _, (_, _, (z_te, y_te)) = _load_split(args.data, args.seed, net.standardizer)
    kan_pred = (forward(net, z_te) > 0).astype(np.int64)
    sym_pred = (eval_expression_batch(sym, z_te) > 0).astype(np.int64)
    rep = report(y_te, kan_pred, sym_pred)
    write_report_json(rep, _out_path(args, "report.json"))
    write_report_csv(rep, _out_path(args, "report.csv"))
    print(_out_path(args, "report.json"))
    return 0


def _cmd_pipeline(args):
    cfg = PipelineConfig(mode=args.mode, n=args.n, seed=args.seed,
                         arch=_parse_arch(args.arch), epochs=args.epochs,
                         l1=args.l1, prune_threshold=args.threshold,
                         sim=_sim_config(args))
    result = run_pipeline(cfg, args.out)
    print(json.dumps({k: result[k] for k in
                      ("mode", "kan_test_accuracy", "kan_test_f1",
                       "symbolic_test_accuracy", "accuracy_gap",
                       "manifest_digest")}, sort_keys=True))
    return 0


def _svg_panels(path, panels, width=720, panel_h=160, pad=45):
    """Minimal deterministic SVG line-plot writer (no plotting dependency)."""
    height = panel_h * len(panels)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="monospace" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    for p_idx, (title, series) in enumerate(panels):
        y0 = p_idx * panel_h
        lo = min(float(np.min(v)) for _, _, v in series)
        hi = max(float(np.max(v)) for _, _, v in series)
        if hi - lo < 1e-12:
            hi = lo + 1e-12
        px0, px1 = pad, width - 10
        py0, py1 = y0 + panel_h - 25, y0 + 20
        out.append(f'<text x="{pad}" y="{y0 + 14}">{title}  [{lo:.4g}, {hi:.4g}]</text>')
        out.append(f'<line x1="{px0}" y1="{py0}" x2="{px1}" y2="{py0}" stroke="black"/>')
        out.append(f'<line x1="{px0}" y1="{py0}" x2="{px0}" y2="{py1}" stroke="black"/>')
        for name, color, vals in series:
            n = len(vals)
            pts = " ".join(
                f"{px0 + (px1 - px0) * i / (n - 1):.2f},"
                f"{py0 - (py0 - py1) * (float(v) - lo) / (hi - lo):.2f}"
                for i, v in enumerate(vals))
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{pts}"/>')
        for s_idx, (name, color, _) in enumerate(series):
            out.append(f'<text x="{width - 150}" y="{y0 + 14 + 12 * s_idx}" '
                       f'fill="{color}">{name}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")


def _cmd_plot(args):
    cfg = _sim_config(args)
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 0xd15]))
    dist = [DisturbanceEvent(area=0, onset=float(rng.uniform(5.0, 20.0)),
                             magnitude=float(rng.uniform(0.01, 0.05)))]
    attack = sample_attack_spec(rng, AttackConfig())
    clean = simulate(cfg, dist, None, args.seed)
    attacked = simulate(cfg, dist, attack, args.seed)
    titles = ("dP_tie (pu)", "dF1 (Hz)", "dF2 (Hz)")
    panels = [(titles[k], [("clean", "steelblue", clean.values[k]),
                           ("attacked", "crimson", attacked.values[k])])
              for k in range(3)]
    path = _out_path(args, "plot.svg")
    _svg_panels(path, panels)
    print(path)
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "gen-dataset": _cmd_gen_dataset,
    "features": _cmd_features,
    "train": _cmd_train,
    "prune": _cmd_prune,
    "finetune": _cmd_finetune,
    "symbolify": _cmd_symbolify,
    "eval": _cmd_eval,
    "pipeline": _cmd_pipeline,
    "plot": _cmd_plot,
}


def run(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("AGCKAN_LOG", "WARNING").upper())
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.cmd](args)
    except (_UsageError, InvalidArgumentError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except AgcKanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
