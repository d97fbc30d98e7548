"""``ifsdf`` command line: train, reconstruct, eval, filter2d, replay.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np
import torch

from . import __version__
from .autodiff import TrainingError
from .config import RunConfig, load_config, read_key_values, write_key_values
from .filter import DegenerateGradientError, LOSS_COMBOS, combo_config
from .geom import InputError, NormalizationTransform, PointCloud, normalize
from .io import eprint, read_curve_csv, read_mesh, read_points, write_grid_csv, write_mesh
from .mesher import EmptyMeshWarning, GridSpec, marching_cubes
from .metrics import evaluate
from .net import CheckpointError, load_checkpoint, save_checkpoint
from .trainer import train

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
GRID_HALF = 0.55  # normalized clouds fit in [-0.5, 0.5]^d; leave a margin for the mesher


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        eprint(f"{self.prog}: error: {message}")
        raise SystemExit(EXIT_USAGE)


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _run_config(args) -> RunConfig:
    overrides = {"seed": args.seed, "iterations": args.iterations,
                 "deterministic": bool(args.deterministic)}
    threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    overrides["threads"] = 1 if args.deterministic else threads
    return load_config(args.config, **overrides)


def _manifest(command: str, cfg: RunConfig | None, inputs: dict, outputs: dict, extra=()):
    pairs = [("command", command), ("version", __version__)]
    for k, p in inputs.items():
        pairs += [(k, str(Path(p).resolve())), (f"{k}_sha256", sha256(p))]
    pairs += [(k, str(Path(p).resolve())) for k, p in outputs.items()]
    pairs += list(extra)
    if cfg is not None:
        pairs += [(f"config.{k}", v) for k, v in cfg.items()]
    return pairs


def _train_cloud(points: np.ndarray, cfg: RunConfig, combo: str | None = None):
    cloud, tf = normalize(PointCloud(points))
    fcfg = combo_config(combo, cfg.filter) if combo else cfg.filter
    fld, tlog = train(cloud, fcfg, cfg.train)
    return fld, tlog, tf


# --- commands --------------------------------------------------------------

def cmd_train(args) -> int:
    cfg = _run_config(args)
    points = read_points(args.input)
    if points.shape[1] != 3:
        raise InputError(f"{args.input}: expected 3D points, got {points.shape[1]} columns")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cloud, tf = normalize(PointCloud(points))
    extra = {"center": tf.center.tolist(), "scale": float(tf.scale), "version": __version__}
    try:
        fld, tlog = train(cloud, cfg.filter, cfg.train)
    except (TrainingError, DegenerateGradientError) as err:
        eprint(f"training failed: {err}")
        if getattr(err, "field", None) is not None:
            save_checkpoint(err.field, out / "last_good.ckpt",
                            extra={**extra, "failed_iteration": getattr(err, "iteration", -1)})
            err.log.write_csv(out / "train_log.csv")
        return EXIT_NUMERIC
    save_checkpoint(fld, out / "model.ckpt", extra=extra)
    tlog.write_csv(out / "train_log.csv")
    write_key_values(_manifest("train", cfg, {"input": args.input},
                               {"checkpoint": out / "model.ckpt", "log": out / "train_log.csv"},
                               [("seed", cfg.train.seed)]), out / "manifest.txt")
    print(f"checkpoint={out / 'model.ckpt'}")
    return EXIT_OK


def _transform_from(extra: dict, dim: int) -> NormalizationTransform:
    if "center" in extra and extra.get("center") is not None and "scale" in extra:
        return NormalizationTransform(np.asarray(extra["center"], dtype=np.float64), float(extra["scale"]))
    return NormalizationTransform(np.zeros(dim), 1.0)


def cmd_reconstruct(args) -> int:
    fld, extra = load_checkpoint(args.checkpoint)
    if fld.dim != 3:
        raise InputError("reconstruct needs a 3D checkpoint")
    torch.set_num_threads(1 if args.deterministic else (args.threads or os.cpu_count() or 1))
    tf = _transform_from(extra, 3)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", EmptyMeshWarning)
        mesh = marching_cubes(fld, GridSpec.cube(args.resolution, GRID_HALF), iso=args.iso)
    for w in caught:
        eprint(f"warning: {w.message}")
    mesh = mesh.transformed(tf.invert)
    write_mesh(mesh, args.output)
    write_key_values(_manifest("reconstruct", None, {"checkpoint": args.checkpoint}, {"output": args.output},
                               [("iso", args.iso), ("resolution", args.resolution), ("seed", args.seed or 0)]),
                     str(args.output) + ".manifest")
    print(f"vertices={len(mesh.vertices)} triangles={len(mesh.triangles)}")
    return EXIT_OK


def cmd_eval(args) -> int:
    pred = read_mesh(args.pred)
    if pred.is_empty:
        raise InputError(f"{args.pred}: prediction mesh is empty")
    gt_path = Path(args.gt)
    gt = None
    if gt_path.suffix.lower() in (".obj", ".ply"):
        try:
            gt = read_mesh(gt_path)
        except InputError:
            gt = None
        if gt is not None and gt.is_empty:
            gt = None  # a PLY point cloud without faces
    if gt is None:
        gt = read_points(gt_path)
    rep = evaluate(pred, gt, n_samples=args.samples, fscore_threshold=args.fscore_threshold,
                   ecd=args.ecd, seed=args.seed)
    text = rep.to_text()
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    if args.csv:
        new = not Path(args.csv).exists()
        with open(args.csv, "a") as fh:
            if new:
                fh.write(rep.csv_header() + "\n")
            fh.write(rep.csv_row() + "\n")
    return EXIT_OK


def _norm_combo(name: str) -> str:
    key = name.strip().lower().replace(" ", "")
    if key in ("l_pull-only", "pull"):
        key = "l_pull"
    if key not in LOSS_COMBOS:
        raise InputError(f"unknown loss combination {name!r}; choose from {', '.join(LOSS_COMBOS)}")
    return key


def cmd_filter2d(args) -> int:
    combo = _norm_combo(args.combo)
    cfg = _run_config(args)
    curve = read_curve_csv(args.curve)
    try:
        fld, tlog, tf = _train_cloud(curve, cfg, combo)
    except (TrainingError, DegenerateGradientError) as err:
        eprint(f"training failed: {err}")
        return EXIT_NUMERIC
    axis = np.linspace(-GRID_HALF, GRID_HALF, args.resolution)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    values = fld.values(np.stack([xx.ravel(), yy.ravel()], axis=1)).reshape(xx.shape)
    # back to the curve's own units: positions via the inverse transform, distances by the scale
    xs = axis * tf.scale + tf.center[0]
    ys = axis * tf.scale + tf.center[1]
    write_grid_csv(xs, ys, values * tf.scale, args.output)
    write_key_values(_manifest("filter2d", cfg, {"curve": args.curve}, {"output": args.output},
                               [("combo", combo), ("resolution", args.resolution), ("seed", cfg.train.seed)]),
                     str(args.output) + ".manifest")
    print(f"grid={args.output} final_total={tlog.totals()[-1] if len(tlog) else float('nan')}")
    return EXIT_OK


def cmd_replay(args) -> int:
    """Re-run the command recorded in a manifest with its resolved config."""
    m = read_key_values(args.manifest)
    command = m.get("command")
    cfg_lines = [f"{k[len('config.'):]}={v}" for k, v in m.items() if k.startswith("config.")]
    cfg_path = None
    if cfg_lines:
        cfg_path = Path(args.out if command == "train" else Path(args.out).parent) / "replay_config.txt"
        cfg_path.parent.mkdir(parents=True, exist_ok=True)
        cfg_path.write_text("\n".join(cfg_lines) + "\n")
    for key in ("input", "curve", "checkpoint"):
        if key in m and m.get(f"{key}_sha256") and Path(m[key]).is_file() and sha256(m[key]) != m[f"{key}_sha256"]:
            raise InputError(f"{m[key]}: contents changed since the manifest was written")
    det = m.get("config.deterministic", "true") == "true"
    if command == "train":
        argv = ["train", m["input"], "--out", args.out, "--config", str(cfg_path)]
    elif command == "reconstruct":
        argv = ["reconstruct", m["checkpoint"], args.out, "--iso", m["iso"], "--resolution", m["resolution"]]
    elif command == "filter2d":
        argv = ["filter2d", m["curve"], m["combo"], args.out, "--config", str(cfg_path),
                "--resolution", m["resolution"]]
    else:
        raise InputError(f"{args.manifest}: cannot replay command {command!r}")
    if det:
        argv.append("--deterministic")
    return main(argv)


# --- parser ----------------------------------------------------------------

def _common(p, training: bool = True):
    p.add_argument("--seed", type=int, default=None, help="random seed (overrides the config file)")
    p.add_argument("--deterministic", action="store_true",
                   help="single thread, fixed seeds: byte-identical outputs across runs")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    if training:
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--iterations", type=int, default=None, help="override the iteration count")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ifsdf", description="Neural SDF reconstruction with implicit bilateral filtering.")
    p.add_argument("--version", action="version", version=f"ifsdf {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="fit a field to a point cloud (.xyz or .ply)")
    t.add_argument("input", help="input points, .xyz/.txt or .ply")
    t.add_argument("--out", required=True, help="output directory (checkpoint, log, manifest)")
    _common(t)

    r = sub.add_parser("reconstruct", help="extract an iso-surface from a checkpoint")
    r.add_argument("checkpoint")
    r.add_argument("output", help="mesh path, .obj or .ply")
    r.add_argument("--iso", type=float, default=0.0, help="level to extract, in normalized units (default 0)")
    r.add_argument("--resolution", type=int, default=256, help="grid nodes per axis (default 256)")
    _common(r, training=False)

    e = sub.add_parser("eval", help="score a mesh against a reference mesh or point set")
    e.add_argument("pred", help="predicted mesh, .obj or .ply")
    e.add_argument("gt", help="reference mesh (.obj/.ply) or points (.xyz/.ply)")
    e.add_argument("--samples", type=int, default=100_000, help="surface samples per mesh (default 1e5)")
    e.add_argument("--fscore-threshold", type=float, default=0.01, help="F-score distance threshold")
    e.add_argument("--ecd", action="store_true", help="also report the edge Chamfer distance")
    e.add_argument("--out", default=None, help="also write the key=value report here")
    e.add_argument("--csv", default=None, help="append a CSV row of the report to this file")
    e.add_argument("--seed", type=int, default=0, help="sampling seed")

    f = sub.add_parser("filter2d", help="train on a 2D curve and write the field on a grid")
    f.add_argument("curve", help="curve samples, CSV with x,y rows")
    f.add_argument("combo", help=f"loss combination: {', '.join(LOSS_COMBOS)}")
    f.add_argument("output", help="grid CSV (x,y,f rows)")
    f.add_argument("--resolution", type=int, default=128, help="grid nodes per axis (default 128)")
    _common(f)

    rp = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    rp.add_argument("manifest")
    rp.add_argument("out", help="output directory (train) or output file (reconstruct, filter2d)")
    return p


COMMANDS = {"train": cmd_train, "reconstruct": cmd_reconstruct, "eval": cmd_eval,
            "filter2d": cmd_filter2d, "replay": cmd_replay}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (InputError, CheckpointError) as err:
        eprint(f"error: {err}")
        return EXIT_USAGE
    except (TrainingError, DegenerateGradientError, FloatingPointError) as err:
        eprint(f"numerical failure: {err}")
        return EXIT_NUMERIC


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
