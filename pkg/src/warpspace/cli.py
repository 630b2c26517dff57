"""``warpspace`` command line: train, eval, traverse, baseline.

Exit codes: 0 ok, 2 bad config, 3 training aborted, 4 bad checkpoint,
5 degenerate traversal.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from .config import ExperimentConfig, dump_config, fingerprint, load_config
from .evaluation import (
    coord_baseline,
    correlation_report,
    phi_report,
    random_baseline,
    reconstructor_accuracy,
)
from .trainer import ConfigError, TrainingAborted, build_generator, train
from .warp import DegenerateGradient, nonlinearity_coefficient, traverse

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TRAINING = 3
EXIT_CHECKPOINT = 4
EXIT_TRAVERSAL = 5

log = logging.getLogger("warpspace")


class _Exit(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# helpers ----------------------------------------------------------------------


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(out: Path, name: str, data) -> Path:
    # names are generated here, never taken from user input
    target = out / name
    if target.resolve().parent != out.resolve():
        raise ValueError(f"refusing to write outside {out}: {name}")
    if isinstance(data, bytes):
        target.write_bytes(data)
    else:
        target.write_text(data)
    return target


def _metadata(cfg: ExperimentConfig, kind: str) -> dict:
    values = asdict(cfg)
    values.pop("output_dir")
    return {"kind": kind, "config": values, "fingerprint": fingerprint(values)}


def _load_checkpoint(path) -> ckpt.Checkpoint:
    try:
        return ckpt.load(path)
    except ckpt.ChecksumMismatch as err:
        raise _Exit(EXIT_CHECKPOINT, f"checkpoint {path}: {err}") from None
    except (ckpt.CheckpointError, OSError) as err:
        raise _Exit(EXIT_CHECKPOINT, f"checkpoint {path}: {err}") from None


def _config_from_checkpoint(state: ckpt.Checkpoint, overrides: dict) -> ExperimentConfig:
    values = dict(state.metadata.get("config", {}))
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = ExperimentConfig(**values)
    except TypeError as err:
        raise _Exit(EXIT_CHECKPOINT, f"checkpoint metadata unusable: {err}") from None
    problems = cfg.problems()
    if problems:
        raise _Exit(EXIT_CONFIG, str(ConfigError(problems)))
    return cfg


def _read_config(path, overrides: dict) -> ExperimentConfig:
    try:
        return load_config(path, {k: v for k, v in overrides.items() if v is not None})
    except ConfigError as err:
        raise _Exit(EXIT_CONFIG, str(err)) from None


def write_pgm(image: np.ndarray) -> str:
    """Plain (P2) graymap, 8-bit, ``round(255 * v)``."""
    pixels = np.clip(np.rint(255.0 * np.asarray(image)), 0, 255).astype(int)
    h, w = pixels.shape
    rows = "\n".join(" ".join(str(v) for v in row) for row in pixels)
    return f"P2\n{w} {h}\n255\n{rows}\n"


def _limit_threads():
    n = os.environ.get("WARPSPACE_THREADS")
    if not n:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=max(1, int(n)))


# subcommands ------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = _read_config(args.config, {"seed": args.seed})
    out = _out_dir(args.out or cfg.output_dir)
    try:
        net, recon, history = train(cfg.train_config())
    except TrainingAborted as err:
        raise _Exit(EXIT_TRAINING, f"training aborted: {err}") from None
    meta = _metadata(cfg, cfg.mode)
    _write(out, "checkpoint.bin", ckpt.to_bytes(net, recon, meta))
    _write(out, "training_log.csv", history.to_csv())
    _write(out, "config.txt", dump_config(cfg))
    _write(out, "config_fingerprint.txt", meta["fingerprint"] + "\n")
    last = history.rows[-1] if history.rows else None
    if last:
        print(f"trained {cfg.iterations} iterations: loss {last[1]:.4f} "
              f"accuracy {100 * last[2]:.1f}%  -> {out / 'checkpoint.bin'}")
    return EXIT_OK


def evaluate(state: ckpt.Checkpoint, cfg: ExperimentConfig) -> dict:
    gen = build_generator(cfg)
    seeds = np.random.SeedSequence(cfg.eval_seed).spawn(3)
    acc = reconstructor_accuracy(state.net, state.recon, gen, cfg.eval_samples,
                                 np.random.default_rng(seeds[0]), cfg.eps_min, cfg.eps_max)
    corr = correlation_report(state.net, gen, cfg.eval_codes, cfg.eval_steps, cfg.walk_eps,
                              np.random.default_rng(seeds[1]))
    phi = phi_report(state.net, gen, cfg.eval_codes, cfg.eval_steps, cfg.walk_eps,
                     np.random.default_rng(seeds[2]))
    return {"accuracy": acc, "correlation": corr, "phi": phi}


def cmd_eval(args) -> int:
    state = _load_checkpoint(args.checkpoint)
    overrides = {"eval_seed": args.seed, "eval_steps": args.steps, "eval_eps": args.eps}
    if args.config:
        cfg = _read_config(args.config, overrides)
    else:
        cfg = _config_from_checkpoint(state, overrides)
    out = _out_dir(args.out or cfg.output_dir)
    result = evaluate(state, cfg)
    corr, phi = result["correlation"], result["phi"]
    _write(out, "accuracy.csv", f"metric,value\naccuracy,{result['accuracy']!r}\n")
    _write(out, "correlation.csv", corr.matrix_csv("l1_normalized"))
    _write(out, "correlation_raw.csv", corr.matrix_csv("raw"))
    _write(out, "ranges.csv", corr.ranges_csv())
    _write(out, "assignment.csv", corr.assignment_csv())
    _write(out, "phi.csv", phi.to_csv())
    eval_values = {k: getattr(cfg, k) for k in
                   ("eval_codes", "eval_steps", "eval_samples", "eval_seed")}
    eval_values["walk_eps"] = cfg.walk_eps
    report = {
        "checkpoint_fingerprint": state.metadata.get("fingerprint"),
        "kind": state.metadata.get("kind"),
        "eval": eval_values,
        "eval_fingerprint": fingerprint(eval_values),
        "accuracy": result["accuracy"],
        "correlation": corr.to_dict(),
        "phi": phi.to_dict(),
    }
    _write(out, "report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"accuracy {result['accuracy']:.2f}%  diagonal dominance "
          f"{report['correlation']['diagonal_dominance']:.3f}  "
          f"phi {', '.join(f'{v:.4f}' for v in phi.sorted_values)}")
    return EXIT_OK


def _step_name(k: int, t: int) -> str:
    return f"path{k}_step{t:+d}.pgm" if t else f"path{k}_step0.pgm"


def cmd_traverse(args) -> int:
    state = _load_checkpoint(args.checkpoint)
    net = state.net
    if not 0 <= args.k < net.num_warpings:
        raise _Exit(EXIT_CONFIG, f"--k must lie in [0, {net.num_warpings}), got {args.k}")
    if args.steps < 0 or args.eps <= 0:
        raise _Exit(EXIT_CONFIG, "--steps must be >= 0 and --eps > 0")
    cfg = _config_from_checkpoint(state, {})
    gen = build_generator(cfg)
    out = _out_dir(args.out or cfg.output_dir)
    warp = net.warping(args.k)
    z0 = np.random.default_rng(args.seed).standard_normal(net.dim)

    sides, failure = {}, None
    for sign in (1, -1):
        try:
            sides[sign] = traverse(warp, z0, args.eps, args.steps, sign).points
        except DegenerateGradient as err:
            sides[sign] = err.partial.points
            failure = failure or (sign * (err.step + 1), err.norm)
    neg, pos = sides[-1], sides[1]
    points = np.concatenate([neg[::-1], pos[1:]], axis=0)
    steps = list(range(-(len(neg) - 1), len(pos)))
    images = gen.render(points)
    for t, img in zip(steps, images):
        _write(out, _step_name(args.k, t), write_pgm(img[0]))
    phi = nonlinearity_coefficient(points) if len(points) > 1 and failure is None else None
    meta = {
        "k": args.k,
        "seed": args.seed,
        "eps": args.eps,
        "steps": steps,
        "points": points.tolist(),
        "phi": phi,
        "complete": failure is None,
    }
    _write(out, f"path{args.k}_meta.json", json.dumps(meta, indent=2) + "\n")
    if failure:
        raise _Exit(EXIT_TRAVERSAL, f"degenerate gradient at step {failure[0]:+d} "
                                    f"(norm {failure[1]:.2e}); exported {len(points)} images")
    print(f"wrote {len(points)} images to {out}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    cfg = _read_config(args.config, {"seed": args.seed})
    out = _out_dir(args.out or cfg.output_dir)
    K, d = cfg.num_warpings, cfg.dim
    lin_cfg = ExperimentConfig(**{**asdict(cfg), "mode": "linear-baseline"})
    runs = [
        ("Random", cfg, random_baseline(K, d, cfg.seed)),
        ("Coord", cfg, coord_baseline(K, d) if K <= d else None),
        ("Linear", lin_cfg, None),
    ]
    rows = []
    try:
        for name, run_cfg, net in runs:
            if name == "Coord" and net is None:
                continue
            net, recon, _ = train(run_cfg.train_config(), net=net)
            state = ckpt.Checkpoint(net, recon, _metadata(run_cfg, name.lower()))
            _write(out, f"baseline_{name.lower()}.bin", ckpt.to_bytes(net, recon, state.metadata))
            rows.append((name, evaluate(state, run_cfg)["accuracy"]))
    except TrainingAborted as err:
        raise _Exit(EXIT_TRAINING, f"training aborted: {err}") from None
    if args.checkpoint:
        state = _load_checkpoint(args.checkpoint)
        rows.append(("Ours", evaluate(state, _config_from_checkpoint(state, {}))["accuracy"]))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "accuracy"])
    for name, acc in rows:
        w.writerow([name, repr(acc)])
    _write(out, "baseline_accuracy.csv", buf.getvalue())
    for name, acc in rows:
        print(f"{name:<8} {acc:6.2f}")
    return EXIT_OK


# entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="warpspace",
                                     description="Non-linear latent paths via RBF warpings.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train warpings and reconstructor")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="accuracy, correlation and phi reports")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("traverse", help="export a two-sided walk as PGM images")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_traverse)

    p = sub.add_parser("baseline", help="Random / Coord / Linear accuracy table")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", help="also evaluate this trained model as 'Ours'")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_baseline)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with _limit_threads():
            return args.func(args)
    except _Exit as err:
        print(f"error: {err}", file=sys.stderr)
        return err.code


if __name__ == "__main__":
    sys.exit(main())
