"""Accuracy and disentanglement table: Random, Coord, Linear and the non-linear model.

Trains every row with the same budget and prints held-out accuracy, the
diagonal-dominance margin and the largest mean phi.

    python scripts/baseline_table.py --iterations 10000
"""

import argparse
import time

import numpy as np

from warpspace.config import ExperimentConfig
from warpspace.evaluation import (
    coord_baseline,
    correlation_report,
    diagonal_dominance,
    phi_report,
    random_baseline,
    reconstructor_accuracy,
)
from warpspace.trainer import build_generator, train


def row(name, cfg, net=None):
    t = time.perf_counter()
    net, recon, _ = train(cfg.train_config(), net=net)
    gen = build_generator(cfg)
    seeds = np.random.SeedSequence(cfg.eval_seed).spawn(3)
    acc = reconstructor_accuracy(net, recon, gen, cfg.eval_samples,
                                 np.random.default_rng(seeds[0]), cfg.eps_min, cfg.eps_max)
    corr = correlation_report(net, gen, cfg.eval_codes, cfg.eval_steps, cfg.walk_eps,
                              np.random.default_rng(seeds[1]))
    phi = phi_report(net, None, cfg.eval_codes, cfg.eval_steps, cfg.walk_eps,
                     np.random.default_rng(seeds[2]))
    print(f"{name:<10} {acc:7.2f} {diagonal_dominance(corr):9.4f} "
          f"{max(phi.per_warping):8.4f} {time.perf_counter() - t:6.0f}s", flush=True)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--iterations", type=int, default=10000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    cfg = ExperimentConfig(iterations=args.iterations, seed=args.seed)
    K, d = cfg.num_warpings, cfg.dim
    print(f"{'method':<10} {'acc %':>7} {'dominance':>9} {'max phi':>8}")
    row("Random", cfg, random_baseline(K, d, cfg.seed))
    row("Coord", cfg, coord_baseline(K, d))
    row("Linear", ExperimentConfig(iterations=args.iterations, seed=args.seed,
                                   mode="linear-baseline"))
    row("Ours", cfg)


if __name__ == "__main__":
    main()
