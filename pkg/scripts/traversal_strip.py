"""Render a walk along one warping as a single PNG strip (needs matplotlib).

    python scripts/traversal_strip.py runs/toy/checkpoint.bin --k 0 --out strip.png
"""

import argparse

import numpy as np

from warpspace import checkpoint as ckpt
from warpspace.config import ExperimentConfig
from warpspace.evaluation import walk_and_trace
from warpspace.trainer import build_generator


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("checkpoint")
    parser.add_argument("--k", type=int, default=0)
    parser.add_argument("--steps", type=int, default=6)
    parser.add_argument("--eps", type=float, default=0.5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="strip.png")
    args = parser.parse_args()

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    state = ckpt.load(args.checkpoint)
    cfg = ExperimentConfig(**state.metadata.get("config", {}))
    gen = build_generator(cfg)
    z0 = np.random.default_rng(args.seed).standard_normal(state.net.dim)
    path, trace = walk_and_trace(state.net, gen, args.k, z0, args.eps, args.steps)
    images = gen.render(path.points)[:, 0]
    fig, axes = plt.subplots(1, len(images), figsize=(1.2 * len(images), 1.6))
    for ax, img, t in zip(axes, images, trace.steps):
        ax.imshow(img, cmap="gray", vmin=0, vmax=1)
        ax.set_title(f"{t:+d}", fontsize=8)
        ax.axis("off")
    fig.savefig(args.out, dpi=120, bbox_inches="tight")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
