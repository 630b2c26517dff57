"""Train one model on a config file, evaluate it and print the headline numbers.

    python scripts/run_experiment.py configs/toy.cfg --out runs/toy
"""

import argparse
import sys

from warpspace import cli


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("config")
    parser.add_argument("--out", default="runs/experiment")
    parser.add_argument("--seed", type=int)
    args = parser.parse_args()
    seed = [] if args.seed is None else ["--seed", str(args.seed)]
    code = cli.main(["train", "--config", args.config, "--out", args.out, *seed])
    if code:
        return code
    code = cli.main(["eval", "--checkpoint", f"{args.out}/checkpoint.bin",
                     "--out", f"{args.out}/eval"])
    if code:
        return code
    for k in range(3):
        cli.main(["traverse", "--checkpoint", f"{args.out}/checkpoint.bin", "--k", str(k),
                  "--steps", "6", "--eps", "0.5", "--out", f"{args.out}/paths"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
