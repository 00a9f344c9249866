"""Command-line front end.

Subcommands:

* ``train``              run an experiment from a JSON config
* ``verify-identities``  cross-entropy / divergence identity check, CSV out
* ``eval``               measure a saved generator against a probe or the mixture
* ``grid``               render a per-class sample grid from a checkpoint
"""

import argparse
import sys

import numpy as np

from .divergence import random_family, verify_identity
from .harness import (ExperimentConfig, Probe, class_match_rate, emit_sample_grid,
                      probe_match_rate, run_experiment)
from .data import GaussianMixtureSpec
from .schemes import TrainingDiverged, load_checkpoint, load_probe_checkpoint


def _cmd_train(args):
    config = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.out is not None:
        config.output_dir = args.out
    try:
        run_experiment(config, mnist_dir=args.mnist_dir)
    except TrainingDiverged as e:
        print(f"aborted: {e} (partial metrics kept in {config.output_dir})",
              file=sys.stderr)
        return 1
    return 0


def _cmd_verify_identities(args):
    rng = np.random.default_rng(args.seed)
    print("trial,cce,jsd,residual")
    worst = 0.0
    for trial in range(args.trials):
        family = random_family(args.n, args.support, rng)
        report = verify_identity(family)
        worst = max(worst, report.residual)
        print(f"{trial},{report.cce!r},{report.jsd!r},{report.residual!r}")
    print(f"worst residual: {worst:.3e}", file=sys.stderr)
    return 0


def _cmd_eval(args):
    trio, info = load_checkpoint(args.checkpoint)
    rng = np.random.default_rng([info["seed"], 2, info["step"], 9])
    if args.probe is not None:
        network, accuracy = load_probe_checkpoint(args.probe)
        probe = Probe(network=network, test_accuracy=accuracy)
        match, confusion = probe_match_rate(trio.generator, trio.partition, probe,
                                            args.samples_per_class, rng)
        print(f"probe test accuracy: {accuracy!r}")
    elif trio.data_dim == 2:
        spec = GaussianMixtureSpec.ring(n_classes=trio.config.n_classes)
        match, confusion = class_match_rate(trio.generator, trio.partition, spec,
                                            args.samples_per_class, rng)
    else:
        print("a probe checkpoint is required to evaluate image generators",
              file=sys.stderr)
        return 2
    print(f"match rate: {match!r}")
    print("confusion (rows = requested class):")
    print(confusion.to_csv(), end="")
    if args.out is not None:
        with open(args.out, "w") as f:
            f.write(confusion.to_csv())
    return 0


def _cmd_grid(args):
    trio, info = load_checkpoint(args.checkpoint)
    out = args.out or f"samples_step{info['step']:04d}.pgm"
    rng = np.random.default_rng([info["seed"], 2, info["step"], 2])
    emit_sample_grid(trio.generator, trio.partition, args.cols, out, rng)
    print(out)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="auxgan",
        description="conditional-generator training schemes and divergence checks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run an experiment from a JSON config")
    p.add_argument("--config", required=True, help="path to the JSON config")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=None, help="override the output directory")
    p.add_argument("--mnist-dir", default=None,
                   help="directory holding the four IDX files (else AUXGAN_MNIST_DIR, "
                        "else a synthetic digit corpus is generated)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("verify-identities",
                       help="check L* = N log N - N*JSD on random families")
    p.add_argument("--n", type=int, required=True, help="family size N")
    p.add_argument("--support", type=int, required=True, help="support size")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_verify_identities)

    p = sub.add_parser("eval", help="measure conditional fidelity of a checkpoint")
    p.add_argument("--checkpoint", required=True,
                   help="run directory or manifest.txt path")
    p.add_argument("--probe", default=None,
                   help="probe checkpoint (required for image generators)")
    p.add_argument("--samples-per-class", type=int, default=200)
    p.add_argument("--out", default=None, help="also write the confusion CSV here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("grid", help="render a per-class sample grid as PGM")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--cols", type=int, default=8, help="samples per class row")
    p.add_argument("--out", default=None, help="output PGM path")
    p.set_defaults(func=_cmd_grid)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
