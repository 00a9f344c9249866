"""Class-conditional generation on a 4-mode Gaussian ring, with and without
the auxiliary class loss.

Both runs share the generator/discriminator recipe and the latent layout
(one-hot class block plus noise).  The vacgan run feeds a classifier's
cross-entropy on generated samples back through the generator; the plain
gan run has no class loss at all, so whatever the one-hot block does to the
output is unconstrained.  The class-match rate makes the difference stark,
and the per-class histogram divergence climbs toward log 4 as the four
conditional distributions separate.

Equivalent CLI run:  auxgan train --config <json>  (see README for the schema)
"""

import csv
import tempfile
from pathlib import Path

from auxgan.harness import ExperimentConfig, run_experiment
from auxgan.schemes import SchemeConfig


def run(scheme, out_dir):
    config = ExperimentConfig(
        dataset="mixture2d",
        scheme=SchemeConfig(scheme=scheme, n_classes=4, noise_dim=8,
                            theta=0.2, zeta=0.8, batch_size=64,
                            steps_per_epoch=100, epochs=8),
        seed=7,
        output_dir=str(out_dir),
        eval_every=100,
    )
    return run_experiment(config, log=lambda *_: None)


def jsd_column(out_dir):
    with open(Path(out_dir) / "metrics.csv") as f:
        rows = list(csv.DictReader(f))
    return [(int(r["step"]), float(r["jsd_estimate"])) for r in rows]


def main():
    base = Path(tempfile.mkdtemp(prefix="mixture_demo_"))
    print(f"artifacts under {base}\n")

    results = {}
    for scheme in ("vacgan", "gan"):
        print(f"training {scheme} for 800 steps...")
        results[scheme] = run(scheme, base / scheme)

    print()
    print(f"{'scheme':>8} {'class match':>12}")
    for scheme, record in results.items():
        print(f"{scheme:>8} {record.class_match_rate:>12.4f}")
    print("\n(chance for 4 classes is 0.25; the class loss is the only difference)")

    print("\nper-class divergence along the vacgan run (log 4 = 1.3863):")
    for step, jsd in jsd_column(base / "vacgan"):
        bar = "#" * int(round(40 * jsd / 1.3863))
        print(f"step {step:>4}  jsd {jsd:.4f}  {bar}")

    print(f"\nconfusion matrix and checkpoint are in {base / 'vacgan'}")


if __name__ == "__main__":
    main()
