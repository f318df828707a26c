"""Fit the energy models on synthetic field flights and report held-out accuracy."""
import argparse

import numpy as np

from fleetscan.energy import check_feasibility, fit_models, synthetic_field, write_training_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()
    errs = []
    for seed in range(args.seeds):
        field = synthetic_field(seed=seed)
        models = fit_models(write_training_csv(field.train_rows))
        pred = models.predict(field.test_sim[:, 0], field.test_sim[:, 1])
        rel = np.abs(pred - field.test_energy) / field.test_energy
        errs.append(rel.mean())
        print(f"seed {seed:2d}: mean {rel.mean():6.2%}  max {rel.max():6.2%}  bandwidth "
              f"{models.consumption.bandwidth:.3f}")
    print(f"overall mean relative error {np.mean(errs):.2%}")

    # a 3-UAV mission of 700 m per UAV at 1.5 m/s against a 300 kJ pack
    for row in check_feasibility([650.0, 700.0, 720.0], 1.5, 300e3, models):
        print(row)


if __name__ == "__main__":
    main()
