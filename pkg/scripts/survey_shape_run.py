"""Synthetic stand-in for the survey setup: 98 respondents x 10 factors, 10x10 hex SOM, 200 epochs.

Writes the dataset, an expert panel, an expert ranking and a config into OUT,
then runs the full pipeline.

    python scripts/survey_shape_run.py [OUT] [--seed N]
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from somdelphi.config import validate_config
from somdelphi.datasets import likert_survey
from somdelphi.pipeline import run_pipeline
from somdelphi.preprocess import save_dataset

FACTORS = [
    "Quality", "Price", "After sales service", "Representative quantity", "Leasing sales accessibility",
    "Foreign parts", "Technology", "Appearance", "Utility", "Fuel consumption",
]
EXPERT_RANK = [2, 1, 6, 10, 3, 4, 9, 7, 5, 8]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out", nargs="?", default="survey_shape_out")
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    ds = likert_survey(args.seed, n=98, dim=10)
    ds = type(ds)(tuple(FACTORS), ds.samples)
    save_dataset(ds, out / "survey.csv")

    # fifteen experts, scores on a 1..9 scale
    rng = np.random.default_rng(args.seed + 1)
    level = 9.5 - 0.6 * np.array(EXPERT_RANK)
    panel = np.clip(np.rint(level + rng.normal(0, 1.0, (15, 10))), 1, 9)
    with (out / "panel.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FACTORS)
        w.writerows(panel.astype(int).tolist())
    with (out / "expert_rank.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variable", "rank"])
        w.writerows(zip(FACTORS, EXPERT_RANK))

    (out / "run.cfg").write_text(
        "dataset = survey.csv\n"
        "panel = panel.csv\n"
        "expert_ranking = expert_rank.csv\n"
        "output_dir = results\n"
        f"seed = {args.seed}\n"
    )
    summary = run_pipeline(validate_config(out / "run.cfg"))
    print(f"selected by screening: {summary['selected_variables']}")
    print(f"MSE {summary['initial_mse']:.4f} -> {summary['final_mse']:.4f}, "
          f"topographic error {summary['topographic_error']:.3f}")
    print("study ranking:", ", ".join(summary["ranking"]))
    if "spearman" in summary:
        print(f"Spearman vs expert ranking: {summary['spearman']:.3f}")
    print(f"artifacts in {out / 'results'}")


if __name__ == "__main__":
    main()
