"""Clean-subset cost of a DQNN trained on partly corrupted unitary pairs."""
import argparse
import os

from rtlsguard import dqnn
from rtlsguard.metrics import write_rows_csv


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--arch", default="1,2,1")
    p.add_argument("--total", type=int, default=10)
    p.add_argument("--corrupt-grid", default="0,2,5,8,10")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--target-seed", type=int, default=7)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", default="out/robustness")
    a = p.parse_args()
    os.makedirs(a.out, exist_ok=True)
    rows = dqnn.robustness_experiment([int(v) for v in a.arch.split(",")], a.target_seed,
                                      a.total, [int(v) for v in a.corrupt_grid.split(",")],
                                      steps=a.steps, seed=a.seed)
    write_rows_csv(rows, os.path.join(a.out, "robustness.csv"))
    for r in rows:
        cost = "skipped" if r["cost"] is None else f"{r['cost']:.4f}"
        print(f"corrupted={r['n_corrupt']:>2}/{a.total} clean-subset cost {cost}")


if __name__ == "__main__":
    main()
