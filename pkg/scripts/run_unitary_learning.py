"""Train DQNNs on a random unitary: cost trajectory plus held-out cost vs number of pairs."""
import argparse
import os

from rtlsguard import dqnn
from rtlsguard.metrics import write_rows_csv


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--arch", default="1,2,1")
    p.add_argument("--pairs", type=int, default=10)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--target-seed", type=int, default=7)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--pair-grid", default="1,2,4,8")
    p.add_argument("--out", default="out/unitary")
    a = p.parse_args()
    os.makedirs(a.out, exist_ok=True)
    widths = [int(v) for v in a.arch.split(",")]

    v = dqnn.random_target_unitary(widths[0], a.target_seed)
    data = dqnn.gen_unitary_dataset(v, a.pairs, a.seed)
    res = dqnn.train(dqnn.init_network(widths, a.seed), data, a.steps, a.eps, a.eta)
    write_rows_csv([{"step": i, "cost": c} for i, c in enumerate(res.costs)],
                   os.path.join(a.out, "cost_trajectory.csv"))
    print(f"arch={widths} final training cost {res.costs[-1]:.6f}")

    grid = [int(n) for n in a.pair_grid.split(",")]
    rows = dqnn.generalization_experiment(widths, a.target_seed, grid, steps=a.steps,
                                          eps=a.eps, eta=a.eta, seed=a.seed)
    write_rows_csv(rows, os.path.join(a.out, "generalization.csv"))
    for r in rows:
        print(f"pairs={r['n_pairs']:>2} held-out cost {r['cost']:.4f}")


if __name__ == "__main__":
    main()
