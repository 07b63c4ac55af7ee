"""Qubit-depth benchmark on the default synthetic dataset under the default privacy profile."""
import argparse
import os

from rtlsguard.cli import dataset_config, model_settings, privacy_profile
from rtlsguard.config import config_digest, derive_seed, load_config
from rtlsguard.experiments import prepare_dataset, qubit_depth_benchmark
from rtlsguard.metrics import write_reports_csv
from rtlsguard.telemetry import generate_dataset


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--config")
    p.add_argument("--set", action="append", default=[])
    p.add_argument("--out", default="out/table2")
    a = p.parse_args()
    cfg, overrides = load_config(a.config, a.set)
    seed = cfg["seed"]
    os.makedirs(a.out, exist_ok=True)
    x, y = generate_dataset(dataset_config(cfg), derive_seed(seed, "telemetry"))
    ds = prepare_dataset(x, y, profile=privacy_profile(cfg), seed=derive_seed(seed, "split"),
                         test_frac=cfg["split"]["test_frac"], label_mode=cfg["split"]["label_mode"])
    reports = qubit_depth_benchmark(ds, cfg["experiments"]["qubit_grid"], model_settings(cfg),
                                    seed, config_digest(cfg, overrides))
    write_reports_csv(reports, os.path.join(a.out, "table2.csv"))
    print(f"{'model':<16} {'qubits':>6} {'acc':>6} {'macroP':>7} {'macroR':>7} {'macroF1':>8} "
          f"{'attackF1':>9} {'time_s':>7}")
    for r in reports:
        print(f"{r.model:<16} {r.qubits:>6} {r.accuracy:>6.3f} {r.macro_precision:>7.3f} "
              f"{r.macro_recall:>7.3f} {r.macro_f1:>8.3f} {r.attack_f1:>9.3f} "
              f"{r.train_time_s:>7.1f}")


if __name__ == "__main__":
    main()
