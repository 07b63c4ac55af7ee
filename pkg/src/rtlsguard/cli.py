"""Command-line entry point: ``rtlsguard <subcommand> [--config FILE] [--set section.key=value]``.

Every output file lands under the configured output directory (overridable with
the ``RTLSGUARD_OUTPUT_DIR`` environment variable) and carries the run seed and
config digest, either inline or in a ``.meta.json`` sidecar.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric invariant
violation. Failures print exactly one line to stderr:
``error kind=<kind> ... message="..."``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict


from . import dqnn
from .config import ConfigError, config_digest, derive_seed, load_config, public_config
from .experiments import (
    Detector,
    ModelSettings,
    activation_sweep,
    dropout_sweep,
    prepare_dataset,
    privacy_tradeoff,
    qubit_depth_benchmark,
)
from .fusion import HybridConfig
from .metrics import build_report, confusion, write_json, write_reports_csv, write_rows_csv
from .mlp import TrainConfig
from .privacy import PrivacyProfile, apply_profile, sanitize_samples
from .qlinalg import InvariantError
from .telemetry import (
    FEATURE_NAMES,
    DataError,
    DatasetConfig,
    FeatureConfig,
    NoiseConfig,
    Run,
    SimConfig,
    features_to_arrays,
    featurize_runs,
    generate_runs,
    load_features_csv,
    load_samples_csv,
    scenario_from_dict,
    scenario_to_dict,
    write_features_csv,
    write_samples_csv,
)

OUTPUT_ENV = "RTLSGUARD_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INVARIANT = 0, 2, 3, 4
TIME_COLUMNS = ("train_time_s",)


class Context:
    """Resolved config, digest, seed and output directory for one invocation."""

    def __init__(self, args):
        self.cfg, self.overrides = load_config(args.config, args.set or ())
        self.seed = int(self.cfg["seed"])
        self.digest = config_digest(self.cfg, self.overrides)
        self.out = os.path.abspath(os.environ.get(OUTPUT_ENV) or self.cfg["output_dir"])
        os.makedirs(self.out, exist_ok=True)

    def path(self, name):
        """Output path that is guaranteed to stay inside the output directory."""
        p = os.path.abspath(os.path.join(self.out, name))
        if os.path.commonpath([p, self.out]) != self.out:
            raise ConfigError(f"output name {name!r} escapes the output directory", "", "output_dir")
        os.makedirs(os.path.dirname(p), exist_ok=True)
        return p

    def input(self, name):
        """Inputs are looked up as given, then relative to the output directory."""
        for p in (name, os.path.join(self.out, name)):
            if os.path.exists(p):
                return p
        raise DataError(f"missing input file {name!r}")

    def meta(self, path, **extra):
        doc = {"seed": self.seed, "config_digest": self.digest, "overrides": self.overrides}
        doc.update(extra)
        write_json(doc, path + ".meta.json")


def _section(section, cls, d, **extra):
    try:
        return cls(**d, **extra)
    except TypeError as exc:
        raise ConfigError(f"bad {section} section: {exc}", section) from None
    except ValueError as exc:
        raise ConfigError(f"{section}: {exc}", section) from None


def dataset_config(cfg):
    t = dict(cfg["telemetry"])
    noise = _section("telemetry.noise", NoiseConfig, t.pop("noise"))
    sim = _section("telemetry", SimConfig, {k: t.pop(k) for k in
                   ("duration_s", "rate_hz", "speed", "dwell_s", "path_loss_exp", "rssi_c")},
                   noise=noise)
    feats = _section("telemetry", FeatureConfig, {"path_loss_exp": sim.path_loss_exp,
                     "rssi_c": sim.rssi_c, "distance_mode": t.pop("distance_mode")})
    t["intensity_range"] = tuple(t["intensity_range"])
    return _section("telemetry", DatasetConfig, t, sim=sim, features=feats)


def privacy_profile(cfg):
    try:
        return PrivacyProfile.from_dict(cfg["privacy"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"privacy: {exc}", "privacy") from None


def model_settings(cfg):
    m, tr = cfg["model"], cfg["training"]

    def tc(name):
        return _section(f"training.{name}", TrainConfig, tr[name])

    hybrid = _section("training", HybridConfig, {"mlp": tc("mlp"), "vqc": tc("vqc"),
                      "fusion": tc("fusion"), "finetune": tc("finetune"),
                      "fusion_mode": m["fusion_mode"]})
    return ModelSettings(activation=m["activation"], dropout=float(m["dropout"]),
                         vqc_depth=int(m["vqc_depth"]), encoding=m["encoding"],
                         entanglement=m["entanglement"], fusion_mode=m["fusion_mode"],
                         mlp=hybrid.mlp, shallow_epoch_factor=float(tr["shallow_epoch_factor"]),
                         hybrid=hybrid)


def _features(ctx, name):
    x, y, cols = load_features_csv(ctx.input(name))
    return x, y, cols


def _prepared(ctx, args, profile=None):
    """Load a feature CSV and split it; an already-sanitized CSV is used as is."""
    x, y, cols = _features(ctx, args.features)
    if profile is None:
        profile = privacy_profile(ctx.cfg) if not args.raw else PrivacyProfile()
    if cols != FEATURE_NAMES:
        profile = PrivacyProfile()
    s = ctx.cfg["split"]
    return prepare_dataset(x, y, cols, profile, derive_seed(ctx.seed, "split"),
                           float(s["test_frac"]), s["label_mode"])


def cmd_generate(ctx, args):
    runs = generate_runs(dataset_config(ctx.cfg), derive_seed(ctx.seed, "telemetry"))
    manifest = []
    for run in runs:
        name = f"runs/run_{run.run_id:03d}.csv"
        write_samples_csv(run.samples, ctx.path(name))
        manifest.append({"run_id": run.run_id, "file": name, "trajectory": run.trajectory,
                         "seed": run.seed, "scenario": scenario_to_dict(run.scenario)})
    path = ctx.path("runs.json")
    write_json({"seed": ctx.seed, "config_digest": ctx.digest, "runs": manifest}, path)
    print(f"wrote {len(runs)} runs to {os.path.dirname(ctx.path(manifest[0]['file']))}")


def cmd_featurize(ctx, args):
    with open(ctx.input(args.runs), encoding="utf-8") as fh:
        doc = json.load(fh)
    base = os.path.dirname(os.path.abspath(ctx.input(args.runs)))
    runs = []
    for entry in doc["runs"]:
        samples = load_samples_csv(os.path.join(base, entry["file"]))
        runs.append(Run(entry["run_id"], entry["trajectory"],
                        scenario_from_dict(entry["scenario"]), entry["seed"], samples))
    x, y = features_to_arrays(featurize_runs(runs, dataset_config(ctx.cfg)))
    path = ctx.path(args.output)
    write_features_csv(x, y, path)
    ctx.meta(path, n_windows=len(y))
    print(f"wrote {len(y)} windows to {path}")


def cmd_sanitize(ctx, args):
    profile = privacy_profile(ctx.cfg)
    if args.samples:
        samples = load_samples_csv(ctx.input(args.samples))
        path = ctx.path(args.output or "sanitized_samples.csv")
        write_samples_csv(sanitize_samples(samples, profile), path)
    else:
        x, y, cols = _features(ctx, args.features)
        values, kept = apply_profile(x, profile, cols)
        path = ctx.path(args.output or "features_sanitized.csv")
        write_features_csv(values, y, path, kept)
    ctx.meta(path, privacy_profile=profile.to_dict(redact=True))
    print(f"wrote {path}")


def _detector(ctx, args, ds):
    m = ctx.cfg["model"]
    kind = args.model or m["kind"]
    qubits = args.qubits if args.qubits is not None else int(m["qubits"])
    try:
        return Detector(kind, ds.x_train.shape[1], ds.n_classes, qubits, model_settings(ctx.cfg),
                        ctx.seed)
    except ValueError as exc:
        raise ConfigError(str(exc), "model", "kind") from None


def cmd_train(ctx, args):
    ds = _prepared(ctx, args)
    det = _detector(ctx, args, ds)
    curves = det.fit(ds.x_train, ds.y_train)
    model_dir = ctx.path(args.model_dir)
    det.save(model_dir, {"seed": ctx.seed, "config_digest": ctx.digest, "kind": det.kind,
                         "qubits": det.qubits, "columns": list(ds.columns)})
    write_json({"seed": ctx.seed, "config_digest": ctx.digest, "kind": det.kind,
                "qubits": det.qubits, "columns": list(ds.columns), "curves": curves},
               os.path.join(model_dir, "training.json"))
    print(f"saved {det.name} to {model_dir}")


def cmd_evaluate(ctx, args):
    ds = _prepared(ctx, args)
    if ds.x_test is None:
        raise DataError("dataset has no test split")
    det = _detector(ctx, args, ds)
    det.load(ctx.input(args.model_dir))
    cm = confusion(ds.y_test, det.predict(ds.x_test), ds.n_classes)
    report = build_report(cm, args.condition, det.name, det.qubits, 0.0, ctx.seed, ctx.digest,
                          ds.attack_classes)
    path = ctx.path(args.output)
    write_reports_csv([report], path)
    write_json({"seed": ctx.seed, "config_digest": ctx.digest, "reports": [asdict(report)]},
               os.path.splitext(path)[0] + ".json")
    print(f"accuracy={report.accuracy:.4f} attack_f1={report.attack_f1:.4f} -> {path}")


def cmd_sweep(ctx, args):
    e = ctx.cfg["experiments"]
    settings = model_settings(ctx.cfg)
    if args.kind == "privacy":
        x, y, cols = _features(ctx, args.features)
        if cols != FEATURE_NAMES:
            raise DataError("privacy sweep needs the full 10-feature CSV")
        m, s = ctx.cfg["model"], ctx.cfg["split"]
        profile = privacy_profile(ctx.cfg)
        raw, priv, delta = privacy_tradeoff(m["kind"], x, y, profile, settings, ctx.seed,
                                            int(m["qubits"]), float(s["test_frac"]),
                                            s["label_mode"], ctx.digest)
        path = ctx.path("privacy_tradeoff.csv")
        write_reports_csv([raw, priv], path)
        write_json({"seed": ctx.seed, "config_digest": ctx.digest,
                    "config": public_config(ctx.cfg), "privacy_profile": profile.to_dict(),
                    "reports": [asdict(raw), asdict(priv)], "delta": delta},
                   ctx.path("privacy_tradeoff.json"))
        print(f"attack_f1 raw={raw.attack_f1:.4f} privacy={priv.attack_f1:.4f}")
        return
    ds = _prepared(ctx, args)
    if args.kind == "dropout":
        rows = dropout_sweep(e["sweep_model"], ds, e["dropout_rates"], settings, ctx.seed,
                             0, ctx.digest)
        write_rows_csv(rows, ctx.path("dropout_sweep.csv"))
    else:
        table, radar = activation_sweep(ds, e["activations"], e["dropout_rates"], settings,
                                        e["sweep_model"], ctx.seed, ctx.digest)
        write_rows_csv(table, ctx.path("activation_sweep.csv"))
        path = ctx.path("activation_radar.csv")
        write_rows_csv(radar, path)
        ctx.meta(path)
    print(f"wrote {args.kind} sweep to {ctx.out}")


def cmd_bench(ctx, args):
    ds = _prepared(ctx, args)
    grid = [int(q) for q in ctx.cfg["experiments"]["qubit_grid"]]
    reports = qubit_depth_benchmark(ds, grid, model_settings(ctx.cfg), ctx.seed, ctx.digest)
    write_reports_csv(reports, ctx.path("table2.csv"))
    write_reports_csv(reports, ctx.path("table2_stable.csv"), exclude=TIME_COLUMNS)
    write_json({"seed": ctx.seed, "config_digest": ctx.digest, "config": public_config(ctx.cfg),
                "privacy_profile": privacy_profile(ctx.cfg).to_dict(),
                "reports": [asdict(r) for r in reports]}, ctx.path("table2.json"))
    for r in reports:
        print(f"{r.model:<16} q={r.qubits} acc={r.accuracy:.4f} attack_f1={r.attack_f1:.4f} "
              f"time={r.train_time_s:.1f}s")


def cmd_qnn(ctx, args):
    q = ctx.cfg["experiments"]["qnn"]
    arch = [int(v) for v in args.arch.split(",")] if args.arch else list(q["arch"])
    pairs = args.pairs if args.pairs is not None else int(q["pairs"])
    steps = args.steps if args.steps is not None else int(q["steps"])
    try:
        widths = dqnn.check_architecture(arch)
    except ValueError as exc:
        raise ConfigError(str(exc), "experiments.qnn", "arch") from None
    if widths[0] != widths[-1]:
        raise ConfigError("unitary learning needs equal input and output widths",
                          "experiments.qnn", "arch")
    v = dqnn.random_target_unitary(widths[0], int(q["target_seed"]))
    seed = derive_seed(ctx.seed, "qnn")
    data = dqnn.gen_unitary_dataset(v, pairs, seed)
    held_out = dqnn.gen_unitary_dataset(v, int(q["eval_pairs"]), seed + 1)
    res = dqnn.train(dqnn.init_network(widths, seed), data, steps, float(q["eps"]), float(q["eta"]))
    rows = [{"step": i, "cost": c, "seed": ctx.seed, "config_digest": ctx.digest}
            for i, c in enumerate(res.costs)]
    path = ctx.path("qnn_cost.csv")
    write_rows_csv(rows, path)
    final = {"arch": widths, "pairs": pairs, "steps": steps, "train_cost": res.costs[-1],
             "held_out_cost": dqnn.cost(res.network, held_out)}
    ctx.meta(path, **final)
    print(f"final cost={res.costs[-1]:.6f} held-out={final['held_out_cost']:.6f}")


class _Parser(argparse.ArgumentParser):
    """Usage errors become one-line config errors instead of argparse's usage dump."""

    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}", "cli")


def build_parser():
    p = _Parser(prog="rtlsguard", description=__doc__.splitlines()[0])
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file (defaults apply when omitted)")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override one config key; repeatable")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("generate", parents=[common], help="simulate telemetry runs")
    s = sub.add_parser("featurize", parents=[common], help="windowed features from runs")
    s.add_argument("--runs", default="runs.json")
    s.add_argument("--output", default="features.csv")
    s = sub.add_parser("sanitize", parents=[common], help="apply the privacy profile")
    s.add_argument("--features", default="features.csv")
    s.add_argument("--samples", help="sanitize a raw sample CSV instead of features")
    s.add_argument("--output")

    def model_args(s):
        s.add_argument("--features", default="features.csv")
        s.add_argument("--model", help="nn | dnn | dnn-shallow | hybrid-nn | hybrid-dnn")
        s.add_argument("--qubits", type=int)
        s.add_argument("--model-dir", default="model")
        s.add_argument("--raw", action="store_true", help="skip the privacy profile")

    model_args(sub.add_parser("train", parents=[common], help="train one detector"))
    s = sub.add_parser("evaluate", parents=[common], help="evaluate a saved detector")
    model_args(s)
    s.add_argument("--output", default="report.csv")
    s.add_argument("--condition", default="privacy")
    s = sub.add_parser("sweep", parents=[common], help="dropout, activation or privacy sweep")
    s.add_argument("kind", choices=("dropout", "activation", "privacy"))
    s.add_argument("--features", default="features.csv")
    s.add_argument("--raw", action="store_true")
    s = sub.add_parser("bench-table2", parents=[common], help="qubit-depth benchmark")
    s.add_argument("--features", default="features.csv")
    s.add_argument("--raw", action="store_true")
    s = sub.add_parser("qnn-learn-unitary", parents=[common], help="train a DQNN on a unitary")
    s.add_argument("--arch", help="comma-separated widths, e.g. 1,2,1")
    s.add_argument("--pairs", type=int)
    s.add_argument("--steps", type=int)
    return p


COMMANDS = {
    "generate": cmd_generate,
    "featurize": cmd_featurize,
    "sanitize": cmd_sanitize,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "bench-table2": cmd_bench,
    "qnn-learn-unitary": cmd_qnn,
}


def _fail(kind, code, exc, **fields):
    msg = " ".join(str(exc).split())
    extra = "".join(f" {k}={v}" for k, v in fields.items() if v)
    print(f"error kind={kind}{extra} message={json.dumps(msg)}", file=sys.stderr)
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        ctx = Context(args)
        COMMANDS[args.command](ctx, args)
    except ConfigError as exc:
        return _fail("config", EXIT_CONFIG, exc, section=exc.section, key=exc.key)
    except InvariantError as exc:
        return _fail("invariant", EXIT_INVARIANT, exc)
    except (DataError, FileNotFoundError, KeyError) as exc:
        return _fail("data", EXIT_DATA, exc)
    except ValueError as exc:
        return _fail("data", EXIT_DATA, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
