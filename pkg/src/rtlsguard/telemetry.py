"""Synthetic RTLS traces with DoS / spoofing injection, windowing and featurization.

Every sample is one beacon packet seen by the robot's tag. Dropped packets
keep their timestamp and beacon id, are flagged ``dropped`` and carry the
receiver floor as RSSI; the RSSI statistics only use received packets.
"""
from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

LABELS = ("Normal", "DoS", "Spoof")
LABEL_INDEX = {name: i for i, name in enumerate(LABELS)}
FEATURE_NAMES = tuple(f"x{i}" for i in range(1, 11))
FEATURE_DESCRIPTIONS = (
    "rssi_mean", "rssi_std", "timestamp_jitter_var", "distance_estimate",
    "positional_jitter", "beacon_entropy", "packet_drop_rate",
    "anchor_signal_variance", "est_velocity", "velocity_residual",
)
SAMPLE_COLUMNS = ("t", "beacon_id", "rssi", "est_x", "est_y", "odom_x", "odom_y", "dropped")
OPTIONAL_SAMPLE_COLUMNS = ("tof",)
RSSI_FLOOR = -100.0
SPEED_OF_LIGHT = 299_792_458.0

DEFAULT_ANCHORS = {
    "A0": (0.0, 0.0), "A1": (5.0, 0.0), "A2": (10.0, 0.0),
    "A3": (10.0, 10.0), "A4": (5.0, 10.0), "A5": (0.0, 10.0),
}
DEFAULT_TRAJECTORIES = {
    "perimeter": [(2.0, 2.0), (8.0, 2.0), (8.0, 8.0), (2.0, 8.0), (2.0, 2.0)],
    "diagonal": [(2.0, 2.0), (8.0, 8.0), (2.0, 8.0), (8.0, 2.0), (2.0, 2.0)],
}
PHANTOM_ID = "S0"


class DataError(ValueError):
    """Malformed or inconsistent telemetry input."""


@dataclass(frozen=True)
class TelemetrySample:
    t: float
    beacon_id: str
    rssi: float
    est_x: float
    est_y: float
    odom_x: float
    odom_y: float
    dropped: bool = False
    tof: float | None = None


@dataclass(frozen=True)
class AttackScenario:
    kind: str = "Normal"
    intensity: float = 0.0
    affected_beacons: frozenset = frozenset()
    time_span: tuple = (0.0, math.inf)

    def __post_init__(self):
        if self.kind not in LABELS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if not 0.0 <= self.intensity <= 1.0:
            raise ValueError("intensity must be in [0, 1]")
        if not self.time_span[0] < self.time_span[1]:
            raise ValueError("time span must have start < end")

    @property
    def label(self):
        return LABEL_INDEX[self.kind]

    def active(self, t):
        return self.kind != "Normal" and self.time_span[0] <= t < self.time_span[1]


@dataclass
class NoiseConfig:
    rssi_sigma: float = 2.0
    pos_sigma: float = 0.15
    odom_sigma: float = 0.01
    time_sigma: float = 0.002


@dataclass
class SimConfig:
    rate_hz: float = 10.0
    duration_s: float = 90.0
    speed: float = 0.4
    dwell_s: float = 3.0
    path_loss_exp: float = 2.2
    rssi_c: float = -45.0
    phantom_rssi: float = -50.0
    spoof_bias_m: float = 1.5
    spoof_period_s: float = 20.0
    noise: NoiseConfig = field(default_factory=NoiseConfig)


@dataclass
class FeatureConfig:
    path_loss_exp: float = 2.2
    rssi_c: float = -45.0
    distance_mode: str = "rssi"  # or "toa"

    def __post_init__(self):
        if self.distance_mode not in ("rssi", "toa"):
            raise ValueError(f"unknown distance mode {self.distance_mode!r}")


@dataclass(frozen=True)
class TelemetryWindow:
    samples: tuple
    window_len: int
    stride: int
    label: int = 0


@dataclass(frozen=True)
class FeatureVector:
    x1: float
    x2: float
    x3: float
    x4: float
    x5: float
    x6: float
    x7: float
    x8: float
    x9: float
    x10: float
    label: int = 0

    def values(self):
        return np.array([getattr(self, n) for n in FEATURE_NAMES])


def rssi_model(d, n_exp, c):
    """Log-distance path loss: -10 n log10(d) + C."""
    if d <= 0:
        raise ValueError("distance must be positive")
    return -10.0 * n_exp * math.log10(d) + c


def _path_position(waypoints, speed, dwell_s, t):
    """Position and true speed at time t, looping the waypoint polyline with dwells."""
    pts = np.asarray(waypoints, dtype=float)
    if len(pts) == 1 or speed <= 0:
        return pts[0], 0.0
    segs = []
    for a, b in zip(pts, pts[1:]):
        segs.append(("dwell", a, a, dwell_s))
        length = float(np.linalg.norm(b - a))
        if length > 0:
            segs.append(("move", a, b, length / speed))
    period = sum(s[3] for s in segs)
    if period <= 0:
        return pts[0], 0.0
    tau = t % period
    for kind, a, b, dur in segs:
        if tau < dur:
            return a + (tau / dur) * (b - a), (0.0 if kind == "dwell" else speed)
        tau -= dur
    return pts[-1], 0.0


def simulate_run(anchors, trajectory, scenario, sim=None, seed=0):
    """Sample stream for one run of the robot along ``trajectory``.

    DoS (inside the scenario span) drops packets of the affected beacons with
    probability ``intensity``, destabilizes the RSSI of those that get through
    and degrades the position fix. Spoofing injects a phantom beacon with very
    consistent RSSI and adds an oscillating bias to the position estimate.
    """
    sim = sim or SimConfig()
    noise = sim.noise
    if len(anchors) < 3:
        raise ValueError("layout needs at least 3 anchors")
    if len(trajectory) == 0:
        raise ValueError("trajectory needs at least one waypoint")
    rng = np.random.default_rng(seed)
    ids = sorted(anchors)
    anchor_pos = {k: np.asarray(anchors[k], dtype=float) for k in ids}
    n_ticks = int(round(sim.duration_s * sim.rate_hz))
    direction = rng.normal(size=2)
    direction /= np.linalg.norm(direction)
    affected = scenario.affected_beacons or frozenset(ids)
    frac_affected = len(affected & set(ids)) / len(ids)
    odom = None
    prev_true = None
    samples = []
    last_t = -math.inf
    for k in range(n_ticks):
        t_nom = k / sim.rate_hz
        t = max(t_nom + rng.normal(0.0, noise.time_sigma), last_t)
        last_t = t
        true_pos, _ = _path_position(trajectory, sim.speed, sim.dwell_s, t_nom)
        if odom is None:
            odom = true_pos.copy()
        else:
            odom = odom + (true_pos - prev_true) + rng.normal(0.0, noise.odom_sigma, 2)
        prev_true = true_pos
        beacon = ids[rng.integers(len(ids))]
        dist = max(float(np.linalg.norm(true_pos - anchor_pos[beacon])), 0.1)
        rssi = rssi_model(dist, sim.path_loss_exp, sim.rssi_c) + rng.normal(0.0, noise.rssi_sigma)
        tof = dist / SPEED_OF_LIGHT
        pos_sigma = noise.pos_sigma
        bias = np.zeros(2)
        dropped = False
        active = scenario.active(t)
        if active and scenario.kind == "DoS":
            pos_sigma *= 1.0 + 2.0 * scenario.intensity * frac_affected
            if beacon in affected:
                if rng.random() < scenario.intensity:
                    dropped = True
                else:
                    rssi += rng.normal(0.0, 8.0 * scenario.intensity)
        elif active and scenario.kind == "Spoof":
            phase = 2 * math.pi * (t - scenario.time_span[0]) / sim.spoof_period_s
            bias = direction * sim.spoof_bias_m * scenario.intensity * math.sin(phase)
            if rng.random() < 0.3 + 0.4 * scenario.intensity:
                beacon = PHANTOM_ID
                rssi = sim.phantom_rssi + rng.normal(0.0, 0.3)
                tof = None
        est = true_pos + bias + rng.normal(0.0, pos_sigma, 2)
        samples.append(TelemetrySample(
            t=float(t), beacon_id=beacon, rssi=RSSI_FLOOR if dropped else float(rssi),
            est_x=float(est[0]), est_y=float(est[1]),
            odom_x=float(odom[0]), odom_y=float(odom[1]),
            dropped=dropped, tof=None if dropped else tof,
        ))
    return samples


def beacon_entropy(id_counts):
    """Shannon entropy (bits) of the beacon-id frequency distribution."""
    counts = np.array([c for c in dict(id_counts).values() if c > 0], dtype=float)
    if counts.sum() < 1:
        raise ValueError("entropy needs at least one observation")
    p = counts / counts.sum()
    return float(max(-np.sum(p * np.log2(p)), 0.0))


def window_stream(samples, window_len=50, stride=25, scenario=None):
    """Sliding windows; each is labeled with the scenario kind if its midpoint is under attack."""
    if window_len < 2:
        raise ValueError("window_len must be >= 2")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    samples = list(samples)
    windows = []
    for start in range(0, len(samples) - window_len + 1, stride):
        chunk = tuple(samples[start:start + window_len])
        label = 0
        if scenario is not None:
            mid = 0.5 * (chunk[0].t + chunk[-1].t)
            label = scenario.label if scenario.active(mid) else 0
        windows.append(TelemetryWindow(chunk, window_len, stride, label))
    return windows


def _pop_var(a):
    return float(np.var(a)) if len(a) else 0.0


def extract_features(window, config=None):
    """The ten window statistics (population variances throughout)."""
    config = config or FeatureConfig()
    s = window.samples
    if len(s) < 2:
        raise ValueError("feature extraction needs a window of at least 2 samples")
    t = np.array([x.t for x in s])
    if np.any(np.diff(t) < 0):
        raise DataError("window samples are not time-ordered")
    recv = [x for x in s if not x.dropped]
    rssi = np.array([x.rssi for x in recv])
    ids = [x.beacon_id for x in recv]

    x1 = float(np.mean(rssi)) if len(recv) else RSSI_FLOOR
    per_beacon = {}
    for b, r in zip(ids, rssi):
        per_beacon.setdefault(b, []).append(r)
    if len(recv):
        # pooled within-beacon spread: each beacon deviates around its own mean
        ss = sum(float(np.sum((np.array(v) - np.mean(v)) ** 2)) for v in per_beacon.values())
        x2 = math.sqrt(ss / len(recv))
    else:
        x2 = 0.0
    x3 = _pop_var(np.diff([x.t for x in recv])) if len(recv) > 2 else 0.0
    if config.distance_mode == "toa":
        tofs = [x.tof for x in recv if x.tof is not None]
        x4 = float(np.mean(tofs)) * SPEED_OF_LIGHT if tofs else 0.0
    else:
        d = 10.0 ** ((config.rssi_c - rssi) / (10.0 * config.path_loss_exp))
        x4 = float(np.mean(d)) if len(recv) else 0.0
    ex = np.array([x.est_x for x in s])
    ey = np.array([x.est_y for x in s])
    x5 = math.sqrt(_pop_var(ex) + _pop_var(ey))
    x6 = beacon_entropy(Counter(ids)) if ids else 0.0
    x7 = sum(x.dropped for x in s) / len(s)
    means = [float(np.mean(v)) for v in per_beacon.values()]
    x8 = _pop_var(means) if len(means) > 1 else 0.0
    dt = t[-1] - t[0]
    if dt > 0:
        x9 = math.hypot(ex[-1] - ex[0], ey[-1] - ey[0]) / dt
        odom_speed = math.hypot(s[-1].odom_x - s[0].odom_x, s[-1].odom_y - s[0].odom_y) / dt
    else:
        x9 = odom_speed = 0.0
    x10 = abs(x9 - odom_speed)
    return FeatureVector(x1, x2, x3, x4, x5, x6, x7, x8, x9, x10, window.label)


@dataclass
class Run:
    run_id: int
    trajectory: str
    scenario: AttackScenario
    seed: int
    samples: list


@dataclass
class DatasetConfig:
    repetitions: int = 10
    kinds: tuple = LABELS
    intensity_range: tuple = (0.5, 1.0)
    attack_start_max_s: float = 20.0
    window_len: int = 50
    stride: int = 25
    sim: SimConfig = field(default_factory=SimConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)


def make_scenarios(config, rng):
    ids = sorted(DEFAULT_ANCHORS)
    plan = []
    for rep in range(config.repetitions):
        for traj in DEFAULT_TRAJECTORIES:
            for kind in config.kinds:
                if kind == "Normal":
                    scen = AttackScenario()
                else:
                    lo, hi = config.intensity_range
                    intensity = float(rng.uniform(lo, hi))
                    start = float(rng.uniform(0.0, config.attack_start_max_s))
                    n_aff = int(rng.integers(3, len(ids) + 1))
                    affected = frozenset(rng.choice(ids, size=n_aff, replace=False).tolist())
                    scen = AttackScenario(kind, intensity,
                                          affected if kind == "DoS" else frozenset(),
                                          (start, config.sim.duration_s + 1.0))
                plan.append((traj, scen))
    return plan


def generate_runs(config, seed):
    """All runs of the default layout; run i uses its own derived seed."""
    rng = np.random.default_rng([seed, 0])
    runs = []
    for i, (traj, scen) in enumerate(make_scenarios(config, rng)):
        run_seed = int(np.random.default_rng([seed, 1, i]).integers(2**31))
        samples = simulate_run(DEFAULT_ANCHORS, DEFAULT_TRAJECTORIES[traj], scen, config.sim,
                               run_seed)
        runs.append(Run(i, traj, scen, run_seed, samples))
    return runs


def featurize_runs(runs, config):
    feats = []
    for run in runs:
        for w in window_stream(run.samples, config.window_len, config.stride, run.scenario):
            feats.append(extract_features(w, config.features))
    return feats


def generate_dataset(config=None, seed=0):
    """Feature matrix (n, 10) and labels for the default synthetic benchmark."""
    config = config or DatasetConfig()
    feats = featurize_runs(generate_runs(config, seed), config)
    return features_to_arrays(feats)


def features_to_arrays(feats):
    x = np.array([f.values() for f in feats]).reshape(-1, 10)
    y = np.array([f.label for f in feats], dtype=int)
    return x, y


def scenario_to_dict(s):
    return {"kind": s.kind, "intensity": s.intensity,
            "affected_beacons": sorted(s.affected_beacons),
            "time_span": [s.time_span[0], s.time_span[1]]}


def scenario_from_dict(d):
    return AttackScenario(d["kind"], float(d["intensity"]), frozenset(d["affected_beacons"]),
                          (float(d["time_span"][0]), float(d["time_span"][1])))


def write_samples_csv(samples, path):
    with_tof = any(s.tof is not None for s in samples)
    header = list(SAMPLE_COLUMNS) + (["tof"] if with_tof else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for s in samples:
            row = [repr(s.t), s.beacon_id, repr(s.rssi), repr(s.est_x), repr(s.est_y),
                   repr(s.odom_x), repr(s.odom_y), int(s.dropped)]
            if with_tof:
                row.append("" if s.tof is None else repr(s.tof))
            w.writerow(row)


def _parse_bool(v):
    if v in ("1", "true", "True"):
        return True
    if v in ("0", "false", "False"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def load_samples_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: missing header row")
        unknown = [c for c in header if c not in SAMPLE_COLUMNS + OPTIONAL_SAMPLE_COLUMNS]
        if unknown:
            raise DataError(f"{path}: unknown column {unknown[0]!r}")
        missing = [c for c in SAMPLE_COLUMNS if c not in header]
        if missing:
            raise DataError(f"{path}: missing required column {missing[0]!r}")
        col = {c: i for i, c in enumerate(header)}
        samples = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                tof = row[col["tof"]] if "tof" in col else ""
                samples.append(TelemetrySample(
                    t=float(row[col["t"]]), beacon_id=row[col["beacon_id"]],
                    rssi=float(row[col["rssi"]]),
                    est_x=float(row[col["est_x"]]), est_y=float(row[col["est_y"]]),
                    odom_x=float(row[col["odom_x"]]), odom_y=float(row[col["odom_y"]]),
                    dropped=_parse_bool(row[col["dropped"]]),
                    tof=float(tof) if tof else None,
                ))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: malformed row ({exc})") from None
    return samples


def write_features_csv(x, y, path, columns=FEATURE_NAMES):
    x = np.asarray(x, dtype=float).reshape(len(y), len(columns))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(columns) + ["label"])
        for row, label in zip(x, y):
            w.writerow([repr(float(v)) for v in row] + [int(label)])


def load_features_csv(path):
    """Returns (x, y, column names); any subset of x1..x10 is accepted."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: missing header row")
        if not header or header[-1] != "label":
            raise DataError(f"{path}: missing required column 'label'")
        cols = header[:-1]
        bad = [c for c in cols if c not in FEATURE_NAMES]
        if bad:
            raise DataError(f"{path}: unknown column {bad[0]!r}")
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row[:-1]])
                labels.append(int(row[-1]))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: malformed row ({exc})") from None
    x = np.array(rows, dtype=float).reshape(len(rows), len(cols))
    return x, np.array(labels, dtype=int), tuple(cols)
