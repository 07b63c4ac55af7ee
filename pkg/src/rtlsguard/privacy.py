"""Privacy-preserving feature transforms and declarative profiles.

Feature indices are 1-based (x1..x10) to match the telemetry column names.
The attack-relevant features x1, x2, x7, x8 are never touched by a profile.
"""
from __future__ import annotations

import dataclasses
import hashlib
import hmac
import math
from dataclasses import dataclass, field

import numpy as np

from .telemetry import FEATURE_NAMES, FeatureVector, TelemetrySample

PRIVACY_SENSITIVE = frozenset({3, 4, 5, 6, 9, 10})
ATTACK_RELEVANT = frozenset({1, 2, 7, 8})
VELOCITY_CODES = (0.0, 0.5, 1.0)
VELOCITY_NAMES = ("stationary", "slow", "fast")


@dataclass(frozen=True)
class PrivacyProfile:
    deleted: frozenset = frozenset()
    encode_velocity: bool = False  # x9 -> {0, 0.5, 1}
    encode_residual: bool = False  # x10 -> {0, 0.5, 1}
    zone_encode: bool = False  # x4, x5 -> floor(value / zone_cell_m)
    bucketize_jitter: bool = False  # x3 -> floor(x3 / jitter_quantum_s2) * quantum
    zone_cell_m: float = 1.0
    jitter_quantum_s2: float = 1e-3
    hash_epoch_s: float = 60.0
    hash_key: str = field(default="change-me", repr=False)
    velocity_thresholds: tuple = (0.05, 0.5)
    time_bucket_s: float = 60.0

    def __post_init__(self):
        deleted = frozenset(int(i) for i in self.deleted)
        object.__setattr__(self, "deleted", deleted)
        if not deleted <= set(range(1, 11)):
            raise ValueError(f"deleted features must be within 1..10: {sorted(deleted)}")
        if deleted & ATTACK_RELEVANT:
            raise ValueError(
                f"attack-relevant features {sorted(deleted & ATTACK_RELEVANT)} cannot be deleted"
            )
        lo, hi = self.velocity_thresholds
        if not 0 <= lo < hi:
            raise ValueError("velocity thresholds must be strictly increasing")
        for name in ("zone_cell_m", "jitter_quantum_s2", "hash_epoch_s", "time_bucket_s"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def to_dict(self, redact=True):
        d = dataclasses.asdict(self)
        d["deleted"] = sorted(self.deleted)
        d["velocity_thresholds"] = list(self.velocity_thresholds)
        if redact:
            d.pop("hash_key")
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "deleted" in d:
            d["deleted"] = frozenset(d["deleted"])
        if "velocity_thresholds" in d:
            d["velocity_thresholds"] = tuple(d["velocity_thresholds"])
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise KeyError(sorted(unknown)[0])
        return cls(**d)


IDENTITY_PROFILE = PrivacyProfile()
TABLE2_PROFILE = PrivacyProfile(deleted=frozenset({4, 5, 6}), encode_velocity=True)


def zone_encode(value, cell_m):
    """Floor-quantize a coordinate pair or a scalar distance onto a grid of ``cell_m``."""
    if cell_m <= 0:
        raise ValueError("zone cell size must be positive")
    if np.ndim(value) == 0:
        return int(math.floor(value / cell_m))
    return tuple(int(math.floor(v / cell_m)) for v in value)


def hash_beacon_rotating(beacon_id, epoch_time, profile):
    """Keyed HMAC-SHA256 token of (id, epoch index); rotates every ``hash_epoch_s``."""
    epoch = math.floor(epoch_time / profile.hash_epoch_s)
    msg = f"{beacon_id}\x1f{epoch}".encode()
    return hmac.new(profile.hash_key.encode(), msg, hashlib.sha256).hexdigest()[:32]


def discretize_velocity(v, thresholds=(0.05, 0.5)):
    """Movement band code: 0 stationary, 0.5 slow, 1 fast (boundaries go to the lower band)."""
    if v < 0:
        raise ValueError("velocity must be non-negative")
    lo, hi = thresholds
    if v <= lo:
        return VELOCITY_CODES[0]
    if v <= hi:
        return VELOCITY_CODES[1]
    return VELOCITY_CODES[2]


def velocity_category(v, thresholds=(0.05, 0.5)):
    return VELOCITY_NAMES[VELOCITY_CODES.index(discretize_velocity(v, thresholds))]


def bucketize_timestamp(t, bucket_s):
    if bucket_s <= 0:
        raise ValueError("bucket length must be positive")
    return int(math.floor(t / bucket_s))


def apply_profile(features, profile, columns=FEATURE_NAMES):
    """Transform one feature row (or a batch of rows).

    Returns (transformed values, retained column names). Deleted columns are
    dropped, so the output width is ``len(columns) - |deleted|``.
    """
    if isinstance(features, FeatureVector):
        features = features.values()
    x = np.asarray(features, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x).copy()
    idx = [int(c[1:]) for c in columns]
    if x.shape[1] != len(idx):
        raise ValueError(f"{x.shape[1]} values for {len(idx)} columns")
    col = {i: k for k, i in enumerate(idx)}
    if 3 in col and profile.bucketize_jitter:
        q = profile.jitter_quantum_s2
        x[:, col[3]] = np.floor(x[:, col[3]] / q) * q
    if profile.zone_encode:
        for i in (4, 5):
            if i in col:
                x[:, col[i]] = np.floor(x[:, col[i]] / profile.zone_cell_m)
    for i, flag in ((9, profile.encode_velocity), (10, profile.encode_residual)):
        if i in col and flag:
            x[:, col[i]] = [discretize_velocity(v, profile.velocity_thresholds) for v in x[:, col[i]]]
    keep = [k for k, i in enumerate(idx) if i not in profile.deleted]
    if not keep:
        raise ValueError("profile deletes every feature")
    out = x[:, keep]
    retained = tuple(columns[k] for k in keep)
    return (out[0] if single else out), retained


def sanitize_samples(samples, profile):
    """Sample-level sanitization: rotating beacon tokens, bucketed time, zoned positions.

    Timestamps become the start of their bucket; positions become zone indices.
    """
    out = []
    for s in samples:
        ex, ey = zone_encode((s.est_x, s.est_y), profile.zone_cell_m)
        ox, oy = zone_encode((s.odom_x, s.odom_y), profile.zone_cell_m)
        out.append(TelemetrySample(
            t=float(bucketize_timestamp(s.t, profile.time_bucket_s) * profile.time_bucket_s),
            beacon_id=hash_beacon_rotating(s.beacon_id, s.t, profile),
            rssi=s.rssi, est_x=float(ex), est_y=float(ey), odom_x=float(ox), odom_y=float(oy),
            dropped=s.dropped, tof=None,
        ))
    return out
