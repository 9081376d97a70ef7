"""Labeled benchmark generation, binary persistence, and split handling.

Every sample (both classes) carries 1-3 random legitimate load
disturbances; attacked samples additionally carry one sampled AttackSpec.
Sample i draws its randomness from SeedSequence([seed, i]) so serial and
parallel generation agree.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .attacks import AttackConfig, AttackSpec, sample_attack_spec
from .errors import (DatasetCorruptionError, DatasetFormatError,
                     InvalidArgumentError)
from .simulator import DisturbanceEvent, SimConfig, TimeSeriesSample, simulate

MAGIC = b"AGCKAN1"
VERSION = 1

DISTURBANCE_COUNT_RANGE = (1, 1)
DISTURBANCE_MAG_RANGE = (0.01, 0.03)


@dataclass
class Dataset:
    samples: list
    config_digest: str
    seed: int

    def __post_init__(self):
        shapes = {s.values.shape for s in self.samples}
        if len(shapes) > 1:
            raise InvalidArgumentError("all samples must share the same shape")

    @property
    def label_counts(self):
        ones = sum(s.label for s in self.samples)
        return {0: len(self.samples) - ones, 1: ones}

    def labels(self):
        return np.array([s.label for s in self.samples], dtype=np.int64)


@dataclass
class SplitIndices:
    train: list
    val: list
    test: list
    ratios: tuple
    seed: int


def config_digest(sim_config: SimConfig, attack_config: AttackConfig,
                  n: int, attacked_fraction: float, seed: int) -> str:
    payload = json.dumps({"sim": sim_config.to_dict(), "attack": attack_config.to_dict(),
                          "n": n, "attacked_fraction": attacked_fraction, "seed": seed},
                         sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def _sample_disturbances(rng, horizon):
    events = []
    for _ in range(int(rng.integers(DISTURBANCE_COUNT_RANGE[0],
                                    DISTURBANCE_COUNT_RANGE[1] + 1))):
        mag = rng.uniform(*DISTURBANCE_MAG_RANGE) * (1.0 if rng.random() < 0.5 else -1.0)
        shape = "step" if rng.random() < 0.5 else "ramp"
        ev = DisturbanceEvent(
            area=int(rng.integers(0, 2)),
            onset=float(rng.uniform(0.0, 0.8 * horizon)),
            shape=shape,
            magnitude=float(mag),
            ramp_rate=float(abs(mag) / rng.uniform(2.0, 10.0)) if shape == "ramp" else 0.0)
        events.append(ev)
    return events


def generate_sample(index: int, attacked: bool, sim_config: SimConfig,
                    attack_config: AttackConfig, seed: int) -> TimeSeriesSample:
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    disturbances = _sample_disturbances(rng, sim_config.horizon)
    attack = sample_attack_spec(rng, attack_config) if attacked else None
    return simulate(sim_config, disturbances, attack, seed=index)


def generate_dataset(n: int, attacked_fraction: float = 0.5,
                     sim_config: SimConfig = None, attack_config: AttackConfig = None,
                     seed: int = 0) -> Dataset:
    """n simulated windows, round(n * attacked_fraction) of them attacked."""
    if n < 2:
        raise InvalidArgumentError("need n >= 2")
    if not 0.0 < attacked_fraction < 1.0:
        raise InvalidArgumentError("attacked_fraction must be in (0, 1)")
    sim_config = sim_config or SimConfig()
    attack_config = attack_config or AttackConfig()
    n_attacked = int(round(n * attacked_fraction))
    # Deterministic label layout: interleave as evenly as possible.
    labels = np.zeros(n, dtype=bool)
    positions = np.linspace(0, n - 1, n_attacked).round().astype(int) if n_attacked else []
    labels[positions] = True
    samples = [generate_sample(i, bool(labels[i]), sim_config, attack_config, seed)
               for i in range(n)]
    digest = config_digest(sim_config, attack_config, n, attacked_fraction, seed)
    return Dataset(samples=samples, config_digest=digest, seed=seed)


def split(dataset_or_n, ratios=(0.6, 0.2, 0.2), seed: int = 0) -> SplitIndices:
    """Shuffled contiguous split; flooring remainder goes to train."""
    n = dataset_or_n if isinstance(dataset_or_n, int) else len(dataset_or_n.samples)
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise InvalidArgumentError("need three positive ratios")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise InvalidArgumentError("ratios must sum to 1")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5917]))
    perm = rng.permutation(n)
    n_val = int(ratios[1] * n)
    n_test = int(ratios[2] * n)
    n_train = n - n_val - n_test
    return SplitIndices(train=perm[:n_train].tolist(),
                        val=perm[n_train:n_train + n_val].tolist(),
                        test=perm[n_train + n_val:].tolist(),
                        ratios=ratios, seed=seed)


def _sample_meta(sample: TimeSeriesSample) -> bytes:
    meta = {"seed": sample.seed,
            "attack": sample.attack.to_dict() if sample.attack else None,
            "disturbances": [d.to_dict() for d in sample.disturbances]}
    return json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()


def write_dataset(dataset: Dataset, path, record_dt: float = 0.2):
    """Binary file: magic, version, header, then per-sample records."""
    n = len(dataset.samples)
    n_steps = dataset.samples[0].values.shape[1] if n else 0
    digest = dataset.config_digest.encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", VERSION))
        fh.write(struct.pack("<IHHd", n, 3, n_steps, record_dt))
        fh.write(struct.pack("<QI", dataset.seed, len(digest)))
        fh.write(digest)
        for s in dataset.samples:
            meta = _sample_meta(s)
            fh.write(struct.pack("<BI", s.label, len(meta)))
            fh.write(meta)
            fh.write(np.ascontiguousarray(s.values, dtype="<f8").tobytes())


def read_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:len(MAGIC)] != MAGIC:
        raise DatasetFormatError("bad magic bytes; not an AGCKAN dataset file")
    off = len(MAGIC)
    try:
        (version,) = struct.unpack_from("<H", raw, off)
        off += 2
        if version != VERSION:
            raise DatasetFormatError(f"unsupported dataset version {version}")
        n, n_signals, n_steps, _record_dt = struct.unpack_from("<IHHd", raw, off)
        off += struct.calcsize("<IHHd")
        seed, digest_len = struct.unpack_from("<QI", raw, off)
        off += struct.calcsize("<QI")
        digest = raw[off:off + digest_len].decode()
        off += digest_len
        samples = []
        mat_bytes = n_signals * n_steps * 8
        for _ in range(n):
            label, meta_len = struct.unpack_from("<BI", raw, off)
            off += struct.calcsize("<BI")
            meta = json.loads(raw[off:off + meta_len])
            off += meta_len
            if off + mat_bytes > len(raw):
                raise DatasetCorruptionError("dataset file truncated")
            values = np.frombuffer(raw[off:off + mat_bytes], dtype="<f8").reshape(n_signals, n_steps).copy()
            off += mat_bytes
            attack = AttackSpec.from_dict(meta["attack"]) if meta["attack"] else None
            disturbances = [DisturbanceEvent.from_dict(d) for d in meta["disturbances"]]
            samples.append(TimeSeriesSample(values=values, label=label, seed=meta["seed"],
                                            attack=attack, disturbances=disturbances))
    except struct.error as exc:
        raise DatasetCorruptionError(f"dataset file truncated: {exc}") from exc
    return Dataset(samples=samples, config_digest=digest, seed=seed)
