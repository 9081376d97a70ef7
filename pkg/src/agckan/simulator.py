"""Two-area AGC simulation with governor dead band, generation rate
constraint, and transport delay.

Per area the plant is the classic non-reheat thermal chain: governor
1/(Tg s + 1), turbine 1/(Tt s + 1) with a rate limit, power system
Kp/(Tp s + 1), droop feedback through a dead zone, and an integral
controller u = -Ki * int(ACE).  The tie line obeys
d(dPtie)/dt = 2*pi*T12*(dF1 - dF2).  Measurements feeding the ACE pass
through a pure transport delay, and attacks corrupt those delayed
measurements, so they act inside the closed loop.  The recorded dataset
stores the corrupted measurement channels.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from . import _simcore
from .attacks import AttackSpec
from .errors import InvalidArgumentError, SimulationDivergedError

N_SIGNALS = 3
SIGNAL_NAMES = ("dp_tie", "df1", "df2")


@dataclass
class AreaParams:
    """Plant and control parameters of one area (SI units, pu on system base)."""

    governor_time_constant: float = 0.08   # Tg, s
    turbine_time_constant: float = 0.3     # Tt, s
    power_system_gain: float = 120.0       # Kp, Hz/pu
    power_system_time_constant: float = 20.0  # Tp, s
    droop: float = 2.4                     # R, Hz/pu
    bias_factor: float = 0.425             # B, pu/Hz
    integral_gain: float = 0.3             # Ki, 1/s
    grc_limit: float = 0.002               # pu/s
    gdb_band: float = 0.0006               # Hz
    transport_delay: float = 1.0           # tau, s

    def validate(self):
        for name in ("governor_time_constant", "turbine_time_constant",
                     "power_system_time_constant", "power_system_time_constant"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be > 0")
        if not self.grc_limit > 0:
            raise InvalidArgumentError("grc_limit must be > 0")
        if self.gdb_band < 0:
            raise InvalidArgumentError("gdb_band must be >= 0")
        if self.transport_delay < 0:
            raise InvalidArgumentError("transport_delay must be >= 0")
        if not self.bias_factor > 0:
            raise InvalidArgumentError("bias_factor must be > 0")
        if not self.droop > 0:
            raise InvalidArgumentError("droop must be > 0")

    def as_row(self):
        return [self.governor_time_constant, self.turbine_time_constant,
                self.power_system_gain, self.power_system_time_constant,
                self.droop, self.bias_factor, self.integral_gain,
                self.grc_limit, self.gdb_band]


@dataclass
class DisturbanceEvent:
    """One legitimate load change in a given area."""

    area: int                 # 0 or 1
    onset: float              # s
    shape: str = "step"       # "step" or "ramp"
    magnitude: float = 0.01   # pu
    ramp_rate: float = 0.0    # pu/s, slope magnitude for ramps

    def __post_init__(self):
        if self.area not in (0, 1):
            raise InvalidArgumentError("disturbance area must be 0 or 1")
        if self.shape not in ("step", "ramp"):
            raise InvalidArgumentError("disturbance shape must be 'step' or 'ramp'")
        if abs(self.magnitude) > 0.1:
            raise InvalidArgumentError("|disturbance magnitude| must be <= 0.1 pu")
        if self.onset < 0:
            raise InvalidArgumentError("disturbance onset must be >= 0")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class SimConfig:
    area1: AreaParams = field(default_factory=AreaParams)
    area2: AreaParams = field(default_factory=AreaParams)
    tie_coefficient: float = 0.0707  # T12, pu/Hz
    internal_dt: float = 0.01        # s
    record_dt: float = 0.2           # s
    horizon: float = 60.0            # s

    def validate(self):
        self.area1.validate()
        self.area2.validate()
        if not self.internal_dt > 0 or self.internal_dt > self.record_dt:
            raise InvalidArgumentError("need 0 < internal_dt <= record_dt")
        ratio = self.record_dt / self.internal_dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise InvalidArgumentError("internal_dt must divide record_dt exactly")
        n_rec = self.horizon / self.record_dt
        if abs(n_rec - round(n_rec)) > 1e-9:
            raise InvalidArgumentError("record_dt must divide horizon exactly")

    @property
    def n_records(self):
        return int(round(self.horizon / self.record_dt))

    def to_dict(self):
        return {"area1": asdict(self.area1), "area2": asdict(self.area2),
                "tie_coefficient": self.tie_coefficient,
                "internal_dt": self.internal_dt, "record_dt": self.record_dt,
                "horizon": self.horizon}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ("area1", "area2"):
            if key in d and isinstance(d[key], dict):
                d[key] = AreaParams(**d[key])
        return cls(**d)

    @classmethod
    def from_file(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def param_vector(self):
        return np.array(self.area1.as_row() + self.area2.as_row()
                        + [self.tie_coefficient])


@dataclass
class TimeSeriesSample:
    """One recorded 60 s window: 3 signals x n_steps, label, and provenance."""

    values: np.ndarray                 # (3, n_steps)
    label: int
    seed: int
    attack: Optional[AttackSpec] = None
    disturbances: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != N_SIGNALS:
            raise InvalidArgumentError("sample values must have shape (3, n_steps)")
        if self.label != (1 if self.attack is not None else 0):
            raise InvalidArgumentError("label must be 1 iff an attack spec is present")


def compute_ace(dp_tie: float, df: float, bias: float) -> float:
    """Area control error: tie-line deviation plus bias-weighted frequency deviation."""
    for v in (dp_tie, df, bias):
        if not math.isfinite(v):
            raise InvalidArgumentError("compute_ace needs finite inputs")
    return dp_tie + bias * df


def apply_gdb(x: float, band: float) -> float:
    """Symmetric dead zone: sign(x) * max(|x| - band, 0)."""
    if band < 0:
        raise InvalidArgumentError("dead band must be >= 0")
    return float(_simcore.dead_zone(x, band))


def apply_grc(prev: float, requested: float, rate_limit: float, dt: float) -> float:
    """Rate-limited move from prev toward requested over one step of dt."""
    if not rate_limit > 0:
        raise InvalidArgumentError("rate_limit must be > 0")
    if not dt > 0:
        raise InvalidArgumentError("dt must be > 0")
    lim = rate_limit * dt
    return prev + min(max(requested - prev, -lim), lim)


def simulate(config: SimConfig, disturbances=(), attack: Optional[AttackSpec] = None,
             seed: int = 0, return_internals: bool = False):
    """Run the closed loop and return the recorded TimeSeriesSample.

    Deterministic in its inputs.  With return_internals=True also returns a
    dict with the turbine outputs at the record instants (for constraint
    checks).
    """
    config.validate()
    n_steps = int(round(config.horizon / config.internal_dt))
    rec_every = int(round(config.record_dt / config.internal_dt))
    delay_steps = int(round(config.area1.transport_delay / config.internal_dt))

    dist_rows = np.zeros((max(len(disturbances), 1), 5))
    dist_rows[:, 1] = config.horizon + 1.0  # inert filler row when empty
    for q, ev in enumerate(disturbances):
        shape = 1.0 if ev.shape == "ramp" else 0.0
        dist_rows[q] = (float(ev.area), ev.onset, shape, ev.magnitude, ev.ramp_rate)

    atk_rows = attack.encode() if attack is not None else np.zeros((3, 6))

    rec, turb, diverged = _simcore.simulate_core(
        config.param_vector(), config.internal_dt, n_steps, rec_every,
        delay_steps, dist_rows, atk_rows)
    if diverged >= 0:
        raise SimulationDivergedError(diverged)

    sample = TimeSeriesSample(values=rec, label=1 if attack is not None else 0,
                              seed=seed, attack=attack,
                              disturbances=list(disturbances))
    if return_internals:
        return sample, {"turbine_outputs": turb}
    return sample


def export_trace_csv(sample: TimeSeriesSample, path, record_dt: float = 0.2):
    """CSV trace: header t,dp_tie,df1,df2 with 9 significant digits."""
    n = sample.values.shape[1]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,dp_tie,df1,df2\n")
        for i in range(n):
            t = (i + 1) * record_dt
            row = sample.values[:, i]
            fh.write(f"{t:.8e},{row[0]:.8e},{row[1]:.8e},{row[2]:.8e}\n")
