"""FDIA waveforms: specification, random sampling, and application.

An attack targets one or more of the three measurement channels
(``dp_tie``, ``df1``, ``df2``).  The ``combined`` kind draws an
independent sub-kind and parameters for each targeted channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _simcore
from .errors import InvalidArgumentError

CHANNELS = ("dp_tie", "df1", "df2")
KINDS = ("step", "ramp", "pulse", "scaling", "combined")
ATOM_KINDS = ("step", "ramp", "pulse", "scaling")

_KIND_CODES = {"step": _simcore.ATK_STEP, "ramp": _simcore.ATK_RAMP,
               "pulse": _simcore.ATK_PULSE, "scaling": _simcore.ATK_SCALING}


@dataclass
class ChannelAttack:
    """Waveform parameters for a single measurement channel."""

    kind: str
    magnitude: float = 0.0
    ramp_rate: float = 0.0
    pulse_width: float = 0.0
    scale_factor: float = 0.0

    def to_dict(self):
        return {"kind": self.kind, "magnitude": self.magnitude,
                "ramp_rate": self.ramp_rate, "pulse_width": self.pulse_width,
                "scale_factor": self.scale_factor}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class AttackSpec:
    """One FDIA instance: kind, targeted channels, onset, and parameters.

    For non-combined kinds every target shares the waveform in
    ``magnitude``/``ramp_rate``/``pulse_width``/``scale_factor``; for
    ``combined`` the per-channel waveforms live in ``per_target``.
    """

    kind: str
    targets: tuple
    onset: float
    magnitude: float = 0.0
    ramp_rate: float = 0.0
    pulse_width: float = 0.0
    scale_factor: float = 0.0
    per_target: dict = field(default_factory=dict)

    def __post_init__(self):
        self.targets = tuple(self.targets)
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown attack kind {self.kind!r}")
        if not self.targets:
            raise InvalidArgumentError("attack must target at least one channel")
        for t in self.targets:
            if t not in CHANNELS:
                raise InvalidArgumentError(f"unknown target channel {t!r}")
        if (self.kind == "combined") != (len(self.targets) >= 2):
            raise InvalidArgumentError("kind is 'combined' iff there are >= 2 targets")
        if self.kind == "combined" and set(self.per_target) != set(self.targets):
            raise InvalidArgumentError("combined attack needs per-target waveforms")
        if self.kind == "pulse" and not self.pulse_width > 0:
            raise InvalidArgumentError("pulse attack needs pulse_width > 0")
        if not (math.isfinite(self.onset) and self.onset >= 0):
            raise InvalidArgumentError("attack onset must be finite and >= 0")

    def channel_waveform(self, channel):
        """ChannelAttack for one channel, or None if the channel is untouched."""
        if channel not in self.targets:
            return None
        if self.kind == "combined":
            return self.per_target[channel]
        return ChannelAttack(self.kind, self.magnitude, self.ramp_rate,
                             self.pulse_width, self.scale_factor)

    def encode(self):
        """3x6 float matrix (kind, t0, A, r, w, lam) per channel for the sim core."""
        rows = np.zeros((3, 6))
        for c, name in enumerate(CHANNELS):
            wf = self.channel_waveform(name)
            if wf is None:
                continue
            rows[c] = (_KIND_CODES[wf.kind], self.onset, wf.magnitude,
                       wf.ramp_rate, wf.pulse_width, wf.scale_factor)
        return rows

    def summary(self):
        """One-line human-readable description for reports."""
        parts = []
        for name in self.targets:
            wf = self.channel_waveform(name)
            if wf.kind == "step":
                parts.append(f"{name}: step A={wf.magnitude:+.4g}")
            elif wf.kind == "ramp":
                parts.append(f"{name}: ramp r={wf.ramp_rate:+.4g}/s cap={wf.magnitude:+.4g}")
            elif wf.kind == "pulse":
                parts.append(f"{name}: pulse A={wf.magnitude:+.4g} w={wf.pulse_width:.3g}s")
            else:
                parts.append(f"{name}: scaling lam={wf.scale_factor:+.4g}")
        return f"{self.kind} attack from t={self.onset:.3g}s [" + "; ".join(parts) + "]"

    def to_dict(self):
        return {"kind": self.kind, "targets": list(self.targets), "onset": self.onset,
                "magnitude": self.magnitude, "ramp_rate": self.ramp_rate,
                "pulse_width": self.pulse_width, "scale_factor": self.scale_factor,
                "per_target": {k: v.to_dict() for k, v in self.per_target.items()}}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["targets"] = tuple(d["targets"])
        d["per_target"] = {k: ChannelAttack.from_dict(v) for k, v in d.get("per_target", {}).items()}
        return cls(**d)


@dataclass
class AttackConfig:
    """Sampling ranges and kind mixture for random attacks.

    Additive magnitude ranges are (low, high) over absolute values; a sign
    is drawn separately.  ``ramp_cap_time`` is the (min, max) seconds a
    ramp takes to reach its cap.
    """

    additive_range_ptie: tuple = (0.03, 0.1)
    additive_range_df: tuple = (0.1, 0.3)
    scale_range: tuple = (0.8, 2.0)
    ramp_cap_time: tuple = (4.0, 12.0)
    pulse_width_range: tuple = (5.0, 20.0)
    onset_range: tuple = (5.0, 25.0)
    # Scaling attacks are closed-loop stealthy (the controller's over-response
    # renormalizes the recorded amplitude), so they get a minority share.
    kind_weights: dict = field(default_factory=lambda: {
        "step": 0.225, "ramp": 0.225, "pulse": 0.225,
        "scaling": 0.1, "combined": 0.225})

    def __post_init__(self):
        for name in ("additive_range_ptie", "additive_range_df", "scale_range",
                     "ramp_cap_time", "pulse_width_range", "onset_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise InvalidArgumentError(f"{name} must be a non-degenerate interval")
        w = self.kind_weights
        if set(w) != set(KINDS) or any(v < 0 for v in w.values()):
            raise InvalidArgumentError("kind_weights must cover all kinds with weights >= 0")
        if abs(sum(w.values()) - 1.0) > 1e-9:
            raise InvalidArgumentError("kind_weights must sum to 1")

    def to_dict(self):
        return {"additive_range_ptie": list(self.additive_range_ptie),
                "additive_range_df": list(self.additive_range_df),
                "scale_range": list(self.scale_range),
                "ramp_cap_time": list(self.ramp_cap_time),
                "pulse_width_range": list(self.pulse_width_range),
                "onset_range": list(self.onset_range),
                "kind_weights": dict(self.kind_weights)}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for name in ("additive_range_ptie", "additive_range_df", "scale_range",
                     "ramp_cap_time", "pulse_width_range", "onset_range"):
            if name in d:
                d[name] = tuple(d[name])
        return cls(**d)


def _sample_waveform(rng, kind, channel, config):
    lo, hi = (config.additive_range_ptie if channel == "dp_tie"
              else config.additive_range_df)
    amp = rng.uniform(lo, hi) * (1.0 if rng.random() < 0.5 else -1.0)
    wf = ChannelAttack(kind)
    if kind == "step":
        wf.magnitude = amp
    elif kind == "ramp":
        cap_time = rng.uniform(*config.ramp_cap_time)
        wf.magnitude = amp
        wf.ramp_rate = amp / cap_time
    elif kind == "pulse":
        wf.magnitude = amp
        wf.pulse_width = rng.uniform(*config.pulse_width_range)
    elif kind == "scaling":
        lam = rng.uniform(*config.scale_range)
        wf.scale_factor = lam if rng.random() < 0.5 else -lam
    return wf


def sample_attack_spec(rng, config=None):
    """Draw a random AttackSpec from the configured mixture and ranges."""
    config = config or AttackConfig()
    kinds = list(KINDS)
    weights = np.array([config.kind_weights[k] for k in kinds])
    kind = kinds[rng.choice(len(kinds), p=weights / weights.sum())]
    onset = rng.uniform(*config.onset_range)
    if kind == "combined":
        n_targets = int(rng.integers(2, len(CHANNELS) + 1))
        targets = tuple(CHANNELS[i] for i in sorted(
            rng.choice(len(CHANNELS), size=n_targets, replace=False)))
        per_target = {t: _sample_waveform(rng, ATOM_KINDS[rng.choice(len(ATOM_KINDS))], t, config)
                      for t in targets}
        return AttackSpec("combined", targets, onset, per_target=per_target)
    target = CHANNELS[rng.choice(len(CHANNELS))]
    wf = _sample_waveform(rng, kind, target, config)
    return AttackSpec(kind, (target,), onset, magnitude=wf.magnitude,
                      ramp_rate=wf.ramp_rate, pulse_width=wf.pulse_width,
                      scale_factor=wf.scale_factor)


def corrupt(spec: AttackSpec, target: str, t: float, clean: float) -> float:
    """Value seen on a measurement channel at time t given a clean value."""
    if target not in CHANNELS:
        raise InvalidArgumentError(f"unknown target channel {target!r}")
    if not math.isfinite(t) or not math.isfinite(clean):
        raise InvalidArgumentError("corrupt() needs finite t and clean value")
    wf = spec.channel_waveform(target)
    if wf is None:
        return clean
    if wf.kind not in _KIND_CODES:
        raise InvalidArgumentError(f"unknown attack kind {wf.kind!r}")
    return float(_simcore.corrupt_value(
        _KIND_CODES[wf.kind], spec.onset, wf.magnitude, wf.ramp_rate,
        wf.pulse_width, wf.scale_factor, t, clean))
