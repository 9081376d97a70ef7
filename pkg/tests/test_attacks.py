import numpy as np
import pytest

from agckan.attacks import (
    CHANNELS,
    KINDS,
    AttackConfig,
    AttackSpec,
    corrupt,
    sample_attack_spec,
)
from agckan.errors import InvalidArgumentError


def equal_weights():
    return {k: 0.2 for k in KINDS}


class TestCorrupt:
    def test_step_before_onset_unchanged(self):
        spec = AttackSpec(kind="step", targets=("df1",), onset=20.0, magnitude=0.01)
        assert corrupt(spec, "df1", 10.0, 0.123) == 0.123

    def test_step_after_onset(self):
        spec = AttackSpec(kind="step", targets=("df1",), onset=20.0, magnitude=0.01)
        assert corrupt(spec, "df1", 25.0, 0.1) == pytest.approx(0.11)

    def test_untargeted_channel_unchanged(self):
        spec = AttackSpec(kind="step", targets=("df1",), onset=20.0, magnitude=0.01)
        assert corrupt(spec, "df2", 25.0, 0.1) == 0.1

    def test_ramp_formula(self):
        spec = AttackSpec(kind="ramp", targets=("dp_tie",), onset=10.0,
                          magnitude=0.05, ramp_rate=0.0005)
        assert corrupt(spec, "dp_tie", 30.0, 0.002) == pytest.approx(0.012)

    def test_ramp_cap(self):
        spec = AttackSpec(kind="ramp", targets=("dp_tie",), onset=10.0,
                          magnitude=0.01, ramp_rate=0.0005)
        # 50 s after onset the additive term would be 0.025; capped at 0.01
        assert corrupt(spec, "dp_tie", 60.0, 0.0) == pytest.approx(0.01)

    def test_ramp_monotone_bounded(self):
        spec = AttackSpec(kind="ramp", targets=("df1",), onset=10.0,
                          magnitude=0.05, ramp_rate=0.002)
        adds = [corrupt(spec, "df1", t, 0.0) for t in np.linspace(0, 60, 200)]
        assert all(b >= a - 1e-15 for a, b in zip(adds, adds[1:]))
        assert max(adds) <= 0.05 + 1e-15

    def test_scaling_formula(self):
        spec = AttackSpec(kind="scaling", targets=("df2",), onset=10.0,
                          scale_factor=0.1)
        assert corrupt(spec, "df2", 30.0, 0.02) == pytest.approx(0.022)

    def test_scaling_fixed_point_zero(self):
        spec = AttackSpec(kind="scaling", targets=("df2",), onset=10.0,
                          scale_factor=0.7)
        assert corrupt(spec, "df2", 30.0, 0.0) == 0.0

    def test_pulse_support(self):
        spec = AttackSpec(kind="pulse", targets=("df1",), onset=10.0,
                          magnitude=0.02, pulse_width=5.0)
        assert corrupt(spec, "df1", 9.9, 0.0) == 0.0
        assert corrupt(spec, "df1", 12.0, 0.0) == pytest.approx(0.02)
        assert corrupt(spec, "df1", 15.0, 0.0) == 0.0  # [t0, t0+w)
        assert corrupt(spec, "df1", 20.0, 0.0) == 0.0

    def test_identity_before_onset_all_kinds(self):
        for spec in (
            AttackSpec(kind="step", targets=("df1",), onset=30.0, magnitude=0.1),
            AttackSpec(kind="ramp", targets=("df1",), onset=30.0, magnitude=0.1, ramp_rate=0.01),
            AttackSpec(kind="pulse", targets=("df1",), onset=30.0, magnitude=0.1, pulse_width=3.0),
            AttackSpec(kind="scaling", targets=("df1",), onset=30.0, scale_factor=0.5),
        ):
            for t in (0.0, 10.0, 29.99):
                assert corrupt(spec, "df1", t, 0.37) == 0.37

    def test_unknown_target_rejected(self):
        spec = AttackSpec(kind="step", targets=("df1",), onset=5.0, magnitude=0.1)
        with pytest.raises(InvalidArgumentError):
            corrupt(spec, "voltage", 10.0, 0.0)


class TestAttackSpec:
    def test_onset_bounds(self):
        with pytest.raises(InvalidArgumentError):
            AttackSpec(kind="step", targets=("df1",), onset=-1.0, magnitude=0.1)

    def test_combined_requires_multiple_targets(self):
        with pytest.raises(InvalidArgumentError):
            AttackSpec(kind="combined", targets=("df1",), onset=10.0)

    def test_noncombined_single_target(self):
        with pytest.raises(InvalidArgumentError):
            AttackSpec(kind="step", targets=("df1", "df2"), onset=10.0, magnitude=0.1)

    def test_empty_targets_rejected(self):
        with pytest.raises(InvalidArgumentError):
            AttackSpec(kind="step", targets=(), onset=10.0, magnitude=0.1)

    def test_roundtrip(self):
        spec = AttackSpec(kind="pulse", targets=("dp_tie",), onset=12.0,
                          magnitude=0.03, pulse_width=7.5)
        again = AttackSpec.from_dict(spec.to_dict())
        assert again.to_dict() == spec.to_dict()

    def test_summary_is_one_line(self):
        spec = AttackSpec(kind="step", targets=("df1",), onset=10.0, magnitude=0.1)
        assert "\n" not in spec.summary()
        assert "step" in spec.summary()


class TestSampling:
    def test_degenerate_mixture(self):
        rng = np.random.default_rng(0)
        weights = {k: 0.0 for k in KINDS}
        weights["step"] = 1.0
        cfg = AttackConfig(kind_weights=weights)
        for _ in range(50):
            assert sample_attack_spec(rng, cfg).kind == "step"

    def test_deterministic_given_rng_state(self):
        a = sample_attack_spec(np.random.default_rng(42), AttackConfig())
        b = sample_attack_spec(np.random.default_rng(42), AttackConfig())
        assert a.to_dict() == b.to_dict()

    def test_kind_frequencies_binomial(self):
        rng = np.random.default_rng(1)
        cfg = AttackConfig(kind_weights=equal_weights())
        n = 10_000
        counts = {k: 0 for k in KINDS}
        for _ in range(n):
            counts[sample_attack_spec(rng, cfg).kind] += 1
        sd = (n * 0.2 * 0.8) ** 0.5
        for k in KINDS:
            assert abs(counts[k] - n * 0.2) < 5 * sd

    def test_sampled_specs_satisfy_invariants(self):
        rng = np.random.default_rng(2)
        cfg = AttackConfig()
        for _ in range(2_000):
            spec = sample_attack_spec(rng, cfg)
            assert spec.kind in KINDS
            assert 5.0 <= spec.onset <= 50.0
            assert spec.targets and set(spec.targets) <= set(CHANNELS)
            assert (spec.kind == "combined") == (len(spec.targets) >= 2)
            for target in spec.targets:
                wf = spec.channel_waveform(target)
                if wf.kind == "pulse":
                    assert wf.pulse_width > 0

    def test_config_validation(self):
        with pytest.raises(InvalidArgumentError):
            AttackConfig(additive_range_df=(0.1, 0.1))
        with pytest.raises(InvalidArgumentError):
            AttackConfig(kind_weights={"step": 1.0})
        bad = {k: 0.25 for k in KINDS}
        with pytest.raises(InvalidArgumentError):
            AttackConfig(kind_weights=bad)  # sums to 1.25

    def test_config_roundtrip(self):
        cfg = AttackConfig()
        assert AttackConfig.from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()
