import math

import numpy as np
import pytest

from agckan.attacks import AttackSpec
from agckan.errors import InvalidArgumentError
from agckan.simulator import (
    AreaParams,
    DisturbanceEvent,
    SimConfig,
    compute_ace,
    apply_gdb,
    apply_grc,
    export_trace_csv,
    simulate,
)


class TestComputeAce:
    def test_equilibrium(self):
        assert compute_ace(0.0, 0.0, 0.425) == 0.0

    def test_direct_arithmetic(self):
        assert compute_ace(0.1, -0.2, 0.425) == pytest.approx(0.015)
        assert compute_ace(-0.05, 0.1, 0.425) == pytest.approx(-0.0075)

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidArgumentError):
            compute_ace(float("nan"), 0.0, 0.425)
        with pytest.raises(InvalidArgumentError):
            compute_ace(0.0, float("inf"), 0.425)


class TestApplyGdb:
    def test_inside_band(self):
        assert apply_gdb(0.0002, 0.0006) == 0.0

    def test_outside_band(self):
        assert apply_gdb(0.001, 0.0006) == pytest.approx(0.0004)
        assert apply_gdb(-0.002, 0.0006) == pytest.approx(-0.0014)

    def test_odd_function(self):
        for x in np.linspace(-0.01, 0.01, 41):
            assert apply_gdb(-x, 0.0006) == pytest.approx(-apply_gdb(x, 0.0006))

    def test_zero_on_band(self):
        for x in np.linspace(-0.0006, 0.0006, 11):
            assert apply_gdb(float(x), 0.0006) == 0.0

    def test_negative_band_rejected(self):
        with pytest.raises(InvalidArgumentError):
            apply_gdb(0.1, -0.1)


class TestApplyGrc:
    def test_clamped_rise(self):
        assert apply_grc(0.0, 0.01, 0.0005, 0.2) == pytest.approx(0.0001)

    def test_no_change_requested(self):
        assert apply_grc(0.5, 0.5, 0.0005, 0.2) == 0.5

    def test_clamped_fall(self):
        assert apply_grc(0.1, 0.0, 0.0005, 0.2) == pytest.approx(0.0999)

    def test_idempotent_at_fixed_point(self):
        for p in (0.0, -0.3, 0.7):
            assert apply_grc(p, p, 0.001, 0.1) == p

    def test_invalid_args(self):
        with pytest.raises(InvalidArgumentError):
            apply_grc(0.0, 0.1, 0.0, 0.1)
        with pytest.raises(InvalidArgumentError):
            apply_grc(0.0, 0.1, 0.001, 0.0)


class TestSimulate:
    def test_zero_input_equilibrium(self):
        sample = simulate(SimConfig(), [], None, 0)
        assert sample.values.shape == (3, 300)
        assert np.max(np.abs(sample.values)) == 0.0

    def test_load_step_settles(self):
        dist = [DisturbanceEvent(area=0, onset=5.0, magnitude=0.01)]
        sample = simulate(SimConfig(), dist, None, 0)
        df1 = sample.values[1]
        assert df1.min() < 0  # frequency dips after the step
        ace_end = compute_ace(sample.values[0, -1], df1[-1], 0.425)
        assert abs(ace_end) < 1e-3

    def test_determinism(self):
        dist = [DisturbanceEvent(area=1, onset=8.0, magnitude=-0.02)]
        a = simulate(SimConfig(), dist, None, 3)
        b = simulate(SimConfig(), dist, None, 3)
        assert np.array_equal(a.values, b.values)

    def test_twin_runs_equal_before_onset(self):
        dist = [DisturbanceEvent(area=0, onset=5.0, magnitude=0.01)]
        atk = AttackSpec(kind="ramp", targets=("df2",), onset=20.0,
                         magnitude=0.05, ramp_rate=0.005)
        attacked = simulate(SimConfig(), dist, atk, 0)
        clean = simulate(SimConfig(), dist, None, 0)
        t = (np.arange(300) + 1) * 0.2
        pre = t < 20.0
        assert np.array_equal(attacked.values[:, pre], clean.values[:, pre])
        assert np.max(np.abs(attacked.values[2] - clean.values[2])) > 1e-4

    def test_label_matches_attack(self):
        atk = AttackSpec(kind="step", targets=("df1",), onset=10.0, magnitude=0.1)
        assert simulate(SimConfig(), [], atk, 0).label == 1
        assert simulate(SimConfig(), [], None, 0).label == 0

    def test_grc_bound_on_turbine(self):
        dist = [DisturbanceEvent(area=0, onset=2.0, magnitude=0.05)]
        cfg = SimConfig()
        _, internals = simulate(cfg, dist, None, 0, return_internals=True)
        turb = internals["turbine_outputs"]
        lim = cfg.area1.grc_limit * cfg.record_dt + 1e-12
        assert np.max(np.abs(np.diff(turb, axis=1))) <= lim


class TestValidation:
    def test_bad_internal_dt(self):
        cfg = SimConfig(internal_dt=0.3)
        with pytest.raises(InvalidArgumentError):
            cfg.validate()

    def test_nondivisible_dt(self):
        cfg = SimConfig(internal_dt=0.03)
        with pytest.raises(InvalidArgumentError):
            cfg.validate()

    def test_disturbance_bounds(self):
        with pytest.raises(InvalidArgumentError):
            DisturbanceEvent(area=2, onset=1.0)
        with pytest.raises(InvalidArgumentError):
            DisturbanceEvent(area=0, onset=1.0, magnitude=0.2)
        with pytest.raises(InvalidArgumentError):
            DisturbanceEvent(area=0, onset=-1.0)

    def test_area_params_validate(self):
        with pytest.raises(InvalidArgumentError):
            AreaParams(governor_time_constant=0.0).validate()

    def test_config_roundtrip(self, tmp_path):
        cfg = SimConfig()
        path = tmp_path / "sim.json"
        import json
        path.write_text(json.dumps(cfg.to_dict()))
        loaded = SimConfig.from_file(str(path))
        assert loaded.to_dict() == cfg.to_dict()


class TestTraceExport:
    def test_csv_format(self, tmp_path):
        dist = [DisturbanceEvent(area=0, onset=5.0, magnitude=0.01)]
        sample = simulate(SimConfig(), dist, None, 0)
        path = tmp_path / "trace.csv"
        export_trace_csv(sample, str(path))
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "t,dp_tie,df1,df2"
        assert len(lines) == 301
        first = lines[1].split(",")
        assert float(first[0]) == pytest.approx(0.2)
        assert math.isfinite(float(first[1]))
