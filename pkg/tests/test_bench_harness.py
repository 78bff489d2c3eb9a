import math

import pytest

from src.modules.array_model import Scenario
from src.modules.doa_errors import LengthMismatch
from src.modules.estimate_report import Method, Status
from src.modules.bench_harness import (
    SweepAxis,
    SweepSpec,
    TrialRecord,
    aggregate,
    builtin_scenarios,
    collect_records,
    matched_mse,
    run_sweep,
    trial_scenario,
)
from src.modules.trial_seeding import SeedError, derive_trial_seed, make_rng


def tiny_spec(**overrides) -> SweepSpec:
    fields = dict(
        name="tiny",
        base=Scenario(m=8, doas=(-0.9, 0.9), amplitudes=(1.0, 1.0)),
        axis=SweepAxis.SNR_DB,
        values=(10.0, 20.0),
        trials=2,
        methods=(Method.CLASSO, Method.RELAX),
        master_seed=3,
    )
    fields.update(overrides)
    return SweepSpec(**fields)


# ============================================================
# matched MSE
# ============================================================

def test_matched_mse_examples():
    assert matched_mse([1.1, 0.2], [0.0, 1.0]) == pytest.approx(0.025)
    assert matched_mse([3.1], [-3.1]) == pytest.approx((2 * math.pi - 6.2) ** 2)
    assert matched_mse([], []) == 0.0


def test_matched_mse_is_permutation_invariant():
    truth = [0.0, 1.0, -2.0]
    assert matched_mse([1.01, -2.0, 0.02], truth) == matched_mse([0.02, 1.01, -2.0], truth)


def test_matched_mse_length_checks():
    with pytest.raises(LengthMismatch):
        matched_mse([0.1], [0.1, 0.2])
    with pytest.raises(LengthMismatch):
        matched_mse([0.0] * 7, [0.0] * 7)


# ============================================================
# seeding
# ============================================================

def test_trial_seeds_are_deterministic_and_distinct():
    assert derive_trial_seed(0, 10, 3) == derive_trial_seed(0, 10.0, 3)
    assert derive_trial_seed(0, 10.0, 3) != derive_trial_seed(0, 10.0, 4)
    assert derive_trial_seed(0, 10.0, 3) != derive_trial_seed(1, 10.0, 3)


def test_rng_streams_repeat():
    assert make_rng(9).standard_normal(4).tolist() == make_rng(9).standard_normal(4).tolist()
    with pytest.raises(SeedError):
        make_rng(-1)


def test_trial_scenario_sets_noise_or_separation():
    spec = tiny_spec()
    scenario = trial_scenario(spec, 20.0, 0)
    assert scenario.noise_std == pytest.approx(0.1)
    assert scenario.seed == derive_trial_seed(3, 20.0, 0)

    sep = tiny_spec(axis=SweepAxis.SEPARATION, values=(0.5,), base=Scenario(m=8, doas=(0.2, 0.0), amplitudes=(1, 1), noise_std=0.1))
    scenario = trial_scenario(sep, 0.5, 1)
    assert scenario.doas == pytest.approx((0.2, 0.7))
    assert scenario.noise_std == 0.1


# ============================================================
# aggregation
# ============================================================

def record(value, method, trial, status, mse):
    return TrialRecord(value, method, trial, status, mse, 0.001)


def test_aggregate_excludes_undefined_trials():
    records = [
        record(0.0, Method.CLASSO, 0, Status.CONVERGED, 0.1),
        record(0.0, Method.CLASSO, 1, Status.UNDEFINED, math.nan),
        record(0.0, Method.CLASSO, 2, Status.CONVERGED, 0.3),
        record(0.0, Method.RELAX, 0, Status.FAILED, math.nan),
        record(0.0, Method.RELAX, 1, Status.UNDEFINED, math.nan),
    ]
    rows = aggregate(records, (Method.CLASSO, Method.RELAX))
    assert [row.method for row in rows] == [Method.CLASSO, Method.RELAX]

    classo_row, relax_row = rows
    assert classo_row.mse == pytest.approx(0.2)
    assert classo_row.undefined_rate == pytest.approx(1 / 3)
    assert classo_row.trials_used == 2
    assert classo_row.mean_wall_time_ms == pytest.approx(1.0)
    assert math.isnan(relax_row.mse)
    assert relax_row.undefined_rate == 1.0
    assert relax_row.trials_used == 0


def test_noiseless_single_trial_is_exact():
    spec = tiny_spec(
        base=Scenario(m=15, doas=(0.7,), amplitudes=(1.0,)),
        values=(300.0,),
        trials=1,
        methods=(Method.CLASSO, Method.ML),
    )
    rows = run_sweep(spec, workers=1)
    assert len(rows) == 2
    for row in rows:
        assert row.trials_used == 1
        assert row.mse < 1e-12


def test_sweep_is_deterministic_and_ordered():
    spec = tiny_spec()
    first = collect_records(spec, workers=1)
    second = collect_records(spec, workers=1)
    assert [(r.axis_value, r.method, r.trial, r.status, repr(r.mse)) for r in first] == [
        (r.axis_value, r.method, r.trial, r.status, repr(r.mse)) for r in second
    ]
    keys = [(r.axis_value, r.method, r.trial) for r in first]
    assert keys == [
        (v, m, t) for v in spec.values for m in spec.methods for t in range(spec.trials)
    ]


def test_worker_count_does_not_change_results():
    spec = tiny_spec(trials=1)
    serial = collect_records(spec, workers=1)
    parallel = collect_records(spec, workers=2)
    assert [(r.axis_value, r.method, r.status, repr(r.mse)) for r in serial] == [
        (r.axis_value, r.method, r.status, repr(r.mse)) for r in parallel
    ]


# ============================================================
# specs
# ============================================================

def test_builtin_scenarios():
    specs = builtin_scenarios(trials=7, master_seed=2)
    assert set(specs) == {"fig1", "fig2", "fig3"}

    fig1 = specs["fig1"]
    assert fig1.base.m == 15
    assert fig1.base.doas == pytest.approx((0.0, 4 * math.pi / 15))
    assert fig1.values[0] == 0.0 and fig1.values[-1] == 30.0
    assert fig1.trials == 7 and fig1.master_seed == 2
    assert set(fig1.methods) == {Method.CLASSO, Method.CLASSO_H, Method.ML, Method.RELAX}

    fig2 = specs["fig2"]
    assert fig2.axis is SweepAxis.SEPARATION
    assert fig2.values[0] == pytest.approx(math.pi / 30)
    assert fig2.values[-1] == pytest.approx(8 * math.pi / 15)
    assert fig2.base.snr_db() == pytest.approx(10.0)

    fig3 = specs["fig3"]
    assert fig3.base.amplitudes == (1.0, 1.0, 0.1j)
    assert fig3.values == (5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)
    assert fig3.mu == 0.8


@pytest.mark.parametrize(
    "overrides",
    [
        {"trials": 0},
        {"values": ()},
        {"values": (20.0, 10.0)},
        {"methods": ()},
        {"methods": ("music",)},
        {"axis": SweepAxis.SEPARATION, "base": Scenario(m=8, doas=(0.0,), amplitudes=(1.0,))},
    ],
)
def test_invalid_sweep_specs(overrides):
    with pytest.raises(ValueError):
        tiny_spec(**overrides)


def test_spec_options_carry_model_order():
    opts = tiny_spec(mu=0.9).options()
    assert opts.n == 2
    assert opts.mu == 0.9
    assert opts.time_budget_s is not None
