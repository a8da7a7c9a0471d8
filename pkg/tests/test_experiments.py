import warnings

import numpy as np
import pytest

from esta.config import RunConfig
from esta.exceptions import DomainError
from esta.experiments import (
    NOT_REACHED, Numerics, SweepResult, SweepRow, compare_truncation, run_case,
    simulate, sweep_tf, threshold_time,
)
from esta.models import make_model


# -- threshold time ----------------------------------------------------------

def test_threshold_all_ones_gives_first_point():
    t = np.arange(1.0, 6.0)
    assert threshold_time((t, np.ones(5))) == 1.0


def test_threshold_monotone_crossing_gives_first_point_above():
    t = np.array([1.0, 2.0, 3.0, 4.0])
    F = np.array([0.5, 0.98, 0.991, 0.999])
    assert threshold_time((t, F)) == 3.0


def test_threshold_requires_staying_above():
    t = np.arange(1.0, 7.0)
    F = np.array([0.995, 0.999, 0.98, 0.995, 0.999, 1.0])
    assert threshold_time((t, F)) == 4.0


def test_threshold_not_reached():
    t = np.arange(1.0, 4.0)
    assert threshold_time((t, [0.995, 0.999, 0.9])) is NOT_REACHED


def test_threshold_reads_sweep_columns():
    rows = [SweepRow(1.0, F_sta=0.5, F_esta=0.995), SweepRow(2.0, F_sta=0.995, F_esta=0.999)]
    sweep = SweepResult(rows, {})
    assert threshold_time(sweep) == 1.0
    assert threshold_time(sweep, column="F_sta") == 2.0


def test_threshold_rejects_unsorted():
    with pytest.raises(DomainError):
        threshold_time(([2.0, 1.0], [1.0, 1.0]))


# -- single runs -----------------------------------------------------------

def test_run_case_rejects_unknown_selector():
    with pytest.raises(DomainError):
        run_case(RunConfig(case="two_level"), "grape", 20.0)


def test_sta_is_exact_on_idealized_transport():
    config = RunConfig(case="single_transport", d=50.0)
    out = run_case(config, "sta", 15.0)
    assert abs(out["F_idealized"] - 1.0) < 1e-8


def test_esta_beats_sta_on_short_transport():
    config = RunConfig(case="single_transport")
    sta = run_case(config, "sta", 16.0)
    esta = run_case(config, "esta", 16.0)
    assert esta["F_system"] > sta["F_system"] + 0.03
    assert esta["F_idealized"] < 1.0 - 1e-6
    assert esta["diagnostics"]["fidelity_estimate"] < 1.0


def test_comoving_and_lab_frames_agree():
    # the two frames discretize differently; both converge as dt^2
    model = make_model("single_transport", a=300.0, d=20.0)
    scheme = model.sta_scheme(6.0)
    comoving = simulate(model, scheme, "system", Numerics(frame="comoving", dt=5e-4))
    lab = simulate(model, scheme, "system", Numerics(frame="lab", dt=5e-4))
    assert 0.5 < comoving < 0.99
    assert abs(comoving - lab) < 1e-7


# -- sweeps ----------------------------------------------------------------

def test_zero_anharmonicity_sweep_is_perfect():
    config = RunConfig(case="single_transport", a=np.inf, d=30.0, tf_grid=[10.0, 14.0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        sweep = sweep_tf(config)
    for name in ("F_sta", "F_esta", "F_esta_idealized", "F_sta_idealized"):
        assert np.allclose(sweep.column(name), 1.0, atol=1e-8), name
    for row in sweep.rows:
        assert row.epsilon == [0.0] * 6
        assert row.diagnostics["fidelity_estimate"] == 1.0


def test_two_level_sweep_invariants():
    config = RunConfig(case="two_level", tf_min=6 * np.pi, tf_max=30 * np.pi, tf_steps=4)
    sweep = sweep_tf(config)
    assert np.array_equal(sweep.t_f, config.tf_values())
    assert np.allclose(sweep.column("F_sta_idealized"), 1.0, atol=1e-8)
    assert np.all(sweep.column("F_esta") >= sweep.column("F_sta") - 1e-4)
    assert np.all(sweep.column("F_esta_idealized") < 1.0)
    assert all(len(r.epsilon) == 8 for r in sweep.rows)
    assert sweep.metadata["case"] == "two_level"


def test_failed_row_is_recorded_and_sweep_continues(monkeypatch):
    from esta import experiments
    from esta.exceptions import AccuracyError

    real = experiments.simulate

    def flaky(model, scheme, kind, numerics):
        if scheme.t_f == 20.0:
            raise AccuracyError("forced")
        return real(model, scheme, kind, numerics)

    monkeypatch.setattr(experiments, "simulate", flaky)
    sweep = sweep_tf(RunConfig(case="two_level", tf_grid=[19.0, 20.0, 21.0]))
    assert [r.error is None for r in sweep.rows] == [True, False, True]
    assert "forced" in sweep.rows[1].error
    assert np.isnan(sweep.rows[1].F_sta)
    assert np.isfinite(sweep.rows[2].F_esta)


def test_sweep_rejects_unsorted_grid():
    with pytest.raises(DomainError):
        sweep_tf(RunConfig(case="two_level"), tf_grid=[3.0, 2.0])


# -- truncation ------------------------------------------------------------

def test_truncation_deviation_small_for_transport():
    low, high, dev = compare_truncation(RunConfig(case="single_transport"), 20.0)
    assert dev < 1e-3
    assert np.linalg.norm(low) > 0


def test_truncation_zero_anharmonicity_gives_zero_corrections():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        low, high, _ = compare_truncation(RunConfig(case="single_transport", a=np.inf), 20.0)
    assert np.all(low == 0) and np.all(high == 0)


def test_two_level_truncation_is_exact():
    low, high, dev = compare_truncation(RunConfig(case="two_level"), 20.0, n_low=1, n_high=1)
    assert np.array_equal(low, high) and dev == 0


def test_finite_difference_gradient_vanishes_at_zero_anharmonicity():
    from esta.experiments import finite_difference_gradient

    model = make_model("single_transport", a=np.inf, d=20.0)
    F0, grad = finite_difference_gradient(model, 10.0, numerics=Numerics())
    assert abs(F0 - 1.0) < 1e-8
    # F = 1 is the maximum, so only O(h^2) terms remain
    assert np.max(np.abs(grad)) < 1e-6
