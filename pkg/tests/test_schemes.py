import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from esta.exceptions import DomainError
from esta.schemes import (TRANSPORT_DIM, TransportTrajectory, TwoLevelScheme, build_scheme,
                          correction_interpolant, design_qc, knot_basis, knot_interpolant,
                          q0_from_qc, sta_lambda, sta_pulse)


def test_pulse_values_at_special_times():
    t_f = 7.0
    rabi, detuning = sta_pulse(np.array([0.0, t_f / 2, t_f]), t_f)
    assert rabi == pytest.approx(np.pi / t_f * np.array([1.0, np.sqrt(17.0), 1.0]))
    assert detuning == pytest.approx([0.0, 0.0, 0.0], abs=1e-14)


def test_pulse_detuning_against_symbolic_formula():
    t, T = sp.symbols("t T", positive=True)
    s = sp.sin(sp.pi * t / T)
    expr = -8 * sp.pi / T * s * sp.sin(2 * sp.pi * t / T) * (1 + 4 * s**6) / (1 + 16 * s**6)
    f = sp.lambdify((t, T), expr, "numpy")
    ts = np.linspace(0.0, 3.0, 11)
    assert sta_pulse(ts, 3.0)[1] == pytest.approx(f(ts, 3.0), rel=1e-13, abs=1e-14)


def test_pulse_rejects_times_outside_protocol():
    with pytest.raises(DomainError):
        sta_pulse(1.5, 1.0)
    with pytest.raises(DomainError):
        sta_pulse(0.5, -1.0)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=8), st.floats(0.5, 500))
@settings(max_examples=40, deadline=None)
def test_knot_interpolant_hits_knots_and_ends(values, t_f):
    p = knot_interpolant(values, t_f)
    knots = np.arange(1, len(values) + 1) * t_f / (len(values) + 1)
    assert p(knots) == pytest.approx(values, abs=1e-9)
    assert p(np.array([0.0, t_f])) == pytest.approx([0.0, 0.0], abs=1e-9)
    assert p.degree() <= len(values) + 1


def test_correction_interpolant_needs_four_values():
    with pytest.raises(DomainError):
        correction_interpolant([1.0, 2.0, 3.0], 1.0)


def test_knot_basis_is_lagrange_like():
    basis = knot_basis(6, 3.0)
    knots = np.arange(1, 7) * 3.0 / 7
    values = np.array([[p(k) for k in knots] for p in basis])
    assert values == pytest.approx(np.eye(6), abs=1e-10)


def test_qc_matches_symbolic_boundary_value_solution():
    s, d = sp.symbols("s d")
    c = sp.symbols("c0:10")
    poly = sum(ci * s**i for i, ci in enumerate(c))
    eqs = [poly.subs(s, 0), poly.subs(s, 1) - d]
    eqs += [sp.diff(poly, s, k).subs(s, e) for k in range(1, 5) for e in (0, 1)]
    sol = sp.solve(eqs, c)
    ref = sp.lambdify((s, d), poly.subs(sol), "numpy")
    t_f, dist = 12.0, 1562.0
    t = np.linspace(0, t_f, 25)
    assert design_qc(t_f, dist)(t) == pytest.approx(ref(t / t_f, dist), rel=1e-12, abs=1e-9)


def test_qc_boundary_conditions():
    qc = design_qc(20.0, 100.0)
    assert qc(0.0) == pytest.approx(0.0, abs=1e-12)
    assert qc(20.0) == pytest.approx(100.0)
    assert qc(10.0) == pytest.approx(50.0)
    for k in range(1, 5):
        assert qc.deriv(k)(np.array([0.0, 20.0])) == pytest.approx([0.0, 0.0], abs=1e-9)


@pytest.mark.parametrize("omega", [1.0, np.sqrt(2.0)])
def test_q0_satisfies_auxiliary_equation(omega):
    qc = design_qc(15.0, 40.0)
    q0 = q0_from_qc(qc, omega)
    t = np.linspace(0, 15, 31)
    residual = qc.deriv(2)(t) + omega**2 * (qc(t) - q0(t))
    assert np.max(np.abs(residual)) < 1e-10
    # trap starts and ends at the wavepacket position
    assert q0(np.array([0.0, 15.0])) == pytest.approx([0.0, 40.0], abs=1e-9)


def test_transport_trajectory_control_vector_round_trip(rng):
    base = TransportTrajectory.sta(10.0, 50.0)
    eps = rng.normal(size=TRANSPORT_DIM)
    traj = base.with_correction(eps)
    assert traj.epsilon == pytest.approx(eps)
    assert traj.lam == pytest.approx(base.lambda0 + eps)
    rebuilt = build_scheme("single_transport", traj.lam, 10.0, d=50.0)
    t = np.linspace(0, 10, 17)
    assert rebuilt.q0(t) == pytest.approx(traj.q0(t))
    assert sta_lambda("single_transport", 10.0, 50.0) == pytest.approx(base.lambda0)


def test_two_level_scheme_correction_is_added():
    eps = np.arange(1.0, 9.0)
    scheme = TwoLevelScheme(5.0, eps)
    knots = np.arange(1, 5) * 5.0 / 5
    rabi0, det0 = sta_pulse(knots, 5.0)
    rabi, det = scheme.controls(knots)
    assert rabi - rabi0 == pytest.approx(eps[:4])
    assert det - det0 == pytest.approx(eps[4:])
    assert scheme.epsilon.flags.writeable is False


@pytest.mark.parametrize("case, lam", [("two_level", np.zeros(7)), ("single_transport", np.zeros(8)),
                                       ("nope", np.zeros(6))])
def test_build_scheme_rejects_bad_inputs(case, lam):
    with pytest.raises(DomainError):
        build_scheme(case, lam, 1.0, d=1.0)


def test_transport_scheme_needs_distance():
    with pytest.raises(DomainError):
        build_scheme("two_ion", np.zeros(6), 1.0)
