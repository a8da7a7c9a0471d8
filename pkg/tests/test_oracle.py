from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import Polynomial

from esta.engine import esta_integrals, fidelity_estimate, gradient_estimate
from esta.exceptions import DomainError, UnsupportedOrderError
from esta.models import SingleTransportModel, make_model
from esta.modes import TransportModes
from esta.oracle import F2, PerturbativeTerms, alpha, beta, gradF1


@pytest.fixture(scope="module")
def terms():
    return PerturbativeTerms(make_model("single_transport", a=1e6), 20.0, n_modes=3)


@given(st.integers(1, 2), st.integers(0, 3), st.integers(0, 3), st.floats(0, 20))
@settings(max_examples=30, deadline=None)
def test_alpha_hermitian(j, n, m, t):
    T = PerturbativeTerms(make_model("single_transport", a=1e6), 20.0, n_modes=3)
    assert T.alpha(j, n, m, t) == pytest.approx(np.conj(T.alpha(j, m, n, t)), rel=1e-10, abs=1e-8)


@given(st.integers(0, 1), st.integers(0, 3), st.floats(0, 20))
@settings(max_examples=20, deadline=None)
def test_beta_hermitian_and_real_diagonal(j, n, t):
    T = PerturbativeTerms(make_model("single_transport", a=1e6), 20.0, n_modes=3)
    b = T.beta(j, n, 0, t)
    assert b == pytest.approx(np.conj(T.beta(j, 0, n, t)), rel=1e-10, abs=1e-8)
    assert np.max(np.abs(np.imag(T.beta(j, n, n, t)))) <= 1e-9 * max(1, np.max(np.abs(b)))


def test_alpha_against_grid_integration(terms):
    t = 7.0
    scheme = terms.scheme
    modes = TransportModes(scheme)
    x = scheme.qc(t) + np.linspace(-15, 15, 12001)
    h1 = -0.5 * (0.5 * (x - scheme.q0(t)) ** 2) ** 2
    ref = np.trapezoid(np.conj(modes.wavefunction(1, x, t)) * h1 * modes.wavefunction(0, x, t), x)
    assert terms.alpha(1, 1, 0, t) == pytest.approx(ref, rel=1e-8)


def test_expansion_coefficient_signs(terms):
    assert terms.F2 <= 0
    assert terms.u1.real == 0.0
    with pytest.raises(UnsupportedOrderError):
        terms.alpha(3, 1, 0, 1.0)
    with pytest.raises(UnsupportedOrderError):
        alpha(0, 1, 0, 1.0, terms.model, 20.0)
    with pytest.raises(UnsupportedOrderError):
        terms.fidelity_series(order=4)


def test_oracle_matches_engine_to_expected_order(terms):
    mu = terms.model.mu
    G, K = esta_integrals(terms.model, terms.scheme, 3)
    # with only the first-order gap, the estimate is exactly the series
    first = mu * terms.integrals["alpha1"][1:]
    assert fidelity_estimate(first) == pytest.approx(terms.fidelity_series(order=2), abs=1e-14)
    err2 = abs(fidelity_estimate(G) - terms.fidelity_series(order=2))
    err3 = abs(fidelity_estimate(G) - terms.fidelity_series(order=3))
    assert err2 <= 2 * mu**3 * abs(terms.F3_approx)
    assert err3 < 1e-2 * err2
    grad = gradient_estimate(G, K)
    err1 = np.max(np.abs(terms.gradient_series(order=1) - grad))
    err2 = np.max(np.abs(terms.gradient_series(order=2) - grad))
    assert err1 <= 2 * mu**2 * np.max(np.abs(terms.gradF2_approx))
    assert err2 < 1e-2 * err1


def test_two_ion_oracle_runs():
    T = PerturbativeTerms(make_model("two_ion"), 10.0)
    G, K = esta_integrals(T.model, T.scheme)
    assert fidelity_estimate(G) == pytest.approx(T.fidelity_series(order=3), abs=1e-5)


def test_module_level_helpers(terms):
    assert F2(terms.model, 20.0, 3) == pytest.approx(terms.F2)
    assert gradF1(terms.model, 20.0, 3) == pytest.approx(terms.gradF1)
    assert beta(0, 1, 0, 2.0, terms.model, 20.0) == pytest.approx(terms.beta(0, 1, 0, 2.0))


def test_two_level_not_supported():
    with pytest.raises(DomainError):
        PerturbativeTerms(make_model("two_level"), 10.0)


@dataclass(frozen=True)
class _Static:
    """Trajectory that keeps trap and wavepacket at rest at the origin."""

    t_f: float

    @property
    def qc(self):
        return Polynomial([0.0], domain=[0, self.t_f], window=[0, 1])

    def q0(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))


class _StaticTerms(PerturbativeTerms):
    def __init__(self, model, t_f, n_modes):
        self.model, self.t_f, self.n_modes, self.rtol = model, t_f, n_modes, 1e-10
        self.scheme = _Static(t_f)
        self.modes = TransportModes(self.scheme)
        from esta.schemes import knot_basis
        self._basis = knot_basis(6, t_f)


def test_static_trap_has_no_odd_contributions():
    T = _StaticTerms(SingleTransportModel(a=1e3, d=1.0), 5.0, 4)
    A1 = T.integrals["alpha1"]
    assert np.abs(A1[[1, 3]]) == pytest.approx([0, 0], abs=1e-12)
    assert abs(A1[2]) > 1e-3


class _FlippedModel(SingleTransportModel):
    def mu_term(self, n, y):
        return -super().mu_term(n, y) if n == 2 else super().mu_term(n, y)


def test_F3_is_linear_in_second_order_term():
    T = PerturbativeTerms(make_model("single_transport", a=1e6), 20.0)
    flipped = PerturbativeTerms(_FlippedModel(a=1e6), 20.0)
    assert flipped.F3_approx == pytest.approx(-T.F3_approx)
    assert flipped.F2 == pytest.approx(T.F2)
