"""STA baseline protocols and their knot-parameterized corrections.

Natural units are used throughout (hbar = m = omega = 1). Polynomials are
``numpy.polynomial.Polynomial`` objects whose domain is ``[0, t_f]`` and whose
window is ``[0, 1]``; the monomial basis in scaled time keeps the degree-9
transport polynomial well conditioned for long protocols.
"""

from dataclasses import dataclass
from math import factorial

import numpy as np
from numpy.polynomial import Polynomial

from .exceptions import DomainError
from .utils import check_control_vector, check_nonnegative, check_positive, check_times

CASES = ("two_level", "single_transport", "two_ion")

TWO_LEVEL_DIM = 8
TRANSPORT_DIM = 6


def sta_pulse(t, t_f):
    """Robust STA population-inversion pulse.

    Returns the Rabi frequency and detuning ``(Omega, delta)`` of the
    baseline protocol at times ``t``.
    """
    t_f = check_positive(t_f, "t_f")
    t = check_times(t, t_f)
    s = np.sin(np.pi * t / t_f)
    s6 = s**6
    rate = np.pi / t_f
    rabi = rate * np.sqrt(1.0 + 16.0 * s6)
    detuning = (-8.0 * rate * s * np.sin(2.0 * np.pi * t / t_f)
                * (1.0 + 4.0 * s6) / (1.0 + 16.0 * s6))
    return rabi, detuning


def knot_interpolant(knot_values, t_f):
    """Minimal polynomial vanishing at 0 and ``t_f`` through equispaced knots.

    With ``n`` knot values the knots sit at ``j * t_f / (n + 1)``,
    ``j = 1..n``, and the result has degree ``n + 1``.
    """
    t_f = check_positive(t_f, "t_f")
    values = np.asarray(knot_values, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise DomainError("knot_values must be a non-empty 1-D sequence")
    n = values.size
    s = np.linspace(0.0, 1.0, n + 2)
    rhs = np.concatenate(([0.0], values, [0.0]))
    vander = np.vander(s, n + 2, increasing=True)
    coef = np.linalg.solve(vander, rhs)
    return Polynomial(coef, domain=[0.0, t_f], window=[0.0, 1.0])


def correction_interpolant(knot_values, t_f):
    """Degree-5 correction through four interior knots at ``j * t_f / 5``."""
    values = np.asarray(knot_values, dtype=float)
    if values.shape != (4,):
        raise DomainError(f"expected exactly 4 knot values, got shape {values.shape}")
    return knot_interpolant(values, t_f)


def knot_basis(n_knots, t_f):
    """The ``n_knots`` Lagrange-type basis polynomials of :func:`knot_interpolant`."""
    return [knot_interpolant(np.eye(n_knots)[j], t_f) for j in range(n_knots)]


def design_qc(t_f, d):
    """Degree-9 wavepacket trajectory with ``q_c(0)=0``, ``q_c(t_f)=d``.

    Derivatives one through four vanish at both ends.
    """
    t_f = check_positive(t_f, "t_f")
    d = check_nonnegative(d, "d")
    deg = 9
    rows, rhs = [], []
    for end, value in ((0.0, 0.0), (1.0, d)):
        for order in range(5):
            row = np.zeros(deg + 1)
            for k in range(order, deg + 1):
                row[k] = factorial(k) // factorial(k - order) * end ** (k - order)
            rows.append(row)
            rhs.append(value if order == 0 else 0.0)
    coef = np.linalg.solve(np.array(rows), np.array(rhs))
    return Polynomial(coef, domain=[0.0, t_f], window=[0.0, 1.0])


def q0_from_qc(qc, omega=1.0):
    """Trap trajectory from the auxiliary equation, ``q_0 = q_c + q_c'' / omega**2``."""
    omega = check_positive(omega, "omega")
    return qc + qc.deriv(2) / omega**2


@dataclass(frozen=True)
class TwoLevelScheme:
    """Rabi frequency and detuning of a (possibly corrected) inversion pulse."""

    t_f: float
    epsilon: np.ndarray

    def __post_init__(self):
        check_positive(self.t_f, "t_f")
        eps = check_control_vector(self.epsilon, TWO_LEVEL_DIM, "epsilon")
        eps.setflags(write=False)
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "_f1", correction_interpolant(eps[:4], self.t_f))
        object.__setattr__(self, "_f2", correction_interpolant(eps[4:], self.t_f))

    case = "two_level"

    @property
    def lam(self):
        return self.epsilon

    def controls(self, t):
        """Return ``(Omega(t), delta(t))``."""
        rabi, detuning = sta_pulse(t, self.t_f)
        t = np.asarray(t, dtype=float)
        return rabi + self._f1(t), detuning + self._f2(t)

    def rabi(self, t):
        return self.controls(t)[0]

    def detuning(self, t):
        return self.controls(t)[1]


@dataclass(frozen=True)
class TransportTrajectory:
    """Trap trajectory ``q_0(t) = q_0^STA(t) + g(t)`` for harmonic transport.

    ``qc`` is the STA wavepacket path, ``q0_base`` follows from it through the
    auxiliary equation with trap frequency ``omega``, and ``correction`` is the
    knot interpolant ``g`` (identically zero for the STA baseline).
    """

    t_f: float
    d: float
    omega: float
    qc: Polynomial
    q0_base: Polynomial
    correction: Polynomial

    case = "transport"

    @classmethod
    def sta(cls, t_f, d, omega=1.0):
        qc = design_qc(t_f, d)
        q0 = q0_from_qc(qc, omega)
        zero = Polynomial([0.0], domain=[0.0, t_f], window=[0.0, 1.0])
        return cls(float(t_f), float(d), float(omega), qc, q0, zero)

    def with_correction(self, epsilon):
        eps = check_control_vector(epsilon, TRANSPORT_DIM, "epsilon")
        return TransportTrajectory(self.t_f, self.d, self.omega, self.qc,
                                   self.q0_base, knot_interpolant(eps, self.t_f))

    @property
    def knots(self):
        return np.arange(1, TRANSPORT_DIM + 1) * self.t_f / (TRANSPORT_DIM + 1)

    @property
    def lam(self):
        return self.q0(self.knots)

    @property
    def lambda0(self):
        return self.q0_base(self.knots)

    @property
    def epsilon(self):
        return self.correction(self.knots)

    def q0(self, t):
        return self.q0_base(t) + self.correction(t)

    def offset(self, t):
        """Trap centre relative to the wavepacket path, ``q_0(t) - q_c(t)``."""
        return self.q0(t) - self.qc(t)


def sta_lambda(case, t_f, d=None, omega=1.0):
    """Control vector of the STA baseline for ``case``."""
    if case == "two_level":
        return np.zeros(TWO_LEVEL_DIM)
    if case in ("single_transport", "two_ion"):
        return TransportTrajectory.sta(t_f, d, omega).lambda0
    raise DomainError(f"unknown case {case!r}; expected one of {CASES}")


def build_scheme(case, lam, t_f, d=None, omega=1.0):
    """Evaluable control functions for control vector ``lam``.

    For ``two_level`` the vector holds the eight knot offsets of the Rabi
    frequency and detuning (the baseline is the zero vector). For the
    transport cases it holds the trap positions ``q_0(j t_f / 7)``,
    ``j = 1..6``; ``omega`` is the trap (centre-of-mass) frequency used in the
    auxiliary equation.
    """
    t_f = check_positive(t_f, "t_f")
    if case == "two_level":
        return TwoLevelScheme(t_f, check_control_vector(lam, TWO_LEVEL_DIM, "lambda"))
    if case in ("single_transport", "two_ion"):
        if d is None:
            raise DomainError("transport schemes need the distance d")
        lam = check_control_vector(lam, TRANSPORT_DIM, "lambda")
        base = TransportTrajectory.sta(t_f, d, omega)
        return base.with_correction(lam - base.lambda0)
    raise DomainError(f"unknown case {case!r}; expected one of {CASES}")
