"""Hamiltonians of the three case studies in natural units (hbar = m = omega = 1).

Each case model is an immutable dataclass holding the physical constants.
Transport models also expose the *centre-of-mass effective* potentials used
by the mode expansion: for the two-ion case the relative coordinate is frozen
at its equilibrium value.
"""

from dataclasses import dataclass

import numpy as np

from . import schemes as _schemes
from .exceptions import DomainError, UnsupportedOrderError
from .utils import check_positive

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


# -- two-level -------------------------------------------------------------

def two_level_H(kind, scheme, omega_carrier, t):
    """Two-level Hamiltonian with (``system``) or without (``idealized``)
    the counter-rotating terms ``exp(+-2 i omega t)``.

    ``t`` may be an array; the result then has shape ``t.shape + (2, 2)``.
    """
    t = np.asarray(t, dtype=float)
    rabi, detuning = scheme.controls(t)
    if kind == "system":
        lower = rabi * (1.0 + np.exp(2j * omega_carrier * t))
    elif kind == "idealized":
        lower = rabi.astype(complex)
    else:
        raise DomainError(f"kind must be 'system' or 'idealized', got {kind!r}")
    H = np.empty(t.shape + (2, 2), dtype=complex)
    H[..., 0, 0] = -0.5 * detuning
    H[..., 1, 1] = 0.5 * detuning
    H[..., 1, 0] = 0.5 * lower
    H[..., 0, 1] = 0.5 * np.conj(lower)
    return H


def two_level_grad_H(scheme, omega_carrier, t, basis=None):
    """Derivatives of the system Hamiltonian with respect to the eight knot
    offsets; shape ``t.shape + (8, 2, 2)``.
    """
    t = np.asarray(t, dtype=float)
    if basis is None:
        basis = _schemes.knot_basis(4, scheme.t_f)
    b = np.stack([p(t) for p in basis], axis=-1)
    coupling = 1.0 + np.exp(2j * omega_carrier * t)
    G = np.zeros(t.shape + (8, 2, 2), dtype=complex)
    G[..., :4, 1, 0] = 0.5 * b * coupling[..., None]
    G[..., :4, 0, 1] = 0.5 * b * np.conj(coupling)[..., None]
    G[..., 4:, 0, 0] = -0.5 * b
    G[..., 4:, 1, 1] = 0.5 * b
    return G


# -- Gaussian trap ---------------------------------------------------------

def _neg_expm1_remainder(z):
    """``1 - exp(-z) - z`` without cancellation for small ``z``."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < 0.05
    zs = z[small]
    # alternating series -z^2/2 + z^3/6 - ..., truncated well below eps
    term = -zs * zs / 2.0
    acc = term.copy()
    for k in range(3, 14):
        term = -term * zs / k
        acc += term
    out[small] = acc
    zl = z[~small]
    out[~small] = -np.expm1(-zl) - zl
    return out


def gaussian_potential(x, a, mass=1.0):
    """Gaussian trap ``U_0 [1 - exp(-m x^2 / (2 U_0))]`` with depth ``a`` (hbar omega).

    ``a = inf`` gives the harmonic limit.
    """
    x = np.asarray(x, dtype=float)
    if np.isinf(a):
        return 0.5 * mass * x * x
    return -a * np.expm1(-0.5 * mass * x * x / a)


def gaussian_force_gradient(x, a, mass=1.0):
    """Derivative of :func:`gaussian_potential` with respect to ``x``."""
    x = np.asarray(x, dtype=float)
    if np.isinf(a):
        return mass * x
    return mass * x * np.exp(-0.5 * mass * x * x / a)


def gaussian_gap(x, a, mass=1.0):
    """``V_S(x) - V_0(x)`` evaluated without catastrophic cancellation."""
    x = np.asarray(x, dtype=float)
    if np.isinf(a):
        return np.zeros_like(x)
    xi = 0.5 * mass * x * x
    return a * _neg_expm1_remainder(xi / a)


def mu_expansion_term(n, x, mass=1.0):
    """Coefficient of ``mu**n`` (``mu = 1/a``) in the Gaussian trap potential.

    With ``xi = m x^2 / 2`` the series is ``xi - mu xi^2/2 + mu^2 xi^3/6 - ...``.
    """
    if n not in (0, 1, 2):
        raise UnsupportedOrderError(f"mu-expansion order {n} is not supported (0..2)")
    x = np.asarray(x, dtype=float)
    xi = 0.5 * mass * x * x
    return (xi, -0.5 * xi**2, xi**3 / 6.0)[n]


def mu_expansion_derivative(n, x, mass=1.0):
    """``d/dx`` of :func:`mu_expansion_term`."""
    if n not in (0, 1, 2):
        raise UnsupportedOrderError(f"mu-expansion order {n} is not supported (0..2)")
    x = np.asarray(x, dtype=float)
    xi = 0.5 * mass * x * x
    dxi = mass * x
    return (dxi, -xi * dxi, 0.5 * xi**2 * dxi)[n]


# -- two ions --------------------------------------------------------------

def equilibrium_distance(coulomb, mass_total=2.0, omega=1.0):
    """Stationary half-separation of two ions, ``(C / (4 M omega^2))**(1/3)``."""
    check_positive(coulomb, "coulomb")
    check_positive(mass_total, "mass_total")
    return (coulomb / (4.0 * mass_total * omega**2)) ** (1.0 / 3.0)


def two_ion_potentials(x_c, x_r, q0, model):
    """System and idealized potentials in centre-of-mass/relative coordinates."""
    x_c = np.asarray(x_c, dtype=float)
    x_r = np.asarray(x_r, dtype=float)
    if np.any(x_r <= 0):
        raise DomainError("relative coordinate x_r must be positive (x_1 > x_2)")
    M = model.mass_total
    coulomb = model.coulomb / (2.0 * x_r)
    v_sys = (gaussian_potential(x_c + x_r - q0, model.a, M)
             + gaussian_potential(x_c - x_r - q0, model.a, M) + coulomb)
    v_ideal = M * (x_c - q0) ** 2 + M * x_r**2 + coulomb
    return v_sys, v_ideal


# -- case models -----------------------------------------------------------

def _check_depth(a):
    # a = inf is the harmonic limit mu = 0
    if not (isinstance(a, (int, float, np.floating)) and a > 0 and not np.isnan(a)):
        raise DomainError(f"trap depth a must be positive, got {a!r}")

@dataclass(frozen=True)
class TwoLevelModel:
    """Two-level inversion beyond the rotating-wave approximation."""

    omega_carrier: float = 1.0

    case = "two_level"
    dimension = _schemes.TWO_LEVEL_DIM

    def __post_init__(self):
        check_positive(self.omega_carrier, "omega_carrier")

    def lambda0(self, t_f):
        return _schemes.sta_lambda("two_level", t_f)

    def scheme(self, lam, t_f):
        return _schemes.build_scheme("two_level", lam, t_f)

    def sta_scheme(self, t_f):
        return self.scheme(self.lambda0(t_f), t_f)

    def hamiltonian(self, kind, scheme, t):
        return two_level_H(kind, scheme, self.omega_carrier, t)

    def grad_hamiltonian(self, scheme, t):
        return two_level_grad_H(scheme, self.omega_carrier, t)


class _TransportBase:
    """Shared scheme plumbing of the transport cases."""

    dimension = _schemes.TRANSPORT_DIM

    @property
    def mu(self):
        return 1.0 / self.a

    def lambda0(self, t_f):
        return _schemes.sta_lambda(self.case, t_f, self.d, self.com_omega)

    def scheme(self, lam, t_f):
        return _schemes.build_scheme(self.case, lam, t_f, self.d, self.com_omega)

    def sta_scheme(self, t_f):
        return _schemes.TransportTrajectory.sta(t_f, self.d, self.com_omega)

    def gap(self, y):
        """``V_S - V_0`` as a function of the COM displacement from the trap centre."""
        return self.com_potential("system", y) - self.com_potential("idealized", y)

    def grad_hamiltonian(self, scheme, x, t, basis=None):
        """``dH_S/dlambda_j`` at COM position ``x`` and time ``t``.

        ``x`` and ``t`` broadcast against each other; a trailing axis of
        length 6 is appended.
        """
        if basis is None:
            basis = _schemes.knot_basis(self.dimension, scheme.t_f)
        t = np.asarray(t, dtype=float)
        force = self.com_force("system", np.asarray(x) - scheme.q0(t))
        b = np.stack([p(t) for p in basis], axis=-1)
        return -force[..., None] * np.broadcast_to(b, np.broadcast(force, t).shape + (b.shape[-1],))


@dataclass(frozen=True)
class SingleTransportModel(_TransportBase):
    """A single atom moved by a Gaussian optical trap of depth ``a``."""

    a: float = 1e5
    d: float = 1562.0

    case = "single_transport"
    com_mass = 1.0
    com_omega = 1.0

    def __post_init__(self):
        _check_depth(self.a)
        check_positive(self.d, "d")

    def com_potential(self, kind, y):
        if kind == "system":
            return gaussian_potential(y, self.a)
        if kind == "idealized":
            return 0.5 * np.asarray(y, dtype=float) ** 2
        raise DomainError(f"kind must be 'system' or 'idealized', got {kind!r}")

    def com_force(self, kind, y):
        """Derivative of :meth:`com_potential` with respect to ``y``."""
        if kind == "system":
            return gaussian_force_gradient(y, self.a)
        if kind == "idealized":
            return np.asarray(y, dtype=float)
        raise DomainError(f"kind must be 'system' or 'idealized', got {kind!r}")

    def gap(self, y):
        return gaussian_gap(y, self.a)

    def mu_term(self, n, y):
        return mu_expansion_term(n, y)

    def mu_term_derivative(self, n, y):
        return mu_expansion_derivative(n, y)


@dataclass(frozen=True)
class TwoIonModel(_TransportBase):
    """Two equal-mass ions in a Gaussian trap with Coulomb repulsion.

    ``coulomb`` is the dimensionless constant ``C~``; ``mass_total`` is ``M``.
    The default ``coulomb = 64000`` puts the half-separation at 20 sigma.
    """

    a: float = 1e5
    d: float = 100.0
    coulomb: float = 64000.0
    mass_total: float = 2.0

    case = "two_ion"

    def __post_init__(self):
        _check_depth(self.a)
        check_positive(self.d, "d")
        check_positive(self.coulomb, "coulomb")
        check_positive(self.mass_total, "mass_total")

    @property
    def com_mass(self):
        return self.mass_total

    @property
    def com_omega(self):
        return np.sqrt(2.0)

    @property
    def r_eq(self):
        return equilibrium_distance(self.coulomb, self.mass_total)

    def potentials(self, x_c, x_r, q0):
        return two_ion_potentials(x_c, x_r, q0, self)

    def com_potential(self, kind, y):
        y = np.asarray(y, dtype=float)
        r, M = self.r_eq, self.mass_total
        if kind == "system":
            return gaussian_potential(y + r, self.a, M) + gaussian_potential(y - r, self.a, M)
        if kind == "idealized":
            return M * y * y + M * r * r
        raise DomainError(f"kind must be 'system' or 'idealized', got {kind!r}")

    def com_force(self, kind, y):
        y = np.asarray(y, dtype=float)
        r, M = self.r_eq, self.mass_total
        if kind == "system":
            return (gaussian_force_gradient(y + r, self.a, M)
                    + gaussian_force_gradient(y - r, self.a, M))
        if kind == "idealized":
            return 2.0 * M * y
        raise DomainError(f"kind must be 'system' or 'idealized', got {kind!r}")

    def gap(self, y):
        y = np.asarray(y, dtype=float)
        r, M = self.r_eq, self.mass_total
        return gaussian_gap(y + r, self.a, M) + gaussian_gap(y - r, self.a, M)

    def mu_term(self, n, y):
        y = np.asarray(y, dtype=float)
        r, M = self.r_eq, self.mass_total
        return mu_expansion_term(n, y + r, M) + mu_expansion_term(n, y - r, M)

    def mu_term_derivative(self, n, y):
        y = np.asarray(y, dtype=float)
        r, M = self.r_eq, self.mass_total
        return mu_expansion_derivative(n, y + r, M) + mu_expansion_derivative(n, y - r, M)


def grad_H_S(model, scheme, t, x=None):
    """Gradient of the system Hamiltonian with respect to the control vector.

    Two-level: 2x2 matrices per component. Transport: the potential
    derivative at COM position ``x`` (two ions with frozen separation).
    """
    if model.case == "two_level":
        return model.grad_hamiltonian(scheme, t)
    if x is None:
        raise DomainError("transport gradients need a position x")
    return model.grad_hamiltonian(scheme, x, t)


def make_model(case, **constants):
    """Construct the case model named ``case``."""
    factories = {"two_level": TwoLevelModel, "single_transport": SingleTransportModel,
                 "two_ion": TwoIonModel}
    try:
        factory = factories[case]
    except KeyError:
        raise DomainError(f"unknown case {case!r}; expected one of {tuple(factories)}") from None
    return factory(**constants)
