"""Solutions chi_n(t) of the idealized Hamiltonians and matrix elements against them.

Two-level modes are obtained by propagating the computational basis under
the RWA Hamiltonian. Transport modes are displaced, boosted oscillator
eigenstates riding on the STA wavepacket path ``q_c``::

    chi_n(x, t) = exp(i theta_n(t)) exp(i m qc'(t) x) phi_n(x - q_c(t))

so that ``<chi_n|A(x)|chi_m> = exp(i (n - m) omega t) <phi_n|A(u + q_c)|phi_m>``.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .exceptions import AccuracyError, DomainError
from .models import two_level_H
from .propagators import evolve_two_level


def hermite_functions(n_max, s):
    """Normalized Hermite polynomials ``H_n(s) / sqrt(2^n n!)``, shape ``(n_max+1,) + s.shape``."""
    s = np.asarray(s, dtype=float)
    out = np.empty((n_max + 1,) + s.shape)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = np.sqrt(2.0) * s
    for n in range(1, n_max):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * s * out[n] - np.sqrt(n / (n + 1.0)) * out[n - 1]
    return out


def oscillator_eigenfunctions(n_max, u, mass=1.0, omega=1.0):
    """Harmonic-oscillator eigenfunctions ``phi_0..phi_n_max`` at positions ``u``."""
    scale = np.sqrt(mass * omega)
    s = scale * np.asarray(u, dtype=float)
    norm = (mass * omega / np.pi) ** 0.25
    return norm * hermite_functions(n_max, s) * np.exp(-0.5 * s * s)


@lru_cache(maxsize=16)
def _gauss_hermite(k):
    s, w = np.polynomial.hermite.hermgauss(k)
    s.setflags(write=False)
    w.setflags(write=False)
    return s, w


# -- two-level -------------------------------------------------------------

class TwoLevelModes:
    """Basis states propagated under the RWA Hamiltonian of ``scheme``.

    ``chi_0(0) = |1>`` (initial state) and ``chi_1(0) = |2>``; any other fixed
    completion only changes chi_1 by a phase, which leaves the correction
    unchanged.
    """

    case = "two_level"
    n_available = 1

    def __init__(self, scheme, max_step=None, gauge_phases=(0.0, 0.0)):
        self.scheme = scheme
        self.t_f = scheme.t_f
        if max_step is None:
            rabi, detuning = scheme.controls(np.linspace(0.0, scheme.t_f, 257))
            norm = 0.5 * np.max(np.hypot(rabi, detuning))
            max_step = 0.01 / max(norm, 1e-12)
        self.max_step = float(max_step)
        self.gauge = np.exp(1j * np.asarray(gauge_phases, dtype=float))

    def hamiltonian(self, t):
        return two_level_H("idealized", self.scheme, 0.0, t)

    def states(self, times):
        """Mode vectors at sorted ``times``: ``out[i, :, n] = chi_n(times[i])``."""
        times = np.asarray(times, dtype=float)
        order = np.argsort(times, kind="stable")
        out = np.empty((times.size, 2, 2), dtype=complex)
        out[order] = evolve_two_level(self.hamiltonian, np.eye(2, dtype=complex),
                                      times[order], self.max_step)
        return out * self.gauge[None, None, :]

    def elements(self, operator, times, n_max=1, m=0):
        """``<chi_n(t)|O(t)|chi_m(t)>`` for ``n = 0..n_max``.

        ``operator(times)`` returns matrices of shape ``(T, ..., 2, 2)``;
        the result has shape ``(T, n_max + 1, ...)``. Modes beyond the
        two-dimensional space contribute zero.
        """
        times = np.asarray(times, dtype=float)
        chi = self.states(times)
        ops = np.asarray(operator(times))
        extra = ops.ndim - 3
        chi_m = chi[:, :, m].reshape((times.size,) + (1,) * extra + (2,))
        O_chi = np.einsum("...ij,...j->...i", ops, np.broadcast_to(chi_m, ops.shape[:-1]))
        out = np.zeros((times.size, n_max + 1) + ops.shape[1:-2], dtype=complex)
        for n in range(min(n_max, 1) + 1):
            chi_n = chi[:, :, n].reshape((times.size,) + (1,) * extra + (2,))
            out[:, n] = np.sum(np.conj(chi_n) * O_chi, axis=-1)
        return out


def two_level_modes(scheme, times=None, max_step=None):
    """Mode set of the RWA Hamiltonian; samples ``chi_n`` on ``times`` if given."""
    modes = TwoLevelModes(scheme, max_step)
    if times is not None:
        modes.times = np.asarray(times, dtype=float)
        modes.chi = modes.states(modes.times)
    return modes


# -- transport -------------------------------------------------------------

@dataclass(frozen=True)
class TransportModes:
    """Transport modes of a harmonic trap with frequency ``omega`` and mass ``mass``.

    ``trajectory`` must be the STA trajectory (its ``q0`` satisfies the
    auxiliary equation with ``qc``).
    """

    trajectory: object
    mass: float = 1.0
    omega: float = 1.0
    nodes: int = 64
    tol: float = 1e-8
    max_nodes: int = 1024
    gauge_phases: tuple = field(default=())

    case = "transport"
    n_available = None

    def __post_init__(self):
        qc = self.trajectory.qc
        m, w = self.mass, self.omega
        qd, qdd = qc.deriv(1), qc.deriv(2)
        lagrangian = m * (0.5 * qd * qd + qdd * qc + 0.5 * qdd * qdd / w**2)
        object.__setattr__(self, "_phase_poly", lagrangian.integ())

    @property
    def t_f(self):
        return self.trajectory.t_f

    def energy(self, n):
        return self.omega * (n + 0.5)

    def phase(self, n, t):
        """Lewis-Riesenfeld phase ``theta_n(t)`` with ``theta_n(0) = 0``."""
        t = np.asarray(t, dtype=float)
        F = self._phase_poly
        return -self.energy(n) * t - (F(t) - F(0.0)) + self._gauge(n)

    def _gauge(self, n):
        return self.gauge_phases[n] if n < len(self.gauge_phases) else 0.0

    def wavefunction(self, n, x, t):
        """``chi_n(x, t)`` on positions ``x`` at a scalar time ``t``."""
        qc = self.trajectory.qc
        x = np.asarray(x, dtype=float)
        phi = oscillator_eigenfunctions(n, x - qc(t), self.mass, self.omega)[n]
        boost = np.exp(1j * self.mass * qc.deriv(1)(t) * x)
        return np.exp(1j * self.phase(n, t)) * boost * phi

    def elements(self, func, times, n_max=1, m=0):
        """``<chi_n(t)|A(x, t)|chi_m(t)>`` for ``n = 0..n_max`` by Gauss-Hermite quadrature.

        ``func(x, t)`` is a multiplicative operator evaluated on positions of
        shape ``(K, T)`` and times of shape ``(T,)``; it may append trailing
        axes. The node count doubles from ``nodes`` until the result changes
        by less than ``tol`` (relative to its largest entry, absolute below
        one); failure raises :class:`AccuracyError`. The result has shape
        ``(T, n_max + 1, ...)``.
        """
        times = np.asarray(times, dtype=float)
        k = self.nodes
        previous = self._quadrature(func, times, n_max, m, k)
        while k < self.max_nodes:
            k *= 2
            current = self._quadrature(func, times, n_max, m, k)
            err = np.max(np.abs(current - previous))
            if err <= self.tol * max(1.0, np.max(np.abs(current))):
                return self._phases(current, times, n_max, m)
            previous = current
        raise AccuracyError(f"Gauss-Hermite quadrature unstable at {k} nodes (change {err:.2e})")

    def _quadrature(self, func, times, n_max, m, k):
        s, w = _gauss_hermite(k)
        u = s / np.sqrt(self.mass * self.omega)
        x = u[:, None] + self.trajectory.qc(times)[None, :]
        values = np.asarray(func(x, np.broadcast_to(times, x.shape[1:])))
        h = hermite_functions(max(n_max, m), s)
        weights = (w * h[m])[None, :] * h[: n_max + 1] / np.sqrt(np.pi)
        return np.einsum("k...,nk->...n", values, weights)

    def _phases(self, values, times, n_max, m):
        # values has shape (T, ..., n_max+1); move the mode axis to position 1
        values = np.moveaxis(values, -1, 1)
        n = np.arange(n_max + 1)
        ph = np.exp(1j * np.outer(times, (n - m) * self.omega))
        ph = ph * np.exp(-1j * np.array([self._gauge(j) for j in n]) + 1j * self._gauge(m))
        return values * ph.reshape(ph.shape + (1,) * (values.ndim - 2))


def transport_mode_matrix_element(n, A, t, trajectory, mass=1.0, omega=1.0, m=0):
    """``<chi_n(t)|A(x)|chi_m(t)>`` for a position-only operator ``A``."""
    if n < 0 or m < 0:
        raise DomainError("mode indices must be non-negative")
    modes = TransportModes(trajectory, mass, omega)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = modes.elements(lambda x, _t: A(x), t, n_max=max(n, m), m=m)[:, n]
    return out if out.size > 1 else out[0]


def transport_mode_phase(n, t, trajectory, mass=1.0, omega=1.0):
    return TransportModes(trajectory, mass, omega).phase(n, t)


def build_modes(model, scheme, **options):
    """Mode set of ``model``'s idealized Hamiltonian for the STA ``scheme``."""
    if model.case == "two_level":
        return TwoLevelModes(scheme, **options)
    return TransportModes(scheme, mass=model.com_mass, omega=model.com_omega, **options)
