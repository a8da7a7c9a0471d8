"""Perturbative expansion of the transport fidelity and its gradient in mu = 1/a.

An independent route to the quantities the correction is built from: the
Gaussian trap is expanded as ``H_mu = sum_j mu^j H^(j)`` and the fidelity and
its control gradient are expanded to second order, keeping only terms with
single time integrals of the matrix elements

    alpha^(j)_{n,m}(t) = <chi_n(t)| H^(j)(t) |chi_m(t)>
    beta^(j)_{n,m}(t)  = <chi_n(t)| dH^(j)/dlambda (t) |chi_m(t)>

Only the transport cases are covered; the two-level Hamiltonian has no
natural series in a small parameter.
"""

from functools import cached_property

import numpy as np

from . import schemes as _schemes
from .exceptions import DomainError, UnsupportedOrderError
from .modes import build_modes
from .quadrature import integrate


class PerturbativeTerms:
    """Matrix elements and expansion coefficients for a transport model at ``t_f``.

    Parameters
    ----------
    model : SingleTransportModel or TwoIonModel
    t_f : float
        Final time of the STA scheme.
    n_modes : int
        Excited modes kept in every mode sum (``n = 1..n_modes``).
    rtol : float
        Relative tolerance of the time quadrature.
    """

    def __init__(self, model, t_f, n_modes=1, rtol=1e-8):
        if model.case == "two_level":
            raise DomainError("the perturbative oracle covers the transport cases only")
        if n_modes < 1:
            raise DomainError("n_modes must be at least 1")
        self.model = model
        self.t_f = float(t_f)
        self.n_modes = int(n_modes)
        self.rtol = rtol
        self.scheme = model.sta_scheme(t_f)
        self.modes = build_modes(model, self.scheme)
        self._basis = _schemes.knot_basis(model.dimension, self.t_f)

    def _operator(self, j, gradient, t):
        q0 = self.scheme.q0(t)
        if gradient:
            b = np.stack([p(t) for p in self._basis], axis=-1)

            def func(x, _t):
                dv = self.model.mu_term_derivative(j, x - q0[None, :])
                return -dv[..., None] * b[None, :, :]
        else:
            def func(x, _t):
                return self.model.mu_term(j, x - q0[None, :])
        return func

    def alpha(self, j, n, m, t):
        """``alpha^(j)_{n,m}(t)`` for ``j`` in 0..2; vectorized over ``t``."""
        _check_order(j)
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = self.modes.elements(self._operator(j, False, t), t, n_max=n, m=m)[:, n]
        return out if out.size > 1 else out[0]

    def beta(self, j, n, m, t):
        """``beta^(j)_{n,m}(t)``, shape ``(T, 6)`` (or ``(6,)`` for scalar ``t``)."""
        _check_order(j)
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = self.modes.elements(self._operator(j, True, t), t, n_max=n, m=m)[:, n]
        return out if out.shape[0] > 1 else out[0]

    @cached_property
    def integrals(self):
        """Time integrals over ``[0, t_f]`` of the elements against ``chi_0``.

        Returns a dict with ``alpha1``, ``alpha2`` (shape ``(N+1,)``) and
        ``beta0``, ``beta1`` (shape ``(N+1, 6)``), indexed by ``n = 0..N``.
        """
        N = self.n_modes
        D = self.model.dimension

        def integrand(t):
            parts = [self.modes.elements(self._operator(j, False, t), t, n_max=N)[:, :, None]
                     for j in (1, 2)]
            parts += [self.modes.elements(self._operator(j, True, t), t, n_max=N)
                      for j in (0, 1)]
            return np.concatenate(parts, axis=-1)

        total = integrate(integrand, 0.0, self.t_f, rtol=self.rtol)
        return {"alpha1": total[:, 0], "alpha2": total[:, 1],
                "beta0": total[:, 2:2 + D], "beta1": total[:, 2 + D:]}

    @property
    def u1(self):
        """First-order amplitude ``-i int alpha^(1)_{0,0}`` (purely imaginary)."""
        return -1j * self.integrals["alpha1"][0]

    @property
    def F2(self):
        A1 = self.integrals["alpha1"][1:]
        return float(-np.sum(np.abs(A1) ** 2))

    @property
    def F3_approx(self):
        ints = self.integrals
        A1, A2 = ints["alpha1"][1:], ints["alpha2"][1:]
        return float(-2.0 * np.sum(np.real(np.conj(A1) * A2)))

    @property
    def gradF1(self):
        ints = self.integrals
        A1, B0 = ints["alpha1"][1:], ints["beta0"][1:]
        return -2.0 * np.sum(np.real(A1[:, None] * np.conj(B0)), axis=0)

    @property
    def gradF2_approx(self):
        ints = self.integrals
        A1, A2 = ints["alpha1"][1:, None], ints["alpha2"][1:, None]
        B0, B1 = ints["beta0"][1:], ints["beta1"][1:]
        return -2.0 * np.sum(np.real(np.conj(B1) * A1 + np.conj(B0) * A2), axis=0)

    def fidelity_series(self, mu=None, order=2):
        """``1 + mu^2 F2`` (order 2) or ``1 + mu^2 F2 + mu^3 F3_approx`` (order 3)."""
        mu = self.model.mu if mu is None else mu
        if order == 2:
            return 1.0 + mu**2 * self.F2
        if order == 3:
            return 1.0 + mu**2 * self.F2 + mu**3 * self.F3_approx
        raise UnsupportedOrderError(f"fidelity series order must be 2 or 3, got {order}")

    def gradient_series(self, mu=None, order=2):
        """``mu gradF1`` (order 1) or ``mu gradF1 + mu^2 gradF2_approx`` (order 2)."""
        mu = self.model.mu if mu is None else mu
        if order == 1:
            return mu * self.gradF1
        if order == 2:
            return mu * self.gradF1 + mu**2 * self.gradF2_approx
        raise UnsupportedOrderError(f"gradient series order must be 1 or 2, got {order}")


def _check_order(j):
    if j not in (0, 1, 2):
        raise UnsupportedOrderError(f"expansion order {j} is not available (0..2)")


def alpha(j, n, m, t, model, t_f):
    """``alpha^(j)_{n,m}(t)`` of ``model``'s STA scheme with final time ``t_f``."""
    if j == 0:
        raise UnsupportedOrderError("alpha is defined for orders 1 and 2")
    return PerturbativeTerms(model, t_f, max(n, m, 1)).alpha(j, n, m, t)


def beta(j, n, m, t, model, t_f):
    return PerturbativeTerms(model, t_f, max(n, m, 1)).beta(j, n, m, t)


def F2(model, t_f, n_modes=1):
    return PerturbativeTerms(model, t_f, n_modes).F2


def F3_approx(model, t_f, n_modes=1):
    return PerturbativeTerms(model, t_f, n_modes).F3_approx


def gradF1(model, t_f, n_modes=1):
    return PerturbativeTerms(model, t_f, n_modes).gradF1


def gradF2_approx(model, t_f, n_modes=1):
    return PerturbativeTerms(model, t_f, n_modes).gradF2_approx
