"""The eSTA correction: mode integrals, fidelity/gradient estimates, and the estimator.

For a baseline control vector ``lambda0`` the correction is::

    epsilon = -(sum_n |G_n|^2) R / |R|^2,    R = sum_n Re(conj(G_n) K_n)

with ``G_n`` the time integral of the Hamiltonian gap between ``chi_n`` and
``chi_0`` and ``K_n`` the same for the control gradient of the system
Hamiltonian. Natural units, hbar = 1.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import schemes as _schemes
from .exceptions import DegenerateGradientError, DomainError
from .models import two_level_grad_H
from .modes import build_modes
from .quadrature import integrate
from .utils import check_positive


def _two_level_integrand(model, scheme, modes, n_max):
    basis = _schemes.knot_basis(4, scheme.t_f)

    def operator(t):
        gap = model.hamiltonian("system", scheme, t) - model.hamiltonian("idealized", scheme, t)
        grad = two_level_grad_H(scheme, model.omega_carrier, t, basis)
        return np.concatenate([gap[:, None], grad], axis=1)

    def integrand(t):
        return modes.elements(operator, t, n_max=n_max)[:, 1:]

    return integrand


def _transport_integrand(model, scheme, modes, n_max):
    basis = _schemes.knot_basis(model.dimension, scheme.t_f)

    def integrand(t):
        q0 = scheme.q0(t)

        def func(x, _t):
            y = x - q0[None, :]
            return np.stack([model.gap(y), -model.com_force("system", y)], axis=-1)

        el = modes.elements(func, t, n_max=n_max)[:, 1:]
        b = np.stack([p(t) for p in basis], axis=-1)
        grad = el[:, :, 1, None] * b[:, None, :]
        return np.concatenate([el[:, :, :1], grad], axis=-1)

    return integrand


def esta_integrals(model, scheme, n_modes=1, modes=None, rtol=1e-8):
    """Mode integrals ``G_n`` (shape ``(N,)``) and ``K_n`` (shape ``(N, D)``), n = 1..N."""
    if n_modes < 1:
        raise DomainError("n_modes must be at least 1")
    if modes is None:
        modes = build_modes(model, scheme)
    if model.case == "two_level":
        integrand = _two_level_integrand(model, scheme, modes, n_modes)
    else:
        integrand = _transport_integrand(model, scheme, modes, n_modes)
    total = integrate(integrand, 0.0, scheme.t_f, rtol=rtol)
    return total[:, 0], total[:, 1:]


def compute_G(n, model, modes, scheme, t_f=None, rtol=1e-8):
    """``G_n`` for a single mode index ``n >= 1``."""
    if n < 1:
        raise DomainError("G_n is defined for n >= 1")
    _check_tf(scheme, t_f)
    return esta_integrals(model, scheme, n, modes, rtol)[0][n - 1]


def compute_K(n, model, modes, scheme, t_f=None, rtol=1e-8):
    """``K_n`` (one complex entry per control component) for ``n >= 1``."""
    if n < 1:
        raise DomainError("K_n is defined for n >= 1")
    _check_tf(scheme, t_f)
    return esta_integrals(model, scheme, n, modes, rtol)[1][n - 1]


def _check_tf(scheme, t_f):
    if t_f is not None and not np.isclose(t_f, scheme.t_f):
        raise DomainError(f"t_f={t_f} does not match the scheme's t_f={scheme.t_f}")


def fidelity_estimate(G):
    """Second-order fidelity estimate ``1 - sum |G_n|^2``."""
    G = np.atleast_1d(np.asarray(G, dtype=complex))
    return 1.0 - float(np.sum(np.abs(G) ** 2))


def gradient_estimate(G, K):
    """Fidelity gradient estimate ``-2 sum_n Re(G_n conj(K_n))``."""
    G = np.atleast_1d(np.asarray(G, dtype=complex))
    K = np.atleast_2d(np.asarray(K, dtype=complex))
    return -2.0 * np.real(np.sum(G[:, None] * np.conj(K), axis=0))


def esta_correction(G, K, rtol=1e-12):
    """Closed-form correction ``epsilon`` from the mode integrals.

    Returns the zero vector when every ``G_n`` vanishes. Raises
    :class:`DegenerateGradientError` when ``|R|`` is below
    ``rtol * sum|G_n| * max|K_n|``.
    """
    G = np.atleast_1d(np.asarray(G, dtype=complex))
    K = np.atleast_2d(np.asarray(K, dtype=complex))
    if G.shape[0] != K.shape[0]:
        raise DomainError("G and K must have the same number of modes")
    if not np.any(G):
        return np.zeros(K.shape[1])
    R = np.real(np.sum(np.conj(G)[:, None] * K, axis=0))
    R2 = float(R @ R)
    scale = np.sum(np.abs(G)) * np.max(np.linalg.norm(K, axis=1))
    if np.sqrt(R2) <= rtol * scale:
        raise DegenerateGradientError(f"|R| = {np.sqrt(R2):.3e} is negligible (scale {scale:.3e})")
    return -np.sum(np.abs(G) ** 2) * R / R2


def correction_from_estimates(F, gradF):
    """Parabolic step ``2 (1 - F) / |grad F| * grad F / |grad F|``."""
    gradF = np.asarray(gradF, dtype=float)
    return 2.0 * (1.0 - F) * gradF / float(gradF @ gradF)


@dataclass(frozen=True)
class EstaTerms:
    """Mode integrals and the resulting corrected control vector."""

    G: np.ndarray
    K: np.ndarray
    lambda0: np.ndarray
    epsilon: np.ndarray
    degenerate: bool = False

    @property
    def n_modes(self):
        return self.G.shape[0]

    @property
    def lambda_s(self):
        return self.lambda0 + self.epsilon

    @property
    def fidelity_estimate(self):
        return fidelity_estimate(self.G)

    @property
    def gradient_estimate(self):
        return gradient_estimate(self.G, self.K)


def terms_from_integrals(G, K, lambda0):
    """Bundle integrals into :class:`EstaTerms`, falling back to ``lambda0`` if degenerate."""
    try:
        eps = esta_correction(G, K)
        degenerate = False
    except DegenerateGradientError as exc:
        warnings.warn(f"degenerate fidelity gradient, keeping the STA protocol: {exc}",
                      RuntimeWarning, stacklevel=2)
        eps = np.zeros(np.shape(K)[1])
        degenerate = True
    return EstaTerms(np.asarray(G), np.asarray(K), np.asarray(lambda0, dtype=float),
                     eps, degenerate)


def truncation_deviation(eps_a, eps_b):
    """``|eps_a - eps_b| / |eps_a|`` (0 when both vanish)."""
    na = np.linalg.norm(eps_a)
    diff = np.linalg.norm(np.asarray(eps_a) - np.asarray(eps_b))
    return 0.0 if na == 0 and diff == 0 else float(diff / na) if na else np.inf


class EstaCorrector(BaseEstimator):
    """Estimator computing the eSTA correction for a case model.

    Parameters
    ----------
    n_modes : int, default=1
        Number of excited modes ``N`` kept in the sums.
    rtol : float, default=1e-8
        Relative tolerance of the adaptive time quadrature.
    check_truncation : bool, default=True
        Also evaluate the correction with ``N + 1`` modes and store the
        relative deviation in ``truncation_deviation_``; a warning is issued
        if it exceeds 1e-3.

    Attributes
    ----------
    terms_ : EstaTerms
    epsilon_, lambda0_, lambda_s_ : ndarray
    scheme_ : corrected scheme, evaluable via :meth:`predict`
    sta_scheme_ : baseline scheme
    """

    def __init__(self, n_modes=1, rtol=1e-8, check_truncation=True):
        self.n_modes = n_modes
        self.rtol = rtol
        self.check_truncation = check_truncation

    def fit(self, model, t_f):
        """Compute the correction of ``model``'s STA protocol of duration ``t_f``."""
        t_f = check_positive(t_f, "t_f")
        if not isinstance(self.n_modes, (int, np.integer)) or self.n_modes < 1:
            raise DomainError(f"n_modes must be a positive integer, got {self.n_modes!r}")
        check_positive(self.rtol, "rtol")
        sta = model.sta_scheme(t_f)
        lambda0 = model.lambda0(t_f)
        n_eval = self.n_modes + 1 if self.check_truncation else self.n_modes
        G, K = esta_integrals(model, sta, n_eval, rtol=self.rtol)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            wider = terms_from_integrals(G, K, lambda0)
        terms = terms_from_integrals(G[: self.n_modes], K[: self.n_modes], lambda0)
        self.model_ = model
        self.t_f_ = t_f
        self.terms_ = terms
        self.G_, self.K_ = terms.G, terms.K
        self.lambda0_ = lambda0
        self.epsilon_ = terms.epsilon
        self.lambda_s_ = terms.lambda_s
        self.sta_scheme_ = sta
        self.scheme_ = model.scheme(self.lambda_s_, t_f)
        self.fidelity_estimate_ = terms.fidelity_estimate
        self.gradient_estimate_ = terms.gradient_estimate
        if self.check_truncation:
            self.truncation_deviation_ = truncation_deviation(terms.epsilon, wider.epsilon)
            if self.truncation_deviation_ > 1e-3:
                warnings.warn(f"correction changes by {self.truncation_deviation_:.2e} "
                              f"when going from N={self.n_modes} to N={n_eval}",
                              RuntimeWarning, stacklevel=2)
        return self

    def predict(self, t):
        """Controls of the corrected protocol at times ``t``.

        Two-level: array ``(..., 2)`` of Rabi frequency and detuning.
        Transport: trap position ``q_0(t)``.
        """
        check_is_fitted(self, "scheme_")
        if self.model_.case == "two_level":
            return np.stack(self.scheme_.controls(t), axis=-1)
        return self.scheme_.q0(np.asarray(t, dtype=float))
