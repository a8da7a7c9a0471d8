"""Exact simulations of the three case studies and fidelity-vs-duration sweeps.

Transport runs are carried out by default in the frame that follows the STA
wavepacket path ``q_c(t)``: with ``psi(x) = exp(i m qc' x) phi(x - q_c)`` the
transformed Hamiltonian is ``p^2/2m + V(u + q_c - q_0) + m qc'' u`` up to a
global phase. This is exact, keeps the momentum spread small and makes the
grid independent of the transport distance. ``frame="lab"`` propagates on a
grid spanning the whole transport range instead.
"""

import logging
import dataclasses
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .config import RunConfig
from .engine import EstaCorrector, truncation_deviation, esta_integrals, terms_from_integrals
from .exceptions import DomainError, EstaError, GridError
from .models import gaussian_potential
from .modes import oscillator_eigenfunctions
from .propagators import SpatialGrid, fidelity, ground_state, propagate_two_level, split_step

log = logging.getLogger(__name__)

# half-width of the ground-state box in oscillator lengths of the COM motion
_GS_LENGTHS = 16.0


@dataclass(frozen=True)
class Numerics:
    """Grid and step settings of the transport simulations (lengths in sigma)."""

    max_spacing: float = 0.25
    pad: float = 10.0
    dt: float = None
    rel_points: int = 128
    rel_half_width: float = 12.0
    frame: str = "comoving"
    two_level_tol: float = 1e-10
    refinements: int = 3

    @classmethod
    def from_config(cls, config):
        return cls(config.max_spacing, config.pad, config.dt, config.rel_points,
                   config.rel_half_width, config.frame, config.two_level_tol)

    def time_step(self, dx, mass):
        return self.dt or min(0.002, dx * dx * mass / np.pi)


def _gs_half_width(mass, omega):
    return _GS_LENGTHS / np.sqrt(mass * omega)


# -- ground states ---------------------------------------------------------

@lru_cache(maxsize=32)
def _local_ground_state(kind, a, mass, omega, dx, rel_axis):
    """Ground state on a small COM box around the origin with spacing ``dx``.

    ``rel_axis`` is ``None`` (single particle) or ``(lo, hi, n, coulomb)``
    for the two-ion relative coordinate.
    """
    m = int(np.ceil(_gs_half_width(mass, omega) / dx))
    n = 1 << int(np.ceil(np.log2(2 * m)))
    lo = -(n // 2) * dx
    if rel_axis is None:
        grid = SpatialGrid(((lo, lo + n * dx),), (n,))
        (u,) = grid.axes
        if kind == "idealized":
            psi = oscillator_eigenfunctions(0, u, mass, omega)[0].astype(complex)
            return grid.normalize(psi), grid
        psi, _ = ground_state(gaussian_potential(u, a, mass), grid, mass)
        return psi, grid
    r_lo, r_hi, nr, coulomb = rel_axis
    grid = SpatialGrid(((lo, lo + n * dx), (r_lo, r_hi)), (n, nr))
    u, r = grid.mesh()
    V = gaussian_potential(u + r, a, mass) + gaussian_potential(u - r, a, mass) + coulomb / (2 * r)
    guess = np.exp(-0.5 * mass * omega * u**2) * np.exp(-(V - V.min()))
    psi, _ = ground_state(V, grid, mass, psi_init=guess)
    return psi, grid


def _embed(psi_local, grid_local, grid):
    """Copy a state from a local COM box into a larger grid of equal spacing."""
    lo_local = grid_local.bounds[0][0]
    lo = grid.bounds[0][0]
    offset = int(round((lo_local - lo) / grid.spacing[0]))
    out = np.zeros(grid.shape, dtype=complex)
    n = grid_local.shape[0]
    if offset < 0 or offset + n > grid.shape[0]:
        raise DomainError("local ground-state box does not fit into the propagation grid")
    out[offset:offset + n] = psi_local
    return out


# -- two-level -------------------------------------------------------------

def simulate_two_level(model, scheme, kind, tol=1e-10):
    """Population-inversion fidelity ``|<2|U(t_f)|1>|^2``."""
    psi = propagate_two_level(lambda t: model.hamiltonian(kind, scheme, t),
                              np.array([1.0, 0.0], dtype=complex), scheme.t_f, tol=tol)
    return float(abs(psi[1]) ** 2)


# -- transport -------------------------------------------------------------

def _offset_range(scheme, samples=4001):
    t = np.linspace(0.0, scheme.t_f, samples)
    Y = scheme.q0(t) - scheme.qc(t)
    return float(Y.min()), float(Y.max())


def comoving_grid(scheme, numerics, half_width, rel_axis=None):
    """COM grid aligned with the origin covering every trap-centre offset.

    The box extends ``half_width + pad`` beyond the offset range.
    """
    dx = numerics.max_spacing
    y_lo, y_hi = _offset_range(scheme)
    lo = min(y_lo, 0.0) - numerics.pad - half_width
    hi = max(y_hi, 0.0) + numerics.pad + half_width
    m_lo = int(np.ceil(-lo / dx))
    n = 1 << int(np.ceil(np.log2(m_lo + int(np.ceil(hi / dx)))))
    bounds = ((-m_lo * dx, (n - m_lo) * dx),)
    shape = (n,)
    if rel_axis is not None:
        bounds += ((rel_axis[0], rel_axis[1]),)
        shape += (rel_axis[2],)
    return SpatialGrid(bounds, shape)


def _two_ion_rel_axis(model, numerics):
    r, w = model.r_eq, numerics.rel_half_width
    if w >= r:
        raise DomainError(f"rel_half_width={w} must be below the half-separation {r:.4g}")
    return (r - w, r + w, numerics.rel_points, model.coulomb)


def simulate_transport(model, scheme, kind, numerics=Numerics(), callback=None):
    """Exact transport fidelity of ``scheme`` under the ``system`` or ``idealized`` Hamiltonian.

    The reference trajectory ``scheme.qc`` is the STA wavepacket path; the
    initial state is the trap ground state and the target is the same state
    displaced by ``d``.
    """
    if numerics.frame == "lab":
        if model.case != "single_transport":
            raise DomainError("lab-frame propagation is implemented for the single-particle case")
        return _simulate_lab(model, scheme, kind, numerics, callback)
    qc = scheme.qc
    qcdd = qc.deriv(2)
    if model.case == "two_ion" and kind == "system":
        rel = _two_ion_rel_axis(model, numerics)
        M, w = model.com_mass, model.com_omega
        grid = comoving_grid(scheme, numerics, _gs_half_width(M, w), rel)
        psi_local, grid_local = _local_ground_state(
            kind, model.a, M, w, numerics.max_spacing, rel)
        psi0 = _embed(psi_local, grid_local, grid)
        u, r = grid.mesh()
        M = model.mass_total
        coulomb = model.coulomb / (2.0 * r)

        def potential(t):
            Y = scheme.q0(t) - qc(t)
            return (gaussian_potential(u + r - Y, model.a, M)
                    + gaussian_potential(u - r - Y, model.a, M) + coulomb + M * qcdd(t) * u)

        masses = (M, M)
        dx_min = min(grid.spacing)
    else:
        # single particle, or the separable two-ion idealized Hamiltonian whose
        # relative motion is stationary; only the COM part evolves
        mass, w = model.com_mass, model.com_omega
        grid = comoving_grid(scheme, numerics, _gs_half_width(mass, w))
        a = model.a if kind == "system" else np.inf
        psi_local, grid_local = _local_ground_state(kind, a, mass, w, numerics.max_spacing, None)
        psi0 = _embed(psi_local, grid_local, grid)
        (u,) = grid.axes
        com_potential = model.com_potential

        def potential(t):
            Y = scheme.q0(t) - qc(t)
            return com_potential(kind, u - Y) + mass * qcdd(t) * u

        masses = mass
        dx_min = grid.spacing[0]
    dt = numerics.time_step(dx_min, np.min(masses))
    psi = split_step(potential, psi0, scheme.t_f, dt, grid, masses,
                     edge_width=(numerics.pad / 2, None), callback=callback)
    return fidelity(psi, psi0, grid)


def _simulate_lab(model, scheme, kind, numerics, callback):
    dx = numerics.max_spacing
    half = _gs_half_width(1.0, 1.0)
    lo = -numerics.pad - half
    m_lo = int(np.ceil(-lo / dx))
    n = 1 << int(np.ceil(np.log2(m_lo + (model.d + numerics.pad + half) / dx)))
    grid = SpatialGrid(((-m_lo * dx, (n - m_lo) * dx),), (n,))
    a = model.a if kind == "system" else np.inf
    psi_local, grid_local = _local_ground_state(kind, a, 1.0, 1.0, dx, None)
    psi0 = _embed(psi_local, grid_local, grid)
    (k,) = grid.wavenumbers
    target = sfft.ifft(sfft.fft(psi0) * np.exp(-1j * k * model.d))
    (x,) = grid.axes

    def potential(t):
        return model.com_potential(kind, x - scheme.q0(t))

    psi = split_step(potential, psi0, scheme.t_f, numerics.time_step(dx, 1.0), grid,
                     1.0, edge_width=numerics.pad / 2, callback=callback)
    return fidelity(psi, target, grid)


def simulate(model, scheme, kind, numerics=Numerics()):
    """Exact fidelity of ``scheme`` for ``model`` under Hamiltonian ``kind``.

    Transport runs whose population reaches the momentum edge are repeated
    with half the spacing, those reaching the box edge with twice the
    padding; at most ``numerics.refinements`` retries are made.
    """
    if model.case == "two_level":
        return simulate_two_level(model, scheme, kind, numerics.two_level_tol)
    for attempt in range(numerics.refinements + 1):
        try:
            return simulate_transport(model, scheme, kind, numerics)
        except GridError as exc:
            if attempt == numerics.refinements:
                raise
            if exc.space == "position":
                numerics = dataclasses.replace(numerics, pad=2 * numerics.pad + 10.0)
            else:
                numerics = dataclasses.replace(numerics, max_spacing=numerics.max_spacing / 2,
                                               dt=numerics.dt and numerics.dt / 4)
            log.info("retrying with dx=%g, pad=%g", numerics.max_spacing, numerics.pad)


# -- orchestration ---------------------------------------------------------

@dataclass
class SweepRow:
    t_f: float
    F_sta: float = np.nan
    F_esta: float = np.nan
    F_esta_idealized: float = np.nan
    F_sta_idealized: float = np.nan
    epsilon: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    error: str = None


@dataclass
class SweepResult:
    """One row per final time plus the case metadata."""

    rows: list
    metadata: dict

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    @property
    def t_f(self):
        return self.column("t_f")


def run_case(config, selector, t_f, corrector=None):
    """Fidelities of the ``"sta"`` or ``"esta"`` protocol under both Hamiltonians.

    Returns a dict with keys ``F_system``, ``F_idealized``, ``epsilon`` and
    ``diagnostics``.
    """
    if selector not in ("sta", "esta"):
        raise DomainError(f"selector must be 'sta' or 'esta', got {selector!r}")
    model = config.model()
    numerics = Numerics.from_config(config)
    diagnostics = {}
    if selector == "sta":
        scheme = model.sta_scheme(t_f)
        eps = np.zeros(model.dimension)
    else:
        if corrector is None:
            corrector = EstaCorrector(config.n_modes, config.quad_rtol).fit(model, t_f)
        scheme = corrector.scheme_
        eps = corrector.epsilon_
        diagnostics = {
            "fidelity_estimate": corrector.fidelity_estimate_,
            "truncation_deviation": corrector.truncation_deviation_,
            "degenerate": corrector.terms_.degenerate,
        }
    try:
        F_sys = simulate(model, scheme, "system", numerics)
        F_ideal = simulate(model, scheme, "idealized", numerics)
    except EstaError as exc:
        raise type(exc)(f"{model.case} {selector} run at t_f={t_f}: {exc}") from exc
    return {"F_system": F_sys, "F_idealized": F_ideal, "epsilon": eps,
            "diagnostics": diagnostics}


def _run_row(config, t_f):
    row = SweepRow(float(t_f))
    start = time.perf_counter()
    try:
        model = config.model()
        corrector = EstaCorrector(config.n_modes, config.quad_rtol).fit(model, t_f)
        sta = run_case(config, "sta", t_f)
        esta = run_case(config, "esta", t_f, corrector)
        row.F_sta, row.F_sta_idealized = sta["F_system"], sta["F_idealized"]
        row.F_esta, row.F_esta_idealized = esta["F_system"], esta["F_idealized"]
        row.epsilon = [float(v) for v in esta["epsilon"]]
        row.diagnostics = dict(esta["diagnostics"])
    except EstaError as exc:
        log.warning("row t_f=%g failed: %s", t_f, exc)
        row.error = f"{type(exc).__name__}: {exc}"
    row.diagnostics["seconds"] = time.perf_counter() - start
    return row


def sweep_tf(config, tf_grid=None):
    """Run every final time of the sweep; failed rows keep NaN fidelities and an error."""
    grid = np.asarray(config.tf_values() if tf_grid is None else tf_grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
        raise DomainError("t_f grid must be strictly increasing")
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            rows = list(pool.map(_run_row, [config] * grid.size, grid))
    else:
        rows = [_run_row(config, t) for t in grid]
    rows.sort(key=lambda r: r.t_f)
    model = config.model()
    metadata = {"case": config.case, "n_modes": config.n_modes,
                "model": {k: float(v) for k, v in vars(model).items()},
                "numerics": vars(Numerics.from_config(config)).copy()}
    return SweepResult(rows, metadata)


NOT_REACHED = None


def threshold_time(sweep, level=0.99, column="F_esta"):
    """Smallest grid ``t_f`` from which the fidelity stays at or above ``level``.

    ``sweep`` is a :class:`SweepResult` or a pair ``(t_f, F)`` of arrays.
    Returns :data:`NOT_REACHED` (None) if even the last row is below ``level``.
    """
    if isinstance(sweep, SweepResult):
        t, F = sweep.t_f, sweep.column(column)
    else:
        t, F = (np.asarray(v, dtype=float) for v in sweep)
    if np.any(np.diff(t) <= 0):
        raise DomainError("sweep must be sorted by t_f")
    ok = F >= level
    if not ok.size or not ok[-1]:
        return NOT_REACHED
    bad = np.flatnonzero(~ok)
    first = bad[-1] + 1 if bad.size else 0
    return float(t[first])


def compare_truncation(config, t_f, n_low=1, n_high=2):
    """Corrections with ``N = n_low`` and ``N = n_high`` and their relative deviation."""
    model = config.model()
    scheme = model.sta_scheme(t_f)
    G, K = esta_integrals(model, scheme, n_high, rtol=config.quad_rtol)
    lam0 = model.lambda0(t_f)
    low = terms_from_integrals(G[:n_low], K[:n_low], lam0).epsilon
    high = terms_from_integrals(G, K, lam0).epsilon
    return low, high, truncation_deviation(low, high)


def finite_difference_gradient(model, t_f, h=1e-3, numerics=Numerics(), kind="system"):
    """Central differences of the exact fidelity around the STA control vector.

    Returns ``(F(lambda0), gradient)``; costs ``2 D + 1`` propagations.
    """
    lam0 = np.asarray(model.lambda0(t_f), dtype=float)
    F0 = simulate(model, model.scheme(lam0, t_f), kind, numerics)
    grad = np.empty(lam0.size)
    for k in range(lam0.size):
        step = np.zeros_like(lam0)
        step[k] = h
        plus = simulate(model, model.scheme(lam0 + step, t_f), kind, numerics)
        minus = simulate(model, model.scheme(lam0 - step, t_f), kind, numerics)
        grad[k] = (plus - minus) / (2 * h)
    return F0, grad
