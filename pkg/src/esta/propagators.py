"""Exact time evolution: two-level Magnus integration and Fourier split-step.

Wavefunctions on a grid are normalized so that ``sum(|psi|^2) * dV == 1``.
Grids are periodic: ``x_j = lo + j * dx`` with ``dx = (hi - lo) / n``.
"""

import struct
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .exceptions import AccuracyError, ConvergenceError, DomainError, GridError
from .utils import check_positive, is_power_of_two

_SQRT3 = np.sqrt(3.0)


# -- two-level -------------------------------------------------------------

def _expm2(B):
    """Matrix exponential of a batch of 2x2 matrices, shape ``(..., 2, 2)``."""
    tr = 0.5 * (B[..., 0, 0] + B[..., 1, 1])
    C = B.copy()
    C[..., 0, 0] -= tr
    C[..., 1, 1] -= tr
    s = np.sqrt(C[..., 0, 0] ** 2 + C[..., 0, 1] * C[..., 1, 0] + 0j)
    small = np.abs(s) < 1e-8
    s_safe = np.where(small, 1.0, s)
    sinhc = np.where(small, 1.0 + s * s / 6.0, np.sinh(s_safe) / s_safe)
    out = sinhc[..., None, None] * C
    cosh = np.cosh(s)
    out[..., 0, 0] += cosh
    out[..., 1, 1] += cosh
    return np.exp(tr)[..., None, None] * out


def _magnus_steps(H, edges):
    """Fourth-order Magnus propagators for the intervals between ``edges``."""
    t0 = edges[:-1]
    h = np.diff(edges)
    c1, c2 = 0.5 - _SQRT3 / 6.0, 0.5 + _SQRT3 / 6.0
    A1 = -1j * np.asarray(H(t0 + c1 * h))
    A2 = -1j * np.asarray(H(t0 + c2 * h))
    comm = A2 @ A1 - A1 @ A2
    omega = (0.5 * h)[:, None, None] * (A1 + A2) + (_SQRT3 / 12.0 * h * h)[:, None, None] * comm
    return _expm2(omega)


def _ordered_product(steps):
    """``steps[-1] @ ... @ steps[0]`` by pairwise batched reduction."""
    while steps.shape[0] > 1:
        if steps.shape[0] % 2:
            tail = steps[-1:]
            steps = steps[:-1]
        else:
            tail = None
        steps = steps[1::2] @ steps[0::2]
        if tail is not None:
            steps = np.concatenate([steps, tail])
    return steps[0]


def _default_steps(H, t_f, target=0.02):
    probe = np.linspace(0.0, t_f, 513)
    Hs = np.asarray(H(probe))
    norm = np.max(np.sqrt(np.sum(np.abs(Hs) ** 2, axis=(-2, -1))))
    rate = np.max(np.sqrt(np.sum(np.abs(np.diff(Hs, axis=0)) ** 2, axis=(-2, -1))))
    rate /= max(norm, 1e-300) * (probe[1] - probe[0])
    return int(np.ceil(t_f * max(norm, rate, 1.0 / t_f) / target))


def propagate_two_level(H, psi0, t_f, n_steps=None, tol=1e-10, max_doublings=8):
    """Evolve a two-component state under ``H(t)`` from 0 to ``t_f``.

    Uses the fourth-order Magnus integrator with exact 2x2 exponentials, so
    every step is unitary. The step count is doubled until two successive
    results agree to ``tol``; failure raises :class:`AccuracyError`.
    ``H`` must accept an array of times and return ``(T, 2, 2)`` matrices.
    """
    t_f = check_positive(t_f, "t_f")
    psi0 = np.asarray(psi0, dtype=complex)
    n = n_steps or _default_steps(H, t_f)
    previous = _ordered_product(_magnus_steps(H, np.linspace(0.0, t_f, n + 1))) @ psi0
    for _ in range(max_doublings):
        n *= 2
        current = _ordered_product(_magnus_steps(H, np.linspace(0.0, t_f, n + 1))) @ psi0
        if np.max(np.abs(current - previous)) <= tol:
            return current
        previous = current
    raise AccuracyError(f"two-level propagation did not reach tol={tol} with {n} steps")


def evolve_two_level(H, psi0, times, max_step):
    """States at each of the sorted ``times`` (first entry >= 0), starting from
    ``psi0`` at ``t = 0``; ``psi0`` may be a ``(2, k)`` block of columns."""
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or times[0] < 0:
        raise DomainError("times must be sorted and non-negative")
    psi0 = np.asarray(psi0, dtype=complex)
    points = np.concatenate(([0.0], times))
    gaps = np.diff(points)
    counts = np.maximum(np.ceil(gaps / max_step).astype(int), 1)
    counts[gaps == 0] = 0
    edges = [np.array([0.0])]
    for lo, hi, k in zip(points[:-1], points[1:], counts):
        if k:
            edges.append(np.linspace(lo, hi, k + 1)[1:])
    edges = np.concatenate(edges)
    steps = _magnus_steps(H, edges) if edges.size > 1 else np.zeros((0, 2, 2), complex)
    out = np.empty((times.size,) + psi0.shape, dtype=complex)
    psi = psi0
    cursor = 0
    for i, k in enumerate(counts):
        for S in steps[cursor:cursor + k]:
            psi = S @ psi
        cursor += k
        out[i] = psi
    return out


# -- spatial grids ---------------------------------------------------------

@dataclass(frozen=True)
class SpatialGrid:
    """Periodic grid with power-of-two point counts along each axis."""

    bounds: tuple
    shape: tuple

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        shape = tuple(int(n) for n in self.shape)
        if len(bounds) != len(shape):
            raise DomainError("bounds and shape must have the same length")
        for (lo, hi), n in zip(bounds, shape):
            if not hi > lo:
                raise DomainError(f"empty grid interval [{lo}, {hi}]")
            if not is_power_of_two(n):
                raise DomainError(f"grid point count {n} is not a power of two")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "shape", shape)

    @classmethod
    def covering(cls, lo, hi, max_spacing=0.25, min_points=64):
        """Smallest power-of-two 1-D grid over ``[lo, hi]`` with spacing <= max_spacing."""
        n = max(min_points, 1 << int(np.ceil(np.log2((hi - lo) / max_spacing))))
        return cls(((lo, hi),), (n,))

    @property
    def ndim(self):
        return len(self.shape)

    @property
    def spacing(self):
        return tuple((hi - lo) / n for (lo, hi), n in zip(self.bounds, self.shape))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def axes(self):
        return tuple(lo + dx * np.arange(n)
                     for (lo, _), dx, n in zip(self.bounds, self.spacing, self.shape))

    @property
    def wavenumbers(self):
        return tuple(2.0 * np.pi * sfft.fftfreq(n, dx)
                     for dx, n in zip(self.spacing, self.shape))

    def mesh(self):
        return np.meshgrid(*self.axes, indexing="ij")

    def check_resolution(self, max_spacing=0.25):
        if max(self.spacing) > max_spacing * (1 + 1e-12):
            raise GridError(f"grid spacing {max(self.spacing):.4g} exceeds {max_spacing}")

    def normalize(self, psi):
        return psi / np.sqrt(np.sum(np.abs(psi) ** 2) * self.cell_volume)

    def kinetic_symbol(self, masses):
        masses = np.broadcast_to(np.asarray(masses, dtype=float), (self.ndim,))
        ks = np.meshgrid(*self.wavenumbers, indexing="ij")
        return sum(k * k / (2.0 * m) for k, m in zip(ks, masses))


def edge_population(psi, grid, fraction=0.05, momentum=False, width=None):
    """Probability in the outer ``fraction`` of each axis (position or momentum).

    ``width`` (position only) replaces the fraction by an absolute layer
    thickness; it may be a scalar or one entry per axis, ``None`` entries
    falling back to ``fraction``.
    """
    dens = np.abs(sfft.fftn(psi) if momentum else psi) ** 2
    dens = dens / dens.sum()
    widths = width if np.iterable(width) else [width] * grid.ndim
    mask = np.zeros(grid.shape, dtype=bool)
    for ax, n in enumerate(grid.shape):
        if widths[ax] is None or momentum:
            m = max(1, int(round(fraction * n)))
        else:
            m = max(1, int(np.ceil(widths[ax] / grid.spacing[ax])))
        idx = [slice(None)] * grid.ndim
        if momentum:
            centre = n // 2
            idx[ax] = slice(centre - m, centre + m)
        else:
            idx[ax] = np.r_[0:m, n - m:n]
        mask[tuple(idx)] = True
    return float(dens[mask].sum())


def split_step(potential, psi0, t_f, dt, grid, masses=1.0, t0=0.0,
               edge_tol=1e-8, edge_width=None, check_every=200, callback=None):
    """Strang split-step Fourier propagation.

    Each step applies ``exp(-i V dt/2) exp(-i T dt) exp(-i V dt/2)`` with the
    potential sampled at the step midpoint. ``potential`` is either a static
    real array or a callable ``t -> array`` on the grid. The step is shrunk
    so that an integer number of steps covers ``t_f`` exactly.

    Raises :class:`GridError` when more than ``edge_tol`` of the population
    reaches the momentum edge or the edge of the box along any axis
    (``edge_tol=None`` disables both checks). The checked position layer is
    the outer 5% of each axis unless ``edge_width`` gives its thickness (see
    :func:`edge_population`).
    """
    check_positive(t_f, "t_f")
    n_steps = max(1, int(np.ceil(t_f / dt - 1e-9)))
    h = t_f / n_steps
    kinetic = np.exp(-1j * h * grid.kinetic_symbol(masses))
    static = not callable(potential)
    if static:
        half = np.exp(-0.5j * h * np.asarray(potential, dtype=float))
    psi = np.array(psi0, dtype=complex)
    for step in range(n_steps):
        t = t0 + step * h
        if not static:
            half = np.exp(-0.5j * h * np.asarray(potential(t + 0.5 * h), dtype=float))
        psi_k = sfft.fftn(half * psi)
        if edge_tol is not None and (step % check_every == 0 or step == n_steps - 1):
            _check_momentum_edge(psi_k, grid, edge_tol, t)
            _check_position_edge(psi, grid, edge_tol, edge_width, t)
        psi = half * sfft.ifftn(kinetic * psi_k)
        if callback is not None:
            callback(step + 1, t + h, psi)
    return psi


def _check_momentum_edge(psi_k, grid, tol, t):
    dens = np.abs(psi_k) ** 2
    total = dens.sum()
    mask = np.zeros(grid.shape, dtype=bool)
    for ax, n in enumerate(grid.shape):
        m = max(1, n // 20)
        idx = [slice(None)] * grid.ndim
        idx[ax] = slice(n // 2 - m, n // 2 + m)
        mask[tuple(idx)] = True
    frac = dens[mask].sum() / total
    if frac > tol:
        raise GridError(f"momentum-edge population {frac:.2e} exceeds {tol:.0e} at t={t:.4g}; "
                        "refine the grid spacing")


def _check_position_edge(psi, grid, tol, width, t):
    frac = edge_population(psi, grid, width=width)
    if frac > tol:
        raise GridError(f"population {frac:.2e} near the box edge exceeds {tol:.0e} at t={t:.4g}; "
                        "enlarge the box", space="position")


def energy(psi, potential, grid, masses=1.0):
    """Rayleigh quotient ``<psi|T + V|psi> / <psi|psi>`` with a spectral kinetic term."""
    psi_k = sfft.fftn(psi)
    kin = np.sum(grid.kinetic_symbol(masses) * np.abs(psi_k) ** 2) / psi.size
    pot = np.sum(potential * np.abs(psi) ** 2)
    return float((kin + pot) / np.sum(np.abs(psi) ** 2))


def ground_state(potential, grid, masses=1.0, psi_init=None,
                 dtaus=(0.05, 0.01, 0.002), tol=1e-10, check_every=20,
                 min_tau=2.0, max_steps=400_000):
    """Ground state by imaginary-time split-step evolution.

    The imaginary time step is reduced through ``dtaus``; at each stage the
    state is evolved until the energy changes by less than ``tol`` between
    checks, but for at least ``min_tau`` of imaginary time. The splitting
    bias of the final stage is O(dtau^2) in the state and O(dtau^4) in the
    energy.

    Returns ``(psi, E)`` with ``psi`` normalized and real-positive at its peak.
    """
    potential = np.asarray(potential, dtype=float)
    if potential.shape != grid.shape:
        raise DomainError("potential shape does not match the grid")
    if psi_init is None:
        psi = np.exp(-(potential - potential.min()))
    else:
        psi = np.array(psi_init, dtype=complex)
    psi = grid.normalize(psi.astype(complex))
    symbol = grid.kinetic_symbol(masses)
    vshift = potential - potential.min()
    steps = 0
    E_old = energy(psi, potential, grid, masses)
    for dtau in dtaus:
        half = np.exp(-0.5 * dtau * vshift)
        kin = np.exp(-dtau * symbol)
        converged = False
        stage_steps = 0
        while steps < max_steps:
            for _ in range(check_every):
                psi = half * sfft.ifftn(kin * sfft.fftn(half * psi))
                psi = grid.normalize(psi)
            steps += check_every
            stage_steps += check_every
            E = energy(psi, potential, grid, masses)
            if abs(E - E_old) < tol and stage_steps * dtau >= min_tau:
                E_old = E
                converged = True
                break
            E_old = E
        if not converged:
            raise ConvergenceError(f"imaginary-time evolution not converged after {steps} steps")
    peak = psi.flat[np.argmax(np.abs(psi))]
    psi = psi * np.conj(peak) / abs(peak)
    return psi, E_old


def fidelity(psi_final, psi_target, grid=None):
    """Squared overlap ``|<target|final>|^2`` (grid-weighted when ``grid`` is given)."""
    a = np.asarray(psi_final)
    b = np.asarray(psi_target)
    if a.shape != b.shape:
        raise DomainError(f"state shapes differ: {a.shape} vs {b.shape}")
    if grid is not None and tuple(grid.shape) != a.shape:
        raise DomainError("states do not live on the given grid")
    overlap = np.vdot(b, a)
    if grid is not None:
        overlap *= grid.cell_volume
    return float(abs(overlap) ** 2)


# -- checkpoints -----------------------------------------------------------

_MAGIC = b"ESTAWF01"


def save_wavefunction(path, psi, grid, t=0.0):
    """Write ``psi`` to a little-endian binary checkpoint.

    Layout: 8-byte magic ``ESTAWF01``; uint32 ndim; per axis float64 lo,
    float64 hi, uint64 n; float64 time; then ``prod(n)`` complex128 values
    (real, imag interleaved) in C order.
    """
    psi = np.asarray(psi, dtype="<c16")
    if psi.shape != grid.shape:
        raise DomainError("wavefunction shape does not match the grid")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", grid.ndim))
        for (lo, hi), n in zip(grid.bounds, grid.shape):
            fh.write(struct.pack("<ddQ", lo, hi, n))
        fh.write(struct.pack("<d", float(t)))
        fh.write(np.ascontiguousarray(psi).tobytes())


def load_wavefunction(path):
    """Inverse of :func:`save_wavefunction`; returns ``(psi, grid, t)``."""
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise DomainError(f"{path} is not a wavefunction checkpoint")
        (ndim,) = struct.unpack("<I", fh.read(4))
        bounds, shape = [], []
        for _ in range(ndim):
            lo, hi, n = struct.unpack("<ddQ", fh.read(24))
            bounds.append((lo, hi))
            shape.append(n)
        (t,) = struct.unpack("<d", fh.read(8))
        data = np.frombuffer(fh.read(), dtype="<c16")
    grid = SpatialGrid(tuple(bounds), tuple(shape))
    return data.reshape(grid.shape).astype(complex), grid, t
