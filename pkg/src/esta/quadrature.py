"""Adaptive composite Gauss-Legendre quadrature for vector-valued integrands."""

import numpy as np

from .exceptions import AccuracyError


def gauss_legendre_nodes(a, b, n_panels, order=16):
    """Nodes and weights of a composite Gauss-Legendre rule on ``[a, b]``."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def integrate(func, a, b, rtol=1e-8, atol=1e-14, order=16, panels=4,
              max_panels=1 << 14):
    """Integrate ``func`` over ``[a, b]``, doubling panels until stable.

    Parameters
    ----------
    func : callable
        Vectorized integrand. Called with a 1-D array of nodes, returns an
        array whose leading axis runs over the nodes.
    rtol, atol : float
        Refinement stops once successive estimates differ by less than
        ``atol + rtol * max|I|`` in every component.

    Returns
    -------
    ndarray
        The integral; shape is ``func(nodes).shape[1:]``.
    """
    def rule(n):
        nodes, weights = gauss_legendre_nodes(a, b, n, order)
        values = np.asarray(func(nodes))
        return np.tensordot(weights, values, axes=(0, 0))

    previous = rule(panels)
    n = panels
    while n < max_panels:
        n *= 2
        current = rule(n)
        err = np.max(np.abs(current - previous)) if np.size(current) else 0.0
        scale = np.max(np.abs(current)) if np.size(current) else 0.0
        if err <= atol + rtol * scale:
            return current
        previous = current
    raise AccuracyError(
        f"time quadrature did not converge with {max_panels} panels "
        f"(last change {err:.3e}, scale {scale:.3e})"
    )
