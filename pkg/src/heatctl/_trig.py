"""Closed-form integrals of products of cosine atoms.

Every 1D basis function used in this package is a single atom
``A*cos(w*x + p)`` in absolute coordinates.  Products of two (or three)
atoms expand into sums of cosines, so integrals over intervals reduce to
antiderivatives of ``cos``.  All Gram matrices, Galerkin potential
entries and cross-basis overlaps are assembled from these kernels, which
keeps them free of quadrature error.
"""

import numpy as np

# frequencies in this package are either 0 or bounded below by pi/side,
# so anything smaller than this is an exact cancellation
_FREQ_EPS = 1e-12


def _cos_primitive_diff(w, p, a, b):
    """Vectorized ``int_a^b cos(w x + p) dx`` for arrays w, p."""
    w = np.asarray(w, dtype=float)
    p = np.asarray(p, dtype=float)
    small = np.abs(w) < _FREQ_EPS
    w_safe = np.where(small, 1.0, w)
    osc = (np.sin(w_safe * b + p) - np.sin(w_safe * a + p)) / w_safe
    flat = np.cos(p) * (b - a)
    return np.where(small, flat, osc)


def pair_integrals(amps, freqs, phases, a, b):
    """Matrix of ``int_a^b f_i f_j dx`` for atoms ``f_i = A_i cos(w_i x + p_i)``.

    Parameters
    ----------
    amps, freqs, phases : array_like, shape (n,)
        Atom parameters.
    a, b : float
        Integration interval.

    Returns
    -------
    numpy.ndarray, shape (n, n)
    """
    A = np.asarray(amps, dtype=float)
    w = np.asarray(freqs, dtype=float)
    p = np.asarray(phases, dtype=float)
    wd = w[:, None] - w[None, :]
    ws = w[:, None] + w[None, :]
    pd = p[:, None] - p[None, :]
    ps = p[:, None] + p[None, :]
    out = 0.5 * (_cos_primitive_diff(wd, pd, a, b) + _cos_primitive_diff(ws, ps, a, b))
    return out * (A[:, None] * A[None, :])


def triple_integrals(amps, freqs, phases, w0, p0, a, b):
    """Matrix of ``int_a^b f_i f_j cos(w0 x + p0) dx``.

    Used for Galerkin entries of cosine-series potentials.
    """
    A = np.asarray(amps, dtype=float)
    w = np.asarray(freqs, dtype=float)
    p = np.asarray(phases, dtype=float)
    wd = w[:, None] - w[None, :]
    ws = w[:, None] + w[None, :]
    pd = p[:, None] - p[None, :]
    ps = p[:, None] + p[None, :]
    out = 0.25 * (
        _cos_primitive_diff(wd - w0, pd - p0, a, b)
        + _cos_primitive_diff(wd + w0, pd + p0, a, b)
        + _cos_primitive_diff(ws - w0, ps - p0, a, b)
        + _cos_primitive_diff(ws + w0, ps + p0, a, b)
    )
    return out * (A[:, None] * A[None, :])


def cross_integrals(amps1, freqs1, phases1, amps2, freqs2, phases2, a, b):
    """Rectangular matrix of ``int_a^b f_i g_j dx`` for two atom families."""
    A1 = np.asarray(amps1, dtype=float)
    w1 = np.asarray(freqs1, dtype=float)
    p1 = np.asarray(phases1, dtype=float)
    A2 = np.asarray(amps2, dtype=float)
    w2 = np.asarray(freqs2, dtype=float)
    p2 = np.asarray(phases2, dtype=float)
    wd = w1[:, None] - w2[None, :]
    ws = w1[:, None] + w2[None, :]
    pd = p1[:, None] - p2[None, :]
    ps = p1[:, None] + p2[None, :]
    out = 0.5 * (_cos_primitive_diff(wd, pd, a, b) + _cos_primitive_diff(ws, ps, a, b))
    return out * (A1[:, None] * A2[None, :])


def gauss_legendre(order=32):
    """Nodes and weights on [-1, 1]; tensorize per axis for quadrature."""
    return np.polynomial.legendre.leggauss(order)


def quad_interval(f, a, b, order=32, panels=1):
    """Gauss-Legendre quadrature of ``f`` over [a, b] with equal panels."""
    x0, w0 = gauss_legendre(order)
    edges = np.linspace(a, b, panels + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        xm = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x0
        total += np.sum(0.5 * (hi - lo) * w0 * f(xm))
    return total
