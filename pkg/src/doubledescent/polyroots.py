"""Polynomial roots via companion-matrix eigenvalues with Newton polishing.

This is the single root finder shared by the susceptibility solver and the
spectral-density code.  Coefficients are ordered highest degree first, as in
``numpy.polyval``; real or complex coefficients are accepted.
"""
import numpy as np


def trim_leading(coeffs):
    """Drop exactly-zero leading coefficients (a quartic whose top term vanishes is a cubic)."""
    c = np.atleast_1d(np.asarray(coeffs))
    nz = np.flatnonzero(c != 0)
    if nz.size == 0:
        raise ValueError("all polynomial coefficients are zero")
    return c[nz[0]:]


def companion_matrix(coeffs):
    c = trim_leading(coeffs)
    c = c / c[0]
    n = c.size - 1
    comp = np.zeros((n, n), dtype=c.dtype)
    comp[0, :] = -c[1:]
    if n > 1:
        comp[1:, :-1] = np.eye(n - 1)
    return comp


def polish(coeffs, roots, iters=4):
    """A few Newton steps on each root; a step is kept only if it lowers |p|."""
    c = trim_leading(coeffs)
    dc = np.polyder(c)
    out = np.array(roots, dtype=complex)
    for k in range(out.size):
        r = out[k]
        pr = np.polyval(c, r)
        for _ in range(iters):
            d = np.polyval(dc, r)
            if d == 0:
                break
            cand = r - pr / d
            pc = np.polyval(c, cand)
            if abs(pc) >= abs(pr):
                break
            r, pr = cand, pc
        out[k] = r
    return out


def poly_roots(coeffs, polish_steps=4):
    """All complex roots of the polynomial."""
    c = trim_leading(coeffs)
    if c.size == 1:
        return np.zeros(0, dtype=complex)
    roots = np.linalg.eigvals(companion_matrix(c))
    return polish(c, roots, polish_steps) if polish_steps else roots.astype(complex)


def real_roots(coeffs, imag_tol=1e-8):
    """Real parts of the roots whose imaginary part is below ``imag_tol`` (scaled by max(1, |root|))."""
    r = poly_roots(coeffs)
    keep = np.abs(r.imag) <= imag_tol * np.maximum(1.0, np.abs(r))
    return np.sort(r[keep].real)


def residual(coeffs, x):
    """|p(x)| / max|coefficient|."""
    c = trim_leading(coeffs)
    return np.abs(np.polyval(c, x)) / np.max(np.abs(c))
