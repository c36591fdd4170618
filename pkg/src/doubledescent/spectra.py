"""Eigenvalue densities of the kernel matrix Z^T Z in the thermodynamic limit.

Linear regression gives the Marchenko-Pastur law.  For random nonlinear
features the Stieltjes-type transform nu(lam) = Tr[(lam + Z^T Z)^{-1}]/N_p
solves a quartic, and the density follows from

    rho(x) = -Im nu(-x + i eps) / pi,   eps -> 0+.

Support edges are zeros of the quartic's discriminant in the real variable x.
"""
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from . import polyroots
from .theory import t_quartic_coefficients

DEFAULT_EPS = 1e-6
SIGN_TOL = 1e-9


class SpectrumError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SpectralDensity:
    f_zero: float
    bulk: Callable
    support: list
    x_min: float
    x_max: float
    epsilon: float = 0.0
    info: dict = field(default_factory=dict, repr=False)

    def __call__(self, x):
        return self.bulk(x)

    def bulk_mass(self, a=None, b=None):
        """Integral of the bulk density over [a, b] (default: whole support)."""
        total = 0.0
        for lo, hi in self.support:
            lo2 = lo if a is None else max(lo, a)
            hi2 = hi if b is None else min(hi, b)
            if hi2 <= lo2:
                continue
            # a gapless bulk diverges like x^{-1/2} at zero: integrate in u = sqrt(x)
            val, _ = integrate.quad(lambda u: 2.0 * u * float(self.bulk(u * u)),
                                    math.sqrt(lo2), math.sqrt(hi2), limit=400,
                                    epsabs=1e-11, epsrel=1e-10)
            total += val
        return total

    def total_mass(self):
        return self.f_zero + self.bulk_mass()

    def bin_masses(self, edges):
        """Analytic probability mass of each bin (bulk only; the atom at zero is separate)."""
        edges = np.asarray(edges, dtype=float)
        return np.array([self.bulk_mass(a, b) for a, b in zip(edges[:-1], edges[1:])])


# ---------------------------------------------------------------- Marchenko-Pastur

def mp_edges(alpha_f, sigma_x2=1.0):
    r = 1.0 / math.sqrt(alpha_f)
    return sigma_x2 * (1.0 - r) ** 2, sigma_x2 * (1.0 + r) ** 2


def mp_density(alpha_f, sigma_x2=1.0):
    """Eigenvalue density of X^T X for X with M rows and i.i.d. N(0, sigma_X^2/N_f) entries."""
    if not alpha_f > 0:
        raise ValueError("alpha_f must be positive")
    lo, hi = mp_edges(alpha_f, sigma_x2)

    def rho(x):
        x = np.asarray(x, dtype=float)
        inside = (x > lo) & (x < hi)
        xs = np.where(inside, x, 1.0)
        val = np.sqrt(np.clip((hi - xs) * (xs - lo), 0.0, None)) / (2.0 * math.pi * sigma_x2 * xs)
        out = np.where(inside, val, 0.0)
        return out if out.ndim else float(out)

    return SpectralDensity(max(0.0, 1.0 - 1.0 / alpha_f), rho, [(lo, hi)], lo, hi, 0.0,
                           dict(kind="marchenko-pastur", alpha_f=alpha_f, sigma_x2=sigma_x2))


# ---------------------------------------------------------------- RNLFM

@dataclass(frozen=True)
class QuarticDiscriminant:
    """Discriminant of the spectral quartic as a function of x (lam = -x)."""

    alpha_f: float
    alpha_p: float
    delta_phi: float
    scale: float = 1.0

    def coefficients(self, x):
        """a4..a0 (highest first) at lam_bar = -x/scale."""
        return t_quartic_coefficients(self.alpha_f, self.alpha_p, -x / self.scale, self.delta_phi)

    def resolvents(self, x):
        a4, a3, a2, a1, a0 = self.coefficients(x)
        q = a2 * a2 - 3.0 * a1 * a3 + 12.0 * a0 * a4
        r = (2.0 * a2 ** 3 - 9.0 * a1 * a2 * a3 + 27.0 * a0 * a3 * a3
             + 27.0 * a1 * a1 * a4 - 72.0 * a0 * a2 * a4)
        return r, q

    def __call__(self, x):
        r, q = self.resolvents(x)
        return r * r - 4.0 * q ** 3

    def relative(self, x):
        """D divided by the size of its two terms; |value| near 1e-16 means roundoff."""
        r, q = self.resolvents(x)
        return (r * r - 4.0 * q ** 3) / (r * r + 4.0 * abs(q) ** 3)


def rnlfm_f_zero(alpha_p):
    return max(0.0, 1.0 - 1.0 / alpha_p)


def _nu_roots(x, eps, af, ap, dphi, scale):
    lam = -x + 1j * eps
    t = polyroots.poly_roots(t_quartic_coefficients(af, ap, lam / scale, dphi))
    return t / (ap * lam), lam


def _bulk_rho_at(x, eps, af, ap, dphi, scale, fz):
    """Largest candidate density among the four roots, atom at zero removed."""
    nu, lam = _nu_roots(x, eps, af, ap, dphi, scale)
    rho = -(nu - fz / lam).imag / math.pi
    order = np.argsort(rho)
    return rho[order[-1]], rho[order[-2]], nu


def rnlfm_density(alpha_f, alpha_p, delta_phi, scale=1.0, epsilon=DEFAULT_EPS, n_scan=4000):
    """Eigenvalue density of Z^T Z for random nonlinear features.

    ``scale`` is sigma_W^2 sigma_X^2.  Densities are evaluated at lam = -x + i eps
    for eps and 2 eps and Richardson-extrapolated to eps -> 0; below x = scale
    eps shrinks in proportion to x.  Of the four
    quartic roots the one with the largest density is taken; inside the bulk
    exactly one root has a positive imaginary density, the others are of order
    eps (a second positive one is reported as ambiguous).
    """
    if not 1e-9 <= epsilon <= 1e-3:
        raise ValueError("epsilon must lie in [1e-9, 1e-3]")
    af, ap, d = float(alpha_f), float(alpha_p), float(delta_phi)
    fz = rnlfm_f_zero(ap)
    disc = QuarticDiscriminant(af, ap, d, scale)
    support = support_intervals(disc, af, ap, d, scale, epsilon, n_scan)
    if not support:
        raise SpectrumError(f"no bulk support found for alpha_f={af}, alpha_p={ap}")
    ambiguous = []

    def point(x):
        if not any(lo <= x <= hi for lo, hi in support):
            return 0.0
        eps = epsilon * min(1.0, x / scale)
        r1, second1, nu1 = _bulk_rho_at(x, eps, af, ap, d, scale, fz)
        r2, _, _ = _bulk_rho_at(x, 2.0 * eps, af, ap, d, scale, fz)
        if second1 > max(0.5 * r1, 1e-6):
            ambiguous.append(x)
        if not np.all(np.isfinite(nu1)):
            raise SpectrumError(f"no admissible root at x={x}: nu roots {nu1}")
        return max(2.0 * r1 - r2, 0.0)

    def rho(x):
        xa = np.asarray(x, dtype=float)
        out = np.array([point(float(v)) for v in xa.ravel()]).reshape(xa.shape)
        return out if out.ndim else float(out)

    info = dict(kind="rnlfm", alpha_f=af, alpha_p=ap, delta_phi=d, scale=scale, ambiguous=ambiguous)
    return SpectralDensity(fz, rho, support, support[0][0], support[-1][1], epsilon, info)


def _scan_upper(af, ap, d, scale):
    return 20.0 * scale * (1.0 + d) * (1.0 + af) * (1.0 + 1.0 / ap) * (1.0 + af / ap)


def support_intervals(disc, af, ap, d, scale, epsilon=DEFAULT_EPS, n_scan=4000):
    """Intervals of x where the density is positive.

    D(x) is scanned for sign changes on a log grid over (1e-8, upper bound);
    each change is refined by bracketing to 1e-10 relative.  Intervals between
    consecutive edges are kept if the density at their midpoint is positive.
    """
    upper = _scan_upper(af, ap, d, scale)
    xs = np.geomspace(1e-8 * scale, upper, n_scan)
    rel = np.array([disc.relative(x) for x in xs])
    definite = np.flatnonzero(np.abs(rel) > SIGN_TOL)
    edges = [0.0]
    for i, j in zip(definite[:-1], definite[1:]):
        if rel[i] * rel[j] < 0:
            edges.append(optimize.brentq(disc.relative, xs[i], xs[j], xtol=1e-300, rtol=1e-14,
                                         maxiter=500))
    edges.append(upper)
    fz = rnlfm_f_zero(ap)
    support = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        r1, _, _ = _bulk_rho_at(mid, epsilon, af, ap, d, scale, fz)
        r2, _, _ = _bulk_rho_at(mid, 2.0 * epsilon, af, ap, d, scale, fz)
        if 2.0 * r1 - r2 > 1e-4 / scale:
            if support and math.isclose(support[-1][1], lo):
                support[-1] = (support[-1][0], hi)
            else:
                support.append((lo, hi))
    return support


def density_table(density, xs):
    """(x, rho) rows for export."""
    xs = np.asarray(xs, dtype=float)
    return np.column_stack([xs, density.bulk(xs)])


def evaluation_grid(density, n=400):
    """Grid clustered near the support edges (Chebyshev points on each interval)."""
    pts = []
    k = np.arange(n)
    for lo, hi in density.support:
        u = 0.5 * (1.0 - np.cos(math.pi * (k + 0.5) / n))
        pts.append(lo + (hi - lo) * u)
    return np.concatenate(pts)
