"""Standard-Gaussian moments of scalar nonlinearities.

Every analytic formula in the package is parameterized by three Gaussian
expectations of the teacher function f and of the student activation phi,

    <g> = E[g(h)],   <g^2> = E[g(h)^2],   <g'> = E[g'(h)],   h ~ N(0, 1),

and by the dimensionless nonlinearity strengths built from them.  This module
computes those numbers and keeps a small registry of named functions so that
JSON configs can refer to them by name.
"""
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

SQRT_2PI = math.sqrt(2.0 * math.pi)

# half-width of the integration window used for kinked functions; the
# Gaussian weight beyond it is below 1e-31
_WINDOW = 12.0

TEACHER = "teacher"
ACTIVATION = "activation"


@dataclass(frozen=True)
class Nonlinearity:
    """A scalar function with its (almost everywhere) derivative.

    ``kinks`` lists points where the function or its derivative is not smooth.
    Quadrature is split there, which keeps it exact to rounding for piecewise
    polynomial functions such as ReLU.
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    kinks: tuple = ()

    def __call__(self, h):
        return self.fn(h)


@dataclass(frozen=True)
class NonlinearityStats:
    mean: float
    second_moment: float
    mean_derivative: float
    delta: float
    role: str = TEACHER


@dataclass(frozen=True)
class DerivedVariances:
    """Variance constants that enter the closed forms.

    sigma_dy2 : variance of the nonlinear part of the labels
    sigma_dz2 : variance of the nonlinear part of each hidden feature
    mu_z      : mean scale of the hidden features
    """

    sigma_dy2: float
    sigma_dz2: float
    mu_z: float


def _relu(h):
    return np.maximum(h, 0.0)


def _step(h):
    return (np.asarray(h) > 0).astype(float)


def _identity(h):
    return np.asarray(h, dtype=float)


def _one(h):
    return np.ones_like(np.asarray(h, dtype=float))


def _dtanh(h):
    return 1.0 / np.cosh(h) ** 2


_REGISTRY: dict = {}
# closed-form (mean, second moment, mean derivative) for built-ins
_EXACT: dict = {}


def register(name, fn, deriv, kinks=(), exact=None, overwrite=False):
    """Add a named nonlinearity to the registry.

    ``exact`` may give the closed-form triple (<g>, <g^2>, <g'>), which is then
    preferred over quadrature.
    """
    if name in _REGISTRY and not overwrite:
        raise ValueError(f"nonlinearity {name!r} is already registered")
    g = Nonlinearity(name, fn, deriv, tuple(sorted(kinks)))
    _REGISTRY[name] = g
    if exact is not None:
        _EXACT[name] = tuple(float(v) for v in exact)
    else:
        _EXACT.pop(name, None)
    return g


register("linear", _identity, _one, exact=(0.0, 1.0, 1.0))
register("relu", _relu, _step, kinks=(0.0,), exact=(1.0 / SQRT_2PI, 0.5, 0.5))
register("tanh", np.tanh, _dtanh)


def available():
    return sorted(_REGISTRY)


def get_nonlinearity(g):
    """Resolve a registry name (or pass through a Nonlinearity)."""
    if isinstance(g, Nonlinearity):
        return g
    try:
        return _REGISTRY[g]
    except KeyError:
        raise KeyError(f"unknown nonlinearity {g!r}; known: {available()}") from None


def gaussian_expectation(func, nodes=128, kinks=()):
    """E[func(h)] for h ~ N(0, 1).

    Smooth integrands use Gauss-Hermite quadrature with the substitution
    h = sqrt(2) t.  When ``kinks`` are given the real line is cut at those
    points and each piece is integrated with Gauss-Legendre against the
    Gaussian weight on a window of half-width 12.
    """
    if nodes < 2:
        raise ValueError("need at least two quadrature nodes")
    if not kinks:
        t, w = np.polynomial.hermite.hermgauss(nodes)
        return float(np.sum(w * func(math.sqrt(2.0) * t)) / math.sqrt(math.pi))
    x, w = np.polynomial.legendre.leggauss(nodes)
    cuts = [-_WINDOW] + [k for k in kinks if -_WINDOW < k < _WINDOW] + [_WINDOW]
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        half = 0.5 * (b - a)
        h = half * x + 0.5 * (a + b)
        total += half * np.sum(w * func(h) * np.exp(-0.5 * h * h))
    return float(total / SQRT_2PI)


def nonlinearity_delta(mean, second_moment, mean_derivative, role=TEACHER):
    """Ratio of nonlinear to linear variance.

    teacher:    (<f^2> - <f'>^2) / <f'>^2
    activation: (<phi^2> - <phi>^2 - <phi'>^2) / <phi'>^2
    """
    if abs(mean_derivative) < 1e-12:
        raise ValueError("mean derivative vanishes; normalization is undefined")
    d2 = mean_derivative ** 2
    if role == TEACHER:
        return (second_moment - d2) / d2
    if role == ACTIVATION:
        return (second_moment - mean ** 2 - d2) / d2
    raise ValueError(f"role must be {TEACHER!r} or {ACTIVATION!r}, got {role!r}")


def gaussian_moments(g, nodes=128, role=TEACHER, use_exact=True):
    """Moments <g>, <g^2>, <g'> and the nonlinearity strength for ``role``.

    ``g`` is a registry name or a Nonlinearity.  Built-ins with known closed
    forms return those unless ``use_exact`` is False.
    """
    g = get_nonlinearity(g)
    if use_exact and g.name in _EXACT and _REGISTRY.get(g.name) is g:
        mean, second, deriv = _EXACT[g.name]
    else:
        mean = gaussian_expectation(g.fn, nodes, g.kinks)
        second = gaussian_expectation(lambda h: g.fn(h) ** 2, nodes, g.kinks)
        deriv = gaussian_expectation(g.deriv, nodes, g.kinks)
    delta = nonlinearity_delta(mean, second, deriv, role)
    return NonlinearityStats(mean, second, deriv, delta, role)


def teacher_stats(f, nodes=128):
    return gaussian_moments(f, nodes, role=TEACHER)


def activation_stats(phi, nodes=128):
    return gaussian_moments(phi, nodes, role=ACTIVATION)


def derived_variances(teacher, student, stats_f=None, stats_phi=None):
    """sigma_dy2 = sb2*sx2*Df, sigma_dz2 = sw2*sx2*Dphi, mu_z = sw*sx*<phi>/<phi'>.

    For the linear-regression student there is no hidden layer and both
    sigma_dz2 and mu_z are zero.
    """
    if stats_f is None:
        stats_f = teacher_stats(teacher.f)
    sigma_dy2 = teacher.sigma_beta2 * teacher.sigma_x2 * stats_f.delta
    if student.arch == "linear":
        return DerivedVariances(sigma_dy2, 0.0, 0.0)
    if stats_phi is None:
        stats_phi = activation_stats(student.phi)
    sigma_dz2 = student.sigma_w2 * teacher.sigma_x2 * stats_phi.delta
    mu_z = math.sqrt(student.sigma_w2 * teacher.sigma_x2) * stats_phi.mean / stats_phi.mean_derivative
    return DerivedVariances(sigma_dy2, sigma_dz2, mu_z)
