"""Hidden features, ridge fits and empirical susceptibility traces.

The random nonlinear features are

    z(x) = (sigma_W sigma_X / (<phi'> sqrt(N_p))) phi(sqrt(N_p)/(sigma_W sigma_X) W^T x)

with W an N_f x N_p matrix of i.i.d. N(0, sigma_W^2/N_p) entries.  The
normalization makes every pre-activation a unit Gaussian and the linear
part of z equal to W^T x.  For linear regression z = x.

Ridge problems are always solved with a Cholesky factorization of the
smaller of the two Gram matrices (lambda I + Z^T Z or lambda I + Z Z^T).
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from . import nonlinearity as nl
from .config import LINEAR, RngContract


@dataclass(frozen=True)
class HiddenFeatures:
    z: np.ndarray
    x: np.ndarray
    w_matrix: Optional[np.ndarray] = None  # None for linear regression
    mu_z: float = 0.0

    @property
    def n_p(self):
        return self.z.shape[1]

    @property
    def mean_part(self):
        return np.full_like(self.z, self.mu_z / math.sqrt(self.n_p)) if self.w_matrix is not None \
            else np.zeros_like(self.z)

    @property
    def linear_part(self):
        return self.x if self.w_matrix is None else self.x @ self.w_matrix

    @property
    def nonlinear_part(self):
        return self.z - self.mean_part - self.linear_part


def sample_weights(n_f, n_p, sigma_w2, rng):
    g = rng.generator("w") if isinstance(rng, RngContract) else rng
    return math.sqrt(sigma_w2 / n_p) * g.standard_normal((n_f, n_p))


def apply_activation(pre, phi, sigma_w2, sigma_x2, n_p, stats_phi=None):
    """Map pre-activations W^T x to normalized hidden features."""
    if phi == "linear":
        return pre
    g = nl.get_nonlinearity(phi)
    stats_phi = stats_phi or nl.activation_stats(phi)
    s = math.sqrt(sigma_w2 * sigma_x2 / n_p)
    return (s / stats_phi.mean_derivative) * g.fn(pre / s)


def hidden_features(x, student, stats_phi=None, rng=None, w=None, sigma_x2=1.0, n_p=None):
    """Hidden features for the inputs ``x`` (M x N_f).

    Supply either a fixed ``w`` or an ``rng`` (RngContract or Generator)
    together with ``n_p``, from which W is drawn.  Linear regression returns z = x.
    """
    x = np.asarray(x, dtype=float)
    if student.arch == LINEAR:
        return HiddenFeatures(z=x, x=x)
    n_f = x.shape[1]
    if w is None:
        if rng is None or n_p is None:
            raise ValueError("need either w, or rng and n_p, to build random features")
        w = sample_weights(n_f, n_p, student.sigma_w2, rng)
    if w.shape[0] != n_f:
        raise ValueError(f"W has {w.shape[0]} rows but x has {n_f} columns")
    n_p = w.shape[1]
    stats_phi = stats_phi or nl.activation_stats(student.phi)
    z = apply_activation(x @ w, student.phi, student.sigma_w2, sigma_x2, n_p, stats_phi)
    mu_z = math.sqrt(student.sigma_w2 * sigma_x2) * stats_phi.mean / stats_phi.mean_derivative
    return HiddenFeatures(z=z, x=x, w_matrix=w, mu_z=mu_z)


@dataclass(frozen=True)
class FitResult:
    w_hat: np.ndarray
    beta_hat: np.ndarray
    residuals: np.ndarray
    u_hat: np.ndarray
    train_error: float
    lam: float


def _cho(a):
    try:
        return linalg.cho_factor(a, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise np.linalg.LinAlgError(f"ridge system is not positive definite: {exc}") from None


def ridge_solve(z, y, lam):
    """w = (lam I + Z^T Z)^{-1} Z^T y, primal when N_p <= M, dual otherwise.

    ``y`` may be a vector or an M x k matrix of right-hand sides.
    """
    if not lam > 0:
        raise ValueError("the numerical ridge solve needs lambda > 0")
    z = np.asarray(z, dtype=float)
    m, n_p = z.shape
    if n_p <= m:
        a = z.T @ z
        a[np.diag_indices_from(a)] += lam
        return linalg.cho_solve(_cho(a), z.T @ y)
    k = z @ z.T
    k[np.diag_indices_from(k)] += lam
    return z.T @ linalg.cho_solve(_cho(k), y)


def ridge_fit(z, y, lam, x=None, w_matrix=None):
    """Ridge fit with diagnostics.

    ``x`` and ``w_matrix`` are only needed for the RNLFM quantities
    beta_hat = W w_hat and u_hat = X^T residuals; by default x = z and W = I.
    """
    if isinstance(z, HiddenFeatures):
        x, w_matrix, z = z.x, z.w_matrix, z.z
    y = np.asarray(y, dtype=float)
    w_hat = ridge_solve(z, y, lam)
    resid = y - z @ w_hat
    x = z if x is None else x
    beta_hat = w_hat if w_matrix is None else w_matrix @ w_hat
    return FitResult(
        w_hat=w_hat,
        beta_hat=beta_hat,
        residuals=resid,
        u_hat=x.T @ resid,
        train_error=float(np.mean(resid ** 2)),
        lam=float(lam),
    )


def stationarity_residual(z, y, fit):
    """Relative norm of the ridge gradient, ||-Z^T dy + lam w|| / (||Z^T y|| + lam ||w||)."""
    g = -z.T @ fit.residuals + fit.lam * fit.w_hat
    return float(np.linalg.norm(g) / (np.linalg.norm(z.T @ y) + fit.lam * np.linalg.norm(fit.w_hat)))


def predict(fit, z):
    if isinstance(z, HiddenFeatures):
        z = z.z
    return z @ fit.w_hat


def test_error(fit, z_test, y_test):
    """Mean squared residual on a test set built with the same beta and W."""
    return float(np.mean((np.asarray(y_test) - predict(fit, z_test)) ** 2))


test_error.__test__ = False  # keep pytest from collecting the name


@dataclass(frozen=True)
class EmpiricalSusceptibilities:
    nu: float
    chi: float
    kappa: float


def empirical_susceptibilities(z, x=None, w_matrix=None, lam=1e-6):
    """Trace estimates of nu, chi and kappa for one design.

    nu    = Tr[(lam + Z^T Z)^{-1}] / N_p
    chi   = Tr[I - Z (lam + Z^T Z)^{-1} Z^T] / M
    kappa = Tr[I - W (lam + Z^T Z)^{-1} Z^T X] / N_f   (W = I, X = Z for linear regression)

    Only a min(M, N_p) sized matrix is inverted.
    """
    if isinstance(z, HiddenFeatures):
        x, w_matrix, z = z.x, z.w_matrix, z.z
    if not lam > 0:
        raise ValueError("empirical susceptibilities need lambda > 0")
    m, n_p = z.shape
    linear = w_matrix is None
    x = z if x is None else x
    n_f = x.shape[1]
    eye = np.eye(min(m, n_p))
    if n_p <= m:
        a = z.T @ z
        a[np.diag_indices_from(a)] += lam
        inv = linalg.cho_solve(_cho(a), eye)
        tr = np.trace(inv)
        nu = tr / n_p
        chi = (m - n_p + lam * tr) / m
        if linear:
            contraction = n_p - lam * tr
        else:
            contraction = np.sum(inv * (z.T @ (x @ w_matrix)).T)
    else:
        k = z @ z.T
        k[np.diag_indices_from(k)] += lam
        inv = linalg.cho_solve(_cho(k), eye)
        tr = np.trace(inv)
        nu = ((n_p - m) / lam + tr) / n_p
        chi = lam * tr / m
        if linear:
            contraction = m - lam * tr
        else:
            contraction = np.sum(inv * ((x @ w_matrix) @ z.T).T)
    kappa = 1.0 - contraction / n_f
    return EmpiricalSusceptibilities(float(nu), float(chi), float(kappa))


def gram_eigenvalues(z):
    """Eigenvalues of Z^T Z (length N_p), using Z Z^T and zero padding when N_p > M."""
    m, n_p = z.shape
    if n_p <= m:
        ev = linalg.eigvalsh(z.T @ z)
    else:
        ev = np.concatenate([np.zeros(n_p - m), linalg.eigvalsh(z @ z.T)])
    return np.sort(ev)
