"""Analytic train/test error, bias and variance in the thermodynamic limit.

Two students are covered: linear regression on the input features and the
random nonlinear features model (RNLFM).  Both reduce to a handful of scalar
susceptibilities (nu, chi, kappa, omega, phi_s) that solve closed
self-consistency equations.  The susceptibilities fix five ensemble averages,
and those averages give the errors:

    train    = <dy^2>
    test     = sx2 <dbeta^2> + s_dz2 <w^2> + s_dy2 + s_eps2
    bias^2   = sx2 <dbeta1 dbeta2> + s_dz2 <w1 w2> + s_dy2
    variance = test - bias^2 - s_eps2

Every entry point takes a ridge parameter ``lam``.  With lam > 0 the finite-
lambda equations are solved exactly (a quadratic for linear regression, a
quartic for the RNLFM).  With lam = 0 the ridge-less closed forms are used.
The ``method="ridgeless"`` option also accepts lam > 0; quantities that
vanish in the ridge-less limit then get their leading lambda^2 term.
"""
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import polyroots
from .config import LINEAR, RNLFM

THRESHOLD_TOL = 1e-9
INF = math.inf
SOURCES = ("linear", "nonlinear", "noise")


@dataclass(frozen=True)
class ModelConstants:
    """Variance constants shared by all formulas.

    sigma_dy2 is the nonlinear label variance sigma_beta^2 sigma_X^2 Delta_f and
    delta_phi the activation nonlinearity; sigma_dz2 follows from delta_phi.
    """

    sigma_beta2: float = 1.0
    sigma_x2: float = 1.0
    sigma_eps2: float = 0.0
    sigma_dy2: float = 0.0
    sigma_w2: float = 1.0
    delta_phi: float = 0.0

    @property
    def sigma_dz2(self):
        return self.sigma_w2 * self.sigma_x2 * self.delta_phi

    @property
    def s(self):
        """Variance of everything the model cannot fit linearly: noise plus nonlinear labels."""
        return self.sigma_eps2 + self.sigma_dy2

    @classmethod
    def from_specs(cls, teacher, student):
        dphi = student.stats.delta if student.arch == RNLFM else 0.0
        return cls(teacher.sigma_beta2, teacher.sigma_x2, teacher.sigma_eps2,
                   teacher.sigma_dy2, student.sigma_w2, dphi)

    def only(self, source):
        """Constants with every label source except ``source`` switched off."""
        if source == "linear":
            return replace(self, sigma_eps2=0.0, sigma_dy2=0.0)
        if source == "nonlinear":
            return replace(self, sigma_beta2=0.0, sigma_eps2=0.0)
        if source == "noise":
            return replace(self, sigma_beta2=0.0, sigma_dy2=0.0)
        raise ValueError(f"unknown label source {source!r}")


@dataclass(frozen=True)
class Susceptibilities:
    nu: float
    chi: float
    kappa: float
    omega: float
    phi_s: float
    nu_m1: float = 0.0  # coefficient of 1/lam in nu
    nu_0: float = math.nan
    chi_0: float = math.nan
    chi_1: float = math.nan  # coefficient of lam in chi
    lam: float = 0.0
    alpha_f: float = math.nan
    alpha_p: float = math.nan
    divergent: bool = False
    ambiguous: bool = False
    # finite stand-ins (nu/s, s chi, s omega, phi_s/s) fed to the linear system
    reduced: Optional[tuple] = field(default=None, repr=False)
    # <u^2> and <dy^2> from the reduced system are multiplied by scale2, and
    # also by lam^2 when lam_power is set (ridge-less, above the threshold)
    scale2: float = field(default=1.0, repr=False)
    lam_power: bool = field(default=False, repr=False)


@dataclass(frozen=True)
class EnsembleAverages:
    dy2: float
    w2: float
    u2: float
    db2: float
    w1w2: float
    db1db2: float


@dataclass(frozen=True)
class TheoryResult:
    susceptibilities: Susceptibilities
    averages: EnsembleAverages
    train: float
    test: float
    bias2: float
    variance: float
    noise: float
    divergent: bool = False
    inputs: dict = field(default_factory=dict, repr=False)


def _mul(a, b):
    """Product with 0 * inf = 0, so absent terms stay absent."""
    return 0.0 if a == 0 or b == 0 else a * b


def assemble_decomposition(averages, constants, susceptibilities=None, inputs=None):
    c = constants
    a = averages
    test = _mul(c.sigma_x2, a.db2) + _mul(c.sigma_dz2, a.w2) + c.sigma_dy2 + c.sigma_eps2
    bias2 = _mul(c.sigma_x2, a.db1db2) + _mul(c.sigma_dz2, a.w1w2) + c.sigma_dy2
    variance = INF if math.isinf(test) else test - bias2 - c.sigma_eps2
    sus = susceptibilities
    divergent = math.isinf(test) or (sus is not None and sus.divergent)
    return TheoryResult(sus, a, a.dy2, test, bias2, variance, c.sigma_eps2, divergent, dict(inputs or {}))


# ----------------------------------------------------------------- linear regression

def linreg_chi(alpha_f, lam, sigma_x2=1.0):
    """Positive root of chi^2 + [(a-1) + lb a] chi - lb a = 0 with lb = lam/sigma_X^2."""
    lb = lam / sigma_x2
    b = (alpha_f - 1.0) + lb * alpha_f
    q = lb * alpha_f
    disc = math.sqrt(b * b + 4.0 * q)
    # the product of the roots is -q < 0, so exactly one root is positive
    return 0.5 * (disc - b) if b <= 0 else 2.0 * q / (b + disc)


def linreg_susceptibilities(alpha_f, lam, sigma_x2=1.0):
    """nu, chi and kappa = lam nu for ridge regression on the inputs."""
    a = alpha_f
    if lam > 0:
        chi = linreg_chi(a, lam, sigma_x2)
        nu = 1.0 / (lam + sigma_x2 * chi / a)
        kappa = lam * nu
        return Susceptibilities(nu, chi, kappa, math.nan, math.nan, lam=lam, alpha_f=a, alpha_p=a)
    if abs(a - 1.0) < THRESHOLD_TOL:
        return Susceptibilities(INF, 0.0, 0.0, math.nan, math.nan, nu_m1=0.0, nu_0=INF,
                                chi_0=0.0, chi_1=INF, alpha_f=a, alpha_p=a, divergent=True)
    if a < 1:
        nu0 = a / (sigma_x2 * (1.0 - a))
        return Susceptibilities(nu0, 1.0 - a, 0.0, math.nan, math.nan, nu_m1=0.0, nu_0=nu0,
                                chi_0=1.0 - a, chi_1=a * a / (sigma_x2 * (1.0 - a)),
                                alpha_f=a, alpha_p=a)
    return Susceptibilities(INF, 0.0, (a - 1.0) / a, math.nan, math.nan,
                            nu_m1=(a - 1.0) / a, nu_0=1.0 / (sigma_x2 * (a - 1.0)),
                            chi_0=0.0, chi_1=a / (sigma_x2 * (a - 1.0)), alpha_f=a, alpha_p=a)


def linreg_system(nu, chi, alpha_f, lam, constants):
    """3x3 system for (<w^2>, <dy^2>, <dbeta^2>) at finite lambda."""
    c = constants
    a = alpha_f
    sx2 = c.sigma_x2
    A = np.array([
        [1.0, -nu * nu * sx2 / a, 0.0],
        [0.0, 1.0, -chi * chi * sx2],
        [0.0, -nu * nu * sx2 / a, 1.0],
    ])
    b = np.array([
        nu * nu * c.sigma_beta2 * sx2 * sx2 * chi * chi / (a * a),
        chi * chi * c.s,
        nu * nu * c.sigma_beta2 * lam * lam,
    ])
    return A, b


def _linreg_exact_averages(sus, lam, constants):
    c = constants
    A, b = linreg_system(sus.nu, sus.chi, sus.alpha_f, lam, c)
    w2, dy2, db2 = np.linalg.solve(A, b)
    # beta_hat = beta - dbeta has overlap sb2 (1 - lam nu)^2 = sb2 (sx2 chi nu / a)^2
    w1w2 = c.sigma_beta2 * (c.sigma_x2 * sus.chi * sus.nu / sus.alpha_f) ** 2
    db1db2 = c.sigma_beta2 * (lam * sus.nu) ** 2
    return EnsembleAverages(float(dy2), float(w2), lam * lam * float(w2), float(db2), w1w2, db1db2)


def _linreg_ridgeless_averages(alpha_f, constants, lam=0.0):
    c = constants
    a = alpha_f
    sx2, sb2, s = c.sigma_x2, c.sigma_beta2, c.s
    if abs(a - 1.0) < THRESHOLD_TOL:
        return EnsembleAverages(0.0, INF, 0.0 if lam == 0 else INF, INF, sb2, 0.0)
    if a < 1:
        nu = a / (sx2 * (1.0 - a))
        w2 = sb2 + (s / sx2) * a / (1.0 - a)
        db2 = (s / sx2) * a / (1.0 - a)
        return EnsembleAverages(s * (1.0 - a), w2, lam * lam * w2, db2, sb2, sb2 * (lam * nu) ** 2)
    w2 = sb2 / a + (s / sx2) / (a - 1.0)
    db2 = sb2 * (a - 1.0) / a + (s / sx2) / (a - 1.0)
    dy2 = (lam * lam / sx2 ** 2) * (sb2 * sx2 * a / (a - 1.0) + s * a ** 3 / (a - 1.0) ** 3)
    return EnsembleAverages(dy2, w2, lam * lam * w2, db2, sb2 / (a * a), sb2 * ((a - 1.0) / a) ** 2)


def linreg_theory(alpha_f, constants, lam=0.0, method=None):
    """Errors, bias and variance of ridge regression on the inputs at ratio alpha_f = N_f/M."""
    if not alpha_f > 0 or not math.isfinite(alpha_f):
        raise ValueError(f"alpha_f must be finite and positive, got {alpha_f!r}")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    method = method or ("exact" if lam > 0 else "ridgeless")
    inputs = dict(model=LINEAR, alpha_f=alpha_f, alpha_p=alpha_f, lam=lam, method=method, constants=constants)
    if method == "exact":
        if not lam > 0:
            raise ValueError("the exact finite-lambda solution needs lambda > 0")
        sus = linreg_susceptibilities(alpha_f, lam, constants.sigma_x2)
        avg = _linreg_exact_averages(sus, lam, constants)
    elif method == "ridgeless":
        sus = linreg_susceptibilities(alpha_f, 0.0, constants.sigma_x2)
        avg = _linreg_ridgeless_averages(alpha_f, constants, lam)
    else:
        raise ValueError(f"unknown method {method!r}")
    return assemble_decomposition(avg, constants, sus, inputs)


# ----------------------------------------------------------------- RNLFM

def chi_quartic_coefficients(alpha_f, alpha_p, lam_bar, delta_phi):
    """Coefficients (highest first) of the quartic satisfied by chi; lam_bar = lam/(sigma_W^2 sigma_X^2)."""
    af, ap, lb, d = alpha_f, alpha_p, lam_bar, delta_phi
    return np.array([
        d,
        2.0 * d * (ap - 1.0) + ap * lb,
        d * (ap - 1.0) ** 2 + ((1.0 + d) * af + ap - 2.0) * ap * lb,
        (((1.0 + d) * af - 1.0) * (ap - 1.0) + af * ap * lb) * ap * lb,
        -af * ap * ap * lb * lb,
    ])


def t_quartic_coefficients(alpha_f, alpha_p, lam_bar, delta_phi):
    """Quartic in t = chi + alpha_p - 1 = alpha_p lam_bar nu_bar (nu_bar = sigma_W^2 sigma_X^2 nu).

    Same roots as the chi quartic shifted by alpha_p - 1.  ``lam_bar`` may be
    complex, which is how the spectral density is evaluated.
    """
    af, ap, lb, d = alpha_f, alpha_p, lam_bar, delta_phi
    return np.array([
        d + 0 * lb,
        2.0 * d * (1.0 - ap) + ap * lb,
        d * (1.0 - ap) ** 2 + ap * (af * (1.0 + d) - ap + 1.0 - ap) * lb,
        ap * ((af * (1.0 + d) - ap) * (1.0 - ap) + af * ap * lb) * lb,
        -af * ap ** 3 * lb * lb,
    ])


def _g_plus(b, q, d):
    """(b + sqrt(b^2 + 4 d q)) / (2 d) without cancellation, including its d -> 0 limit."""
    disc = math.sqrt(b * b + 4.0 * d * q)
    if b > 0:
        return INF if d == 0 else (b + disc) / (2.0 * d)
    denom = disc - b
    return 2.0 * q / denom if denom > 0 else INF


def _derived(nu, chi, alpha_f, sigma_w2, sigma_x2):
    kappa = 1.0 / (1.0 + sigma_x2 * sigma_w2 * chi * nu / alpha_f)
    omega = sigma_x2 * chi * kappa / alpha_f
    phi_s = -sigma_w2 * nu * kappa
    return kappa, omega, phi_s


def _normalized(nu, chi, omega, phi_s):
    """Rescale by s = nu so the linear system sees nu = 1."""
    return (1.0, chi * nu, omega * nu, phi_s / nu)


def _rank_limited(alpha_f, alpha_p):
    return ValueError(
        "linear activation (delta_phi = 0) at lambda = 0 with alpha_f < min(1, alpha_p): "
        f"the features have rank N_f and the ridge-less branches do not apply "
        f"(alpha_f={alpha_f}, alpha_p={alpha_p}); use lambda > 0 or the linear-regression student"
    )


def _rnlfm_ridgeless(alpha_f, alpha_p, delta_phi, sigma_w2, sigma_x2):
    af, ap, d = alpha_f, alpha_p, delta_phi
    c = sigma_w2 * sigma_x2
    common = dict(alpha_f=af, alpha_p=ap, lam=0.0)
    if abs(ap - 1.0) < THRESHOLD_TOL:
        g = _g_plus(1.0 - (1.0 + d) * af, af, d)
        if math.isinf(g):
            raise _rank_limited(af, ap)
        kappa = 1.0 / (1.0 + g / af)
        # nu -> inf and chi -> 0 with chi*nu = g/c finite
        omega_nu = sigma_x2 * kappa * (g / c) / af
        return Susceptibilities(INF, 0.0, kappa, 0.0, -INF, nu_m1=0.0, nu_0=INF, chi_0=0.0,
                                chi_1=INF, divergent=True, reduced=(omega_nu,), **common)
    if ap < 1:
        g = _g_plus(ap - (1.0 + d) * af, af * ap, d)
        if math.isinf(g):
            raise _rank_limited(af, ap)
        nu = g / (c * (1.0 - ap))
        chi = 1.0 - ap
        kappa, omega, phi_s = _derived(nu, chi, af, sigma_w2, sigma_x2)
        return Susceptibilities(nu, chi, kappa, omega, phi_s, nu_m1=0.0, nu_0=nu, chi_0=chi,
                                chi_1=ap * nu, reduced=_normalized(nu, chi, omega, phi_s),
                                scale2=1.0 / nu ** 2, **common)
    g = _g_plus(1.0 - (1.0 + d) * af, af, d)
    if math.isinf(g):
        raise _rank_limited(af, ap)
    nu_m1 = (ap - 1.0) / ap
    nu_0 = g / (c * (ap - 1.0))
    chi_1 = ap * nu_0
    kappa, omega_t, phi_t = _derived(nu_m1, chi_1, af, sigma_w2, sigma_x2)
    return Susceptibilities(INF, 0.0, kappa, 0.0, -INF, nu_m1=nu_m1, nu_0=nu_0, chi_0=0.0,
                            chi_1=chi_1, reduced=_normalized(nu_m1, chi_1, omega_t, phi_t),
                            scale2=1.0 / nu_m1 ** 2, lam_power=True, **common)


def rnlfm_susceptibilities(alpha_f, alpha_p, lam, delta_phi, sigma_w2=1.0, sigma_x2=1.0,
                           constants=None):
    """Susceptibilities of the random nonlinear features model.

    For lam > 0 the quartic in chi is solved and the physical root is picked
    by: real, inside [0, 1], nu > 0 and non-negative ensemble averages
    (checked with ``constants``, or unit variances if none are given).
    For lam = 0 the ridge-less branches are returned.
    """
    for name, v in (("alpha_f", alpha_f), ("alpha_p", alpha_p)):
        if not v > 0 or not math.isfinite(v):
            raise ValueError(f"{name} must be finite and positive, got {v!r}")
    if delta_phi < 0:
        raise ValueError("delta_phi must be >= 0")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if lam == 0:
        return _rnlfm_ridgeless(alpha_f, alpha_p, delta_phi, sigma_w2, sigma_x2)

    af, ap = alpha_f, alpha_p
    c = sigma_w2 * sigma_x2
    # Below the threshold chi sits O(lam) above the near-double root 1 - alpha_p,
    # so chi itself is badly conditioned while t = chi + alpha_p - 1 is not.
    # Solve for whichever of chi, t is small and recover the other by the shift.
    shifted = ap < 1
    if shifted:
        roots = polyroots.poly_roots(t_quartic_coefficients(af, ap, lam / c, delta_phi))
    else:
        roots = polyroots.poly_roots(chi_quartic_coefficients(af, ap, lam / c, delta_phi))
    probe = constants or ModelConstants(1.0, sigma_x2, 1.0, 0.0, sigma_w2, delta_phi)
    admissible = []
    for r in roots:
        if abs(r.imag) > 1e-8 * max(1.0, abs(r)):
            continue
        if shifted:
            t = float(r.real)
            chi = t + 1.0 - ap
        else:
            chi = float(r.real)
            t = chi + ap - 1.0
        if not -1e-8 <= chi <= 1.0 + 1e-8:
            continue
        interior = 0.0 < chi < 1.0
        chi = min(max(chi, 0.0), 1.0)
        nu = t / (lam * ap)
        if not nu > 0:
            continue
        kappa, omega, phi_s = _derived(nu, chi, af, sigma_w2, sigma_x2)
        sus = Susceptibilities(nu, chi, kappa, omega, phi_s, nu_m1=0.0, nu_0=math.nan,
                               chi_0=math.nan, chi_1=math.nan, lam=lam, alpha_f=af, alpha_p=ap,
                               reduced=_normalized(nu, chi, omega, phi_s), scale2=1.0 / nu ** 2)
        try:
            avg = rnlfm_ensemble_averages(sus, probe)
        except (np.linalg.LinAlgError, ValueError):
            continue
        vals = (avg.dy2, avg.w2, avg.u2, avg.db2)
        if all(math.isfinite(v) and v >= -1e-12 for v in vals):
            admissible.append((interior, sus))
    if not admissible:
        raise ArithmeticError(f"no admissible quartic root at alpha_f={af}, alpha_p={ap}, "
                              f"lam={lam}; roots={roots}")
    if len(admissible) > 1:
        # For lam > 0 the true chi = Tr[lam (lam + Z Z^T)^{-1}]/M lies strictly
        # inside (0, 1); roots admitted only through the rounding slack go first.
        inner = [sus for ok, sus in admissible if ok]
        if len(inner) == 1:
            return inner[0]
        pool = inner or [sus for _, sus in admissible]
        target = max(0.0, 1.0 - ap)
        pool.sort(key=lambda s: abs(s.chi - target))
        return replace(pool[0], ambiguous=True)
    return admissible[0][1]


def rnlfm_system(nu, chi, omega, phi_s, kappa, alpha_f, alpha_p, constants):
    """4x4 system for (<w^2>, <u^2>, <dy^2>, <dbeta^2>)."""
    c = constants
    af, ap = alpha_f, alpha_p
    sw2, sx2, sdz2 = c.sigma_w2, c.sigma_x2, c.sigma_dz2
    A = np.array([
        [1.0, -sw2 * (af / ap) * nu * nu, -sdz2 * nu * nu / ap, 0.0],
        [-sw2 * omega * omega, 1.0, -sx2 * kappa * kappa / af, 0.0],
        [-sdz2 * chi * chi, 0.0, 1.0, -sx2 * chi * chi],
        [-sw2 * kappa * kappa, 0.0, -sx2 * phi_s * phi_s / af, 1.0],
    ])
    b = np.array([0.0, c.sigma_beta2 * omega * omega, c.s * chi * chi, c.sigma_beta2 * kappa * kappa])
    return A, b


def _overlaps(omega_nu, kappa, alpha_f, alpha_p, constants):
    c = constants
    t = c.sigma_w2 ** 2 * (alpha_f / alpha_p) * omega_nu ** 2
    if not t < 1:
        raise ValueError("overlap equations are singular (phase boundary)")
    return (c.sigma_beta2 / c.sigma_w2) * t / (1.0 - t), c.sigma_beta2 * kappa * kappa / (1.0 - t)


def _equilibrated_solve(A, b, max_cond=1e13):
    """Solve A x = b after scaling rows and columns to unit max-norm."""
    r = 1.0 / np.max(np.abs(A), axis=1)
    As = A * r[:, None]
    col = np.max(np.abs(As), axis=0)
    col[col == 0] = 1.0
    As = As / col
    if not np.linalg.cond(As) < max_cond:
        raise np.linalg.LinAlgError("singular ensemble-average system (phase boundary)")
    return np.linalg.solve(As, b * r) / col


def rnlfm_ensemble_averages(sus, constants, lam_leading=0.0):
    """Ensemble averages from the susceptibilities.

    At the interpolation threshold (lam = 0, alpha_p = 1) <w^2> and <dbeta^2>
    are infinite while the overlaps stay finite.  In the ridge-less over-
    parameterized regime <u^2> and <dy^2> vanish; ``lam_leading`` > 0 returns
    their leading lam^2 terms instead.  The system is invariant under
    nu -> nu/s, chi -> s chi, omega -> s omega, phi_s -> phi_s/s together
    with <u^2>, <dy^2> -> s^2 <u^2>, s^2 <dy^2>.  The susceptibilities carry
    a rescaled copy (s = nu, or s = lam when nu is infinite) so that the
    system stays well conditioned near the threshold and at small lam.
    """
    c = constants
    if sus.divergent:
        (omega_nu,) = sus.reduced
        w1w2, db1db2 = _overlaps(omega_nu, sus.kappa, sus.alpha_f, sus.alpha_p, c)
        return EnsembleAverages(0.0, INF, INF, INF, w1w2, db1db2)
    nu, chi, omega, phi_s = sus.reduced
    A, b = rnlfm_system(nu, chi, omega, phi_s, sus.kappa, sus.alpha_f, sus.alpha_p, c)
    w2, u2, dy2, db2 = (float(v) for v in _equilibrated_solve(A, b))
    f2 = sus.scale2 * (lam_leading ** 2 if sus.lam_power else 1.0)
    u2 *= f2
    dy2 *= f2
    w1w2, db1db2 = _overlaps(omega * nu, sus.kappa, sus.alpha_f, sus.alpha_p, c)
    return EnsembleAverages(dy2, w2, u2, db2, w1w2, db1db2)


def rnlfm_theory(alpha_f, alpha_p, constants, lam=0.0, method=None):
    """Errors, bias and variance of the random nonlinear features model."""
    method = method or ("exact" if lam > 0 else "ridgeless")
    c = constants
    inputs = dict(model=RNLFM, alpha_f=alpha_f, alpha_p=alpha_p, lam=lam, method=method, constants=c)
    if method == "exact":
        if not lam > 0:
            raise ValueError("the exact finite-lambda solution needs lambda > 0")
        sus = rnlfm_susceptibilities(alpha_f, alpha_p, lam, c.delta_phi, c.sigma_w2, c.sigma_x2, c)
        avg = rnlfm_ensemble_averages(sus, c)
    elif method == "ridgeless":
        sus = rnlfm_susceptibilities(alpha_f, alpha_p, 0.0, c.delta_phi, c.sigma_w2, c.sigma_x2)
        avg = rnlfm_ensemble_averages(sus, c, lam_leading=lam)
    else:
        raise ValueError(f"unknown method {method!r}")
    return assemble_decomposition(avg, c, sus, inputs)


def theory_point(model, alpha_f, alpha_p, constants, lam=0.0, method=None):
    if model == LINEAR:
        return linreg_theory(alpha_f, constants, lam, method)
    if model == RNLFM:
        return rnlfm_theory(alpha_f, alpha_p, constants, lam, method)
    raise ValueError(f"unknown model {model!r}")


def theory_for_config(cfg, lam=None, method=None):
    """Theory matching an ExperimentConfig (ratios taken from its rounded counts)."""
    c = ModelConstants.from_specs(cfg.teacher, cfg.student)
    lam = cfg.student.lam if lam is None else lam
    return theory_point(cfg.student.arch, cfg.shape.alpha_f, cfg.shape.alpha_p, c, lam, method)


def label_component_split(result, constants=None):
    """Contributions of linear signal, nonlinear signal and noise to each error.

    Each part is the full calculation with the other two sources switched off;
    every error is linear in (sigma_beta^2, sigma_dy^2, sigma_eps^2), so the
    three parts add up to the total.
    """
    inp = result.inputs
    c = constants or inp["constants"]
    return {
        src: theory_point(inp["model"], inp["alpha_f"], inp["alpha_p"], c.only(src), inp["lam"], inp["method"])
        for src in SOURCES
    }


def variance_from_averages(averages, constants):
    """Variance written directly as sx2(<db^2> - <db1 db2>) + s_dz2(<w^2> - <w1 w2>)."""
    a, c = averages, constants
    return _mul(c.sigma_x2, a.db2 - a.db1db2) + _mul(c.sigma_dz2, a.w2 - a.w1w2)
