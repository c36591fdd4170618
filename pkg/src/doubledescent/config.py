"""Experiment geometry, teacher/student specifications and the RNG contract.

All objects here are frozen dataclasses so they can be shared freely between
worker threads.  ``load_config`` / ``config_to_dict`` implement the JSON
experiment document described in README.md; unknown fields are rejected.
"""
import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import nonlinearity as nl

LINEAR = "linear"
RNLFM = "rnlfm"
ARCHS = (LINEAR, RNLFM)

DEFAULT_LAMBDA = 1e-6
DEFAULT_SNR = 10.0

# named sub-streams drawn inside one replicate
STREAM_ROLES = {"beta": 0, "w": 1, "train1": 2, "train2": 3, "test": 4, "aux": 5}


class ConfigError(ValueError):
    """Raised for malformed or inconsistent experiment configurations."""


def _check_count(name, v):
    if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
        raise ConfigError(f"{name} must be an integer >= 1, got {v!r}")
    return int(v)


def _check_ratio(name, v):
    try:
        v = float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {v!r}") from None
    if not math.isfinite(v) or v <= 0:
        raise ConfigError(f"{name} must be finite and positive, got {v!r}")
    return v


@dataclass(frozen=True)
class ExperimentShape:
    """Counts M (training points), N_f (input features), N_p (fit parameters)."""

    m: int
    n_f: int
    n_p: int

    def __post_init__(self):
        for name in ("m", "n_f", "n_p"):
            object.__setattr__(self, name, _check_count(name, getattr(self, name)))

    @property
    def alpha_f(self):
        return self.n_f / self.m

    @property
    def alpha_p(self):
        return self.n_p / self.m


def ratio_to_count(m, alpha):
    """Nearest integer to alpha*m, at least 1 (halves round to even)."""
    return max(1, int(round(alpha * m)))


def shape_from_ratios(m, alpha_f, alpha_p=None):
    """Shape with n = round(alpha*m); ``alpha_p=None`` means N_p = N_f."""
    m = _check_count("m", m)
    n_f = ratio_to_count(m, _check_ratio("alpha_f", alpha_f))
    n_p = n_f if alpha_p is None else ratio_to_count(m, _check_ratio("alpha_p", alpha_p))
    return ExperimentShape(m, n_f, n_p)


@dataclass(frozen=True)
class TeacherSpec:
    f: str = "linear"
    sigma_beta2: float = 1.0
    sigma_x2: float = 1.0
    sigma_eps2: float = 0.1

    def __post_init__(self):
        for name in ("sigma_beta2", "sigma_x2", "sigma_eps2"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise ConfigError(f"{name} must be finite and >= 0, got {v!r}")
            object.__setattr__(self, name, v)
        if self.sigma_x2 <= 0:
            raise ConfigError("sigma_x2 must be > 0")
        try:
            nl.teacher_stats(self.f)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"teacher f: {exc}") from None

    @property
    def stats(self):
        return nl.teacher_stats(self.f)

    @property
    def sigma_dy2(self):
        return self.sigma_beta2 * self.sigma_x2 * self.stats.delta

    @property
    def signal_variance(self):
        """Label variance without noise, sigma_beta^2 sigma_X^2 + sigma_dy^2."""
        return self.sigma_beta2 * self.sigma_x2 + self.sigma_dy2

    @classmethod
    def from_snr(cls, snr=DEFAULT_SNR, f="linear", sigma_beta2=1.0, sigma_x2=1.0):
        """Choose sigma_eps^2 so that signal variance / noise variance = snr."""
        snr = _check_ratio("snr", snr)
        probe = cls(f, sigma_beta2, sigma_x2, 0.0)
        return replace(probe, sigma_eps2=probe.signal_variance / snr)


@dataclass(frozen=True)
class StudentSpec:
    arch: str = LINEAR
    phi: Optional[str] = None
    sigma_w2: float = 1.0
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ConfigError(f"arch must be one of {ARCHS}, got {self.arch!r}")
        if self.arch == RNLFM:
            if self.phi is None:
                object.__setattr__(self, "phi", "relu")
            try:
                nl.activation_stats(self.phi)
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"student phi: {exc}") from None
        lam = float(self.lam)
        sw2 = float(self.sigma_w2)
        if not math.isfinite(lam) or lam < 0:
            raise ConfigError(f"lambda must be finite and >= 0, got {lam!r}")
        if not math.isfinite(sw2) or sw2 <= 0:
            raise ConfigError(f"sigma_w2 must be finite and > 0, got {sw2!r}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "sigma_w2", sw2)

    @property
    def stats(self):
        return nl.activation_stats(self.phi) if self.arch == RNLFM else None


@dataclass(frozen=True)
class RngContract:
    """Deterministic random streams keyed by (seed, stream_id).

    Generators are PCG64 seeded from ``SeedSequence(seed, spawn_key=(stream_id, role))``;
    Gaussian draws use numpy's ziggurat sampler ``Generator.standard_normal``.
    """

    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or not 0 <= v < 2 ** 64:
                raise ConfigError(f"{name} must be an unsigned 64-bit integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    def generator(self, role="aux"):
        key = STREAM_ROLES[role] if isinstance(role, str) else int(role)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, key))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream_id):
        return RngContract(self.seed, stream_id)


GAUSSIAN_METHOD = "numpy.random.Generator(PCG64).standard_normal (ziggurat)"


# ---------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class Axis:
    """A strictly increasing grid of ratio values."""

    values: tuple

    def __post_init__(self):
        vals = tuple(_check_ratio("grid value", v) for v in self.values)
        if not vals:
            raise ConfigError("grid: empty axis")
        if any(b <= a for a, b in zip(vals[:-1], vals[1:])):
            raise ConfigError("grid: values must be strictly increasing")
        object.__setattr__(self, "values", vals)

    @classmethod
    def parse(cls, spec):
        if isinstance(spec, (int, float)) and not isinstance(spec, bool):
            return cls((spec,))
        if isinstance(spec, list):
            return cls(tuple(spec))
        if isinstance(spec, dict):
            _reject_unknown(spec, {"start", "stop", "num", "scale"}, "grid")
            try:
                start, stop, num = spec["start"], spec["stop"], spec["num"]
            except KeyError as exc:
                raise ConfigError(f"grid: missing {exc.args[0]!r}") from None
            num = int(num)
            if num < 1:
                raise ConfigError("grid: empty axis")
            start = _check_ratio("grid start", start)
            stop = _check_ratio("grid stop", stop)
            scale = spec.get("scale", "linear")
            if scale == "linear":
                vals = np.linspace(start, stop, num)
            elif scale == "log":
                vals = np.geomspace(start, stop, num)
            else:
                raise ConfigError(f"grid: scale must be 'linear' or 'log', got {scale!r}")
            return cls(tuple(float(v) for v in vals))
        raise ConfigError(f"grid: cannot parse {spec!r}")


@dataclass(frozen=True)
class SweepSpec:
    """Ratio grids swept by the CLI.  For linear regression alpha_p is N_f/M."""

    m: int
    alpha_f: Axis
    alpha_p: Optional[Axis] = None

    def points(self, arch):
        """(alpha_f, alpha_p) pairs in row-major order (alpha_f outer)."""
        out = []
        for af in self.alpha_f.values:
            if arch == LINEAR or self.alpha_p is None:
                out.append((af, af if arch == LINEAR else None))
            else:
                out.extend((af, ap) for ap in self.alpha_p.values)
        return out


# ---------------------------------------------------------------- full config

@dataclass(frozen=True)
class ExperimentConfig:
    shape: ExperimentShape
    teacher: TeacherSpec = field(default_factory=TeacherSpec)
    student: StudentSpec = field(default_factory=StudentSpec)
    replicates: int = 1000
    seed: int = 0
    test_size: Optional[int] = None

    def __post_init__(self):
        if self.student.arch == LINEAR and self.shape.n_p != self.shape.n_f:
            raise ConfigError("linear regression requires n_p == n_f")
        _check_count("replicates", self.replicates)
        if self.test_size is not None:
            _check_count("test_size", self.test_size)
        RngContract(self.seed, 0)

    @property
    def m_test(self):
        return self.shape.m if self.test_size is None else self.test_size

    def rng(self, stream_id=0):
        return RngContract(self.seed, stream_id)

    def with_ratios(self, alpha_f, alpha_p=None):
        if self.student.arch == LINEAR:
            alpha_p = None
        return replace(self, shape=shape_from_ratios(self.shape.m, alpha_f, alpha_p))


def make_config(m, alpha_f, alpha_p=None, teacher=None, student=None, **kw):
    """Convenience constructor from ratios."""
    student = student or StudentSpec()
    if student.arch == LINEAR:
        alpha_p = None
    elif alpha_p is None:
        raise ConfigError("the random-features student needs alpha_p")
    return ExperimentConfig(shape_from_ratios(m, alpha_f, alpha_p),
                            teacher or TeacherSpec.from_snr(), student, **kw)


@dataclass(frozen=True)
class RunDocument:
    """A parsed JSON config: a base experiment plus an optional sweep and options."""

    base: ExperimentConfig
    sweep: Optional[SweepSpec] = None
    options: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def experiments(self):
        """Yield one ExperimentConfig per grid point (or the base config)."""
        if self.sweep is None:
            return [self.base]
        out = []
        for af, ap in self.sweep.points(self.base.student.arch):
            shape = shape_from_ratios(self.sweep.m, af, None if self.base.student.arch == LINEAR else ap)
            out.append(replace(self.base, shape=shape))
        return out

    def requested_ratios(self):
        if self.sweep is None:
            s = self.base.shape
            return [(s.alpha_f, s.alpha_p)]
        return self.sweep.points(self.base.student.arch)


_TOP_KEYS = {"shape", "sweep", "teacher", "student", "replicates", "seed", "test_size", "options"}
_TEACHER_KEYS = {"f", "sigma_beta2", "sigma_x2", "sigma_eps2", "snr"}
_STUDENT_KEYS = {"arch", "phi", "sigma_w2", "lambda"}
_OPTION_KEYS = {"ridgeless", "n_matrices", "bins", "epsilon", "points", "sims", "threshold_replicates"}


def _reject_unknown(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {extra}")


def _parse_teacher(d):
    _reject_unknown(d, _TEACHER_KEYS, "teacher")
    kw = {k: d[k] for k in ("f", "sigma_beta2", "sigma_x2") if k in d}
    if "sigma_eps2" in d and "snr" in d:
        raise ConfigError("teacher: give either sigma_eps2 or snr, not both")
    if "sigma_eps2" in d:
        return TeacherSpec(sigma_eps2=d["sigma_eps2"], **kw)
    return TeacherSpec.from_snr(d.get("snr", DEFAULT_SNR), **kw)


def _parse_student(d):
    _reject_unknown(d, _STUDENT_KEYS, "student")
    kw = {k: d[k] for k in ("arch", "phi", "sigma_w2") if k in d}
    if "lambda" in d:
        kw["lam"] = d["lambda"]
    return StudentSpec(**kw)


def _parse_shape(d, arch):
    _reject_unknown(d, {"m", "n_f", "n_p", "alpha_f", "alpha_p"}, "shape")
    if "m" not in d:
        raise ConfigError("shape: missing 'm'")
    if "n_f" in d:
        if "alpha_f" in d or "alpha_p" in d:
            raise ConfigError("shape: give counts or ratios, not both")
        n_p = d.get("n_p", d["n_f"])
        return ExperimentShape(d["m"], d["n_f"], d["n_f"] if arch == LINEAR else n_p)
    if "alpha_f" not in d:
        raise ConfigError("shape: missing 'n_f' or 'alpha_f'")
    return shape_from_ratios(d["m"], d["alpha_f"], None if arch == LINEAR else d.get("alpha_p"))


def _parse_sweep(d, arch):
    _reject_unknown(d, {"m", "alpha_f", "alpha_p"}, "sweep")
    if "m" not in d or "alpha_f" not in d:
        raise ConfigError("sweep: needs 'm' and 'alpha_f'")
    af = Axis.parse(d["alpha_f"])
    ap = Axis.parse(d["alpha_p"]) if "alpha_p" in d else None
    if arch == RNLFM and ap is None:
        raise ConfigError("sweep: the random-features student needs 'alpha_p'")
    return SweepSpec(_check_count("m", d["m"]), af, ap)


def parse_config(doc):
    """Build a RunDocument from a decoded JSON object."""
    _reject_unknown(doc, _TOP_KEYS, "config")
    teacher = _parse_teacher(doc.get("teacher", {}))
    student = _parse_student(doc.get("student", {}))
    if ("shape" in doc) == ("sweep" in doc):
        raise ConfigError("config: give exactly one of 'shape' or 'sweep'")
    sweep = None
    if "shape" in doc:
        shape = _parse_shape(doc["shape"], student.arch)
    else:
        sweep = _parse_sweep(doc["sweep"], student.arch)
        pts = sweep.points(student.arch)
        shape = shape_from_ratios(sweep.m, pts[0][0], None if student.arch == LINEAR else pts[0][1])
    options = doc.get("options", {})
    _reject_unknown(options, _OPTION_KEYS, "options")
    base = ExperimentConfig(
        shape, teacher, student,
        replicates=doc.get("replicates", 1000),
        seed=doc.get("seed", 0),
        test_size=doc.get("test_size"),
    )
    return RunDocument(base, sweep, dict(options), dict(doc))


def load_config(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from None
    return parse_config(doc)


def config_to_dict(cfg):
    """JSON-ready form of an ExperimentConfig (counts, resolved noise)."""
    t, s = cfg.teacher, cfg.student
    student = {"arch": s.arch, "sigma_w2": s.sigma_w2, "lambda": s.lam}
    if s.phi is not None:
        student["phi"] = s.phi
    out = {
        "shape": {"m": cfg.shape.m, "n_f": cfg.shape.n_f, "n_p": cfg.shape.n_p},
        "teacher": {"f": t.f, "sigma_beta2": t.sigma_beta2, "sigma_x2": t.sigma_x2,
                    "sigma_eps2": t.sigma_eps2},
        "student": student,
        "replicates": cfg.replicates,
        "seed": cfg.seed,
    }
    if cfg.test_size is not None:
        out["test_size"] = cfg.test_size
    return out


def config_from_dict(d):
    return parse_config(d).base
