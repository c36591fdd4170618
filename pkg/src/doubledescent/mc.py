"""Monte-Carlo estimates of errors, bias and variance, plus empirical spectra.

Each replicate draws the ground truth beta (and W for random features) once,
two independent training sets and one test set.  Both training sets are fit
with the same model; the bias is the test-set average of the product of the
two prediction errors against the noiseless labels, and the variance is what
remains of the test error after removing bias and noise.

Replicate ``i`` of a run uses ``RngContract(seed, i)``, so results do not
depend on how replicates are scheduled over threads.  Per-replicate values
are reduced in index order with exactly rounded sums.
"""
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import linalg
from threadpoolctl import threadpool_limits

from . import datagen, fitkit
from .config import LINEAR, RNLFM

SOURCES = ("total", "linear", "nonlinear", "noise")
QUANTITIES = ("train", "test", "bias2", "variance", "noise")
THRESHOLD_WINDOW = 0.05
REPLICATE_CAP = 20000
ZERO_EIG_REL = 1e-8


class ReplicateError(RuntimeError):
    def __init__(self, index, cause):
        super().__init__(f"replicate {index} failed: {cause}")
        self.index = index
        self.cause = cause


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n: int

    @classmethod
    def from_samples(cls, values):
        v = np.asarray(values, dtype=float)
        n = v.size
        mean = math.fsum(v) / n
        if n > 1:
            var = math.fsum((v - mean) ** 2) / (n - 1)
            se = math.sqrt(var / n)
        else:
            se = math.nan
        return cls(mean, se, n)

    def zscore(self, reference):
        if math.isinf(reference):
            return -math.inf if math.isfinite(self.mean) else math.nan
        if self.stderr == 0:
            return 0.0 if self.mean == reference else math.copysign(math.inf, self.mean - reference)
        return (self.mean - reference) / self.stderr


@dataclass(frozen=True)
class McDecomposition:
    train: McEstimate
    test: McEstimate
    bias2: McEstimate
    variance: McEstimate
    noise: McEstimate
    components: dict = field(default_factory=dict, repr=False)
    samples: Optional[np.ndarray] = field(default=None, repr=False)

    def as_dict(self):
        return {q: getattr(self, q) for q in QUANTITIES}


def _decompose(per_rep):
    """per_rep: (n, 4) array of train, test, bias product, noise per replicate."""
    train, test, bias, noise = (McEstimate.from_samples(per_rep[:, k]) for k in range(4))
    var_samples = per_rep[:, 1] - per_rep[:, 2] - per_rep[:, 3]
    se = McEstimate.from_samples(var_samples).stderr
    # variance by subtraction of the means, so that the identity holds exactly
    variance = McEstimate(test.mean - bias.mean - noise.mean, se, per_rep.shape[0])
    return train, test, bias, variance, noise


def near_threshold(config, window=THRESHOLD_WINDOW):
    ratio = config.shape.alpha_f if config.student.arch == LINEAR else config.shape.alpha_p
    return abs(ratio - 1.0) < window


def replicate_count(config, replicates=None, threshold_replicates=None):
    """Replicate count for a grid point; near the threshold an elevated count may be requested."""
    n = config.replicates if replicates is None else int(replicates)
    if threshold_replicates is not None and near_threshold(config):
        n = int(threshold_replicates)
        if n > REPLICATE_CAP:
            warnings.warn(f"near-threshold replicate count {n} capped at {REPLICATE_CAP}; "
                          "standard errors will be larger than requested", RuntimeWarning)
            n = REPLICATE_CAP
    if n < 2:
        raise ValueError("need at least 2 replicates")
    return n


class _Replicate:
    """One replicate of the paired-training-set protocol."""

    def __init__(self, config, paired=True, lam=None):
        self.config = config
        self.paired = paired
        self.lam = config.student.lam if lam is None else lam
        self.stats_phi = config.student.stats

    def features(self, x, w):
        st = self.config.student
        if st.arch == LINEAR:
            return x
        return fitkit.apply_activation(x @ w, st.phi, st.sigma_w2, self.config.teacher.sigma_x2,
                                       w.shape[1], self.stats_phi)

    def __call__(self, index):
        cfg = self.config
        rng = cfg.rng(index)
        try:
            beta = datagen.sample_ground_truth(cfg.shape, cfg.teacher, rng)
            w = None
            if cfg.student.arch == RNLFM:
                w = fitkit.sample_weights(cfg.shape.n_f, cfg.shape.n_p, cfg.student.sigma_w2, rng)
            d1 = datagen.sample_dataset(cfg.shape, cfg.teacher, beta, rng, role="train1")
            d2 = datagen.sample_dataset(cfg.shape, cfg.teacher, beta, rng, role="train2") if self.paired else d1
            dt = datagen.sample_dataset(cfg.shape, cfg.teacher, beta, rng, m=cfg.m_test, role="test")
            return self._evaluate(d1, d2, dt, w)
        except (np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
            raise ReplicateError(index, exc) from exc

    def _evaluate(self, d1, d2, dt, w):
        z1 = self.features(d1.x, w)
        z2 = z1 if d2 is d1 else self.features(d2.x, w)
        zt = self.features(dt.x, w)
        y1 = np.column_stack([d1.labels(s) for s in SOURCES])
        y2 = np.column_stack([d2.labels(s) for s in SOURCES])
        yt = np.column_stack([dt.labels(s) for s in SOURCES])
        target = np.column_stack([dt.targets(s) for s in SOURCES])
        w1 = fitkit.ridge_solve(z1, y1, self.lam)
        w2 = w1 if d2 is d1 else fitkit.ridge_solve(z2, y2, self.lam)
        p1 = zt @ w1
        p2 = zt @ w2
        train = np.mean((y1 - z1 @ w1) ** 2, axis=0)
        test = np.mean((yt - p1) ** 2, axis=0)
        bias = np.mean((p1 - target) * (p2 - target), axis=0)
        noise_total = float(np.mean(dt.eps ** 2))
        noise = np.array([noise_total, 0.0, 0.0, noise_total])
        # rows: sources; columns: train, test, bias product, noise
        return np.column_stack([train, test, bias, noise])


def _map_replicates(fn, n, threads):
    with threadpool_limits(limits=1):
        if threads <= 1:
            return [fn(i) for i in range(n)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(n)))


def run_decomposition(config, replicates=None, threads=1, paired=True, lam=None,
                      threshold_replicates=None, keep_samples=False):
    """Monte-Carlo train/test/bias^2/variance/noise for one configuration.

    ``paired=False`` reuses the first training set as the second one; the
    bias product then equals the test error minus noise up to a zero-mean
    cross term, so the variance vanishes within its standard error.
    ``components`` of the result holds the same decomposition with only one
    label source (linear, nonlinear, noise) switched on.
    """
    lam = config.student.lam if lam is None else lam
    if not lam > 0:
        raise ValueError("Monte-Carlo fits need lambda > 0")
    n = replicate_count(config, replicates, threshold_replicates)
    rep = _Replicate(config, paired=paired, lam=lam)
    rows = np.stack(_map_replicates(rep, n, threads))  # (n, sources, 4)
    parts = {}
    for k, src in enumerate(SOURCES):
        parts[src] = McDecomposition(*_decompose(rows[:, k, :]))
    total = parts.pop("total")
    return replace(total, components=parts, samples=rows if keep_samples else None)


# ---------------------------------------------------------------- spectra

@dataclass(frozen=True)
class EmpiricalSpectrum:
    eigenvalues: np.ndarray  # pooled, sorted, zero padding included
    n_matrices: int
    n_p: int
    zero_counts: tuple  # per matrix, N_p - rank
    edges: Optional[np.ndarray] = None
    counts: Optional[np.ndarray] = None

    @property
    def zero_fraction(self):
        return sum(self.zero_counts) / (self.n_p * self.n_matrices)

    def frequencies(self):
        return self.counts / self.eigenvalues.size


def _column_blocks(n, block):
    return [(a, min(a + block, n)) for a in range(0, n, block)]


def gram_spectrum(config, rng, block=2048):
    """Eigenvalues of Z^T Z for one sampled design, with the zero count by rank.

    When N_p <= M the eigenvalues are squared singular values of Z, which keeps
    small genuine eigenvalues (square kernels) clear of the rank cutoff even when
    a large mean spike dominates the spectrum.  When N_p > M the M x M matrix
    Z Z^T is accumulated from column blocks of Z, so Z itself is never held in
    memory, and N_p - M zeros are appended.
    Inputs and weights are drawn block by block from the ``train1`` and ``w``
    streams.
    """
    cfg = config
    m, n_f, n_p = cfg.shape.m, cfg.shape.n_f, cfg.shape.n_p
    gx = rng.generator("train1")
    gw = rng.generator("w")
    st = cfg.student
    sx2 = cfg.teacher.sigma_x2
    stats_phi = st.stats
    if st.arch == LINEAR:
        def z_block(a, b):
            return math.sqrt(sx2 / n_f) * gx.standard_normal((m, b - a))
    else:
        x = datagen.sample_inputs(m, n_f, sx2, gx)

        def z_block(a, b, x=x):
            wb = math.sqrt(st.sigma_w2 / n_p) * gw.standard_normal((n_f, b - a))
            return fitkit.apply_activation(x @ wb, st.phi, st.sigma_w2, sx2, n_p, stats_phi)

    eps = np.finfo(float).eps
    if n_p <= m:
        z = np.concatenate([z_block(a, b) for a, b in _column_blocks(n_p, block)], axis=1)
        sv = linalg.svdvals(z)
        # the usual matrix-rank cutoff on singular values
        rank = int(np.count_nonzero(sv > sv.max() * m * eps))
        ev = sv ** 2
        pad = 0
    else:
        k = np.zeros((m, m))
        for a, b in _column_blocks(n_p, block):
            zb = z_block(a, b)
            k += zb @ zb.T
        ev = np.clip(linalg.eigvalsh(k), 0.0, None)
        # roundoff level of a computed Gram eigenvalue
        rank = int(np.count_nonzero(ev > ev.max() * m * eps))
        pad = n_p - m
    ev = np.concatenate([np.zeros(pad), ev])
    return np.sort(ev), n_p - rank


def eigen_histogram(config, n_matrices=10, bins=100, threads=1, x_max=None, stream_offset=0):
    """Pooled eigenvalues of Z^T Z over ``n_matrices`` designs, binned on [0, x_max]."""
    if config.shape.m < 64:
        raise ValueError("eigen_histogram needs M >= 64")

    def one(i):
        return gram_spectrum(config, config.rng(stream_offset + i))

    with threadpool_limits(limits=1 if threads > 1 else None):
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                res = list(pool.map(one, range(n_matrices)))
        else:
            res = [one(i) for i in range(n_matrices)]
    ev = np.sort(np.concatenate([r[0] for r in res]))
    zeros = tuple(r[1] for r in res)
    spec = EmpiricalSpectrum(ev, n_matrices, config.shape.n_p, zeros)
    if bins is None:
        return spec
    edges = bins if np.ndim(bins) else histogram_edges(ev, int(bins), x_max)
    positive = np.concatenate([r[0][r[1]:] for r in res])
    counts, _ = np.histogram(positive, edges)
    return replace(spec, edges=np.asarray(edges, float), counts=counts)


def histogram_edges(eigenvalues, bins, x_max=None):
    top = x_max if x_max is not None else float(np.quantile(eigenvalues, 0.999)) * 1.05
    return np.linspace(0.0, top, bins + 1)


def total_variation(spectrum, density):
    """Total-variation distance between the binned empirical spectrum and an analytic density.

    The atom at zero is compared separately (empirical zero count by rank
    against f_zero); eigenvalues beyond the last bin count as unmatched mass.
    """
    if spectrum.counts is None:
        raise ValueError("spectrum has no histogram")
    n = spectrum.eigenvalues.size
    emp = spectrum.counts / n
    ana = density.bin_masses(spectrum.edges)
    beyond_emp = 1.0 - spectrum.zero_fraction - emp.sum()
    beyond_ana = max(0.0, 1.0 - density.f_zero - ana.sum())
    return 0.5 * (np.abs(emp - ana).sum() + abs(spectrum.zero_fraction - density.f_zero)
                  + abs(beyond_emp - beyond_ana))


# ---------------------------------------------------------------- minimum component

@dataclass(frozen=True)
class MinComponentReport:
    sigma_train2: float
    sigma_test2: float
    ratio: float
    learned_slope: float
    expected_slope: float
    sigma_min2: float
    h_min: np.ndarray = field(repr=False)
    scatter_train: np.ndarray = field(repr=False)  # (projection, label) rows
    scatter_test: np.ndarray = field(repr=False)


class DegenerateKernelError(ArithmeticError):
    pass


def smallest_nonzero_component(z, rel=ZERO_EIG_REL):
    """Smallest nonzero eigenvalue of Z^T Z and its unit eigenvector."""
    m, n_p = z.shape
    if n_p <= m:
        ev, vec = linalg.eigh(z.T @ z)
        tol = rel * ev[-1]
        idx = np.flatnonzero(ev > tol)
        if idx.size == 0:
            raise DegenerateKernelError("all kernel eigenvalues are below the zero threshold")
        return float(ev[idx[0]]), vec[:, idx[0]]
    # nonzero spectrum of Z^T Z equals that of Z Z^T; map eigenvectors back
    ev, vec = linalg.eigh(z @ z.T)
    tol = rel * ev[-1]
    idx = np.flatnonzero(ev > tol)
    if idx.size == 0:
        raise DegenerateKernelError("all kernel eigenvalues are below the zero threshold")
    lam = float(ev[idx[0]])
    h = z.T @ vec[:, idx[0]] / math.sqrt(lam)
    return lam, h / np.linalg.norm(h)


def min_component_analysis(config, stream=0):
    """Spread of training and test data along the least-sampled kernel direction."""
    cfg = config
    rng = cfg.rng(stream)
    st, t = cfg.student, cfg.teacher
    beta = datagen.sample_ground_truth(cfg.shape, t, rng)
    w = None
    if st.arch == RNLFM:
        w = fitkit.sample_weights(cfg.shape.n_f, cfg.shape.n_p, st.sigma_w2, rng)
    d1 = datagen.sample_dataset(cfg.shape, t, beta, rng, role="train1")
    dt = datagen.sample_dataset(cfg.shape, t, beta, rng, m=cfg.m_test, role="test")
    stats_phi = st.stats
    if st.arch == LINEAR:
        z1, zt = d1.x, dt.x
    else:
        z1 = fitkit.apply_activation(d1.x @ w, st.phi, st.sigma_w2, t.sigma_x2, cfg.shape.n_p, stats_phi)
        zt = fitkit.apply_activation(dt.x @ w, st.phi, st.sigma_w2, t.sigma_x2, cfg.shape.n_p, stats_phi)
    s_min2, h = smallest_nonzero_component(z1)
    m = cfg.shape.m
    p_train = z1 @ h
    p_test = zt @ h
    sigma_train2 = s_min2 / m
    b = beta.beta
    if st.arch == LINEAR:
        sigma_test2 = t.sigma_x2 / cfg.shape.n_f
        expected = float(h @ b)
    else:
        wh = w @ h
        dphi = stats_phi.delta
        af, ap = cfg.shape.alpha_f, cfg.shape.alpha_p
        sigma_test2 = (t.sigma_x2 / cfg.shape.n_f) * float(wh @ wh) + dphi * st.sigma_w2 * t.sigma_x2 / cfg.shape.n_p
        expected = float(wh @ b) / (float(wh @ wh) + dphi * st.sigma_w2 * af / ap)
    learned = float(p_train @ d1.y / (p_train @ p_train))
    return MinComponentReport(
        sigma_train2=sigma_train2,
        sigma_test2=sigma_test2,
        ratio=math.sqrt(sigma_train2 / sigma_test2),
        learned_slope=learned,
        expected_slope=expected,
        sigma_min2=s_min2,
        h_min=h,
        scatter_train=np.column_stack([p_train, d1.y]),
        scatter_test=np.column_stack([p_test, dt.y]),
    )


def mean_min_component_ratio(config, sims=100, threads=1):
    """Average sigma_train/sigma_test over independent designs (streams 0..sims-1)."""
    reports = _map_replicates(lambda i: min_component_analysis(config, i), sims, threads)
    return McEstimate.from_samples([r.ratio for r in reports]), reports
