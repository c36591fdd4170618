"""Sampling from the teacher model.

Inputs x have i.i.d. N(0, sigma_X^2/N_f) entries, the ground truth beta has
i.i.d. N(0, sigma_beta^2) entries and the labels are

    y = (sigma_beta sigma_X / <f'>) f(x.beta / (sigma_X sigma_beta)) + eps.

The noiseless label is split into the part linear in x, x.beta, and the
remainder, which is uncorrelated with it.
"""
import csv
import math
from dataclasses import dataclass

import numpy as np

from .config import RngContract
from .nonlinearity import get_nonlinearity


@dataclass(frozen=True)
class GroundTruth:
    beta: np.ndarray


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    y_star: np.ndarray
    eps: np.ndarray
    y_lin: np.ndarray
    y_nl: np.ndarray

    @property
    def m(self):
        return self.x.shape[0]

    def labels(self, source="total"):
        """Label vector restricted to one source: total, linear, nonlinear or noise."""
        return {"total": self.y, "linear": self.y_lin, "nonlinear": self.y_nl, "noise": self.eps}[source]

    def targets(self, source="total"):
        """Noiseless part of ``labels(source)``."""
        return {"total": self.y_star, "linear": self.y_lin, "nonlinear": self.y_nl,
                "noise": np.zeros_like(self.eps)}[source]


def _generator(rng, role):
    if isinstance(rng, RngContract):
        return rng.generator(role)
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError("rng must be an RngContract or numpy Generator")


def sample_ground_truth(shape, teacher, rng):
    g = _generator(rng, "beta")
    beta = math.sqrt(teacher.sigma_beta2) * g.standard_normal(shape.n_f)
    return GroundTruth(beta)


def sample_inputs(m, n_f, sigma_x2, g):
    return math.sqrt(sigma_x2 / n_f) * g.standard_normal((m, n_f))


def teacher_labels(x, beta, teacher):
    """Noiseless labels y* and their linear part x.beta."""
    y_lin = x @ beta
    if teacher.f == "linear":
        return y_lin.copy(), y_lin
    if teacher.sigma_beta2 == 0:
        return np.zeros_like(y_lin), y_lin
    f = teacher.stats
    fn = get_nonlinearity(teacher.f).fn
    scale = math.sqrt(teacher.sigma_beta2 * teacher.sigma_x2)
    y_star = (scale / f.mean_derivative) * fn(y_lin / scale)
    return y_star, y_lin


def sample_dataset(shape, teacher, beta, rng, m=None, role="train1"):
    """Draw a dataset of ``m`` points (default shape.m) for the ground truth ``beta``.

    With an RngContract, ``role`` selects the sub-stream (train1, train2, test).
    """
    g = _generator(rng, role)
    m = shape.m if m is None else int(m)
    b = beta.beta if isinstance(beta, GroundTruth) else np.asarray(beta)
    if b.shape != (shape.n_f,):
        raise ValueError(f"beta has shape {b.shape}, expected ({shape.n_f},)")
    x = sample_inputs(m, shape.n_f, teacher.sigma_x2, g)
    eps = math.sqrt(teacher.sigma_eps2) * g.standard_normal(m)
    y_star, y_lin = teacher_labels(x, b, teacher)
    return Dataset(x=x, y=y_star + eps, y_star=y_star, eps=eps, y_lin=y_lin, y_nl=y_star - y_lin)


def write_dataset_csv(ds, path):
    """Debug dump: one row per point with columns y, y_star, eps, x1..xN."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", "y_star", "eps"] + [f"x{j + 1}" for j in range(ds.x.shape[1])])
        for a in range(ds.m):
            row = [ds.y[a], ds.y_star[a], ds.eps[a], *ds.x[a]]
            w.writerow([format(float(v), ".17g") for v in row])
