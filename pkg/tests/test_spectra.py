import math

import numpy as np
import pytest
from scipy import integrate

from doubledescent import mc, spectra
from doubledescent.config import StudentSpec, make_config

RELU_DELTA = 1 - 2 / math.pi


def first_moment(d):
    # integrate in u = sqrt(x) so the x^{-1/2} edge at zero is harmless
    return sum(integrate.quad(lambda u: 2 * u ** 3 * float(d.bulk(u * u)), math.sqrt(lo), math.sqrt(hi),
                              limit=400)[0] for lo, hi in d.support)


# ---------------------------------------------------------------- Marchenko-Pastur

@pytest.mark.parametrize("af", [0.125, 0.25, 1.0, 2.0, 8.0])
def test_mp_mass_and_mean(af):
    d = spectra.mp_density(af, 1.5)
    assert d.total_mass() == pytest.approx(1.0, abs=1e-6)
    # Tr(X^T X) / N_f = M sigma_x^2 / N_f
    assert first_moment(d) == pytest.approx(1.5 / af, rel=1e-8)


def test_mp_edges_and_atom():
    assert spectra.mp_edges(1.0) == pytest.approx((0.0, 4.0))
    assert spectra.mp_density(2.0).f_zero == pytest.approx(0.5)
    assert spectra.mp_density(0.5).f_zero == 0.0
    d = spectra.mp_density(0.25)
    assert d.x_min == pytest.approx(1.0) and d.x_max == pytest.approx(9.0)
    assert d(0.5) == 0.0 and d(9.5) == 0.0 and d(4.0) > 0


def test_mp_rejects_bad_ratio():
    with pytest.raises(ValueError):
        spectra.mp_density(0.0)


# ---------------------------------------------------------------- random features

CASES = [(0.25, 0.125, 1.0), (0.25, 1.0, 1.0), (0.25, 8.0, 2.0), (2.0, 0.5, 1.0), (1.0, 3.0, 1.0)]


@pytest.mark.parametrize("af,ap,scale", CASES)
def test_rnlfm_mass_and_mean(af, ap, scale):
    d = spectra.rnlfm_density(af, ap, RELU_DELTA, scale)
    assert d.total_mass() == pytest.approx(1.0, abs=1e-6)
    assert d.f_zero == pytest.approx(max(0.0, 1 - 1 / ap))
    # Tr(Z^T Z) / N_p = M E|z|^2 / N_p with E|z|^2 = scale (1 + Dphi) for centred features
    assert first_moment(d) == pytest.approx(scale * (1 + RELU_DELTA) / ap, rel=1e-8)
    assert not d.info["ambiguous"]


def test_rnlfm_zero_atom_value():
    assert spectra.rnlfm_density(0.25, 8, RELU_DELTA).f_zero == pytest.approx(7 / 8)


@pytest.mark.parametrize("af,ap", [(0.25, 8.0), (0.25, 4.0), (0.5, 16.0)])
def test_separated_components_carry_integer_fractions(af, ap):
    # for wide models the bulk splits into N_f directions carried by X W and
    # M - N_f directions of pure nonlinear noise
    d = spectra.rnlfm_density(af, ap, RELU_DELTA)
    assert len(d.support) == 2
    low, high = (d.bulk_mass(lo, hi) for lo, hi in d.support)
    assert low == pytest.approx((1 - af) / ap, abs=1e-8)
    assert high == pytest.approx(af / ap, abs=1e-8)


def test_gap_closes_at_interpolation_threshold():
    lo_at_1 = spectra.rnlfm_density(0.25, 1.0, RELU_DELTA).x_min
    assert lo_at_1 == 0.0
    for ap in (0.5, 2.0):
        assert spectra.rnlfm_density(0.25, ap, RELU_DELTA).x_min > 1e-2


@pytest.mark.parametrize("af,ap", [(0.25, 0.5), (0.25, 1.0), (2.0, 4.0)])
def test_density_is_nonnegative_and_continuous(af, ap):
    d = spectra.rnlfm_density(af, ap, RELU_DELTA)
    xs = np.linspace(1e-4, d.x_max * 1.05, 3000)
    rho = d(xs)
    assert np.all(rho >= -1e-10)
    # no isolated spikes: each value is close to the mean of its neighbours on a sqrt(x) grid
    # (the few points next to an edge are skipped, where square-root behaviour dominates)
    for lo, hi in d.support:
        g = np.linspace(math.sqrt(lo), math.sqrt(hi), 3000)[10:-10] ** 2
        r = d(g)
        spike = np.abs(r[1:-1] - 0.5 * (r[:-2] + r[2:]))
        assert np.all(spike <= 0.01 * np.maximum(r[1:-1], 1e-3))


def test_discriminant_coefficients_real_and_sign_changes_at_edges():
    disc = spectra.QuarticDiscriminant(0.25, 2.0, RELU_DELTA)
    assert np.isrealobj(disc.coefficients(0.7))
    d = spectra.rnlfm_density(0.25, 2.0, RELU_DELTA)
    for lo, hi in d.support:
        for e in (lo, hi):
            if e > 0:
                h = 1e-6 * e
                assert disc.relative(e - h) * disc.relative(e + h) < 0


def test_epsilon_range_checked():
    with pytest.raises(ValueError):
        spectra.rnlfm_density(0.25, 2.0, RELU_DELTA, epsilon=1e-2)


def test_evaluation_grid_and_table():
    d = spectra.rnlfm_density(0.25, 8.0, RELU_DELTA)
    g = spectra.evaluation_grid(d, n=50)
    assert g.size == 100
    assert all(any(lo <= x <= hi for lo, hi in d.support) for x in g)
    t = spectra.density_table(d, g[:5])
    assert t.shape == (5, 2)


@pytest.mark.parametrize("arch,af,ap", [("linear", 0.5, None), ("rnlfm", 0.25, 2.0), ("rnlfm", 0.5, 0.5)])
def test_density_matches_sampled_eigenvalues(arch, af, ap):
    cfg = make_config(600, af, ap, student=StudentSpec(arch=arch), seed=5)
    spec = mc.eigen_histogram(cfg, n_matrices=4, bins=40)
    if arch == "linear":
        d = spectra.mp_density(af)
    else:
        d = spectra.rnlfm_density(af, ap, RELU_DELTA)
    assert mc.total_variation(spec, d) < 0.06
    assert spec.zero_fraction == pytest.approx(d.f_zero, abs=1e-12)
