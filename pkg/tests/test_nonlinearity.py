import math

import numpy as np
import pytest

from doubledescent import nonlinearity as nl
from doubledescent.config import StudentSpec, TeacherSpec


def test_relu_closed_form_matches_quadrature():
    exact = nl.activation_stats("relu")
    quad = nl.gaussian_moments("relu", role=nl.ACTIVATION, use_exact=False)
    assert exact.mean == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-15)
    for a, b in [(exact.mean, quad.mean), (exact.second_moment, quad.second_moment),
                 (exact.mean_derivative, quad.mean_derivative)]:
        assert a == pytest.approx(b, abs=1e-12)
    assert exact.delta == pytest.approx(1 - 2 / math.pi, abs=1e-12)


def test_tanh_integration_by_parts_identity():
    # E[tanh'(h)] = E[1 - tanh(h)^2], so <f'> + <f^2> = 1
    s = nl.teacher_stats("tanh")
    assert s.mean_derivative + s.second_moment == pytest.approx(1.0, abs=1e-13)


def test_tanh_reported_constants():
    s = nl.teacher_stats("tanh")
    assert round(s.mean_derivative, 4) == 0.6057
    assert round(s.second_moment, 4) == 0.3943
    assert round(s.delta, 4) == 0.0747


def test_sine_closed_forms():
    # E[sin h] = 0, E[cos h] = exp(-1/2), E[sin^2 h] = (1 - exp(-2)) / 2
    g = nl.Nonlinearity("sin", np.sin, np.cos)
    s = nl.gaussian_moments(g, role=nl.ACTIVATION)
    assert s.mean == pytest.approx(0.0, abs=1e-14)
    assert s.mean_derivative == pytest.approx(math.exp(-0.5), rel=1e-13)
    assert s.second_moment == pytest.approx((1 - math.exp(-2)) / 2, rel=1e-13)


def test_kinked_quadrature_is_exact_for_piecewise_polynomials():
    # E[|h|^3] = 2 sqrt(2/pi)
    val = nl.gaussian_expectation(lambda h: np.abs(h) ** 3, nodes=32, kinks=(0.0,))
    assert val == pytest.approx(2 * math.sqrt(2 / math.pi), rel=1e-13)


def test_monte_carlo_agrees_with_quadrature():
    rng = np.random.default_rng(3)
    h = rng.standard_normal(2_000_000)
    s = nl.activation_stats("tanh")
    for est, ref in [(np.mean(np.tanh(h) ** 2), s.second_moment),
                     (np.mean(1 / np.cosh(h) ** 2), s.mean_derivative)]:
        assert abs(est - ref) < 4 * 1e-3 / math.sqrt(2)


def test_role_changes_delta_only_through_the_mean():
    t = nl.teacher_stats("relu")
    a = nl.activation_stats("relu")
    assert t.delta - a.delta == pytest.approx(t.mean ** 2 / t.mean_derivative ** 2)


def test_vanishing_derivative_rejected():
    g = nl.Nonlinearity("cos", np.cos, lambda h: -np.sin(h))
    with pytest.raises(ValueError, match="derivative"):
        nl.gaussian_moments(g)


def test_registry():
    assert {"linear", "relu", "tanh"} <= set(nl.available())
    with pytest.raises(ValueError):
        nl.register("relu", np.abs, np.sign)
    with pytest.raises(KeyError):
        nl.get_nonlinearity("no-such-function")
    nl.register("cube_test", lambda h: h + 0.1 * h ** 3, lambda h: 1 + 0.3 * h ** 2, overwrite=True)
    s = nl.teacher_stats("cube_test")
    # <f'> = 1.3, <f^2> = 1 + 0.2 * 3 + 0.01 * 15
    assert s.mean_derivative == pytest.approx(1.3, rel=1e-13)
    assert s.second_moment == pytest.approx(1 + 0.6 + 0.15, rel=1e-13)


def test_derived_variances():
    t = TeacherSpec(f="tanh", sigma_beta2=2.0, sigma_x2=0.5, sigma_eps2=0.1)
    d = nl.derived_variances(t, StudentSpec(arch="rnlfm", phi="relu", sigma_w2=3.0))
    assert d.sigma_dy2 == pytest.approx(1.0 * nl.teacher_stats("tanh").delta)
    assert d.sigma_dz2 == pytest.approx(1.5 * (1 - 2 / math.pi))
    assert d.mu_z == pytest.approx(math.sqrt(1.5) * 2 / math.sqrt(2 * math.pi))
    lin = nl.derived_variances(t, StudentSpec())
    assert lin.sigma_dz2 == 0 and lin.mu_z == 0
