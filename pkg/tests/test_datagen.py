import math

import numpy as np
import pytest

from doubledescent import datagen
from doubledescent.config import RngContract, TeacherSpec, shape_from_ratios


def _draw(teacher, m=400, n_f=50, seed=0, stream=0):
    shape = shape_from_ratios(m, n_f / m)
    rng = RngContract(seed, stream)
    beta = datagen.sample_ground_truth(shape, teacher, rng)
    return beta, datagen.sample_dataset(shape, teacher, beta, rng)


def test_linear_teacher_has_no_nonlinear_part():
    _, ds = _draw(TeacherSpec(sigma_eps2=0.3))
    np.testing.assert_array_equal(ds.y_star, ds.y_lin)
    np.testing.assert_array_equal(ds.y_nl, 0.0)
    np.testing.assert_allclose(ds.y, ds.y_star + ds.eps)


def test_null_data():
    _, ds = _draw(TeacherSpec(f="tanh", sigma_beta2=0.0, sigma_eps2=0.0))
    assert not ds.y.any() and not ds.y_star.any()


def test_label_sources_add_up():
    _, ds = _draw(TeacherSpec(f="tanh"))
    total = ds.labels("linear") + ds.labels("nonlinear") + ds.labels("noise")
    np.testing.assert_allclose(total, ds.labels("total"), atol=1e-14)
    np.testing.assert_array_equal(ds.targets("noise"), 0.0)


def test_tanh_nonlinear_label_variance():
    # the nonlinear part of the labels has variance sb2 sx2 Df and is uncorrelated with x.beta;
    # N_f is large so that |beta|^2 / N_f is close to sb2 in every stream
    t = TeacherSpec(f="tanh", sigma_beta2=1.0, sigma_x2=1.0, sigma_eps2=0.0)
    ynl, ylin = [], []
    for k in range(50):
        _, ds = _draw(t, m=5000, n_f=1000, seed=1, stream=k)
        ynl.append(ds.y_nl)
        ylin.append(ds.y_lin)
    ynl = np.concatenate(ynl)
    ylin = np.concatenate(ylin)
    n = ynl.size
    var = np.mean(ynl ** 2)
    se = np.std(ynl ** 2) / math.sqrt(n)
    assert abs(var - t.stats.delta) < 4 * se
    assert abs(np.mean(ynl * ylin)) < 4 * np.std(ynl * ylin) / math.sqrt(n)


def test_input_scale():
    g = np.random.default_rng(0)
    x = datagen.sample_inputs(2000, 100, 2.5, g)
    # each row has squared norm close to sigma_x2
    assert np.mean(np.sum(x ** 2, axis=1)) == pytest.approx(2.5, rel=0.01)


def test_streams_are_reproducible_and_roles_independent():
    t = TeacherSpec()
    shape = shape_from_ratios(50, 0.5)
    rng = RngContract(11, 3)
    beta = datagen.sample_ground_truth(shape, t, rng)
    a = datagen.sample_dataset(shape, t, beta, rng, role="train1")
    b = datagen.sample_dataset(shape, t, beta, rng, role="train1")
    c = datagen.sample_dataset(shape, t, beta, rng, role="train2")
    np.testing.assert_array_equal(a.x, b.x)
    assert not np.allclose(a.x, c.x)


def test_shape_checks(tmp_path):
    t = TeacherSpec()
    shape = shape_from_ratios(20, 0.5)
    with pytest.raises(ValueError):
        datagen.sample_dataset(shape, t, np.zeros(3), np.random.default_rng(0))
    with pytest.raises(TypeError):
        datagen.sample_ground_truth(shape, t, 42)
    ds = datagen.sample_dataset(shape, t, np.ones(10), np.random.default_rng(0), m=5)
    p = tmp_path / "d.csv"
    datagen.write_dataset_csv(ds, p)
    lines = p.read_text().splitlines()
    assert lines[0].startswith("y,y_star,eps,x1") and len(lines) == 6
