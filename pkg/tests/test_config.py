import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from doubledescent.config import (Axis, ConfigError, ExperimentConfig, ExperimentShape, RngContract,
                                  StudentSpec, TeacherSpec, config_from_dict, config_to_dict,
                                  load_config, make_config, parse_config, ratio_to_count,
                                  shape_from_ratios)


def test_shape_ratios_and_rounding():
    s = shape_from_ratios(512, 0.25, 8)
    assert (s.n_f, s.n_p) == (128, 4096)
    assert s.alpha_f == 0.25 and s.alpha_p == 8
    assert ratio_to_count(200, 0.125) == 25
    assert ratio_to_count(10, 0.01) == 1
    assert shape_from_ratios(100, 0.3).n_p == 30


def test_snr_sets_noise():
    t = TeacherSpec.from_snr(10)
    assert t.sigma_eps2 == pytest.approx(0.1)
    t = TeacherSpec.from_snr(10, f="tanh")
    assert t.signal_variance / t.sigma_eps2 == pytest.approx(10)
    assert t.signal_variance == pytest.approx(1 + t.stats.delta)


@pytest.mark.parametrize("kwargs", [dict(sigma_x2=0), dict(sigma_beta2=-1), dict(f="nope"),
                                    dict(sigma_eps2=float("nan"))])
def test_teacher_validation(kwargs):
    with pytest.raises(ConfigError):
        TeacherSpec(**kwargs)


def test_student_validation():
    assert StudentSpec(arch="rnlfm").phi == "relu"
    for bad in [dict(arch="cnn"), dict(lam=-1.0), dict(sigma_w2=0.0), dict(arch="rnlfm", phi="nope")]:
        with pytest.raises(ConfigError):
            StudentSpec(**bad)


def test_linear_student_needs_square_shape():
    with pytest.raises(ConfigError):
        ExperimentConfig(ExperimentShape(10, 5, 6))
    with pytest.raises(ConfigError):
        make_config(100, 0.5, student=StudentSpec(arch="rnlfm"))


def test_axis():
    assert Axis.parse(0.5).values == (0.5,)
    a = Axis.parse({"start": 0.1, "stop": 10, "num": 3, "scale": "log"})
    np.testing.assert_allclose(a.values, [0.1, 1.0, 10.0])
    with pytest.raises(ConfigError, match="grid: empty axis"):
        Axis.parse([])
    with pytest.raises(ConfigError, match="grid: empty axis"):
        Axis.parse({"start": 0.1, "stop": 1, "num": 0})
    with pytest.raises(ConfigError):
        Axis.parse([1.0, 0.5])


def test_parse_rejects_unknown_and_conflicting_fields():
    with pytest.raises(ConfigError, match="unknown"):
        parse_config({"shape": {"m": 10, "alpha_f": 0.5}, "colour": "red"})
    with pytest.raises(ConfigError):
        parse_config({"shape": {"m": 10, "alpha_f": 0.5}, "teacher": {"snr": 5, "sigma_eps2": 0.1}})
    with pytest.raises(ConfigError):
        parse_config({"shape": {"m": 10, "alpha_f": 0.5}, "sweep": {"m": 10, "alpha_f": 0.5}})
    with pytest.raises(ConfigError):
        parse_config({"sweep": {"m": 10, "alpha_f": 0.5}, "student": {"arch": "rnlfm"}})


def test_sweep_expansion():
    doc = parse_config({"sweep": {"m": 100, "alpha_f": [0.25, 0.5], "alpha_p": [1, 2, 4]},
                        "student": {"arch": "rnlfm"}})
    exps = doc.experiments()
    assert len(exps) == 6
    assert [(e.shape.n_f, e.shape.n_p) for e in exps[:3]] == [(25, 100), (25, 200), (25, 400)]


def test_rng_contract_is_keyed_by_seed_stream_and_role():
    a = RngContract(3, 7).generator("test").standard_normal(4)
    b = RngContract(3, 7).generator("test").standard_normal(4)
    np.testing.assert_array_equal(a, b)
    c = RngContract(3, 7).generator("train1").standard_normal(4)
    d = RngContract(3, 8).generator("test").standard_normal(4)
    assert not np.allclose(a, c) and not np.allclose(a, d)
    with pytest.raises(ConfigError):
        RngContract(-1)


def test_load_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"shape": {"m": 64, "n_f": 16}, "seed": 4}))
    doc = load_config(p)
    assert doc.base.shape == ExperimentShape(64, 16, 16) and doc.base.seed == 4
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)


@settings(max_examples=60, deadline=None)
@given(
    m=st.integers(1, 5000),
    af=st.floats(0.01, 20),
    ap=st.floats(0.01, 20),
    rnlfm=st.booleans(),
    sb2=st.floats(0, 5),
    se2=st.floats(0, 5),
    lam=st.floats(0, 1),
    seed=st.integers(0, 2 ** 63),
)
def test_config_round_trip(m, af, ap, rnlfm, sb2, se2, lam, seed):
    student = StudentSpec(arch="rnlfm" if rnlfm else "linear", lam=lam)
    cfg = make_config(m, af, ap if rnlfm else None, teacher=TeacherSpec(sigma_beta2=sb2, sigma_eps2=se2),
                      student=student, seed=seed)
    d = config_to_dict(cfg)
    assert config_from_dict(json.loads(json.dumps(d))) == cfg
