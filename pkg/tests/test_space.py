import numpy as np
import pytest

from supermann.space import Metric, inner, norm, set_debug_checks


def diag_metric(d):
    return Metric(len(d), operator_apply=lambda u: np.asarray(d) * u)


def test_inner_orthogonal():
    assert inner([1.0, 0.0], [0.0, 1.0]) == 0.0


def test_inner_euclidean_value():
    assert inner([1.0, 2.0], [1.0, 2.0]) == 5.0


def test_inner_diag_operator():
    m = diag_metric([3.0, 1.0])
    assert inner([1.0, 0.0], [1.0, 0.0], m) == pytest.approx(3.0, rel=1e-15)


def test_norm_345():
    assert norm([3.0, 4.0]) == 5.0


def test_norm_zero_vector():
    m = diag_metric([3.0, 1.0])
    assert norm([0.0, 0.0], m) == 0.0


def test_norm_diag_operator():
    m = diag_metric([3.0, 1.0])
    assert norm([1.0, 1.0], m) == pytest.approx(2.0, rel=1e-15)


def test_dimension_mismatch_raises():
    with pytest.raises(ValueError):
        inner([1.0, 2.0], [1.0, 2.0, 3.0])
    m = Metric(3)
    with pytest.raises(ValueError):
        m.norm(np.ones(2))


def _random_metrics(rng, dim):
    d = rng.uniform(0.5, 3.0, dim)
    M = rng.standard_normal((dim, dim))
    spd = M @ M.T + dim * np.eye(dim)
    return [Metric(dim),
            Metric(dim, operator_apply=lambda u, d=d: d * u),
            Metric(dim, operator_apply=lambda u, spd=spd: spd @ u)]


def test_cauchy_schwarz_random():
    rng = np.random.default_rng(0)
    for m in _random_metrics(rng, 6):
        for _ in range(1000 // 3):
            u = rng.standard_normal(6)
            v = rng.standard_normal(6)
            lhs = abs(m.inner(u, v))
            rhs = m.norm(u) * m.norm(v)
            assert lhs <= rhs * (1.0 + 1e-12)


def test_parallelogram_law_random():
    rng = np.random.default_rng(1)
    for m in _random_metrics(rng, 5):
        for _ in range(200):
            u = rng.standard_normal(5)
            v = rng.standard_normal(5)
            lhs = m.norm_sq(u + v) + m.norm_sq(u - v)
            rhs = 2.0 * m.norm_sq(u) + 2.0 * m.norm_sq(v)
            assert lhs == pytest.approx(rhs, rel=1e-10)


def test_operator_metric_symmetry():
    rng = np.random.default_rng(2)
    for m in _random_metrics(rng, 7)[1:]:
        for _ in range(200):
            u = rng.standard_normal(7)
            v = rng.standard_normal(7)
            assert m.inner(u, v) == pytest.approx(m.inner(v, u), rel=1e-12, abs=1e-12)
        assert m.check_spd(rng)


def test_debug_checks_catch_nan():
    m = Metric(2)
    set_debug_checks(True)
    try:
        with pytest.raises(FloatingPointError):
            m.norm(np.array([np.nan, 0.0]))
    finally:
        set_debug_checks(False)
    # off by default: no exception
    assert np.isnan(m.norm(np.array([np.nan, 0.0])))
