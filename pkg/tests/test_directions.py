import numpy as np
import pytest

from supermann.directions import (BroydenDirections,
                                  RestartedBroydenDirections, ZeroDirections,
                                  powell_theta, truncate, zero_direction)
from supermann.space import Metric


def e(i, n):
    v = np.zeros(n)
    v[i] = 1.0
    return v


# ---------------------------------------------------------------------------
# Powell mixing factor
# ---------------------------------------------------------------------------


def test_powell_theta_first_branch():
    assert powell_theta(0.5, 0.2) == 1.0


def test_powell_theta_zero_gamma():
    assert powell_theta(0.0, 0.2) == pytest.approx(0.8)


def test_powell_theta_negative_gamma():
    assert powell_theta(-0.1, 0.2) == pytest.approx(1.2 / 1.1)


def test_powell_theta_bad_bar():
    with pytest.raises(ValueError):
        powell_theta(0.5, 1.0)


def test_powell_nonsingularity_margin():
    rng = np.random.default_rng(20)
    for theta_bar in (0.2, 0.5, 0.9):
        for _ in range(500):
            gamma = float(4.0 * rng.standard_normal())
            theta = powell_theta(gamma, theta_bar)
            assert abs(1.0 - theta + theta * gamma) >= theta_bar - 1e-12


# ---------------------------------------------------------------------------
# full-memory updates
# ---------------------------------------------------------------------------


def test_full_update_identity_pair_is_noop():
    b = BroydenDirections(3)
    b.update(e(0, 3), e(0, 3))
    assert np.allclose(b.H, np.eye(3))


def test_full_update_scalar_double_pair():
    b = BroydenDirections(2, theta_bar=0.2)
    b.update(e(0, 2), 2.0 * e(0, 2))
    expected = np.eye(2)
    expected[0, 0] = 0.5
    assert np.allclose(b.H, expected)
    assert np.allclose(b.H @ e(0, 2), 0.5 * e(0, 2))


def test_full_direction_values():
    b = BroydenDirections(2)
    assert np.allclose(b.direction(np.array([1.0, -2.0])), [-1.0, 2.0])
    assert np.allclose(b.direction(np.zeros(2)), 0.0)
    b.H = np.diag([2.0, 1.0])
    assert np.allclose(b.direction(np.array([1.0, 1.0])), [-2.0, -1.0])


def _direct_broyden_matrix_update(B, s, y, theta_bar):
    """Forward-model oracle: update B directly and report (B_next, ytilde)."""
    gamma = float((np.linalg.solve(B, y) @ s) / (s @ s))
    theta = powell_theta(gamma, theta_bar)
    ytilde = (1.0 - theta) * (B @ s) + theta * y
    B_next = B + np.outer(ytilde - B @ s, s) / float(s @ s)
    return B_next, ytilde


def test_full_update_matches_explicit_inverse_oracle():
    rng = np.random.default_rng(21)
    for _ in range(20):
        b = BroydenDirections(5, theta_bar=0.2)
        B = np.eye(5)
        for _ in range(8):
            s = rng.standard_normal(5)
            y = rng.standard_normal(5)
            B, _ = _direct_broyden_matrix_update(B, s, y, 0.2)
            b.update(s, y)
        assert np.allclose(b.H, np.linalg.inv(B), rtol=1e-10, atol=1e-10)


def test_secant_condition_after_updates():
    rng = np.random.default_rng(22)
    b = BroydenDirections(6, theta_bar=0.2)
    B = np.eye(6)
    for _ in range(30):
        s = rng.standard_normal(6)
        y = rng.standard_normal(6)
        B, ytilde = _direct_broyden_matrix_update(B, s, y, 0.2)
        b.update(s, y)
        assert np.linalg.norm(b.H @ ytilde - s) <= 1e-10 * np.linalg.norm(s)


def test_degenerate_pair_skipped():
    b = BroydenDirections(3)
    H0 = b.H.copy()
    assert not b.update(1e-16 * e(0, 3), e(1, 3))
    assert np.array_equal(b.H, H0)
    assert b.skipped == 1


# ---------------------------------------------------------------------------
# restarted scheme
# ---------------------------------------------------------------------------


def test_restarted_first_call_no_pair():
    r = RestartedBroydenDirections(4, memory=3)
    Rx = np.array([1.0, 2.0, -1.0, 0.5])
    assert np.allclose(r.propose(None, None, Rx), -Rx)
    assert r.count == 0


def test_restarted_identical_pair_appends_zero_correction():
    # s = y makes gamma = 1 (>= theta_bar), theta = 1, stored stilde = 0
    r = RestartedBroydenDirections(3, memory=5)
    s = np.array([1.0, 1.0, 0.0])
    Rx = np.array([0.3, -0.2, 0.1])
    d = r.propose(s, s.copy(), Rx)
    assert np.allclose(d, -Rx)
    assert r.count == 1
    assert np.allclose(r._St[0], 0.0)


def test_restarted_buffer_reset_at_capacity():
    rng = np.random.default_rng(23)
    r = RestartedBroydenDirections(4, memory=3)
    for i in range(3):
        r.propose(rng.standard_normal(4), rng.standard_normal(4),
                  rng.standard_normal(4))
    assert r.count == 3
    # buffers full: this call still uses all pairs but then wipes them
    r.propose(rng.standard_normal(4), rng.standard_normal(4),
              rng.standard_normal(4))
    assert r.count == 0
    assert r.restarts == 1


def test_restarted_degenerate_pair_returns_buffer_direction():
    rng = np.random.default_rng(24)
    r = RestartedBroydenDirections(3, memory=4)
    r.propose(rng.standard_normal(3), rng.standard_normal(3),
              rng.standard_normal(3))
    Rx = rng.standard_normal(3)
    want = r.direction(Rx)
    got = r.propose(np.zeros(3), rng.standard_normal(3), Rx)
    assert np.allclose(got, want)
    assert r.skipped == 1
    assert r.count == 1


def test_restarted_matches_full_within_window():
    """Same pair stream => same directions while the buffers have room."""
    rng = np.random.default_rng(25)
    n, mem = 20, 10
    M = rng.standard_normal((n, n)) * 0.3
    q = rng.standard_normal(n)
    resid = lambda x: M @ x + q  # affine residual

    full = BroydenDirections(n, theta_bar=0.2)
    rest = RestartedBroydenDirections(n, memory=mem, theta_bar=0.2)
    x = rng.standard_normal(n)
    Rx = resid(x)
    d_full = full.propose(None, None, Rx)
    d_rest = rest.propose(None, None, Rx)
    assert np.allclose(d_full, d_rest)
    for _ in range(mem):
        x_new = x + d_full
        Rx_new = resid(x_new)
        s, y = x_new - x, Rx_new - Rx
        d_full = full.propose(s, y, Rx_new)
        d_rest = rest.propose(s, y, Rx_new)
        scale = max(1.0, float(np.linalg.norm(d_full)))
        assert np.linalg.norm(d_full - d_rest) <= 1e-8 * scale
        x, Rx = x_new, Rx_new


# ---------------------------------------------------------------------------
# truncation and zero directions
# ---------------------------------------------------------------------------


def test_truncate_within_bound_unchanged():
    m = Metric(2)
    d = np.array([1.0, 0.0])
    out = truncate(d, norm_Rx=1.0, cap=2.0, metric=m)
    assert np.array_equal(out, d)


def test_truncate_rescales_to_bound():
    m = Metric(2)
    out = truncate(np.array([3.0, 4.0]), norm_Rx=1.0, cap=1.0, metric=m)
    assert np.allclose(out, [0.6, 0.8])
    assert np.linalg.norm(out) == pytest.approx(1.0)


def test_truncate_zero_residual_gives_zero():
    m = Metric(2)
    out = truncate(np.array([3.0, 4.0]), norm_Rx=0.0, cap=1.0, metric=m)
    assert np.allclose(out, 0.0)


def test_truncate_bound_always_holds():
    rng = np.random.default_rng(26)
    m = Metric(5)
    for _ in range(300):
        d = 10.0 ** rng.uniform(-3, 3) * rng.standard_normal(5)
        nrx = 10.0 ** rng.uniform(-6, 2)
        cap = 10.0 ** rng.uniform(0, 4)
        out = truncate(d, nrx, cap, m)
        assert np.linalg.norm(out) <= cap * nrx + 1e-12


def test_zero_direction():
    Rx = np.array([1.0, -2.0, 3.0])
    assert np.array_equal(zero_direction(Rx), np.zeros(3))
    z = ZeroDirections()
    assert np.array_equal(z.propose(None, None, Rx), np.zeros(3))
    assert np.array_equal(z.propose(Rx, Rx, Rx), np.zeros(3))
