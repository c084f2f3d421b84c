import numpy as np
import pytest

from supermann.gkm import (accepts, candidate_stats, gkm_update,
                           line_search_cap, separation_rho)
from supermann.operators import (AveragedOperator, Ball, Box, Halfspace,
                                 Hyperplane, make_alternating_projections,
                                 project)
from supermann.space import Metric

E2 = Metric(2)


def proj_axis_op():
    """T = projection onto {x1 = 0} in R^2; firmly nonexpansive."""
    hp = Hyperplane(np.array([1.0, 0.0]), 0.0)
    return AveragedOperator(hp.project, 0.5, E2)


def test_rho_at_base_point_is_residual_norm_sq():
    op = proj_axis_op()
    x = np.array([2.0, 0.0])
    Rx = op.residual(x)
    rho = separation_rho(x, x, Rx, op.alpha, E2)
    assert rho == pytest.approx(float(Rx @ Rx), rel=1e-15)


def test_rho_zero_at_fixed_trial_point():
    op = proj_axis_op()
    x = np.array([2.0, 0.0])
    w = np.array([0.0, 1.0])  # on the axis: fixed point of T
    Rw = op.residual(w)
    assert separation_rho(x, w, Rw, op.alpha, E2) == 0.0


def test_rho_worked_projection_example():
    op = proj_axis_op()
    x = np.array([2.0, 0.0])
    w = np.array([1.0, 1.0])
    Rw = op.residual(w)
    assert np.allclose(Rw, [1.0, 0.0])
    rho = separation_rho(x, w, Rw, op.alpha, E2)
    # <Rw, w - x> = -1, so rho = 1 - 2 * 0.5 * (-1) = 2
    assert rho == pytest.approx(2.0, rel=1e-15)


def test_update_no_move_when_rho_nonpositive():
    x = np.array([1.0, 2.0])
    w = np.array([0.5, 1.5])
    Rw = np.array([0.3, -0.1])
    out = gkm_update(x, w, Rw, rho=-1.0, lam=1.0, metric=E2)
    assert np.array_equal(out, x)


def test_update_worked_example():
    x = np.array([2.0, 0.0])
    Rw = np.array([1.0, 0.0])
    out = gkm_update(x, None, Rw, rho=2.0, lam=1.0, metric=E2,
                     norm_Rw_sq=1.0)
    assert np.allclose(out, [0.0, 0.0])


def test_update_zero_direction_is_relaxed_step():
    op = proj_axis_op()
    x = np.array([2.0, 3.0])
    Rx = op.residual(x)
    for lam in (0.25, 1.0, 2.0):  # within [0, 1/alpha] = [0, 2]
        rho, nrw2 = candidate_stats(x, x, Rx, op.alpha, E2)
        out = gkm_update(x, x, Rx, rho, lam, E2, norm_Rw_sq=nrw2)
        expected = x - lam * Rx
        assert np.allclose(out, expected, atol=1e-15)


def test_update_fixed_point_trial_short_circuits():
    x = np.array([2.0, 0.0])
    out = gkm_update(x, None, np.zeros(2), rho=0.0, lam=1.0, metric=E2,
                     norm_Rw_sq=0.0)
    assert np.array_equal(out, x)


def test_accepts_cases():
    # w = x: rho = ||Rx||^2 passes for any sigma < 1
    assert accepts(4.0, 2.0, 2.0, 0.9)
    assert not accepts(0.0, 1.0, 1.0, 0.1)
    assert accepts(2.0, 1.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        accepts(1.0, 1.0, 1.0, 1.0)


def test_line_search_guarantee_randomized():
    """For tau below the theoretical cap, acceptance always holds."""
    rng = np.random.default_rng(11)
    trials = 0
    while trials < 1000:
        dim = int(rng.integers(2, 11))
        kind = rng.integers(0, 3)
        if kind == 0:
            lo = -rng.random(dim) - 0.2
            hi = rng.random(dim) + 0.2
            set_ = Box(lo, hi)
        elif kind == 1:
            set_ = Ball(rng.standard_normal(dim), 0.5 + rng.random())
        else:
            set_ = Halfspace(rng.standard_normal(dim), rng.standard_normal())
        op = AveragedOperator(set_.project, 0.5, Metric(dim))
        x = 3.0 * rng.standard_normal(dim)
        Rx = op.residual(x)
        norm_Rx = float(np.linalg.norm(Rx))
        if norm_Rx < 1e-9:
            continue
        d = rng.standard_normal(dim)
        sigma = float(rng.choice([0.0, 0.1, 0.9]))
        cap = line_search_cap(norm_Rx, float(np.linalg.norm(d)), op.alpha,
                              sigma)
        for frac in (1.0, 0.5, 0.1):
            tau = frac * cap
            w = x + tau * d
            Rw = op.residual(w)
            rho, nrw2 = candidate_stats(x, w, Rw, op.alpha, op.metric)
            assert accepts(rho, np.sqrt(nrw2), norm_Rx, sigma)
        trials += 1


def test_fejer_decrease_of_safeguard_update():
    """Projection onto the trial halfspace moves toward known fixed points."""
    from supermann.problems import (build_ball_line_example,
                                    build_cones_example, build_soc_example)

    rng = np.random.default_rng(12)
    for inst in (build_cones_example(), build_ball_line_example(),
                 build_soc_example()):
        op = inst.operator
        m = op.metric
        lam_max = 1.0 / op.alpha
        for _ in range(200):
            x = 2.0 * rng.standard_normal(m.dim)
            d = rng.standard_normal(m.dim)
            tau = float(rng.random())
            lam = float(rng.uniform(0.05, lam_max - 0.05))
            w = x + tau * d
            Rw = op.residual(w)
            rho, nrw2 = candidate_stats(x, w, Rw, op.alpha, m)
            if rho <= 0.0 or nrw2 == 0.0:
                continue
            x_next = gkm_update(x, w, Rw, rho, lam, m, norm_Rw_sq=nrw2)
            decrease = lam * (1.0 / op.alpha - lam) * rho * rho / nrw2
            for z in inst.fixed_points:
                lhs = m.norm_sq(x_next - z)
                rhs = m.norm_sq(x - z) - decrease
                assert lhs <= rhs + 1e-10 * max(1.0, m.norm_sq(x - z))


def test_fixed_points_inside_trial_halfspaces():
    from supermann.problems import build_cones_example, build_soc_example

    rng = np.random.default_rng(13)
    for inst in (build_cones_example(), build_soc_example()):
        op = inst.operator
        for _ in range(300):
            w = 2.0 * rng.standard_normal(op.metric.dim)
            Rw = op.residual(w)
            for z in inst.fixed_points:
                margin = (op.metric.norm_sq(Rw)
                          - 2.0 * op.alpha * op.metric.inner(Rw, w - z))
                assert margin <= 1e-10


def test_full_projection_matches_halfspace_projection():
    """With lam = 1/(2 alpha), the update is the exact projection onto
    the trial halfspace, which can be built explicitly."""
    rng = np.random.default_rng(14)
    c1 = Ball(np.zeros(3), 1.0)
    c2 = Box(-0.5 * np.ones(3), 0.5 * np.ones(3))
    op = make_alternating_projections(c1, c2)
    m = op.metric
    for _ in range(100):
        x = 2.0 * rng.standard_normal(3)
        w = x + 0.5 * rng.standard_normal(3)
        Rw = op.residual(w)
        rho, nrw2 = candidate_stats(x, w, Rw, op.alpha, m)
        if rho <= 1e-12 or nrw2 <= 1e-20:
            continue
        lam = 1.0 / (2.0 * op.alpha)
        ours = gkm_update(x, w, Rw, rho, lam, m, norm_Rw_sq=nrw2)
        # C_w = {z: <Rw, z> <= <Rw, w> - ||Rw||^2 / (2 alpha)}
        beta = float(Rw @ w) - nrw2 / (2.0 * op.alpha)
        ref = project(Halfspace(Rw, beta), x)
        assert np.allclose(ours, ref, atol=1e-12)
