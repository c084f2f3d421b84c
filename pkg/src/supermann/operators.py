"""Averaged operators, convex-set projections, and splitting constructions.

The operator abstraction is a callable T with an averagedness constant
alpha in (0, 1] and the metric in which that averagedness holds. The
fixed-point residual R = id - T is derived. Every application of T bumps
an evaluation counter; splitting constructors additionally wire
problem-specific work counters (linear solves, L/L^T calls, matvecs).
"""

import threading

import numpy as np
import scipy.linalg as sla

from . import kernels
from .space import Metric, as_vector


class Counter:
    """Thread-safe event counter (shared operators may be applied concurrently)."""

    __slots__ = ("_lock", "value")

    def __init__(self):
        self._lock = threading.Lock()
        self.value = 0

    def bump(self, k=1):
        with self._lock:
            self.value += k

    def reset(self):
        with self._lock:
            self.value = 0


class AveragedOperator:
    """An alpha-averaged map T with its residual R = id - T.

    ``apply`` must be a pure function of its input vector. ``counters``
    carries problem-specific work counters so benchmark comparisons can
    report the operations that actually dominate (e.g. linear solves for
    the conic splitting, simulation calls for the control splitting).
    """

    def __init__(self, apply, alpha, metric, name="operator", counters=None,
                 cache=None):
        if not 0.0 < alpha <= 1.0:
            raise ValueError(f"averagedness constant must be in (0, 1], got {alpha}")
        self._apply = apply
        self.alpha = float(alpha)
        self.metric = metric
        self.name = name
        self.counters = counters or {}
        # Scratch area splitting constructors use to expose their latest
        # internal quantities (e.g. the resolvent output) to reporters.
        self.cache = cache if cache is not None else {}
        self._evals = Counter()

    @property
    def evals(self):
        return self._evals.value

    def reset_counters(self):
        self._evals.reset()
        for c in self.counters.values():
            c.reset()

    def __call__(self, x):
        self._evals.bump()
        return self._apply(x)

    def residual(self, x):
        """R(x) = x - T(x); one application of T."""
        return x - self(x)

    def relax(self, x, Tx, lam):
        """Relaxed step (1 - lam) x + lam T(x), lam in [0, 1/alpha]."""
        if not 0.0 <= lam <= 1.0 / self.alpha + 1e-15:
            raise ValueError(
                f"relaxation {lam} outside [0, {1.0 / self.alpha:.6g}] for "
                f"alpha={self.alpha}")
        return (1.0 - lam) * x + lam * Tx


def residual(op, x):
    return op.residual(x)


def relax(op, x, Tx, lam):
    return op.relax(x, Tx, lam)


def compose_averagedness(a1, a2):
    """Averagedness constant of the composition of two averaged maps."""
    if a1 >= 1.0 or a2 >= 1.0:
        return 1.0
    return (a1 + a2 - 2.0 * a1 * a2) / (1.0 - a1 * a2)


# ---------------------------------------------------------------------------
# Convex sets and projections (all projections are Euclidean)
# ---------------------------------------------------------------------------


class ConvexSet:
    """Base for projectable closed convex sets."""

    dim = None

    def project(self, x):
        raise NotImplementedError

    def contains(self, x, tol=1e-12):
        return np.linalg.norm(x - self.project(x)) <= tol * max(1.0, np.linalg.norm(x))

    def _check(self, x):
        x = as_vector(x)
        if x.shape[0] != self.dim:
            raise ValueError(f"point of dim {x.shape[0]} for set of dim {self.dim}")
        return x


class Box(ConvexSet):
    def __init__(self, lo, hi):
        self.lo = as_vector(lo)
        self.hi = as_vector(hi)
        if self.lo.shape != self.hi.shape or np.any(self.lo > self.hi):
            raise ValueError("box requires lo <= hi componentwise")
        self.dim = self.lo.shape[0]

    def project(self, x):
        return np.clip(self._check(x), self.lo, self.hi)


class Ball(ConvexSet):
    def __init__(self, center, radius):
        self.center = as_vector(center)
        if radius <= 0:
            raise ValueError("ball radius must be positive")
        self.radius = float(radius)
        self.dim = self.center.shape[0]

    def project(self, x):
        d = self._check(x) - self.center
        n = np.linalg.norm(d)
        if n <= self.radius:
            return x.copy()
        return self.center + (self.radius / n) * d


class Halfspace(ConvexSet):
    """{z : <v, z> <= beta}."""

    def __init__(self, v, beta):
        self.v = as_vector(v)
        nv2 = float(self.v @ self.v)
        if nv2 == 0.0:
            raise ValueError("halfspace normal must be nonzero")
        self._nv2 = nv2
        self.beta = float(beta)
        self.dim = self.v.shape[0]

    def project(self, x):
        x = self._check(x)
        excess = max(0.0, float(self.v @ x) - self.beta)
        return x - (excess / self._nv2) * self.v


class Hyperplane(ConvexSet):
    """{z : <v, z> = beta}."""

    def __init__(self, v, beta):
        self.v = as_vector(v)
        nv2 = float(self.v @ self.v)
        if nv2 == 0.0:
            raise ValueError("hyperplane normal must be nonzero")
        self._nv2 = nv2
        self.beta = float(beta)
        self.dim = self.v.shape[0]

    def project(self, x):
        x = self._check(x)
        return x - ((float(self.v @ x) - self.beta) / self._nv2) * self.v


class NonnegOrthant(ConvexSet):
    def __init__(self, dim):
        self.dim = int(dim)

    def project(self, x):
        return np.maximum(self._check(x), 0.0)


class ZeroCone(ConvexSet):
    def __init__(self, dim):
        self.dim = int(dim)

    def project(self, x):
        self._check(x)
        return np.zeros(self.dim)


class FreeCone(ConvexSet):
    def __init__(self, dim):
        self.dim = int(dim)

    def project(self, x):
        return self._check(x).copy()


class SecondOrderCone(ConvexSet):
    """{(z, t) : scale * ||z||_2 <= t}, with t the last component.

    The projection is the standard three-case closed form: identity inside
    the cone, zero inside the polar cone {(w, s): ||w|| <= -scale * s},
    and a boundary scaling in between.
    """

    def __init__(self, dim, scale=1.0):
        if dim < 2:
            raise ValueError("second-order cone needs dimension >= 2")
        if scale <= 0:
            raise ValueError("cone scale must be positive")
        self.dim = int(dim)
        self.scale = float(scale)

    def project(self, x):
        x = self._check(x)
        z, t = x[:-1], x[-1]
        th = self.scale
        a = float(np.linalg.norm(z))
        if th * a <= t:
            return x.copy()
        if a <= -th * t:
            return np.zeros(self.dim)
        r = (a + th * t) / (1.0 + th * th)
        out = np.empty(self.dim)
        out[:-1] = (r / a) * z
        out[-1] = th * r
        return out


class PolyhedralCone2D(ConvexSet):
    """Planar sector {x1 >= 0, lo * x1 <= x2 <= hi * x1}, lo < hi.

    The cone is spanned by the edge rays (1, lo) and (1, hi); a point
    outside projects onto the nearest of the two clipped edge rays (the
    origin when both clip to zero).
    """

    def __init__(self, lo, hi):
        if not lo < hi:
            raise ValueError("sector requires lo < hi")
        self.lo = float(lo)
        self.hi = float(hi)
        self.dim = 2
        self._e1 = np.array([1.0, lo]) / np.hypot(1.0, lo)
        self._e2 = np.array([1.0, hi]) / np.hypot(1.0, hi)

    def project(self, x):
        x = self._check(x)
        if x[0] >= 0.0 and self.lo * x[0] <= x[1] <= self.hi * x[0]:
            return x.copy()
        p1 = max(0.0, float(x @ self._e1)) * self._e1
        p2 = max(0.0, float(x @ self._e2)) * self._e2
        if np.linalg.norm(x - p1) <= np.linalg.norm(x - p2):
            return p1
        return p2


class ProductSet(ConvexSet):
    """Cartesian product of sets, stacked in order."""

    def __init__(self, *sets):
        if not sets:
            raise ValueError("product of zero sets")
        self.sets = tuple(sets)
        self.dim = sum(s.dim for s in sets)

    def project(self, x):
        x = self._check(x)
        out = np.empty(self.dim)
        i = 0
        for s in self.sets:
            out[i:i + s.dim] = s.project(x[i:i + s.dim])
            i += s.dim
        return out


def project(set_, x):
    """Euclidean projection of x onto the set."""
    return set_.project(as_vector(x))


def soft_threshold(x, t):
    """Componentwise shrinkage prox of t * ||.||_1."""
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def power_norm(apply_fn, dim, iters=200, rtol=1e-10, inflate=1.01, seed=1234):
    """Largest eigenvalue of a symmetric PSD map by power iteration.

    Runs at most ``iters`` rounds or until the Rayleigh estimate changes
    by less than ``rtol`` relatively, then inflates the result for use in
    strict stepsize inequalities.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = apply_fn(v)
        new = float(np.linalg.norm(w))
        if new == 0.0:
            return 0.0
        v = w / new
        if est > 0.0 and abs(new - est) <= rtol * est:
            est = new
            break
        est = new
    return est * inflate


# ---------------------------------------------------------------------------
# Splitting constructions
# ---------------------------------------------------------------------------


def make_alternating_projections(c1, c2):
    """T = proj_{C2} o proj_{C1}; each projection is firmly nonexpansive,
    so the composition is 2/3-averaged."""
    if c1.dim != c2.dim:
        raise ValueError("sets must share a dimension")

    def apply(x):
        return c2.project(c1.project(x))

    alpha = compose_averagedness(0.5, 0.5)
    return AveragedOperator(apply, alpha, Metric(c1.dim),
                            name="alternating-projections")


def make_drs(prob):
    """Douglas-Rachford map for the conic feasibility splitting.

    ``prob`` provides the skew matrix Q (embedding_dim square) and the
    projection onto the embedding cone via ``project_embedding_cone``.
    One application: v = (I+Q)^{-1} u (cached LU, counted as one linear
    solve), w = Pi_C(2v - u), result u + w - v. Firmly nonexpansive.
    """
    Q = prob.embedding_matrix()
    N = Q.shape[0]
    lu_piv = sla.lu_factor(np.eye(N) + Q)
    # Skew-symmetric Q makes I + Q nonsingular; a failed factorization can
    # only mean corrupted problem data.
    probe = np.ones(N)
    sol = sla.lu_solve(lu_piv, probe)
    assert np.linalg.norm((np.eye(N) + Q) @ sol - probe) <= 1e-8 * np.sqrt(N)

    lin_solves = Counter()
    cache = {}

    def apply(u):
        lin_solves.bump()
        v = sla.lu_solve(lu_piv, u)
        w = prob.project_embedding_cone(2.0 * v - u)
        cache["u"] = u
        cache["v"] = v
        cache["w"] = w
        return u + w - v

    def solve_resolvent(u):
        # Diagnostic path for reporters; not counted as solver work.
        return sla.lu_solve(lu_piv, u)

    op = AveragedOperator(apply, 0.5, Metric(N), name="drs-cone",
                          counters={"lin_solves": lin_solves}, cache=cache)
    op.cache["solve_resolvent"] = solve_resolvent
    return op


def make_fbs(prob, gamma=None):
    """Forward-backward map for the l1-regularized least squares problem.

    T(x) = shrink(x - gamma A^T (A x - b), gamma nu). The gradient step is
    (gamma L / 2)-averaged for 0 < gamma < 2/L with L = ||A^T A||, the
    prox is firmly nonexpansive; the composition constant follows.
    """
    A, b, nu = prob.A, prob.b, prob.nu
    n = A.shape[1]
    L = power_norm(lambda v: A.T @ (A @ v), n)
    if gamma is None:
        gamma = 1.0 / L
    if not 0.0 < gamma < 2.0 / L:
        raise ValueError(f"step {gamma} outside (0, {2.0 / L:.6g})")

    matvecs = Counter()

    def apply(x):
        matvecs.bump(2)
        g = x - gamma * (A.T @ (A @ x - b))
        return soft_threshold(g, gamma * nu)

    alpha = compose_averagedness(gamma * L / 2.0, 0.5)
    op = AveragedOperator(apply, alpha, Metric(n), name="fbs-lasso",
                          counters={"matvecs": matvecs})
    op.cache["gamma"] = gamma
    op.cache["lipschitz"] = L
    return op


def make_vu_condat(prob, tau=None, sigma_dual=None, alpha_override=None):
    """Primal-dual splitting map for the constrained control problem.

    Maps stacked (inputs u, multipliers y) to one primal-dual sweep:

        u+ = Pi_U( u - tau (grad f(u) + L^T y) )
        y+ = yhat - sigma (Pi_X(yhat / sigma + r) - r),  yhat = y + sigma L (2 u+ - u)

    with f the smooth control cost, L the input-to-state-trajectory map,
    r the free state response. Requires 0 < tau < 2/L_f and
    sigma < (1/tau - L_f/2) / ||L||^2; the map is then averaged in the
    space induced by P(u, y) = (u/tau - L^T y, -L u + y/sigma) with
    constant 1/(2 - delta), delta = (L_f/2) / (1/tau - sigma ||L||^2).
    Pass ``alpha_override`` (e.g. 1.0) for a more conservative constant.
    """
    n_p = prob.primal_dim
    n_d = prob.dual_dim
    qblk = prob.stacked_state_weights()
    r = prob.free_response()
    u_lo, u_hi = prob.input_bounds
    x_lo, x_hi = prob.state_bounds

    norm_L_sq = power_norm(lambda v: prob.apply_adjoint(prob.apply_dynamics(v)),
                           n_p)
    lip_f = 1.0 + float(np.max(qblk)) * norm_L_sq
    if tau is None:
        tau = 1.0 / lip_f
    if not 0.0 < tau < 2.0 / lip_f:
        raise ValueError(f"primal step {tau} outside (0, {2.0 / lip_f:.6g})")
    sigma_max = (1.0 / tau - lip_f / 2.0) / norm_L_sq
    if sigma_dual is None:
        sigma_dual = 0.9 * sigma_max
    if not 0.0 < sigma_dual < sigma_max:
        raise ValueError(
            f"dual step {sigma_dual} outside (0, {sigma_max:.6g}) for tau={tau}")

    delta = (lip_f / 2.0) / (1.0 / tau - sigma_dual * norm_L_sq)
    alpha = 1.0 / (2.0 - delta) if alpha_override is None else float(alpha_override)

    sig = sigma_dual

    def apply(z):
        u, y = z[:n_p], z[n_p:]
        xtraj = prob.apply_dynamics(u) + r
        grad = u + prob.apply_adjoint(qblk * xtraj + y)
        u_new = np.clip(u - tau * grad, u_lo, u_hi)
        yhat = y + sig * prob.apply_dynamics(2.0 * u_new - u)
        y_new = yhat - sig * (np.clip(yhat / sig + r, x_lo, x_hi) - r)
        return np.concatenate([u_new, y_new])

    def p_apply(z):
        u, y = z[:n_p], z[n_p:]
        return np.concatenate([u / tau - prob.apply_adjoint(y),
                               -prob.apply_dynamics(u) + y / sig])

    metric = Metric(n_p + n_d, operator_apply=p_apply)
    op = AveragedOperator(apply, alpha, metric, name="vu-condat-control",
                          counters={"L_calls": prob.l_counter})
    op.cache.update(tau=tau, sigma_dual=sig, lipschitz_f=lip_f,
                    norm_L_sq=norm_L_sq, delta=delta)
    return op


# ---------------------------------------------------------------------------
# Randomized operator audits (used by the test suite)
# ---------------------------------------------------------------------------


def check_nonexpansive(op, rng, pairs=50, scale=1.0, tol=1e-10):
    """||Tx - Ty|| <= ||x - y|| in the operator's metric, sampled pairs."""
    m = op.metric
    for _ in range(pairs):
        x = scale * rng.standard_normal(m.dim)
        y = scale * rng.standard_normal(m.dim)
        lhs = m.norm(op(x) - op(y))
        rhs = m.norm(x - y)
        if lhs > rhs * (1.0 + tol) + tol:
            return False
    return True


def check_averaged(op, rng, pairs=50, scale=1.0, tol=1e-10):
    """Firm nonexpansiveness of the 1/(2 alpha) relaxation of T."""
    m = op.metric
    lam = 1.0 / (2.0 * op.alpha)
    for _ in range(pairs):
        x = scale * rng.standard_normal(m.dim)
        y = scale * rng.standard_normal(m.dim)
        sx = op.relax(x, op(x), lam)
        sy = op.relax(y, op(y), lam)
        lhs = m.norm_sq(sx - sy) + m.norm_sq((x - sx) - (y - sy))
        rhs = m.norm_sq(x - y)
        if lhs > rhs * (1.0 + tol) + tol:
            return False
    return True
