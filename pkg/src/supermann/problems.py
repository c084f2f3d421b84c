"""Seeded benchmark problem builders and problem-specific reporting.

Every builder is deterministic given its parameters and seed (numpy's
default_rng / PCG64 stream), and returns a :class:`ProblemInstance`
bundling the operator, a starting point, any analytically known fixed
points, work counters worth comparing across methods, and optional
residual reporters / stopping callbacks.
"""

import dataclasses
import json
import typing

import numpy as np
import scipy.linalg as sla

from . import kernels, operators
from .operators import (Ball, Counter, Hyperplane, PolyhedralCone2D,
                        SecondOrderCone, make_alternating_projections,
                        make_drs, make_fbs, make_vu_condat)


@dataclasses.dataclass
class ProblemInstance:
    name: str
    operator: object
    x0: np.ndarray
    data: object = None
    fixed_points: list = dataclasses.field(default_factory=list)
    counters: dict = dataclasses.field(default_factory=dict)
    extra_stop: object = None
    report: object = None
    recommended: dict = dataclasses.field(default_factory=dict)
    meta: dict = dataclasses.field(default_factory=dict)

    def reset_counters(self):
        self.operator.reset_counters()

    def counter_values(self):
        out = {"T_evals": self.operator.evals}
        for name, counter in self.counters.items():
            out[name] = counter.value
        return out


# ---------------------------------------------------------------------------
# Alternating-projection demo problems
# ---------------------------------------------------------------------------


def build_cones_example():
    """Feasibility between two narrow planar sectors meeting only at 0.

    The residual is piecewise affine, so plain relaxed iterations converge
    linearly, but the small angle between the sectors makes the rate
    painfully close to one.
    """
    c1 = PolyhedralCone2D(0.1, 0.2)
    c2 = PolyhedralCone2D(0.3, 0.35)
    op = make_alternating_projections(c1, c2)
    return ProblemInstance(
        name="cones",
        operator=op,
        x0=np.array([1.0, 0.15]),
        data=(c1, c2),
        fixed_points=[np.zeros(2)],
        meta={"description": "alternating projections on two planar sectors"},
    )


def build_ball_line_example():
    """Feasibility between the unit ball and its tangent line {x1 = 1}.

    The unique intersection point is (1, 0), where the line touches the
    ball; the residual vanishes faster than the distance there, which
    drops the plain iteration to a sublinear rate. The quasi-Newton runs
    need a loose direction cap (see ``recommended``) because near the
    tangency useful steps are much longer than the residual.
    """
    c1 = Ball(np.zeros(2), 1.0)
    c2 = Hyperplane(np.array([1.0, 0.0]), 1.0)
    op = make_alternating_projections(c1, c2)
    theta = 1.0
    return ProblemInstance(
        name="ball-line",
        operator=op,
        x0=np.array([np.cos(theta), np.sin(theta)]),
        data=(c1, c2),
        fixed_points=[np.array([1.0, 0.0])],
        recommended={"D": 1e8},
        meta={"description": "alternating projections on ball and tangent line"},
    )


def build_soc_example():
    """Feasibility between a flat second-order cone and a tangent plane.

    The two sets meet along the ray {(0, t, 0.1 t) : t >= 0}, so no
    solution is isolated. Same loose direction cap as the ball-line demo.
    """
    scale = 0.1
    c1 = SecondOrderCone(3, scale=scale)  # x3 >= 0.1 ||(x1, x2)||
    c2 = Hyperplane(np.array([0.0, -scale, 1.0]), 0.0)  # x3 = 0.1 x2
    op = make_alternating_projections(c1, c2)

    def ray_point(t):
        return np.array([0.0, t, scale * t])

    inst = ProblemInstance(
        name="soc",
        operator=op,
        x0=np.array([1.0, 1.0, 1.0]),
        data=(c1, c2),
        fixed_points=[np.zeros(3), ray_point(1.0), ray_point(3.5)],
        recommended={"D": 1e8},
        meta={"description": "alternating projections on a flat second-order "
                             "cone and a tangent plane (nonisolated fix set)"},
    )
    inst.meta["ray_point"] = ray_point
    return inst


# ---------------------------------------------------------------------------
# Lasso / forward-backward
# ---------------------------------------------------------------------------


@dataclasses.dataclass
class Lasso:
    A: np.ndarray
    b: np.ndarray
    nu: float

    def subgradient_gap(self, x):
        """max(0, ||A^T(Ax - b)||_inf - nu): zero iff x is optimal
        (up to the sign conditions on the support, which the infinity
        bound dominates for the certification used here)."""
        g = self.A.T @ (self.A @ x - self.b)
        return max(0.0, float(np.max(np.abs(g))) - self.nu)

    def certifies_optimal(self, x, tol=1e-6):
        g = self.A.T @ (self.A @ x - self.b)
        return float(np.max(np.abs(g))) <= self.nu * (1.0 + tol)


def build_lasso(m, n, nu, seed, noise=0.1, support_frac=0.1, gamma=None):
    """Random l1-regularized least squares: A has N(0, 1/m) entries, the
    planted signal has ~support_frac * n nonzero N(0,1) entries, and
    b = A x_true + noise * N(0, I)."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n)) / np.sqrt(m)
    x_true = np.zeros(n)
    support = rng.choice(n, max(1, int(round(support_frac * n))), replace=False)
    x_true[support] = rng.standard_normal(support.shape[0])
    b = A @ x_true + noise * rng.standard_normal(m)
    prob = Lasso(A=A, b=b, nu=float(nu))
    op = make_fbs(prob, gamma=gamma)

    def report(x):
        return {"subgradient_gap": prob.subgradient_gap(x)}

    return ProblemInstance(
        name="lasso",
        operator=op,
        x0=np.zeros(n),
        data=prob,
        counters=dict(op.counters),
        report=report,
        meta={"m": m, "n": n, "nu": float(nu), "seed": seed,
              "gamma": op.cache["gamma"], "lipschitz": op.cache["lipschitz"],
              "x_true": x_true},
    )


# ---------------------------------------------------------------------------
# Cone program / Douglas-Rachford on the homogeneous embedding
# ---------------------------------------------------------------------------


_CONE_KINDS = ("zero", "free", "nonneg", "soc")


def _project_cone_blocks(cones, s, dual=False):
    out = np.empty_like(s)
    i = 0
    for kind, d in cones:
        blk = s[i:i + d]
        if kind == "nonneg":
            out[i:i + d] = np.maximum(blk, 0.0)
        elif kind == "soc":
            out[i:i + d] = SecondOrderCone(d).project(blk)
        elif kind == "zero":
            # dual of the zero cone is the free cone
            out[i:i + d] = blk if dual else 0.0
        elif kind == "free":
            out[i:i + d] = 0.0 if dual else blk
        else:
            raise ValueError(f"unsupported cone kind {kind!r}")
        i += d
    return out


@dataclasses.dataclass
class ConeProgram:
    """min <c, x> s.t. Ax + s = b, s in K, with K a product of primitive
    cones, solved through the homogeneous self-dual embedding."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    cones: list

    def __post_init__(self):
        m, n = self.A.shape
        if sum(d for _, d in self.cones) != m:
            raise ValueError("cone dimensions must sum to the row count")
        for kind, d in self.cones:
            if kind not in _CONE_KINDS:
                raise ValueError(f"unsupported cone kind {kind!r}")
            if d < 1 or (kind == "soc" and d < 2):
                raise ValueError(f"bad cone dimension {d} for {kind}")
        self.m, self.n = m, n

    @property
    def embedding_dim(self):
        return self.n + self.m + 1

    def project_cone(self, s):
        return _project_cone_blocks(self.cones, s, dual=False)

    def project_dual_cone(self, y):
        return _project_cone_blocks(self.cones, y, dual=True)

    def embedding_matrix(self):
        n, m = self.n, self.m
        Q = np.zeros((n + m + 1, n + m + 1))
        Q[:n, n:n + m] = self.A.T
        Q[:n, -1] = self.c
        Q[n:n + m, :n] = -self.A
        Q[n:n + m, -1] = self.b
        Q[-1, :n] = -self.c
        Q[-1, n:n + m] = -self.b
        return Q

    def project_embedding_cone(self, u):
        """Projection onto R^n x K* x R+ (the embedding's feasible cone)."""
        out = u.copy()
        out[self.n:self.n + self.m] = self.project_dual_cone(u[self.n:self.n + self.m])
        out[-1] = max(0.0, u[-1])
        return out

    def split_embedding(self, u):
        return u[:self.n], u[self.n:self.n + self.m], float(u[-1])


class ConeResiduals(typing.NamedTuple):
    """(primal, dual, gap) plus a certificate-mode flag: when the scale
    component of the iterate is numerically zero the quantities are left
    unnormalized and describe an infeasibility/unboundedness certificate,
    not a solution."""

    primal: float
    dual: float
    gap: float
    certificate: bool = False

    def max(self):
        return max(self.primal, self.dual, self.gap)


def cone_residuals(prob, u, scale_floor=1e-12):
    """Solution-quality report at an embedding vector u = (x, y, scale).

    After dividing the blocks by the scale component: the primal residual
    is the K-distance of the slack b - A x (normalized by 1 + ||b||), the
    dual residual is ||A^T y + c|| / (1 + ||c||), and the gap is
    |c.x + b.y| / (1 + |c.x| + |b.y|). A nonpositive scale flips the
    report into certificate mode (unnormalized blocks, flag set).
    """
    x, y, scale = prob.split_embedding(u)
    certificate = scale <= scale_floor
    if not certificate:
        x = x / scale
        y = y / scale
    slack = prob.b - prob.A @ x
    s_feas = prob.project_cone(slack)
    primal = float(np.linalg.norm(prob.A @ x + s_feas - prob.b)
                   / (1.0 + np.linalg.norm(prob.b)))
    dual = float(np.linalg.norm(prob.A.T @ y + prob.c)
                 / (1.0 + np.linalg.norm(prob.c)))
    cx = float(prob.c @ x)
    by = float(prob.b @ y)
    gap = abs(cx + by) / (1.0 + abs(cx) + abs(by))
    return ConeResiduals(primal, dual, gap, certificate=certificate)


def build_cone_program(m, n, density=0.5, cond=100.0, seed=0, cones=None,
                       stop_tol=1e-6):
    """Random feasible cone program with a planted primal-dual solution.

    A is built from orthogonal factors with log-spaced singular values
    spanning ``cond``, then sparsified by an entry mask at the target
    density (the achieved condition number is recorded in the metadata).
    The planted pair comes from splitting a random vector across K and
    its polar, which makes (x*, y*, 1) an exact embedding solution.
    """
    rng = np.random.default_rng(seed)
    if cones is None:
        half = m // 2
        cones = [("nonneg", half), ("soc", m - half)]
    k = min(m, n)
    U, _ = np.linalg.qr(rng.standard_normal((m, k)))
    V, _ = np.linalg.qr(rng.standard_normal((n, k)))
    svals = np.logspace(0.0, np.log10(cond), k)
    A = (U * svals) @ V.T
    A = A * (rng.random((m, n)) < density)
    rank = np.linalg.matrix_rank(A)
    if rank < k:
        raise ValueError(
            f"density {density} too low: sparsified matrix has rank {rank} < {k}")
    achieved_cond = float(np.linalg.cond(A))

    z = rng.standard_normal(m)
    s_star = _project_cone_blocks(cones, z, dual=False)
    y_star = s_star - z                      # in K*, complementary to s*
    x_star = rng.standard_normal(n)
    b = A @ x_star + s_star
    c = -A.T @ y_star

    prob = ConeProgram(A=A, b=b, c=c, cones=cones)
    op = make_drs(prob)

    u_star = np.concatenate([x_star, y_star, [1.0]])
    fixed_point = u_star + prob.embedding_matrix() @ u_star

    def resolvent_at(u_arr, x_arr):
        cached = op.cache.get("u")
        if cached is not None and cached is u_arr or (
                cached is not None and np.array_equal(cached, u_arr)):
            return op.cache["v"]
        return op.cache["solve_resolvent"](x_arr)

    def extra_stop(u_arr, _Ru):
        v = resolvent_at(u_arr, u_arr)
        res = cone_residuals(prob, v)
        return (not res.certificate) and res.max() <= stop_tol

    def report(u_arr):
        v = resolvent_at(u_arr, u_arr)
        res = cone_residuals(prob, v)
        return {"primal": res.primal, "dual": res.dual, "gap": res.gap,
                "certificate": res.certificate}

    x0 = np.zeros(prob.embedding_dim)
    x0[-1] = 1.0
    return ProblemInstance(
        name="cone-program",
        operator=op,
        x0=x0,
        data=prob,
        fixed_points=[fixed_point],
        counters=dict(op.counters),
        extra_stop=extra_stop,
        report=report,
        recommended={"tol_rel": 0.0, "tol_abs": 0.0},
        meta={"m": m, "n": n, "density": density, "cond_target": cond,
              "cond_achieved": achieved_cond, "seed": seed, "cones": cones,
              "planted": {"x": x_star, "y": y_star, "s": s_star},
              "stop_tol": stop_tol},
    )


# ---------------------------------------------------------------------------
# Constrained linear-quadratic control / primal-dual splitting
# ---------------------------------------------------------------------------


@dataclasses.dataclass
class OptimalControl:
    """Finite-horizon control of x_{t+1} = Ad x_t + Bd u_t with box
    constraints on inputs and states and quadratic stage costs.

    The input-to-state-trajectory map and its adjoint are abstract
    simulations (never materialized); each application bumps the shared
    call counter that the benchmark comparisons report.
    """

    Ad: np.ndarray
    Bd: np.ndarray
    horizon: int
    x_init: np.ndarray
    qdiag: np.ndarray
    input_bounds: tuple
    state_bounds: tuple

    def __post_init__(self):
        self.nx = self.Ad.shape[0]
        self.nu = self.Bd.shape[1]
        self.Ad = np.ascontiguousarray(self.Ad, dtype=np.float64)
        self.Bd = np.ascontiguousarray(self.Bd, dtype=np.float64)
        self.x_init = np.ascontiguousarray(self.x_init, dtype=np.float64)
        self.l_counter = Counter()
        self._free = None

    @property
    def primal_dim(self):
        return self.horizon * self.nu

    @property
    def dual_dim(self):
        return self.horizon * self.nx

    def apply_dynamics(self, u):
        """Stacked (x_1..x_N) response to inputs u from a zero state."""
        self.l_counter.bump()
        return kernels.lti_forward(self.Ad, self.Bd,
                                   np.ascontiguousarray(u), np.zeros(self.nx))

    def apply_adjoint(self, v):
        self.l_counter.bump()
        return kernels.lti_adjoint(self.Ad, self.Bd, np.ascontiguousarray(v))

    def free_response(self):
        """Input-free trajectory from the initial state (cached; computed
        once at construction time, outside the call counter)."""
        if self._free is None:
            out = np.empty(self.horizon * self.nx)
            x = self.x_init
            for t in range(self.horizon):
                x = self.Ad @ x
                out[t * self.nx:(t + 1) * self.nx] = x
            self._free = out
        return self._free

    def stacked_state_weights(self):
        return np.tile(self.qdiag, self.horizon)

    def forward_sim(self, u):
        """Full state trajectory L u + free response (not counted)."""
        return kernels.lti_forward(self.Ad, self.Bd,
                                   np.ascontiguousarray(u), self.x_init)

    def cost(self, u):
        x = self.forward_sim(u)
        return 0.5 * float(u @ u) + 0.5 * float(x @ (self.stacked_state_weights() * x))


def discretize_zoh(Ac, Bc, ts):
    """Zero-order-hold discretization via the augmented matrix exponential."""
    nx, nu = Bc.shape
    M = np.zeros((nx + nu, nx + nu))
    M[:nx, :nx] = Ac
    M[:nx, nx:] = Bc
    E = sla.expm(M * ts)
    return E[:nx, :nx], E[:nx, nx:]


def spring_mass_chain(num_actuators):
    """Continuous-time chain of 2K unit masses between two walls.

    Unit springs couple neighbors and the walls, each body sees viscous
    friction 0.1, and actuator j pushes mass 2j with +u_j and mass 2j+1
    with -u_j (0-based); states are all displacements then all velocities.
    """
    K = num_actuators
    nm = 2 * K
    spring = 2.0 * np.eye(nm) - np.eye(nm, k=1) - np.eye(nm, k=-1)
    F = np.zeros((nm, K))
    for j in range(K):
        F[2 * j, j] = 1.0
        F[2 * j + 1, j] = -1.0
    Ac = np.zeros((2 * nm, 2 * nm))
    Ac[:nm, nm:] = np.eye(nm)
    Ac[nm:, :nm] = -spring
    Ac[nm:, nm:] = -0.1 * np.eye(nm)
    Bc = np.zeros((2 * nm, K))
    Bc[nm:, :] = F
    return Ac, Bc


def build_oscillating_masses(K, N, seed, ts=0.1, tau=None, sigma_dual=None):
    """Spring-mass control benchmark: 2K masses, K actuators, horizon N.

    State dimension 4K (displacements and velocities), inputs bounded in
    [-2, 2], states in [-5, 5]. Stage costs are 0.5 u'u and 0.5 x'Qx with
    Q diagonal, entries drawn log-uniformly from [1e-2, 1e2]; the initial
    state is uniform in [-0.5, 0.5] (comfortably feasible).
    """
    if K <= 0 or N <= 0:
        raise ValueError("K and N must be positive")
    rng = np.random.default_rng(seed)
    Ac, Bc = spring_mass_chain(K)
    Ad, Bd = discretize_zoh(Ac, Bc, ts)
    nx = 4 * K
    qdiag = 10.0 ** rng.uniform(-2.0, 2.0, nx)
    x_init = rng.uniform(-0.5, 0.5, nx)
    oc = OptimalControl(Ad=Ad, Bd=Bd, horizon=N, x_init=x_init, qdiag=qdiag,
                        input_bounds=(-2.0, 2.0), state_bounds=(-5.0, 5.0))
    op = make_vu_condat(oc, tau=tau, sigma_dual=sigma_dual)

    def report(z):
        u = z[:oc.primal_dim]
        x = oc.forward_sim(u)
        return {"cost": oc.cost(u),
                "max_state": float(np.max(np.abs(x))),
                "max_input": float(np.max(np.abs(u)))}

    return ProblemInstance(
        name="masses",
        operator=op,
        x0=np.zeros(oc.primal_dim + oc.dual_dim),
        data=oc,
        counters=dict(op.counters),
        report=report,
        meta={"K": K, "N": N, "seed": seed, "ts": ts,
              "tau": op.cache["tau"], "sigma_dual": op.cache["sigma_dual"],
              "alpha": op.alpha},
    )


# ---------------------------------------------------------------------------
# Instance export / import
# ---------------------------------------------------------------------------

_COO_THRESHOLD = 1_000_000


def _array_payload(arr):
    arr = np.asarray(arr, dtype=np.float64)
    if arr.size > _COO_THRESHOLD and arr.ndim == 2:
        rows, cols = np.nonzero(arr)
        return {"shape": list(arr.shape), "storage": "coo",
                "rows": rows.tolist(), "cols": cols.tolist(),
                "vals": arr[rows, cols].tolist()}
    return {"shape": list(arr.shape), "storage": "dense",
            "data": arr.ravel(order="C").tolist()}


def _array_restore(payload):
    shape = tuple(payload["shape"])
    if payload["storage"] == "coo":
        arr = np.zeros(shape)
        arr[np.array(payload["rows"], dtype=int),
            np.array(payload["cols"], dtype=int)] = payload["vals"]
        return arr
    return np.array(payload["data"], dtype=np.float64).reshape(shape)


def _exportable_arrays(instance):
    data = instance.data
    if instance.name == "lasso":
        return {"A": data.A, "b": data.b}
    if instance.name == "cone-program":
        return {"A": data.A, "b": data.b, "c": data.c}
    if instance.name == "masses":
        return {"Ad": data.Ad, "Bd": data.Bd, "qdiag": data.qdiag,
                "x_init": data.x_init}
    return {}


def export_instance(instance, params, path):
    """Write a self-describing JSON freeze of the instance data."""
    payload = {
        "format": "supermann-instance-v1",
        "problem": instance.name,
        "params": params,
        "generator": "numpy.default_rng (PCG64)",
        "dims": {k: v for k, v in instance.meta.items()
                 if isinstance(v, (int, float)) and k not in ("seed",)},
        "arrays": {name: _array_payload(arr)
                   for name, arr in _exportable_arrays(instance).items()},
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")
    return path


def load_instance(path, builders=None):
    """Rebuild an exported instance from its parameters and verify that
    the regenerated arrays match the frozen ones exactly."""
    from . import cli  # registry lives with the command layer

    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != "supermann-instance-v1":
        raise ValueError("not a supermann instance file")
    builders = builders or cli.PROBLEM_BUILDERS
    name = payload["problem"]
    if name not in builders:
        raise ValueError(f"unknown problem {name!r}")
    instance = builders[name](**payload["params"])
    for arr_name, frozen in payload.get("arrays", {}).items():
        regenerated = _exportable_arrays(instance)[arr_name]
        if not np.array_equal(_array_restore(frozen), regenerated):
            raise ValueError(
                f"frozen array {arr_name!r} does not match regeneration")
    return instance


def write_trajectory_csv(oc, u, path):
    """State/input trajectory of a control solution as CSV rows t, x, u."""
    x_traj = oc.forward_sim(u)
    cols = (["t"] + [f"x{i+1}" for i in range(oc.nx)]
            + [f"u{i+1}" for i in range(oc.nu)])
    lines = [",".join(cols)]
    row0 = ["0"] + [repr(float(v)) for v in oc.x_init]
    row0 += [repr(float(v)) for v in u[:oc.nu]]
    lines.append(",".join(row0))
    for t in range(1, oc.horizon + 1):
        row = [str(t)]
        row += [repr(float(v)) for v in x_traj[(t - 1) * oc.nx:t * oc.nx]]
        if t < oc.horizon:
            row += [repr(float(v)) for v in u[t * oc.nu:(t + 1) * oc.nu]]
        else:
            row += [""] * oc.nu
        lines.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
