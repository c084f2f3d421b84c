"""Fixed-point solvers: the classical relaxed iteration and its
quasi-Newton-accelerated globalization.

Both solvers share the stopping rule ||Rx_k|| <= tol_abs + tol_rel ||Rx_0||
(solve-metric norm), budget limits, an optional problem-specific stopping
callback, and the same trace/summary formats:

* trace CSV columns: k, kind, tau, backtracks, rho, norm_Rx, norm_d, eta,
  r_safe, T_evals with kind one of K0|K1|K2|NOM|END;
* summary JSON keys: status, iterations, T_evals, final_residual,
  k0_steps, k1_steps, k2_steps, fallback_steps, wall_time_s (plus a
  "reason" key naming the budget that ran out on NotConverged).

The accelerated solver classifies each iteration:

* K0 ("blind"): the residual fell enough relative to the last blind step;
  take x + d unconditionally.
* K1 ("educated"): the trial point's residual is sufficiently smaller
  than the current one while the safe bound holds; take the trial point.
* K2 ("safeguard"): project onto the separating halfspace the trial
  point generates, preserving Fejer monotonicity for any direction.
* NOM: backtracking exhausted the attempt budget; fall back to the
  nominal relaxed step, which is always Fejer.
"""

import dataclasses
import json
import time
import warnings

import numpy as np

from . import gkm
from .directions import (RestartedBroydenDirections, ZeroDirections,
                         truncate_with_norm)

TRACE_COLUMNS = ("k", "kind", "tau", "backtracks", "rho", "norm_Rx",
                 "norm_d", "eta", "r_safe", "T_evals")


class _NonFiniteIterate(Exception):
    pass


@dataclasses.dataclass
class SolverConfig:
    """Tuning scalars; defaults follow the control-benchmark recipe."""

    c0: float = 0.99
    c1: float = 0.99
    q: float = 0.99
    beta: float = 0.5
    sigma: float = 0.1
    lam: float = 1.0
    D: float = 1e4
    memory: int = 20
    theta_bar: float = 0.2
    max_backtracks: int = 8
    tol_abs: float = 0.0
    tol_rel: float = 1e-4
    max_iters: int = 1_000_000
    max_T_evals: int = 2_000_000
    scale_qk_by_r0: bool = True

    def __post_init__(self):
        if not 0.0 <= self.c0 < 1.0:
            raise ValueError("c0 must be in [0, 1)")
        if not 0.0 <= self.c1 < 1.0:
            raise ValueError("c1 must be in [0, 1)")
        if not 0.0 <= self.q < 1.0:
            raise ValueError("q must be in [0, 1)")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must be in (0, 1)")
        if not 0.0 <= self.sigma < 1.0:
            raise ValueError("sigma must be in [0, 1)")
        if self.lam <= 0.0:
            raise ValueError("lam must be positive")
        if self.D <= 0.0:
            raise ValueError("D must be positive")
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        if not 0.0 < self.theta_bar < 1.0:
            raise ValueError("theta_bar must be in (0, 1)")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be >= 1")
        if self.tol_abs < 0.0 or self.tol_rel < 0.0:
            raise ValueError("tolerances must be nonnegative")
        if self.max_iters < 1 or self.max_T_evals < 1:
            raise ValueError("budgets must be positive")

    @classmethod
    def mpc(cls, **overrides):
        """Recipe used for the control benchmarks."""
        base = dict(c0=0.99, c1=0.99, q=0.99, sigma=0.1, lam=1.0, beta=0.5,
                    max_backtracks=8)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def scs(cls, **overrides):
        """Recipe used for the conic benchmarks: no blind steps, lenient
        educated test."""
        sigma = overrides.pop("sigma", 1e-3)
        base = dict(c0=0.0, c1=1.0 - sigma, q=1.0 - sigma, sigma=sigma,
                    lam=1.0, beta=0.5, max_backtracks=8)
        base.update(overrides)
        return cls(**base)

    def replace(self, **overrides):
        return dataclasses.replace(self, **overrides)

    def effective_lambda(self, alpha):
        """Relaxation actually used for an alpha-averaged operator.

        The accelerated scheme needs lam in (0, 1/alpha); the default
        lam = 1 is fine whenever alpha < 1, and is clamped to 0.5 with a
        warning for merely-nonexpansive operators (alpha = 1). Any other
        infeasible value is an error.
        """
        if self.lam < 1.0 / alpha:
            return self.lam
        if alpha == 1.0 and self.lam == 1.0:
            warnings.warn("operator is only nonexpansive (alpha = 1); "
                          "clamping relaxation to 0.5", stacklevel=3)
            return 0.5
        raise ValueError(
            f"relaxation {self.lam} not in (0, {1.0 / alpha:.6g}) for "
            f"alpha={alpha}")


@dataclasses.dataclass
class StepRecord:
    k: int
    kind: str                 # K0 | K1 | K2 | NOM | END
    tau: float
    backtracks: int
    rho: float | None
    norm_Rx: float
    norm_d: float
    eta: float
    r_safe: float
    T_evals: int


@dataclasses.dataclass
class IterateState:
    x: np.ndarray
    Rx: np.ndarray
    norm_Rx: float
    eta: float
    r_safe: float
    k: int
    qk_scale: float           # multiplier on q^k in the safe-bound update
    pending_s: np.ndarray | None = None
    pending_y: np.ndarray | None = None
    lam: float = 1.0


@dataclasses.dataclass
class SolveResult:
    x: np.ndarray
    status: str               # Converged | NotConverged
    reason: str | None
    trace: list
    summary: dict
    iterates: list | None = None

    @property
    def converged(self):
        return self.status == "Converged"


def _finite_or_raise(value):
    if not np.isfinite(value):
        raise _NonFiniteIterate
    return value


def _summary(status, reason, records, final_residual, t_evals, wall):
    kinds = [r.kind for r in records]
    return {
        "status": status,
        "reason": reason,
        "iterations": sum(1 for kk in kinds if kk != "END"),
        "T_evals": t_evals,
        "final_residual": final_residual,
        "k0_steps": kinds.count("K0"),
        "k1_steps": kinds.count("K1"),
        "k2_steps": kinds.count("K2"),
        "fallback_steps": kinds.count("NOM"),
        "wall_time_s": wall,
    }


class _Budget:
    """Shared stopping logic: tolerance, iteration/eval budgets, wall clock."""

    def __init__(self, op, cfg, r0, time_limit_s):
        self.op = op
        self.cfg = cfg
        self.threshold = cfg.tol_abs + cfg.tol_rel * r0
        self.time_limit_s = time_limit_s
        self.start = time.perf_counter()
        self.evals0 = op.evals

    @property
    def t_evals(self):
        return self.op.evals - self.evals0

    def wall(self):
        return time.perf_counter() - self.start

    def exhausted(self, k):
        if k >= self.cfg.max_iters:
            return "MaxIters"
        if self.t_evals >= self.cfg.max_T_evals:
            return "MaxTEvals"
        if self.time_limit_s is not None and self.wall() > self.time_limit_s:
            return "Timeout"
        return None


def km_solve(op, x0, cfg=None, lambdas=None, extra_stop=None,
             time_limit_s=None, keep_iterates=False):
    """Classical relaxed fixed-point iteration x+ = x - lam_k R x.

    ``lambdas`` is a constant or a callable k -> lam_k, each within
    [0, 1/alpha]; defaults to the config's lam (clamped to the feasible
    range boundary for alpha = 1 semantics is not needed here since the
    closed interval is allowed).
    """
    cfg = cfg or SolverConfig()
    lam_max = 1.0 / op.alpha
    if lambdas is None:
        lam_of = lambda k: cfg.lam
    elif callable(lambdas):
        lam_of = lambdas
    else:
        lam_const = float(lambdas)
        lam_of = lambda k: lam_const

    x = np.array(x0, dtype=np.float64)
    metric = op.metric
    records = []
    iterates = [x.copy()] if keep_iterates else None

    Rx = op.residual(x)
    norm_Rx = metric.norm(Rx)
    budget = _Budget(op, cfg, norm_Rx, time_limit_s)
    # Initial T application was spent computing Rx0.
    budget.evals0 -= 1
    status, reason = "NotConverged", None

    k = 0
    try:
        while True:
            _finite_or_raise(norm_Rx)
            if norm_Rx <= budget.threshold or (extra_stop is not None
                                               and extra_stop(x, Rx)):
                status, reason = "Converged", None
                break
            reason = budget.exhausted(k)
            if reason is not None:
                break
            lam = lam_of(k)
            if not 0.0 <= lam <= lam_max + 1e-15:
                raise ValueError(
                    f"lambda schedule value {lam} outside [0, {lam_max:.6g}]")
            norm_prev = norm_Rx
            x = x - lam * Rx
            Rx = op.residual(x)
            norm_Rx = metric.norm(Rx)
            records.append(StepRecord(
                k=k, kind="NOM", tau=lam, backtracks=0, rho=None,
                norm_Rx=norm_prev, norm_d=0.0, eta=norm_prev,
                r_safe=norm_prev, T_evals=budget.t_evals))
            if keep_iterates:
                iterates.append(x.copy())
            k += 1
    except _NonFiniteIterate:
        status, reason = "NotConverged", "NonFinite"

    records.append(StepRecord(
        k=k, kind="END", tau=0.0, backtracks=0, rho=None, norm_Rx=norm_Rx,
        norm_d=0.0, eta=norm_Rx, r_safe=norm_Rx, T_evals=budget.t_evals))
    summary = _summary(status, reason, records, norm_Rx, budget.t_evals,
                       budget.wall())
    return SolveResult(x=x, status=status, reason=reason, trace=records,
                       summary=summary, iterates=iterates)


def supermann_step(state, op, dirs, cfg):
    """One accelerated iteration; returns (next state, step record).

    The state carries the pending secant pair from the previous trial
    point; this step first hands it to the direction provider along with
    the current residual, then walks the blind / educated / safeguard
    cascade. Residuals already evaluated at an accepted trial point are
    carried into the next state instead of being recomputed.
    """
    metric = op.metric
    x, Rx, norm_Rx = state.x, state.Rx, state.norm_Rx
    _finite_or_raise(norm_Rx)
    if norm_Rx == 0.0:
        record = StepRecord(k=state.k, kind="END", tau=0.0, backtracks=0,
                            rho=None, norm_Rx=0.0, norm_d=0.0, eta=state.eta,
                            r_safe=state.r_safe, T_evals=op.evals)
        return state, record

    d = dirs.propose(state.pending_s, state.pending_y, Rx,
                     scale=float(np.linalg.norm(x)))
    d, norm_d = truncate_with_norm(d, norm_Rx, cfg.D, metric)
    lam = state.lam

    if cfg.c0 > 0.0 and norm_Rx <= cfg.c0 * state.eta:
        # Blind: accept x + d outright, evaluating its residual now (the
        # iteration's single application of T; it doubles as the next
        # iterate's residual and as the provider's secant data).
        w = x + d
        Rw = op.residual(w)
        norm_Rw = _finite_or_raise(metric.norm(Rw))
        new_state = dataclasses.replace(
            state, x=w, Rx=Rw, norm_Rx=norm_Rw, eta=norm_Rx, k=state.k + 1,
            pending_s=w - x, pending_y=Rw - Rx)
        record = StepRecord(k=state.k, kind="K0", tau=1.0, backtracks=0,
                            rho=None, norm_Rx=norm_Rx, norm_d=norm_d,
                            eta=norm_Rx, r_safe=state.r_safe,
                            T_evals=op.evals)
        return new_state, record

    tau = 1.0
    accepted = None
    backtracks = 0
    w = x
    Rw = Rx
    while backtracks <= cfg.max_backtracks:
        w = x + tau * d
        Rw = op.residual(w)
        rho, nrw2 = gkm.candidate_stats(x, w, Rw, op.alpha, metric)
        norm_Rw = _finite_or_raise(np.sqrt(nrw2))
        if norm_Rw < 1e-14 * max(1.0, norm_Rx):
            # Numerically a fixed point: adopt it; the solve loop stops on
            # the shrunk residual next round.
            accepted = ("K1", w, Rw, norm_Rw, None)
            break
        if norm_Rx <= state.r_safe and norm_Rw <= cfg.c1 * norm_Rx:
            accepted = ("K1", w, Rw, norm_Rw, None)
            break
        if gkm.accepts(rho, norm_Rw, norm_Rx, cfg.sigma):
            x_next = x - (lam * rho / nrw2) * Rw
            accepted = ("K2", x_next, None, None, rho)
            break
        tau *= cfg.beta
        backtracks += 1

    pending_s = w - x
    pending_y = Rw - Rx
    r_safe = state.r_safe
    if accepted is None:
        # Line search hit the attempt budget (floating point can starve
        # the theoretical guarantee); take the always-Fejer nominal step.
        x_next = x - lam * Rx
        Rx_next = op.residual(x_next)
        norm_next = _finite_or_raise(metric.norm(Rx_next))
        kind, tau_rec, rho_rec = "NOM", tau, None
    else:
        kind, x_next, Rw_carry, norm_carry, rho_rec = accepted
        tau_rec = tau
        if kind == "K1":
            r_safe = norm_carry + (cfg.q ** state.k) * state.qk_scale
            Rx_next, norm_next = Rw_carry, norm_carry
        else:
            Rx_next = op.residual(x_next)
            norm_next = _finite_or_raise(metric.norm(Rx_next))

    new_state = dataclasses.replace(
        state, x=x_next, Rx=Rx_next, norm_Rx=norm_next, r_safe=r_safe,
        k=state.k + 1, pending_s=pending_s, pending_y=pending_y)
    record = StepRecord(k=state.k, kind=kind, tau=tau_rec,
                        backtracks=backtracks, rho=rho_rec, norm_Rx=norm_Rx,
                        norm_d=norm_d, eta=state.eta, r_safe=r_safe,
                        T_evals=op.evals)
    return new_state, record


def supermann_solve(op, x0, dirs=None, cfg=None, extra_stop=None,
                    time_limit_s=None, keep_iterates=False):
    """Accelerated fixed-point solve; see the module docstring for the
    step taxonomy and output formats."""
    cfg = cfg or SolverConfig()
    x = np.array(x0, dtype=np.float64)
    if dirs is None:
        dirs = RestartedBroydenDirections(x.shape[0], memory=cfg.memory,
                                          theta_bar=cfg.theta_bar)
    metric = op.metric
    lam = cfg.effective_lambda(op.alpha)

    Rx = op.residual(x)
    norm_Rx = metric.norm(Rx)
    budget = _Budget(op, cfg, norm_Rx, time_limit_s)
    budget.evals0 -= 1
    qk_scale = norm_Rx if cfg.scale_qk_by_r0 else 1.0

    state = IterateState(x=x, Rx=Rx, norm_Rx=norm_Rx, eta=norm_Rx,
                         r_safe=norm_Rx, k=0, qk_scale=qk_scale, lam=lam)
    records = []
    iterates = [state.x.copy()] if keep_iterates else None
    status, reason = "NotConverged", None

    try:
        while True:
            if state.norm_Rx <= budget.threshold or (
                    extra_stop is not None and extra_stop(state.x, state.Rx)):
                status, reason = "Converged", None
                break
            reason = budget.exhausted(state.k)
            if reason is not None:
                break
            state, record = supermann_step(state, op, dirs, cfg)
            records.append(record)
            if record.kind == "END":
                status, reason = "Converged", None
                break
            if keep_iterates:
                iterates.append(state.x.copy())
    except _NonFiniteIterate:
        status, reason = "NotConverged", "NonFinite"

    if not records or records[-1].kind != "END":
        records.append(StepRecord(
            k=state.k, kind="END", tau=0.0, backtracks=0, rho=None,
            norm_Rx=state.norm_Rx, norm_d=0.0, eta=state.eta,
            r_safe=state.r_safe, T_evals=budget.t_evals))
    summary = _summary(status, reason, records, state.norm_Rx,
                       budget.t_evals, budget.wall())
    return SolveResult(x=state.x, status=status, reason=reason, trace=records,
                       summary=summary, iterates=iterates)


# ---------------------------------------------------------------------------
# Trace / summary serialization
# ---------------------------------------------------------------------------


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def trace_to_csv(records):
    lines = [",".join(TRACE_COLUMNS)]
    for r in records:
        lines.append(",".join(_fmt(v) for v in (
            r.k, r.kind, r.tau, r.backtracks, r.rho, r.norm_Rx, r.norm_d,
            r.eta, r.r_safe, r.T_evals)))
    return "\n".join(lines) + "\n"


def write_trace(path, records):
    with open(path, "w") as fh:
        fh.write(trace_to_csv(records))


def write_summary(path, summary):
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
