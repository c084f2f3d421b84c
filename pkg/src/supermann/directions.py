"""Direction providers: zero (recovers KM), full-memory Broyden with
Powell's regularization, and the restarted buffered variant.

A provider exposes ``propose(s, y, Rx)``: absorb the newest displacement
pair (s = w - x, y = Rw - Rx; None on the first call) and return the
candidate direction at the current residual Rx. Inner products in the
updates are Euclidean regardless of the solve metric; metric correctness
is the projection layer's job.
"""

import numpy as np

from . import kernels

DEGENERATE_STEP = 1e-14


def powell_theta(gamma, theta_bar):
    """Powell's mixing factor keeping the secant update nonsingular.

    Returns 1 when |gamma| >= theta_bar, else (1 - sign(gamma) theta_bar)
    / (1 - gamma), with sign(0) = 1. Guarantees |1 - theta + theta gamma|
    >= theta_bar.
    """
    if not 0.0 < theta_bar < 1.0:
        raise ValueError(f"theta_bar must be in (0, 1), got {theta_bar}")
    if abs(gamma) >= theta_bar:
        return 1.0
    sign = 1.0 if gamma >= 0.0 else -1.0
    return (1.0 - sign * theta_bar) / (1.0 - gamma)


def truncate_with_norm(d, norm_Rx, cap, metric):
    """Rescale d so ||d|| <= cap * ||Rx|| in the metric; returns (d, ||d||)."""
    if cap <= 0.0:
        raise ValueError("truncation constant must be positive")
    nd = metric.norm(d)
    bound = cap * norm_Rx
    if nd <= bound:
        return d, nd
    if nd == 0.0:
        return d, 0.0
    return (bound / nd) * d, bound


def truncate(d, norm_Rx, cap, metric):
    """Direction safeguard: leave d alone unless it exceeds cap * ||Rx||."""
    return truncate_with_norm(d, norm_Rx, cap, metric)[0]


def zero_direction(Rx):
    """Null direction; the solver degenerates to the classical KM scheme."""
    return np.zeros_like(Rx)


class ZeroDirections:
    """Provider wrapper around :func:`zero_direction`."""

    def propose(self, s, y, Rx):
        return zero_direction(Rx)

    def reset(self):
        pass


class BroydenDirections:
    """Full-memory Broyden scheme operating directly on the inverse model H.

    One rank-one update per observed pair, with Powell's regularization
    of the secant target keeping H finite and the update denominator
    bounded away from zero. H0 = identity, so the first direction is the
    nominal -Rx.
    """

    def __init__(self, dim, theta_bar=0.2):
        self.dim = int(dim)
        self.theta_bar = float(theta_bar)
        self.H = np.eye(self.dim)
        self.skipped = 0

    def reset(self):
        self.H = np.eye(self.dim)
        self.skipped = 0

    def update(self, s, y, scale=1.0):
        """Absorb one secant pair; skips degenerate steps."""
        norm_s2 = float(s @ s)
        if np.sqrt(norm_s2) <= DEGENERATE_STEP * max(1.0, scale):
            self.skipped += 1
            return False
        Hy = self.H @ y
        gamma = float(Hy @ s) / norm_s2
        theta = powell_theta(gamma, self.theta_bar)
        # H applied to the regularized target (1-theta) B s + theta y
        # collapses to (1-theta) s + theta H y: no B needed.
        H_ytilde = (1.0 - theta) * s + theta * Hy
        denom = float(H_ytilde @ s)  # = (1 - theta + theta gamma) ||s||^2
        self.H += np.outer(s - H_ytilde, s @ self.H) / denom
        return True

    def direction(self, Rx):
        return -(self.H @ Rx)

    def propose(self, s, y, Rx, scale=1.0):
        if s is not None:
            self.update(s, y, scale=scale)
        return self.direction(Rx)


class RestartedBroydenDirections:
    """Buffered Broyden scheme with hard restarts.

    Stores up to ``memory`` pairs (s_i, stilde_i) realizing the inverse
    model as a product of rank-one factors H = (I + stilde_k s_k^T) ...
    (I + stilde_1 s_1^T). Each call threads the new pair through the
    buffers, emits the direction -H Rx, and either appends the pair or,
    when the buffers are full, wipes them and starts over.
    """

    def __init__(self, dim, memory=20, theta_bar=0.2):
        if memory < 1:
            raise ValueError("memory must be a positive integer")
        self.dim = int(dim)
        self.memory = int(memory)
        self.theta_bar = float(theta_bar)
        self._S = np.empty((self.memory, self.dim))
        self._St = np.empty((self.memory, self.dim))
        self.count = 0
        self.skipped = 0
        self.restarts = 0

    def reset(self):
        self.count = 0
        self.skipped = 0
        self.restarts = 0

    def direction(self, Rx):
        """-H Rx from the current buffers (no update)."""
        return -kernels.chain_apply(self._S, self._St, self.count, Rx)

    def propose(self, s, y, Rx, scale=1.0):
        if s is None:
            return self.direction(Rx)
        norm_s2 = float(s @ s)
        if np.sqrt(norm_s2) <= DEGENERATE_STEP * max(1.0, scale):
            self.skipped += 1
            return self.direction(Rx)
        neg_d, stilde = kernels.chain_apply2(self._S, self._St, self.count, Rx, y)
        d = -neg_d
        gamma = float(stilde @ s) / norm_s2
        theta = powell_theta(gamma, self.theta_bar)
        stilde = (theta / ((1.0 - theta + theta * gamma) * norm_s2)) * (s - stilde)
        d = d + float(s @ d) * stilde
        if self.count == self.memory:
            self.count = 0
            self.restarts += 1
        else:
            self._S[self.count] = s
            self._St[self.count] = stilde
            self.count += 1
        return d


def make_provider(kind, dim, memory=20, theta_bar=0.2):
    """Provider factory keyed by the CLI's direction names."""
    if kind == "zero":
        return ZeroDirections()
    if kind == "broyden":
        return BroydenDirections(dim, theta_bar=theta_bar)
    if kind == "rbroyden":
        return RestartedBroydenDirections(dim, memory=memory, theta_bar=theta_bar)
    raise ValueError(f"unknown direction kind {kind!r}")
