"""Finite-dimensional real inner-product spaces.

Vectors are plain 1-D float64 numpy arrays, treated as immutable values:
no function in this package mutates an input vector. A :class:`Metric`
is either the Euclidean dot product or the quadratic form induced by a
symmetric positive-definite operator P, applied on demand (P is never
materialized as a dense matrix when it is given implicitly).
"""

import numpy as np

# Opt-in finiteness assertions. Off by default: the checks cost a pass over
# every vector touched, which matters in benchmark loops.
_DEBUG_CHECKS = False


def set_debug_checks(enabled):
    """Toggle NaN/Inf assertions on vectors entering inner/norm."""
    global _DEBUG_CHECKS
    _DEBUG_CHECKS = bool(enabled)


def debug_checks_enabled():
    return _DEBUG_CHECKS


def as_vector(x):
    """Coerce input to a 1-D float64 array."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    return v


def _check_finite(v):
    if _DEBUG_CHECKS and not np.all(np.isfinite(v)):
        raise FloatingPointError("non-finite entries in vector")


class Metric:
    """Inner-product geometry on R^n.

    Euclidean when ``operator_apply`` is None, otherwise induced by the
    SPD map ``operator_apply``: <u, v> = u . P v. The operator is only
    ever applied to vectors; symmetry and positive definiteness are the
    caller's responsibility (see :meth:`check_spd` for a randomized audit).
    """

    __slots__ = ("dim", "operator_apply")

    def __init__(self, dim, operator_apply=None):
        if dim <= 0:
            raise ValueError("metric dimension must be positive")
        self.dim = int(dim)
        self.operator_apply = operator_apply

    @property
    def is_euclidean(self):
        return self.operator_apply is None

    def _check_dim(self, u):
        if u.shape[0] != self.dim:
            raise ValueError(f"vector of dim {u.shape[0]} in metric of dim {self.dim}")

    def apply(self, u):
        """P u (u itself in the Euclidean case, without copying)."""
        self._check_dim(u)
        _check_finite(u)
        if self.operator_apply is None:
            return u
        return self.operator_apply(u)

    def inner(self, u, v):
        if u.shape != v.shape:
            raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
        self._check_dim(u)
        _check_finite(u)
        _check_finite(v)
        if self.operator_apply is None:
            return float(u @ v)
        return float(u @ self.operator_apply(v))

    def norm(self, u):
        return float(np.sqrt(self.norm_sq(u)))

    def norm_sq(self, u):
        # The quadratic form can go epsilon-negative through rounding for
        # implicitly defined P; clamp before use, but let NaN through so
        # non-finite iterates stay detectable downstream.
        q = self.inner(u, u)
        if q >= 0.0:
            return q
        return q if np.isnan(q) else 0.0

    def check_spd(self, rng, trials=50, tol=1e-10):
        """Randomized symmetry / positive-definiteness audit of P."""
        if self.is_euclidean:
            return True
        for _ in range(trials):
            u = rng.standard_normal(self.dim)
            v = rng.standard_normal(self.dim)
            uPv = u @ self.operator_apply(v)
            vPu = v @ self.operator_apply(u)
            scale = max(1.0, abs(uPv), abs(vPu))
            if abs(uPv - vPu) > tol * scale:
                return False
            if u @ self.operator_apply(u) <= 0.0:
                return False
        return True


def euclidean(dim):
    return Metric(dim)


def inner(u, v, metric=None):
    """<u, v> in the given metric (Euclidean when metric is None)."""
    u = as_vector(u)
    v = as_vector(v)
    if metric is None:
        metric = Metric(u.shape[0])
    return metric.inner(u, v)


def norm(u, metric=None):
    """Norm induced by the metric's inner product."""
    u = as_vector(u)
    if metric is None:
        metric = Metric(u.shape[0])
    return metric.norm(u)
