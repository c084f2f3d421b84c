"""Separating-halfspace machinery for generalized KM updates.

A trial point w = x + tau d together with its residual Rw defines the
halfspace C_w = {z : ||Rw||^2 - 2 alpha <Rw, w - z> <= 0}, which contains
every fixed point of the alpha-averaged operator. The separation scalar

    rho = ||Rw||^2 - 2 alpha <Rw, w - x>

is positive exactly when x lies outside C_w, in which case the relaxed
projection of x onto C_w makes Fejer progress toward the fixed set. All
inner products and norms live in the operator's solve metric.
"""

import numpy as np


def candidate_stats(x, w, Rw, alpha, metric):
    """(rho, ||Rw||^2) computed off a single metric-operator application."""
    p_rw = metric.apply(Rw)
    nrw2 = float(Rw @ p_rw)
    if nrw2 < 0.0:  # rounding in an implicit quadratic form; NaN passes through
        nrw2 = 0.0
    rho = nrw2 - 2.0 * alpha * float(p_rw @ (w - x))
    return rho, nrw2


def separation_rho(x, w, Rw, alpha, metric):
    """Separation scalar of the trial halfspace; > 0 iff x is cut off."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    if x.shape != w.shape or x.shape != Rw.shape:
        raise ValueError("dimension mismatch among x, w, Rw")
    rho, _ = candidate_stats(x, w, Rw, alpha, metric)
    return rho


def accepts(rho, norm_Rw, norm_Rx, sigma):
    """Line-search acceptance test rho >= sigma ||Rw|| ||Rx||.

    Deliberately exact (no epsilon slack): sufficiently small stepsizes
    are guaranteed to satisfy it, and slack would erode the Fejer bound
    the safeguard step relies on.
    """
    if not 0.0 <= sigma < 1.0:
        raise ValueError(f"sigma must be in [0, 1), got {sigma}")
    return rho >= sigma * norm_Rw * norm_Rx


def gkm_update(x, w, Rw, rho, lam, metric, norm_Rw_sq=None):
    """Relaxed projection of x onto the trial halfspace.

    Returns x - lam [rho]_+ / ||Rw||^2 * Rw, and x itself when w is a
    fixed point (zero residual). With w = x and lam in [0, 1/alpha] this
    is exactly the classical relaxed KM step.
    """
    if norm_Rw_sq is None:
        norm_Rw_sq = metric.norm_sq(Rw)
    if norm_Rw_sq == 0.0:
        return x.copy()
    coeff = lam * max(0.0, rho) / norm_Rw_sq
    if coeff == 0.0:
        return x.copy()
    return x - coeff * Rw


def line_search_cap(norm_Rx, norm_d, alpha, sigma):
    """Stepsize below which the acceptance test is guaranteed to pass."""
    if norm_d == 0.0:
        return 1.0
    return (1.0 - sigma) * norm_Rx / (4.0 * alpha * norm_d)
