"""Pure-numpy fallback for the compiled kernels.

Same signatures and semantics as the Cython module; used when the
extension is not built or when SUPERMANN_PURE_PYTHON is set.
"""

import numpy as np


def chain_apply(S, St, count, v):
    """Sequentially apply the rank-one chain to a copy of v.

    out = (I + St[count-1] S[count-1]^T) ... (I + St[0] S[0]^T) v
    i.e. out accumulates out += <S[i], out> * St[i] for i = 0..count-1.
    """
    out = v.copy()
    for i in range(count):
        out += (S[i] @ out) * St[i]
    return out


def chain_apply2(S, St, count, v1, v2):
    """chain_apply on two vectors in one pass over the buffers."""
    o1 = v1.copy()
    o2 = v2.copy()
    for i in range(count):
        si = S[i]
        sti = St[i]
        o1 += (si @ o1) * sti
        o2 += (si @ o2) * sti
    return o1, o2


def lti_forward(Ad, Bd, u, x0):
    """Stacked trajectory (x_1, ..., x_N) of x_{t+1} = Ad x_t + Bd u_t.

    u is the stacked input trajectory (N * nu,), x0 the initial state.
    """
    nx = Ad.shape[0]
    nu = Bd.shape[1]
    N = u.shape[0] // nu
    out = np.empty(N * nx)
    x = x0
    for t in range(N):
        x = Ad @ x + Bd @ u[t * nu:(t + 1) * nu]
        out[t * nx:(t + 1) * nx] = x
    return out


def lti_adjoint(Ad, Bd, v):
    """Adjoint of the zero-initial-state input-to-trajectory map.

    v is a stacked state trajectory (N * nx,); returns the stacked
    (N * nu,) vector with block t equal to Bd^T sum_{s>=t} (Ad^T)^(s-t) v_s.
    """
    nx = Ad.shape[0]
    nu = Bd.shape[1]
    N = v.shape[0] // nx
    out = np.empty(N * nu)
    p = np.zeros(nx)
    for t in range(N - 1, -1, -1):
        p = p + v[t * nx:(t + 1) * nx]
        out[t * nu:(t + 1) * nu] = Bd.T @ p
        p = Ad.T @ p
    return out
