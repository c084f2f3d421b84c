"""Kernel backend selection.

Prefers the compiled extension when present; falls back to the numpy
implementation otherwise. SUPERMANN_PURE_PYTHON=1 forces the fallback
(useful for benchmarking the two against each other).
"""

import os

if os.environ.get("SUPERMANN_PURE_PYTHON"):
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "python"

chain_apply = _impl.chain_apply
chain_apply2 = _impl.chain_apply2
lti_forward = _impl.lti_forward
lti_adjoint = _impl.lti_adjoint
