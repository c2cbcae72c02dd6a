"""Backend selection for the LIF temporal scans.

The compiled extension ``spikelth._kernels`` is used when it was built;
otherwise the numpy implementation in ``spikelth._kernels_py`` is used.
Setting ``SPIKELTH_PURE_PYTHON=1`` forces the fallback.

Both backends expose:

``lif_forward(x, beta, u_th, v_reset, h0) -> (u, s, h_final)``
    ``x`` is ``(T, M)`` float64, ``h0`` is ``(M,)``. Returns membrane
    potentials, uint8 spikes and the temporal state after the last step.

``lif_backward(grad_s, u, s, beta, u_th, width) -> grad_x``
    Backward scan with a rectangular surrogate of the given width and the
    reset branch detached.
"""

import os

import numpy as np

from . import _kernels_py

_compiled = None
if os.environ.get("SPIKELTH_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _kernels_py


def available_backends():
    """Names of the backends importable in this environment."""
    names = ["python"]
    try:
        from . import _kernels  # noqa: F401
        names.append("cython")
    except ImportError:
        pass
    return names


def get_backend(name=None):
    """Return the kernel module for ``name`` (default: the active backend)."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")


def lif_forward(x, beta, u_th, v_reset, h0=None):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if h0 is None:
        h0 = np.zeros(x.shape[1], dtype=np.float64)
    else:
        h0 = np.ascontiguousarray(h0, dtype=np.float64)
    return _impl.lif_forward(x, float(beta), float(u_th), float(v_reset), h0)


def lif_backward(grad_s, u, s, beta, u_th, width):
    return _impl.lif_backward(
        np.ascontiguousarray(grad_s, dtype=np.float64),
        np.ascontiguousarray(u, dtype=np.float64),
        np.ascontiguousarray(s, dtype=np.uint8),
        float(beta),
        float(u_th),
        float(width),
    )
