"""Numeric kernel backend selection.

The compiled Cython extension is preferred when present; otherwise the
numpy/scipy fallback is used. Set AUTHATTR_KERNELS=numpy or =cython to
force a backend (the benchmark suite uses this to compare the two).
"""

import os

from . import _npkern

_forced = os.environ.get("AUTHATTR_KERNELS", "").lower()

if _forced == "numpy":
    _impl = _npkern
elif _forced == "cython":
    from . import _ckernels as _impl
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _npkern

BACKEND = _impl.BACKEND_NAME

csr_dense_matmul = _impl.csr_dense_matmul
csr_t_dense_matmul = _impl.csr_t_dense_matmul
predict_proba = _impl.predict_proba
logreg_loss_grad = _impl.logreg_loss_grad
knn_topk = _impl.knn_topk


def get_backend(name=None):
    """Return a kernel module by name ("numpy" or "cython"), default active."""
    if name is None or name == BACKEND:
        return _impl
    if name == "numpy":
        return _npkern
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown kernel backend: {name!r}")
