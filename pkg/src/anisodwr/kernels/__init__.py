"""Element-kernel backend selection.

The compiled Cython kernels are used when the extension built; otherwise the
NumPy reference implementation is selected.  Setting ANISODWR_FORCE_PYTHON=1
in the environment forces the NumPy path (used by the agreement tests and
the kernel benchmark).
"""
import os

from . import _numpy_ref

HAVE_COMPILED = False
if not os.environ.get("ANISODWR_FORCE_PYTHON"):
    try:
        from . import _speedups  # type: ignore[attr-defined]

        HAVE_COMPILED = True
    except ImportError:
        _speedups = None
else:
    _speedups = None

_backend = _speedups if HAVE_COMPILED else _numpy_ref
BACKEND_NAME = "compiled" if HAVE_COMPILED else "numpy"


def _as_c(a):
    import numpy as np

    return np.ascontiguousarray(a, dtype=np.float64)


def cdr_cell_matrices(W, bq, aq, eps, delta, tval, tgrad, uval, ugrad, ulap):
    if _backend is _numpy_ref:
        return _numpy_ref.cdr_cell_matrices(W, bq, aq, eps, delta, tval, tgrad,
                                            uval, ugrad, ulap)
    return _speedups.cdr_cell_matrices(
        _as_c(W), _as_c(bq), _as_c(aq), float(eps), _as_c(delta), _as_c(tval),
        _as_c(tgrad), _as_c(uval), _as_c(ugrad), _as_c(ulap))


def cdr_cell_loads(W, bq, fq, delta, tval, tgrad):
    if _backend is _numpy_ref:
        return _numpy_ref.cdr_cell_loads(W, bq, fq, delta, tval, tgrad)
    return _speedups.cdr_cell_loads(_as_c(W), _as_c(bq), _as_c(fq),
                                    _as_c(delta), _as_c(tval), _as_c(tgrad))


def pair_cellwise(mats, test_vecs, trial_vecs):
    if _backend is _numpy_ref:
        return _numpy_ref.pair_cellwise(mats, test_vecs, trial_vecs)
    return _speedups.pair_cellwise(_as_c(mats), _as_c(test_vecs), _as_c(trial_vecs))
