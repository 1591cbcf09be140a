"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import time from ``OMRMATMUL_BACKEND``
(``numba`` or ``numpy``). If unset, numba is used when it imports cleanly.
Both backends are always importable by name for benchmarking and testing::

    from omrmatmul.kernels import get_backend
    nb = get_backend("numba")
    ref = get_backend("numpy")
"""
import importlib
import os

_BACKENDS = {"numba": "._numba", "numpy": "._numpy"}
_cache = {}


def get_backend(name):
    if name not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}; expected one of {sorted(_BACKENDS)}")
    if name not in _cache:
        _cache[name] = importlib.import_module(_BACKENDS[name], __name__)
    return _cache[name]


def _select():
    requested = os.environ.get("OMRMATMUL_BACKEND", "").strip().lower()
    if requested:
        return requested, get_backend(requested)
    try:
        return "numba", get_backend("numba")
    except ImportError:
        return "numpy", get_backend("numpy")


BACKEND_NAME, _active = _select()

mul_mod_scalar = _active.mul_mod_scalar
mul_mod_rows = _active.mul_mod_rows
mul_scalar_rows = _active.mul_scalar_rows
ntt_forward_rows = _active.ntt_forward_rows
ntt_inverse_rows = _active.ntt_inverse_rows


def set_threads(count):
    """Bound limb-level parallelism of the numba kernels. No-op for numpy."""
    if BACKEND_NAME == "numba":
        import numba

        numba.set_num_threads(max(1, min(int(count), numba.config.NUMBA_NUM_THREADS)))
