"""Kernel backend selection.

The compiled extension is used when it was built; otherwise (or when
``TRANSITORY_SIM_PURE=1`` is set) the numpy implementation is used. Both
backends return bit-identical results, so the choice never changes output.
"""
import os

from . import _kernels_py

_NAMES = ("accept_mask", "first_accepted", "running_neg_sup", "reflect_rows",
          "count_leq", "counting_sup_deviation")


def _load():
    if os.environ.get("TRANSITORY_SIM_PURE", "") not in ("", "0"):
        return _kernels_py, "python"
    try:
        from . import _kernels
    except ImportError:
        return _kernels_py, "python"
    return _kernels, "compiled"


_impl, BACKEND = _load()

accept_mask = _impl.accept_mask
first_accepted = _impl.first_accepted
running_neg_sup = _impl.running_neg_sup
reflect_rows = _impl.reflect_rows
# numpy's searchsorted is already compiled and beats the extension's per-call
# setup on typical sizes (see benchmarks/bench_kernels.py), so it is always used
count_leq = _kernels_py.count_leq
counting_sup_deviation = _impl.counting_sup_deviation


def backends():
    """Mapping of available backend name -> module, for tests and benchmarks."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
        out["compiled"] = _kernels
    except ImportError:
        pass
    return out
