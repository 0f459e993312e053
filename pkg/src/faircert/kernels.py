"""Kernel selection: compiled extension if available, pure Python otherwise.

Set ``FAIRCERT_FORCE_PY=1`` to force the pure-Python kernels (used by the
benchmark and by CI environments without a C toolchain).
"""

import os

if os.environ.get("FAIRCERT_FORCE_PY") == "1":
    from faircert import _kernels_py as _impl
else:
    try:
        from faircert import _speedups as _impl  # type: ignore[attr-defined]
    except ImportError:
        from faircert import _kernels_py as _impl

IMPLEMENTATION = _impl.IMPLEMENTATION
combine_dense = _impl.combine_dense
interval_dense = _impl.interval_dense
pivot_dense = _impl.pivot_dense
simplex_optimize = _impl.simplex_optimize
