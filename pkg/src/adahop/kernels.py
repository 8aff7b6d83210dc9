"""Kernel dispatch: compiled extension when built, numpy fallback otherwise.

Set the environment variable ``ADAHOP_PURE_PYTHON=1`` to force the fallback
(used by the benchmark and the kernel-equivalence tests). Both backends
produce identical outputs; only speed differs.
"""

from __future__ import annotations

import os

import numpy as np

if os.environ.get("ADAHOP_PURE_PYTHON"):
    from . import _pykernels as _impl

    HAVE_SPEEDUPS = False
else:
    try:
        from . import _speedups as _impl  # type: ignore[attr-defined]

        HAVE_SPEEDUPS = True
    except ImportError:
        from . import _pykernels as _impl

        HAVE_SPEEDUPS = False

__all__ = [
    "HAVE_SPEEDUPS",
    "all_distance_layers",
    "treated_counts",
    "overlap_counts",
]


def _i32(a):
    return np.ascontiguousarray(a, dtype=np.int32)


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def all_distance_layers(indptr, indices, n, max_depth):
    """BFS layers for all nodes; see ``_pykernels.all_distance_layers``."""
    return _impl.all_distance_layers(_i64(indptr), _i32(indices), int(n), int(max_depth))


def treated_counts(lay_indptr, lay_nodes, z, n, max_depth):
    """(n, max_depth) matrix of treated counts per distance layer."""
    z8 = np.ascontiguousarray(z, dtype=np.int8)
    return _impl.treated_counts(_i64(lay_indptr), _i32(lay_nodes), z8, int(n), int(max_depth))


def overlap_counts(lay_indptr, lay_nodes, depths, n, max_depth):
    """Per-node count of selected neighborhoods containing the node."""
    return _impl.overlap_counts(
        _i64(lay_indptr), _i32(lay_nodes), _i32(depths), int(n), int(max_depth)
    )
