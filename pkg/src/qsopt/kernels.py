"""Kernel dispatch: compiled extension when built, numpy fallback otherwise.

Set ``QSOPT_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("QSOPT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

seeded_normals = _impl.seeded_normals
seeded_uniforms = _impl.seeded_uniforms
consensus_index = _impl.consensus_index
medoid_index = _impl.medoid_index

__all__ = [
    "BACKEND",
    "seeded_normals",
    "seeded_uniforms",
    "consensus_index",
    "medoid_index",
]
