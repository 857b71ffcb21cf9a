"""Backend selection for the hot path kernels.

The compiled Cython extension is used when the build produced it; otherwise
the numpy fallback takes over.  ``STOCHTAME_PURE_PYTHON=1`` forces the
fallback (useful for the backend benchmark and for debugging).
"""

import os

if os.environ.get("STOCHTAME_PURE_PYTHON", "") not in ("", "0"):
    from . import fallback as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import fallback as _impl

        BACKEND = "python"

envelope_chunk = _impl.envelope_chunk
tamed_gbm_chunk = _impl.tamed_gbm_chunk

__all__ = ["BACKEND", "envelope_chunk", "tamed_gbm_chunk"]
