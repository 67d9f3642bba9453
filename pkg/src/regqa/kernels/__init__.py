"""Hot-loop kernels with backend selection at import time.

The compiled Cython extension is preferred; the numpy fallback is used
when the extension is missing or when REGQA_PURE=1 is set. Both backends
compute the same quantity; floating-point differences stay far below the
1e-9 tolerance the search contract allows.
"""
import logging
import os

from . import fallback

logger = logging.getLogger(__name__)

if os.environ.get("REGQA_PURE") == "1":
    cosine_scan = fallback.cosine_scan
    BACKEND = "numpy"
else:
    try:
        from ._scan import cosine_scan  # type: ignore[attr-defined]
        BACKEND = "compiled"
    except ImportError:
        cosine_scan = fallback.cosine_scan
        BACKEND = "numpy"
        logger.info("compiled scan kernel unavailable; using numpy fallback")


def backend_name() -> str:
    return BACKEND
