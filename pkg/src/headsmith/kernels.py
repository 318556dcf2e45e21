"""Backend selection for the hot kernels.

The compiled extension is preferred when it imports; otherwise the numpy
fallback is used. ``use_backend`` switches explicitly, which the test
suite and the benchmark rely on to exercise both paths.
"""

import logging

from . import _pykernels

logger = logging.getLogger(__name__)

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_NAMES = (
    "splitmix_fill",
    "fisher_yates",
    "histogram256",
    "confusion_counts",
    "convolve2d_valid",
    "max_pool2d",
)

BACKEND = None


def available_backends():
    return ["compiled", "python"] if _ckernels is not None else ["python"]


def use_backend(name):
    """Bind the module-level kernel functions to ``name`` ("compiled" or "python")."""
    global BACKEND
    if name == "compiled":
        if _ckernels is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        source = _ckernels
    elif name == "python":
        source = _pykernels
    else:
        raise ValueError(f"unknown backend {name!r}")
    g = globals()
    for fn in _NAMES:
        g[fn] = getattr(source, fn)
    BACKEND = name
    logger.debug("headsmith kernels bound to %s backend", name)


use_backend("compiled" if _ckernels is not None else "python")
