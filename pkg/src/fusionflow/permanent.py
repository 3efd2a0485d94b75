"""Permanent kernel selection.

The compiled extension is preferred; setting ``FUSIONFLOW_PURE=1`` or a
missing build selects the pure-Python implementation.
"""

import os

from ._permanent_py import permanent as permanent_py

BACKEND = "python"
permanent = permanent_py

if os.environ.get("FUSIONFLOW_PURE") != "1":
    try:
        from ._permanent import permanent as permanent_ext
    except ImportError:  # extension not built
        permanent_ext = None
    else:
        permanent = permanent_ext
        BACKEND = "cython"
else:
    permanent_ext = None

__all__ = ["permanent", "permanent_py", "permanent_ext", "BACKEND"]
