"""Backend selection for the flow kernel.

The compiled extension is used when it imports; set ``BISHOP_FILL_PURE=1``
to force the numpy fallback.
"""
import os

from . import _flow_py

BACKEND = "python"
flow_points = _flow_py.flow_points

if os.environ.get("BISHOP_FILL_PURE", "") not in ("1", "true", "yes"):
    try:
        from ._flowkernel import flow_points  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # extension not built
        pass

contact_field = _flow_py.contact_field

__all__ = ["BACKEND", "flow_points", "contact_field"]
