"""Per-triangle kernel backend selection.

The compiled core (``_core``, built from ``_core.pyx``) is preferred when it
imported cleanly; otherwise the pure-numpy backend is used.  The environment
variable ``GRIFFITH2D_KERNELS`` forces a backend: ``python``, ``compiled`` or
``auto`` (default).
"""

import os

from . import numpy_backend

_requested = os.environ.get("GRIFFITH2D_KERNELS", "auto").strip().lower()

if _requested in ("", "auto"):
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = numpy_backend
        BACKEND = "python"
elif _requested == "python":
    _impl = numpy_backend
    BACKEND = "python"
elif _requested == "compiled":
    from . import _core as _impl

    BACKEND = "compiled"
else:
    raise RuntimeError(
        f"GRIFFITH2D_KERNELS={_requested!r} not understood "
        "(expected 'auto', 'python' or 'compiled')"
    )

tri_geometry = _impl.tri_geometry
strain_fields = _impl.strain_fields
full_gradients = _impl.full_gradients
scalar_gradients = _impl.scalar_gradients
elastic_density = _impl.elastic_density
element_stiffness = _impl.element_stiffness
