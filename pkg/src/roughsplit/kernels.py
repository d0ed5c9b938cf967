"""Backend selection for the hot kernels.

The compiled extension ``roughsplit._kernels`` is used when it imports;
otherwise (or when ``ROUGHSPLIT_PURE_PYTHON=1`` is set) the numpy versions
in ``roughsplit._fallback`` are used.  ``BACKEND`` names the active one.
"""
import os

from . import _fallback

_compiled = None
if os.environ.get("ROUGHSPLIT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

if _compiled is not None:
    BACKEND = "cython"
    pvar_dp = _compiled.pvar_dp
    hjb_substeps = _compiled.hjb_substeps
    davie_affine = _compiled.davie_affine
else:
    BACKEND = "python"
    pvar_dp = _fallback.pvar_dp
    hjb_substeps = _fallback.hjb_substeps
    davie_affine = _fallback.davie_affine


def backends():
    """Return ``{name: module}`` for every backend available in this process."""
    out = {"python": _fallback}
    if _compiled is not None:
        out["cython"] = _compiled
    else:
        try:
            from . import _kernels
            out["cython"] = _kernels
        except ImportError:
            pass
    return out
