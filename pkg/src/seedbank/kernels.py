"""Backend selection for the hot kernels.

The compiled extension is used when it imported cleanly, unless the
environment variable ``SEEDBANK_BACKEND=python`` asks for the numpy fallback.
Both backends expose ``em_ensemble``, ``em_path``, ``sve_path`` and
``count_chain`` with identical signatures.
"""
from __future__ import annotations

import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _fallback}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled


def _select():
    wanted = os.environ.get("SEEDBANK_BACKEND", "").strip().lower()
    if wanted == "python" or _compiled is None:
        return "python"
    return "compiled"


BACKEND = _select()
_impl = BACKENDS[BACKEND]


def get(name=None):
    """Kernel module for ``name`` (default: the selected backend)."""
    return BACKENDS[name or BACKEND]


def em_ensemble(*args, **kwargs):
    return _impl.em_ensemble(*args, **kwargs)


def em_path(*args, **kwargs):
    return _impl.em_path(*args, **kwargs)


def sve_path(*args, **kwargs):
    return _impl.sve_path(*args, **kwargs)


def count_chain(*args, **kwargs):
    return _impl.count_chain(*args, **kwargs)
