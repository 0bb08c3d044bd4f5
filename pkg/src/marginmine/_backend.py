"""Pick the selection kernels at import time.

The compiled extension is preferred; ``MARGINMINE_BACKEND=python`` forces
the numpy fallback, ``MARGINMINE_BACKEND=compiled`` makes its absence an
import error.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _fallback


def _load_compiled() -> ModuleType | None:
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels


_compiled = _load_compiled()
_choice = os.environ.get("MARGINMINE_BACKEND", "auto").lower()
if _choice == "python":
    kernels: ModuleType = _fallback
elif _choice == "compiled":
    if _compiled is None:
        raise ImportError("MARGINMINE_BACKEND=compiled but the _kernels extension is not built")
    kernels = _compiled
else:
    kernels = _compiled if _compiled is not None else _fallback

NAME = "compiled" if kernels is _compiled else "python"


def available() -> dict[str, ModuleType]:
    found = {"python": _fallback}
    if _compiled is not None:
        found["compiled"] = _compiled
    return found


def get(name: str | None = None) -> ModuleType:
    if name is None:
        return kernels
    try:
        return available()[name]
    except KeyError:
        raise ImportError(f"kernel backend {name!r} is not available") from None
