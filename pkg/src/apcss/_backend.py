"""Backend selection for the dispersion kernel.

The compiled extension is preferred; the pure-NumPy implementation is
used when the extension is missing or APCSS_PURE_PYTHON=1 is set.  Both
backends return bit-identical results, so the choice only affects speed.
"""

from __future__ import annotations

import os

from . import _kernel_py

if os.environ.get("APCSS_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _kernel_py
else:
    try:
        from . import _kernel as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernel_py

apc_dispersion_batch = _impl.apc_dispersion_batch


def backend_name() -> str:
    """Name of the kernel in use: 'compiled' or 'python'."""
    return _impl.BACKEND_NAME


def available_backends() -> dict:
    """Map backend name to its dispersion function, for benchmarks and tests."""
    backends = {_kernel_py.BACKEND_NAME: _kernel_py.apc_dispersion_batch}
    try:
        from . import _kernel
    except ImportError:
        pass
    else:
        backends[_kernel.BACKEND_NAME] = _kernel.apc_dispersion_batch
    return backends
