"""Kernel backend selection.

The compiled ``_core`` extension is used when it imports; otherwise the
pure-Python twin in ``_core_py``.  Setting ``BETASPHERE_BACKEND=python``
forces the fallback.
"""

import logging
import os

from . import _core_py

log = logging.getLogger(__name__)

core = _core_py
if os.environ.get("BETASPHERE_BACKEND", "").lower() != "python":
    try:
        from . import _core as core  # noqa: F811
    except ImportError:  # pragma: no cover - depends on the build
        log.info("compiled core unavailable; using pure-Python kernels")
        core = _core_py

BACKEND = core.BACKEND
network_simplex = core.network_simplex
mcmc_sweeps = core.mcmc_sweeps


def get(name):
    """Return the kernel module for ``name`` in {"cython", "python"}."""
    if name == "python":
        return _core_py
    from . import _core
    return _core
