"""Kernel backend selection.

The numba path is used when numba imports cleanly and ``MMDD_DISABLE_JIT``
is unset (or "0"). Setting ``MMDD_DISABLE_JIT=1`` before import forces the
pure-numpy kernels. ``use_backend`` switches at runtime, mostly for tests
and benchmarks.
"""
import os

try:
    import numba  # noqa: F401

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False


def _env_disabled():
    return os.environ.get("MMDD_DISABLE_JIT", "0").strip().lower() not in ("", "0", "false", "no")


_active = "numba" if NUMBA_AVAILABLE and not _env_disabled() else "numpy"


def active_backend():
    return _active


def use_backend(name):
    """Select ``"numba"`` or ``"numpy"`` kernels; returns the previous name."""
    global _active
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError("numba is not installed")
    previous, _active = _active, name
    return previous
