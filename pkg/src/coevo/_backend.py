"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``COEVO_BACKEND=python`` to force the fallback, ``COEVO_BACKEND=cython``
to make a missing extension an error.
"""
import importlib
import os


def load(name: str | None = None):
    """Return ``(module, name)`` for the requested or best available backend."""
    want = (name or os.environ.get("COEVO_BACKEND", "")).lower() or None
    if want not in (None, "python", "cython"):
        raise ValueError(f"unknown backend {want!r}")
    if want != "python":
        try:
            return importlib.import_module("coevo._kernels"), "cython"
        except ImportError:
            if want == "cython":
                raise
    return importlib.import_module("coevo._kernels_py"), "python"


kernels, BACKEND = load()
