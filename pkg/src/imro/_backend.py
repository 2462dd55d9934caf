"""Pick the compiled kernels when available, otherwise the numpy ones."""

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

kernels = _ckernels if _ckernels is not None else _pykernels


def available():
    return ["cython", "python"] if _ckernels is not None else ["python"]


def get(name=None):
    """Return a kernel module by name; ``None`` means the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _pykernels
    if name == "cython":
        if _ckernels is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def set_backend(name):
    """Switch the process-wide kernel module."""
    global kernels
    kernels = get(name)
    return kernels.NAME
