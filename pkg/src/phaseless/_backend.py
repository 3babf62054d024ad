"""Kernel backend selection: compiled extension if built, numpy otherwise.

``BACKEND`` is "compiled" or "numpy"; the active module is ``kernels``.
The two backends produce identical output for identical input (the sampling
stream is counter-based, not stateful), so switching backends does not
change any result, only speed.
"""

from __future__ import annotations

from . import _kernels_py

try:
    from . import _kernels as _impl

    BACKEND = "compiled"
except ImportError:  # extension not built
    _impl = _kernels_py
    BACKEND = "numpy"

kernels = _impl

sample_bernoulli = _impl.sample_bernoulli
apply_signed = _impl.apply_signed
sort_by_col = _impl.sort_by_col
splitmix64 = _kernels_py.splitmix64
