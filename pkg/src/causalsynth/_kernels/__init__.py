"""Sampling kernel selection.

Two interchangeable implementations of the hot sampling loops exist:
a compiled Cython extension (``_fastcore``) and a NumPy reference
(``reference``).  Both are required to produce bit-identical output;
the equivalence is enforced by tests.  The compiled backend is used
when it imported successfully, unless the environment variable
``CAUSALSYNTH_PURE`` is set to a non-empty value other than ``0``.
"""

import os

if os.environ.get("CAUSALSYNTH_PURE", "0") not in ("", "0"):
    from . import reference as _impl

    BACKEND = "python"
else:
    try:
        from . import _fastcore as _impl

        BACKEND = "compiled"
    except ImportError:
        from . import reference as _impl

        BACKEND = "python"

noise_block = _impl.noise_block
ancestral_codes = _impl.ancestral_codes


def backend_name() -> str:
    """Which kernel implementation is active: 'compiled' or 'python'."""
    return BACKEND
