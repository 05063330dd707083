"""4x4 affine kernel facade.

Selects the compiled Cython kernels when the extension built, otherwise the
pure-Python twin.  FSPM_BRIDGE_PURE=1 forces the pure implementation (used
by the benchmark and the kernel test matrix).
"""

from __future__ import annotations

import os

if os.environ.get("FSPM_BRIDGE_PURE") == "1":
    from fspm_bridge import _mat4_py as _impl
else:
    try:
        from fspm_bridge import _mat4 as _impl  # type: ignore[attr-defined]
    except ImportError:
        from fspm_bridge import _mat4_py as _impl

IMPL = _impl.IMPL
IDENTITY = _impl.IDENTITY
identity = _impl.identity
is_affine = _impl.is_affine
multiply = _impl.multiply
compose = _impl.compose
translation = _impl.translation
scaling = _impl.scaling
rotation = _impl.rotation
invert_affine = _impl.invert_affine
transform_point = _impl.transform_point
