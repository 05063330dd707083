"""Pure-Python 4x4 affine kernels.

Matrices are flat 16-tuples of float, row-major, acting on column vectors:
``multiply(a, b)`` is the product a.b, so b is applied to a point first.
Mirrors the compiled extension fspm_bridge._mat4; keep both in sync.
"""

from __future__ import annotations

import math

IMPL = "python"

IDENTITY = (
    1.0, 0.0, 0.0, 0.0,
    0.0, 1.0, 0.0, 0.0,
    0.0, 0.0, 1.0, 0.0,
    0.0, 0.0, 0.0, 1.0,
)


def identity():
    return IDENTITY


def is_affine(m) -> bool:
    return m[12] == 0.0 and m[13] == 0.0 and m[14] == 0.0 and m[15] == 1.0


def multiply(a, b):
    out = [0.0] * 16
    for i in range(4):
        ai0 = a[4 * i]
        ai1 = a[4 * i + 1]
        ai2 = a[4 * i + 2]
        ai3 = a[4 * i + 3]
        for j in range(4):
            out[4 * i + j] = (
                ai0 * b[j] + ai1 * b[4 + j] + ai2 * b[8 + j] + ai3 * b[12 + j]
            )
    return tuple(out)


def compose(mats):
    """Product m_n . ... . m_1 for mats listed first-applied-first."""
    acc = IDENTITY
    for m in mats:
        acc = multiply(m, acc)
    return acc


def translation(x: float, y: float, z: float):
    return (
        1.0, 0.0, 0.0, float(x),
        0.0, 1.0, 0.0, float(y),
        0.0, 0.0, 1.0, float(z),
        0.0, 0.0, 0.0, 1.0,
    )


def scaling(sx: float, sy: float, sz: float):
    return (
        float(sx), 0.0, 0.0, 0.0,
        0.0, float(sy), 0.0, 0.0,
        0.0, 0.0, float(sz), 0.0,
        0.0, 0.0, 0.0, 1.0,
    )


def rotation(ax: float, ay: float, az: float, angle_deg: float):
    """Rotation about the (ax, ay, az) axis by angle_deg (right-handed)."""
    n = math.sqrt(ax * ax + ay * ay + az * az)
    if n == 0.0:
        raise ValueError("rotation axis must be nonzero")
    x, y, z = ax / n, ay / n, az / n
    t = math.radians(angle_deg)
    c = math.cos(t)
    s = math.sin(t)
    ic = 1.0 - c
    return (
        c + x * x * ic, x * y * ic - z * s, x * z * ic + y * s, 0.0,
        y * x * ic + z * s, c + y * y * ic, y * z * ic - x * s, 0.0,
        z * x * ic - y * s, z * y * ic + x * s, c + z * z * ic, 0.0,
        0.0, 0.0, 0.0, 1.0,
    )


def invert_affine(m):
    """Inverse of an affine matrix (bottom row 0 0 0 1).

    Raises ValueError when the linear block is singular.
    """
    a, b, c = m[0], m[1], m[2]
    d, e, f = m[4], m[5], m[6]
    g, h, i = m[8], m[9], m[10]
    co0 = e * i - f * h
    co1 = f * g - d * i
    co2 = d * h - e * g
    det = a * co0 + b * co1 + c * co2
    if det == 0.0 or not math.isfinite(det):
        raise ValueError("singular affine matrix")
    inv = 1.0 / det
    r00 = co0 * inv
    r01 = (c * h - b * i) * inv
    r02 = (b * f - c * e) * inv
    r10 = co1 * inv
    r11 = (a * i - c * g) * inv
    r12 = (c * d - a * f) * inv
    r20 = co2 * inv
    r21 = (b * g - a * h) * inv
    r22 = (a * e - b * d) * inv
    tx, ty, tz = m[3], m[7], m[11]
    return (
        r00, r01, r02, -(r00 * tx + r01 * ty + r02 * tz),
        r10, r11, r12, -(r10 * tx + r11 * ty + r12 * tz),
        r20, r21, r22, -(r20 * tx + r21 * ty + r22 * tz),
        0.0, 0.0, 0.0, 1.0,
    )


def transform_point(m, x: float, y: float, z: float):
    return (
        m[0] * x + m[1] * y + m[2] * z + m[3],
        m[4] * x + m[5] * y + m[6] * z + m[7],
        m[8] * x + m[9] * y + m[10] * z + m[11],
    )
