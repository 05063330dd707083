# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled 4x4 affine kernels; same contract as fspm_bridge._mat4_py."""

from libc.math cimport cos, sin, sqrt, isfinite, M_PI

IMPL = "cython"

IDENTITY = (
    1.0, 0.0, 0.0, 0.0,
    0.0, 1.0, 0.0, 0.0,
    0.0, 0.0, 1.0, 0.0,
    0.0, 0.0, 0.0, 1.0,
)


cdef inline void _load(object m, double* out) except *:
    cdef int i
    for i in range(16):
        out[i] = m[i]


cdef inline tuple _pack(double* m):
    return (
        m[0], m[1], m[2], m[3],
        m[4], m[5], m[6], m[7],
        m[8], m[9], m[10], m[11],
        m[12], m[13], m[14], m[15],
    )


def identity():
    return IDENTITY


def is_affine(m):
    return m[12] == 0.0 and m[13] == 0.0 and m[14] == 0.0 and m[15] == 1.0


cdef inline void _mul(double* a, double* b, double* out):
    cdef int i, j
    for i in range(4):
        for j in range(4):
            out[4 * i + j] = (
                a[4 * i] * b[j]
                + a[4 * i + 1] * b[4 + j]
                + a[4 * i + 2] * b[8 + j]
                + a[4 * i + 3] * b[12 + j]
            )


def multiply(a, b):
    cdef double ca[16]
    cdef double cb[16]
    cdef double out[16]
    _load(a, ca)
    _load(b, cb)
    _mul(ca, cb, out)
    return _pack(out)


def compose(mats):
    """Product m_n . ... . m_1 for mats listed first-applied-first."""
    cdef double acc[16]
    cdef double cur[16]
    cdef double out[16]
    cdef int i
    _load(IDENTITY, acc)
    for m in mats:
        _load(m, cur)
        _mul(cur, acc, out)
        for i in range(16):
            acc[i] = out[i]
    return _pack(acc)


def translation(double x, double y, double z):
    return (
        1.0, 0.0, 0.0, x,
        0.0, 1.0, 0.0, y,
        0.0, 0.0, 1.0, z,
        0.0, 0.0, 0.0, 1.0,
    )


def scaling(double sx, double sy, double sz):
    return (
        sx, 0.0, 0.0, 0.0,
        0.0, sy, 0.0, 0.0,
        0.0, 0.0, sz, 0.0,
        0.0, 0.0, 0.0, 1.0,
    )


def rotation(double ax, double ay, double az, double angle_deg):
    """Rotation about the (ax, ay, az) axis by angle_deg (right-handed)."""
    cdef double n = sqrt(ax * ax + ay * ay + az * az)
    if n == 0.0:
        raise ValueError("rotation axis must be nonzero")
    cdef double x = ax / n
    cdef double y = ay / n
    cdef double z = az / n
    cdef double t = angle_deg * M_PI / 180.0
    cdef double c = cos(t)
    cdef double s = sin(t)
    cdef double ic = 1.0 - c
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
    cdef double cm[16]
    _load(m, cm)
    cdef double a = cm[0], b = cm[1], c = cm[2]
    cdef double d = cm[4], e = cm[5], f = cm[6]
    cdef double g = cm[8], h = cm[9], i = cm[10]
    cdef double co0 = e * i - f * h
    cdef double co1 = f * g - d * i
    cdef double co2 = d * h - e * g
    cdef double det = a * co0 + b * co1 + c * co2
    if det == 0.0 or not isfinite(det):
        raise ValueError("singular affine matrix")
    cdef double inv = 1.0 / det
    cdef double r00 = co0 * inv
    cdef double r01 = (c * h - b * i) * inv
    cdef double r02 = (b * f - c * e) * inv
    cdef double r10 = co1 * inv
    cdef double r11 = (a * i - c * g) * inv
    cdef double r12 = (c * d - a * f) * inv
    cdef double r20 = co2 * inv
    cdef double r21 = (b * g - a * h) * inv
    cdef double r22 = (a * e - b * d) * inv
    cdef double tx = cm[3], ty = cm[7], tz = cm[11]
    return (
        r00, r01, r02, -(r00 * tx + r01 * ty + r02 * tz),
        r10, r11, r12, -(r10 * tx + r11 * ty + r12 * tz),
        r20, r21, r22, -(r20 * tx + r21 * ty + r22 * tz),
        0.0, 0.0, 0.0, 1.0,
    )


def transform_point(m, double x, double y, double z):
    cdef double cm[16]
    _load(m, cm)
    return (
        cm[0] * x + cm[1] * y + cm[2] * z + cm[3],
        cm[4] * x + cm[5] * y + cm[6] * z + cm[7],
        cm[8] * x + cm[9] * y + cm[10] * z + cm[11],
    )
