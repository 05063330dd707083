"""Tagged property values.

Every value stored on a graph node or exchanged as an environment variable
carries an explicit type tag; nothing is coerced implicitly.  The tag
vocabulary matches the wire spelling used by the XEG file format:

    int double bool string vec3 matrix4 doublelist

plus ``float``, a single-precision number used only by environment
variables and unit-conversion rules (it never appears inside an XEG
document).  A ``float`` value is stored as a Python float that has been
quantized to float32 precision.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
INT = "int"
DOUBLE = "double"
FLOAT = "float"
BOOL = "bool"
STRING = "string"
VEC3 = "vec3"
MATRIX4 = "matrix4"
DOUBLELIST = "doublelist"

GRAPH_KINDS = frozenset({INT, DOUBLE, BOOL, STRING, VEC3, MATRIX4, DOUBLELIST})
ENV_KINDS = GRAPH_KINDS | {FLOAT}

def quantize32(x: float) -> float:
    """Round a float64 to the nearest representable float32."""
    return struct.unpack("<f", struct.pack("<f", x))[0]


@dataclass(frozen=True)
class PropValue:
    """A typed property value. ``value`` shape depends on ``kind``:

    int -> int, double/float -> float, bool -> bool, string -> str,
    vec3 -> 3-tuple of float, matrix4 -> 16-tuple of float (row-major),
    doublelist -> tuple of float.
    """

    kind: str
    value: object

    @staticmethod
    def of_int(v: int) -> "PropValue":
        return PropValue(INT, int(v))

    @staticmethod
    def of_double(v: float) -> "PropValue":
        return PropValue(DOUBLE, float(v))

    @staticmethod
    def of_float(v: float) -> "PropValue":
        return PropValue(FLOAT, quantize32(float(v)))

    @staticmethod
    def of_bool(v: bool) -> "PropValue":
        return PropValue(BOOL, bool(v))

    @staticmethod
    def of_string(v: str) -> "PropValue":
        return PropValue(STRING, str(v))

    @staticmethod
    def of_vec3(v) -> "PropValue":
        t = tuple(float(x) for x in v)
        if len(t) != 3:
            raise ValueError(f"vec3 needs 3 components, got {len(t)}")
        return PropValue(VEC3, t)

    @staticmethod
    def of_matrix4(v) -> "PropValue":
        t = tuple(float(x) for x in v)
        if len(t) != 16:
            raise ValueError(f"matrix4 needs 16 components, got {len(t)}")
        return PropValue(MATRIX4, t)

    @staticmethod
    def of_doublelist(v) -> "PropValue":
        return PropValue(DOUBLELIST, tuple(float(x) for x in v))


def format_number(x: float) -> str:
    """Shortest decimal string that parses back to exactly ``x``."""
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def format_value(pv: PropValue) -> str:
    """Wire/attribute spelling of a value (without XML escaping)."""
    if pv.kind == INT:
        return str(pv.value)
    if pv.kind in (DOUBLE, FLOAT):
        return format_number(pv.value)
    if pv.kind == BOOL:
        return "true" if pv.value else "false"
    if pv.kind == STRING:
        return pv.value
    if pv.kind in (VEC3, MATRIX4, DOUBLELIST):
        return " ".join(format_number(x) for x in pv.value)
    raise ValueError(f"unknown value kind {pv.kind!r}")


def parse_value(kind: str, text: str) -> PropValue:
    """Inverse of format_value; raises ValueError on malformed input."""
    if kind == INT:
        return PropValue(INT, int(text))
    if kind == DOUBLE:
        return PropValue(DOUBLE, float(text))
    if kind == FLOAT:
        return PropValue(FLOAT, quantize32(float(text)))
    if kind == BOOL:
        if text == "true":
            return PropValue(BOOL, True)
        if text == "false":
            return PropValue(BOOL, False)
        raise ValueError(f"bool value must be 'true' or 'false', got {text!r}")
    if kind == STRING:
        return PropValue(STRING, text)
    if kind == VEC3:
        return PropValue.of_vec3(text.split())
    if kind == MATRIX4:
        return PropValue.of_matrix4(text.split())
    if kind == DOUBLELIST:
        return PropValue.of_doublelist(text.split())
    raise ValueError(f"unknown value kind {kind!r}")


def floats_close(a: float, b: float, tol: float) -> bool:
    """Relative comparison with a 1e-12 absolute floor; tol 0 means exact.

    NaN compares equal to NaN so round-trip identities hold on any value
    that survives serialization.
    """
    if math.isnan(a) or math.isnan(b):
        return math.isnan(a) and math.isnan(b)
    if a == b:
        return True
    if tol == 0.0 or math.isinf(a) or math.isinf(b):
        return False
    return abs(a - b) <= max(tol * max(abs(a), abs(b)), 1e-12)


def values_close(a: PropValue, b: PropValue, tol: float) -> bool:
    if a.kind != b.kind:
        return False
    if a.kind in (DOUBLE, FLOAT):
        return floats_close(a.value, b.value, tol)
    if a.kind in (VEC3, MATRIX4, DOUBLELIST):
        return len(a.value) == len(b.value) and all(
            floats_close(x, y, tol) for x, y in zip(a.value, b.value)
        )
    return a.value == b.value
