"""Kernel tests run against both implementations to keep them in lockstep."""

import math
import random

import pytest

from fspm_bridge import _mat4_py

try:
    from fspm_bridge import _mat4

    IMPLS = [_mat4_py, _mat4]
except ImportError:
    IMPLS = [_mat4_py]


@pytest.fixture(params=IMPLS, ids=lambda m: m.IMPL)
def m4(request):
    return request.param


def test_identity(m4):
    assert m4.identity() == _mat4_py.IDENTITY
    assert m4.multiply(m4.identity(), m4.identity()) == _mat4_py.IDENTITY


def test_multiply_against_hand_product(m4):
    a = tuple(float(i) for i in range(16))
    b = tuple(float(i * i) for i in range(16))
    expected = []
    for i in range(4):
        for j in range(4):
            expected.append(sum(a[4 * i + k] * b[4 * k + j] for k in range(4)))
    assert m4.multiply(a, b) == tuple(expected)


def test_translation_scaling(m4):
    t = m4.translation(1.0, 2.0, 3.0)
    assert t[3] == 1.0 and t[7] == 2.0 and t[11] == 3.0
    assert m4.transform_point(t, 0.0, 0.0, 0.0) == (1.0, 2.0, 3.0)
    s = m4.scaling(2.0, 3.0, 4.0)
    assert m4.transform_point(s, 1.0, 1.0, 1.0) == (2.0, 3.0, 4.0)


def test_rotation_z_90(m4):
    r = m4.rotation(0.0, 0.0, 1.0, 90.0)
    p = m4.transform_point(r, 1.0, 0.0, 0.0)
    assert p[0] == pytest.approx(0.0, abs=1e-12)
    assert p[1] == pytest.approx(1.0)
    assert p[2] == 0.0


def test_rotation_zero_axis_raises(m4):
    with pytest.raises(ValueError):
        m4.rotation(0.0, 0.0, 0.0, 45.0)


def test_compose_applies_first_element_first(m4):
    chain = [m4.translation(1.0, 0.0, 0.0), m4.rotation(0.0, 0.0, 1.0, 90.0)]
    p = m4.transform_point(m4.compose(chain), 0.0, 0.0, 0.0)
    assert p[0] == pytest.approx(0.0, abs=1e-12)
    assert p[1] == pytest.approx(1.0)


def test_invert_affine_random(m4):
    rng = random.Random(7)
    for _ in range(50):
        matrix = m4.compose([
            m4.rotation(rng.uniform(-1, 1), rng.uniform(-1, 1), 1.0,
                        rng.uniform(0, 360)),
            m4.translation(rng.uniform(-9, 9), rng.uniform(-9, 9), rng.uniform(-9, 9)),
            m4.scaling(rng.uniform(0.2, 4), rng.uniform(0.2, 4), rng.uniform(0.2, 4)),
        ])
        product = m4.multiply(matrix, m4.invert_affine(matrix))
        for got, want in zip(product, _mat4_py.IDENTITY):
            assert got == pytest.approx(want, abs=1e-9)


def test_invert_singular_raises(m4):
    with pytest.raises(ValueError):
        m4.invert_affine(m4.scaling(1.0, 0.0, 1.0))


def test_is_affine(m4):
    assert m4.is_affine(_mat4_py.IDENTITY)
    bad = list(_mat4_py.IDENTITY)
    bad[12] = 0.5
    assert not m4.is_affine(tuple(bad))


@pytest.mark.skipif(len(IMPLS) < 2, reason="compiled kernel not built")
def test_implementations_agree():
    rng = random.Random(99)
    for _ in range(200):
        a = tuple(rng.uniform(-3, 3) for _ in range(12)) + (0.0, 0.0, 0.0, 1.0)
        b = tuple(rng.uniform(-3, 3) for _ in range(12)) + (0.0, 0.0, 0.0, 1.0)
        assert _mat4.multiply(a, b) == _mat4_py.multiply(a, b)
        angle = rng.uniform(-360, 360)
        assert _mat4.rotation(1.0, 2.0, -1.0, angle) == pytest.approx(
            _mat4_py.rotation(1.0, 2.0, -1.0, angle), abs=1e-15)
    r = _mat4.rotation(0.3, -0.4, 0.8, 37.0)
    assert _mat4.invert_affine(r) == pytest.approx(_mat4_py.invert_affine(r))
    assert math.isclose(_mat4.transform_point(r, 1, 2, 3)[2],
                        _mat4_py.transform_point(r, 1, 2, 3)[2])
