import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fxtdo_mpc.core_math import (
    quat_align_sign,
    quat_conjugate,
    quat_derivative,
    quat_from_axis_angle,
    quat_multiply,
    quat_normalize,
    quat_to_rotation,
    rotation_to_quat,
    signed_power,
    yaw_of,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)
vec3 = arrays(np.float64, 3, elements=finite)
exponent = st.floats(0.0, 3.0)


def unit_quat(draw_vec):
    q = np.asarray(draw_vec, dtype=float)
    return q / np.linalg.norm(q)


quats = arrays(np.float64, 4, elements=st.floats(-1, 1)).filter(
    lambda q: np.linalg.norm(q) > 0.1).map(unit_quat)


class TestSignedPower:
    def test_unit_vector_unchanged(self):
        np.testing.assert_array_equal(signed_power([1.0, 0, 0], 0.5), [1.0, 0, 0])

    def test_zero_is_zero_for_signum(self):
        np.testing.assert_array_equal(signed_power([0.0, 0, 0], 0.0), np.zeros(3))

    def test_exact_power(self):
        np.testing.assert_allclose(signed_power([4.0, 0, 0], 1.5), [8.0, 0, 0], rtol=1e-15)

    @given(vec3)
    def test_power_one_is_identity(self, x):
        np.testing.assert_array_equal(signed_power(x, 1.0), x)

    @given(vec3, exponent)
    def test_norm(self, x, a):
        n = np.linalg.norm(x)
        if n < 1e-6:
            return
        assert np.linalg.norm(signed_power(x, a)) == pytest.approx(n**a, rel=1e-12)

    @given(vec3, exponent)
    def test_odd(self, x, a):
        np.testing.assert_allclose(signed_power(-x, a), -signed_power(x, a), rtol=1e-15)

    @given(vec3)
    def test_signum_projection(self, x):
        n = np.linalg.norm(x)
        if n < 1e-9:
            return
        assert x @ signed_power(x, 0.0) == pytest.approx(n, rel=1e-12)

    def test_negative_exponent_rejected(self):
        with pytest.raises(ValueError):
            signed_power([1.0, 0, 0], -0.5)


class TestRotation:
    def test_identity(self):
        np.testing.assert_array_equal(quat_to_rotation([1.0, 0, 0, 0]), np.eye(3))

    def test_yaw_90(self):
        s = np.sqrt(2) / 2
        np.testing.assert_allclose(quat_to_rotation([s, 0, 0, s]),
                                   [[0, -1, 0], [1, 0, 0], [0, 0, 1]], atol=1e-15)

    def test_non_unit_rejected(self):
        with pytest.raises(ValueError):
            quat_to_rotation([0.9, 0, 0, 0.1])

    @given(quats)
    def test_orthonormal(self, q):
        R = quat_to_rotation(q)
        np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-9)
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-9)

    @given(quats)
    def test_rotation_round_trip(self, q):
        q2 = rotation_to_quat(quat_to_rotation(q))
        assert q2[0] >= 0
        np.testing.assert_allclose(quat_align_sign(q, q2), q, atol=1e-9)

    @given(quats, quats)
    def test_product_composes_rotations(self, p, q):
        np.testing.assert_allclose(quat_to_rotation(quat_multiply(p, q)),
                                   quat_to_rotation(p) @ quat_to_rotation(q), atol=1e-9)

    def test_yaw_extraction(self):
        q = quat_from_axis_angle([0, 0, 1], 0.7)
        assert yaw_of(q) == pytest.approx(0.7, abs=1e-12)


class TestQuatDerivative:
    def test_zero_rate(self):
        np.testing.assert_array_equal(quat_derivative([1.0, 0, 0, 0], [0, 0, 0]), np.zeros(4))

    def test_roll_rate_at_identity(self):
        np.testing.assert_allclose(quat_derivative([1.0, 0, 0, 0], [2.0, 0, 0]), [0, 1, 0, 0])

    @given(quats, vec3)
    def test_orthogonal_to_q(self, q, w):
        assert abs(quat_derivative(q, w) @ q) < 1e-12 * max(1.0, np.linalg.norm(w))

    @given(quats, vec3)
    def test_matches_product_form(self, q, w):
        expected = 0.5 * quat_multiply(q, np.concatenate([[0.0], w]))
        np.testing.assert_allclose(quat_derivative(q, w), expected, atol=1e-12)

    def test_norm_preserved_by_rk4(self):
        q = quat_normalize([0.3, -0.2, 0.8, 0.1])
        w = np.array([1.2, -0.7, 2.5])
        h = 1e-3
        for _ in range(1000):
            k1 = quat_derivative(q, w)
            k2 = quat_derivative(q + h / 2 * k1, w)
            k3 = quat_derivative(q + h / 2 * k2, w)
            k4 = quat_derivative(q + h * k3, w)
            q = q + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        assert abs(np.linalg.norm(q) - 1.0) < 1e-9

    def test_rejects_non_unit(self):
        with pytest.raises(ValueError):
            quat_derivative([2.0, 0, 0, 0], [0, 0, 0])


class TestNormalizeAlign:
    def test_normalize_scales(self):
        np.testing.assert_array_equal(quat_normalize([2.0, 0, 0, 0]), [1.0, 0, 0, 0])

    def test_normalize_zero_rejected(self):
        with pytest.raises(ValueError):
            quat_normalize([0.0, 0, 0, 0])

    @given(quats)
    def test_normalize_unit_unchanged(self, q):
        np.testing.assert_allclose(quat_normalize(q), q, atol=1e-15)

    def test_align_identity(self):
        e = np.array([1.0, 0, 0, 0])
        np.testing.assert_array_equal(quat_align_sign(e, e), e)
        np.testing.assert_array_equal(quat_align_sign(e, -e), e)

    def test_align_tie_keeps_sign(self):
        np.testing.assert_array_equal(quat_align_sign([1.0, 0, 0, 0], [0, 1.0, 0, 0]),
                                      [0, 1.0, 0, 0])

    @given(quats, quats)
    def test_align_non_negative_dot(self, q, r):
        assert q @ quat_align_sign(q, r) >= 0

    def test_conjugate_inverts(self):
        q = quat_normalize([0.5, 0.1, -0.3, 0.7])
        np.testing.assert_allclose(quat_multiply(q, quat_conjugate(q)), [1, 0, 0, 0], atol=1e-15)


@settings(max_examples=50)
@given(st.floats(-np.pi, np.pi), arrays(np.float64, 3, elements=st.floats(-1, 1)).filter(
    lambda a: np.linalg.norm(a) > 0.1))
def test_axis_angle_rotates_about_axis(angle, axis):
    R = quat_to_rotation(quat_from_axis_angle(axis, angle))
    u = axis / np.linalg.norm(axis)
    np.testing.assert_allclose(R @ u, u, atol=1e-12)
    assert np.trace(R) == pytest.approx(1 + 2 * np.cos(angle), abs=1e-12)
