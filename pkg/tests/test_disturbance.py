import numpy as np
import pytest

from fxtdo_mpc.disturbance import (
    DisturbanceProfile,
    constant_disturbance,
    derivative_bound,
    force_bound,
    no_disturbance,
    scale_profile,
    sinusoid_disturbance,
    sinusoid_profile,
)


def test_sinusoid_at_activation():
    f, tau = sinusoid_disturbance(0.0)
    np.testing.assert_allclose(f, [1.0, -0.5, 0.0])
    np.testing.assert_allclose(tau, [0.0, 0.2, 0.0])


def test_sinusoid_quarter_period():
    f, tau = sinusoid_disturbance(3.75)
    np.testing.assert_allclose(f, [1.5, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(tau, [0.2, 0.0, 0.0], atol=1e-15)


def test_sinusoid_periodic():
    for a, b in zip(sinusoid_disturbance(0.0), sinusoid_disturbance(15.0)):
        np.testing.assert_allclose(a, b, atol=1e-14)


def test_zero_before_activation():
    prof = sinusoid_profile(start=10.0)
    f, tau = prof(9.999)
    assert not f.any() and not tau.any()
    np.testing.assert_allclose(prof(10.0)[0], [1.0, -0.5, 0.0])


def test_constant_profile():
    prof = constant_disturbance([1.0, -0.5, 0.0], start=2.0)
    assert not prof(1.0)[0].any()
    np.testing.assert_array_equal(prof(2.0)[0], [1.0, -0.5, 0.0])
    np.testing.assert_array_equal(prof(100.0)[0], [1.0, -0.5, 0.0])
    np.testing.assert_array_equal(prof(100.0)[1], np.zeros(3))
    assert derivative_bound(prof) == 0.0


def test_none_profile():
    prof = no_disturbance()
    assert not prof(5.0)[0].any()
    assert force_bound(prof) == 0.0


def test_unknown_kind():
    with pytest.raises(ValueError):
        DisturbanceProfile("gust")


class TestScaling:
    def test_zero_scale(self):
        assert not scale_profile(sinusoid_profile(), 0.0)(3.75)[0].any()

    def test_unit_scale(self):
        np.testing.assert_array_equal(scale_profile(sinusoid_profile(), 1.0)(2.0)[0],
                                      sinusoid_profile()(2.0)[0])

    def test_half_scale_quarter_period(self):
        np.testing.assert_allclose(scale_profile(sinusoid_profile(), 0.5)(3.75)[0],
                                   [0.75, 0.0, 0.0], atol=1e-15)

    def test_torque_not_scaled(self):
        np.testing.assert_allclose(scale_profile(sinusoid_profile(), 0.5)(3.75)[1],
                                   [0.2, 0.0, 0.0], atol=1e-15)

    @pytest.mark.parametrize("k", [-0.1, 1.5])
    def test_range(self, k):
        with pytest.raises(ValueError):
            scale_profile(sinusoid_profile(), k)

    def test_bound_scales(self):
        base = derivative_bound(sinusoid_profile())
        assert derivative_bound(scale_profile(sinusoid_profile(), 0.3)) == pytest.approx(0.3 * base)


def test_derivative_bound_value():
    assert derivative_bound(sinusoid_profile()) == pytest.approx(0.5 * 2 * np.pi / 15)
    assert derivative_bound(sinusoid_profile()) == pytest.approx(0.2094, abs=1e-4)


def test_derivative_bound_holds_at_1khz():
    prof = sinusoid_profile()
    ts = np.arange(0.0, 30.0, 1e-3)
    f = np.array([prof(t)[0] for t in ts])
    rate = np.linalg.norm(np.diff(f, axis=0), axis=1) / 1e-3
    assert rate.max() <= derivative_bound(prof) * (1 + 1e-6)
    assert rate.max() >= 0.999 * derivative_bound(prof)


def test_force_bound_is_supremum():
    ts = np.linspace(0, 15, 15001)
    norms = [np.linalg.norm(sinusoid_disturbance(t)[0]) for t in ts]
    assert max(norms) == pytest.approx(force_bound(sinusoid_profile()), rel=1e-9)
