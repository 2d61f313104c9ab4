import numpy as np
import pytest

from uavris.geometry import (
    E_Z,
    JitterAngles,
    LinkAngles,
    PlanarArray,
    bs_steering,
    pitch_matrix,
    recompute_angles,
    ris_element_positions,
    ris_steering,
    roll_matrix,
    rotate,
    rotation_from_jitter,
    sample_jitter,
    yaw_matrix,
)


def test_zero_sigma_gives_zero_jitter(rng):
    for _ in range(10):
        assert sample_jitter(0.0, rng) == (0.0, 0.0, 0.0)


def test_jitter_is_reproducible():
    a = sample_jitter(0.1, np.random.default_rng(7))
    b = sample_jitter(0.1, np.random.default_rng(7))
    assert a == b


def test_jitter_sample_std():
    rng = np.random.default_rng(0)
    draws = np.array([sample_jitter(0.1, rng) for _ in range(100_000)])
    stds = draws.std(axis=0)
    assert np.all((stds >= 0.095) & (stds <= 0.105))
    assert np.all(np.abs(draws.mean(axis=0)) < 0.002)


def test_negative_sigma_rejected(rng):
    with pytest.raises(ValueError):
        sample_jitter(-0.1, rng)


def test_zero_jitter_is_exact_identity():
    assert np.array_equal(rotation_from_jitter(JitterAngles(0.0, 0.0, 0.0)), np.eye(3))


def test_yaw_quarter_turn():
    r = rotation_from_jitter(JitterAngles(0.0, 0.0, np.pi / 2))
    np.testing.assert_allclose(rotate(r, [1.0, 0.0, 0.0]), [0.0, 1.0, 0.0], atol=1e-12)


def test_composition_order(rng):
    # entrywise check against yaw @ pitch @ roll
    for _ in range(20):
        a, b, c = rng.normal(0, 0.5, 3)
        expected = yaw_matrix(c) @ pitch_matrix(b) @ roll_matrix(a)
        assert np.array_equal(rotation_from_jitter(JitterAngles(a, b, c)), expected)
    # roll about x then yaw about z is not the same as the reverse order
    j = JitterAngles(0.3, 0.0, 0.4)
    assert not np.allclose(rotation_from_jitter(j), roll_matrix(0.3) @ yaw_matrix(0.4))


def test_rotations_orthonormal(rng):
    for _ in range(1000):
        r = rotation_from_jitter(sample_jitter(0.3, rng))
        assert np.max(np.abs(r.T @ r - np.eye(3))) < 1e-9
        assert abs(np.linalg.det(r) - 1.0) < 1e-9


def test_rotate_preserves_norm(rng):
    for _ in range(100):
        r = rotation_from_jitter(sample_jitter(1.0, rng))
        v = rng.normal(size=3) * 10
        assert np.linalg.norm(rotate(r, v)) == pytest.approx(np.linalg.norm(v), rel=1e-9)
    assert np.array_equal(rotate(np.eye(3), [3.0, 4.0, 0.0]), [3.0, 4.0, 0.0])


@pytest.mark.parametrize("v, phi, theta", [
    ((0.0, 0.0, 1.0), 0.0, 0.0),
    ((1.0, 0.0, 0.0), 0.0, np.pi / 2),
    ((1.0, 1.0, 0.0), np.pi / 4, np.pi / 2),
    ((-1.0, 0.0, 0.0), np.pi, np.pi / 2),
    ((0.0, 0.0, -2.0), 0.0, np.pi),
])
def test_recompute_angles_hand_values(v, phi, theta):
    ang = recompute_angles(np.array(v), E_Z)
    assert ang.phi == pytest.approx(phi, abs=1e-12)
    assert ang.theta == pytest.approx(theta, abs=1e-12)


def test_recompute_angles_sign_ambiguity_kept():
    # arccos azimuth: +y and -y half-planes map to the same value
    a = recompute_angles(np.array([1.0, 1.0, -1.0]), -E_Z)
    b = recompute_angles(np.array([1.0, -1.0, -1.0]), -E_Z)
    assert a == b


def test_recompute_angles_scale_invariant(rng):
    for _ in range(50):
        v = rng.normal(size=3)
        s = rng.uniform(0.01, 100)
        a, b = recompute_angles(v), recompute_angles(s * v)
        assert a.phi == pytest.approx(b.phi, abs=1e-12)
        assert a.theta == pytest.approx(b.theta, abs=1e-12)


def test_recompute_angles_zero_vector():
    with pytest.raises(ValueError):
        recompute_angles(np.zeros(3))


def test_downward_pole():
    ang = recompute_angles(np.array([0.0, 0.0, -5.0]), -E_Z)
    assert ang.theta == 0.0


def test_single_element_steering():
    v = bs_steering(PlanarArray(1, 1, 0.1, 0.1), LinkAngles(0.7, 1.1), 0.2)
    assert np.array_equal(v, [1.0 + 0j])


@pytest.mark.parametrize("fn", [bs_steering, ris_steering])
def test_two_element_half_wavelength(fn):
    lam = 0.125
    v = fn(PlanarArray(2, 1, lam / 2, lam / 2), LinkAngles(np.pi / 2, 0.0), lam)
    np.testing.assert_allclose(v, [1.0, -1.0], atol=1e-12)


def test_steering_kronecker_layout(rng):
    lam = 0.125
    geom = PlanarArray(3, 4, 0.07, 0.05)
    ang = LinkAngles(*rng.uniform(0, np.pi, 2))
    v = ris_steering(geom, ang, lam)
    assert v.shape == (12,)
    assert v[0] == 1.0
    np.testing.assert_allclose(np.abs(v), 1.0, atol=1e-12)
    sp = np.sin(ang.phi)
    for i in range(3):
        for j in range(4):
            fi = np.exp(-2j * np.pi * 0.07 * i * sp * np.cos(ang.theta) / lam)
            fj = np.exp(-2j * np.pi * 0.05 * j * sp * np.sin(ang.theta) / lam)
            assert v[i * 4 + j] == pytest.approx(fi * fj, abs=1e-12)


def test_steering_reduces_to_single_axis(rng):
    lam = 0.3
    ang = LinkAngles(*rng.uniform(0, np.pi, 2))
    full = bs_steering(PlanarArray(5, 1, 0.1, 0.2), ang, lam)
    axis = np.exp(-2j * np.pi * 0.1 * np.arange(5) * np.sin(ang.phi) * np.cos(ang.theta) / lam)
    np.testing.assert_allclose(full, axis, atol=1e-12)
    full = bs_steering(PlanarArray(1, 5, 0.1, 0.2), ang, lam)
    axis = np.exp(-2j * np.pi * 0.2 * np.arange(5) * np.sin(ang.phi) * np.sin(ang.theta) / lam)
    np.testing.assert_allclose(full, axis, atol=1e-12)


def test_element_positions():
    c = np.array([10.0, 10.0, 25.0])
    assert np.array_equal(ris_element_positions(c, PlanarArray(1, 1, 0.1, 0.1)), [c])
    pos = ris_element_positions(np.array([0.0, 0.0, 5.0]), PlanarArray(2, 1, 0.4, 0.4))
    np.testing.assert_allclose(pos, [[-0.2, 0.0, 5.0], [0.2, 0.0, 5.0]], atol=1e-15)
    pos = ris_element_positions(c, PlanarArray(4, 3, 0.06, 0.06))
    np.testing.assert_allclose(pos.mean(axis=0), c, atol=1e-12)
    # x-major: consecutive indices walk along y first
    assert pos[1, 0] == pos[0, 0] and pos[1, 1] > pos[0, 1]
