import math

import numpy as np
import pytest
from conftest import random_group, random_lattice

from orbitcount.group import (
    GroupElement,
    IntegerOverflowError,
    LatticeElement,
    SO21Element,
    cartan_decompose,
    make_a,
    make_h,
    make_k,
    mobius_act,
    quadratic_value,
    reduce_point,
    reduce_to_fundamental_domain,
    rotation_w,
    spin_cover,
    weyl_w0,
)

CASES = 10_000


def test_h_at_zero_is_identity():
    assert make_h(0.0) == GroupElement.identity()


@pytest.mark.parametrize("s", [-1.0, 0.5, 3.0])
def test_h_is_conjugate_of_a_by_w(s):
    w = rotation_w()
    assert make_h(s).max_abs_diff(w @ make_a(s) @ w.inverse()) < 1e-12


def test_h_is_a_one_parameter_group():
    assert make_h(0.7).max_abs_diff(make_h(0.3) @ make_h(0.4)) < 1e-12


def test_k_at_pi_is_exact():
    assert make_k(math.pi) == GroupElement(0.0, -1.0, 1.0, 0.0)
    assert weyl_w0() == make_k(math.pi)


def test_determinant_is_enforced():
    with pytest.raises(ValueError):
        GroupElement(1.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        GroupElement(float("nan"), 0.0, 0.0, 1.0)


def test_products_stay_unimodular_when_ill_conditioned():
    big = make_a(30.0) @ make_h(20.0)
    back = big @ big.inverse()
    assert abs(back.det - 1) <= 1e-12
    assert back.max_abs_diff(GroupElement.identity()) < 1e-3


def test_products_associate(rng):
    for _ in range(1000):
        a, b, c = (random_group(rng, 3) for _ in range(3))
        lhs, rhs = (a @ b) @ c, a @ (b @ c)
        assert lhs.max_abs_diff(rhs) <= 1e-12 * max(1.0, float(np.abs(lhs.matrix).max()))


def test_lattice_element_exact_checks():
    with pytest.raises(ValueError):
        LatticeElement(2, 0, 0, 1)
    with pytest.raises(IntegerOverflowError):
        LatticeElement(2**127, 0, 0, 1)
    t = LatticeElement.translation(2**100)
    with pytest.raises(IntegerOverflowError):
        t @ t @ LatticeElement.inversion() @ t


def test_lattice_canonical_sign():
    g = LatticeElement(-1, 0, 3, -1)
    assert g.canonical() == LatticeElement(1, 0, -3, 1)
    assert (-g).canonical() == g.canonical()


def test_spin_cover_displayed_images():
    assert np.allclose(spin_cover(GroupElement.identity()).matrix, np.eye(3))
    t = 0.8
    expected_a = [[math.cosh(t), 0, math.sinh(t)], [0, 1, 0], [math.sinh(t), 0, math.cosh(t)]]
    assert np.allclose(spin_cover(make_a(t)).matrix, expected_a, atol=1e-14)
    s = -1.3
    expected_h = [[1, 0, 0], [0, math.cosh(s), math.sinh(s)], [0, math.sinh(s), math.cosh(s)]]
    assert np.allclose(spin_cover(make_h(s)).matrix, expected_h, atol=1e-14)


@pytest.mark.parametrize("theta", [0.0, 0.4, 2.0, 5.5])
def test_spin_cover_of_k_is_plane_rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    assert np.allclose(spin_cover(make_k(theta)).matrix, [[c, -s, 0], [s, c, 0], [0, 0, 1]], atol=1e-14)


def test_spin_cover_homomorphism_and_kernel(rng):
    worst = 0.0
    for _ in range(CASES):
        g1, g2 = random_group(rng, 10), random_group(rng, 10)
        lhs = spin_cover(g1 @ g2).matrix
        rhs = spin_cover(g1).matrix @ spin_cover(g2).matrix
        worst = max(worst, np.abs(lhs - rhs).max() / max(1.0, np.abs(lhs).max()))
    assert worst < 1e-9
    g = random_group(rng)
    assert np.array_equal(spin_cover(-g).matrix, spin_cover(g).matrix)


def test_spin_cover_preserves_quadratic_form(rng):
    for _ in range(CASES):
        m = spin_cover(random_group(rng)).matrix
        v = rng.normal(size=3)
        assert abs(quadratic_value(v @ m) - quadratic_value(v)) <= 1e-9 * max(1.0, np.abs(m).max()) ** 2 * (v @ v)
        assert abs(np.linalg.det(m) - 1) <= 1e-9 * max(1.0, np.abs(m).max()) ** 3


def test_so21_rejects_non_isometry():
    with pytest.raises(ValueError):
        SO21Element(np.diag([2.0, 1.0, 1.0]))


def test_cartan_examples():
    c = cartan_decompose(make_h(1.0) @ make_a(2.0) @ make_k(0.5))
    assert (c.sign, round(c.s, 12), round(c.t, 12), round(c.theta, 12)) == (1, 1.0, 2.0, 0.5)
    c = cartan_decompose(GroupElement.identity())
    assert (c.s, c.t, c.theta, c.sign) == (0.0, 0.0, 0.0, 1)


def test_cartan_roundtrip_random(rng):
    for _ in range(CASES):
        g = random_group(rng)
        c = cartan_decompose(g)
        assert 0 <= c.theta < 2 * math.pi
        assert c.recompose().max_abs_diff(g) < 1e-10


def test_cartan_negative_sign():
    g = -(make_h(0.3) @ make_a(-1.0) @ make_k(4.0))
    c = cartan_decompose(g)
    assert c.sign == -1
    assert c.recompose().max_abs_diff(g) < 1e-12


def test_mobius_examples():
    z = 0.3 + 2j
    assert mobius_act(GroupElement.identity(), z) == z
    assert abs(mobius_act(make_a(1.7), 1j) - math.exp(1.7) * 1j) < 1e-14
    with pytest.raises(ValueError):
        mobius_act(GroupElement.identity(), 1 - 1j)


def test_mobius_cocycle(rng):
    for _ in range(CASES):
        g1, g2 = random_group(rng), random_group(rng)
        z = complex(rng.uniform(-3, 3), rng.uniform(0.1, 3))
        lhs = mobius_act(g1 @ g2, z)
        rhs = mobius_act(g1, mobius_act(g2, z))
        assert lhs.imag > 0
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_reduce_identity():
    p = reduce_to_fundamental_domain(GroupElement.identity())
    assert (p.x, p.y, p.theta, p.reducer) == (0.0, 1.0, 0.0, LatticeElement.identity())


def test_reduce_known_point():
    g = GroupElement(math.sqrt(0.5), 2.3 * math.sqrt(2), 0.0, math.sqrt(2))
    assert abs(mobius_act(g, 1j) - (2.3 + 0.5j)) < 1e-14
    p = reduce_to_fundamental_domain(g)
    assert abs(p.x) <= 0.5 and p.x**2 + p.y**2 >= 1
    moved = mobius_act(p.reducer.to_group(), 2.3 + 0.5j)
    assert abs(moved - p.z) < 1e-12


def test_reduction_is_left_invariant_and_idempotent(rng):
    for _ in range(1000):
        g = random_group(rng, 3)
        gamma = random_lattice(rng, 3)
        p, q = reduce_to_fundamental_domain(g), reduce_to_fundamental_domain(gamma.to_group() @ g)
        on_edge = abs(abs(p.x) - 0.5) < 1e-9 or abs(p.x**2 + p.y**2 - 1) < 1e-9
        if not on_edge:
            assert abs(p.x - q.x) < 1e-9 and abs(p.y - q.y) < 1e-9
            dtheta = (p.theta - q.theta + math.pi) % (2 * math.pi) - math.pi
            assert abs(dtheta) < 1e-8
        again = reduce_point(p.x, p.y, p.theta)
        assert again.reducer == LatticeElement.identity()
        assert (again.x, again.y) == (p.x, p.y)


def test_reduction_angle_matches_group_element(rng):
    # gamma g has the reduced point's Iwasawa coordinates, up to the sign of gamma.
    for _ in range(500):
        g = random_group(rng, 3)
        p = reduce_to_fundamental_domain(g)
        m = p.reducer.to_group() @ g
        z = mobius_act(m, 1j)
        theta = (2 * math.atan2(m.a21, m.a22)) % (2 * math.pi)
        assert abs(z - p.z) < 1e-9
        d = (theta - p.theta) % (2 * math.pi)
        assert min(d, 2 * math.pi - d, abs(d - math.pi)) < 1e-8


def test_cartan_recovers_coordinates(rng):
    for _ in range(2000):
        s, t, th = rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(0, 2 * math.pi)
        c = cartan_decompose(make_h(s) @ make_a(t) @ make_k(th))
        assert c.sign == 1
        assert abs(c.s - s) < 1e-7 and abs(c.t - t) < 1e-9
        assert abs((c.theta - th + math.pi) % (2 * math.pi) - math.pi) < 1e-9


def test_spin_cover_kernel():
    assert np.array_equal(spin_cover(-GroupElement.identity()).matrix, np.eye(3))
