import math

import numpy as np
import pytest

from orbitcount.cusp import basepoint_from_group, canonical_basepoint, compute_M1
from orbitcount.equidist import (
    TestFunction,
    backward_integral,
    correlation_decay_probe,
    equidist_report,
    haar_probability_integral,
    haar_probability_mc,
    integrate_trajectory,
    reduced_trajectory_point,
    reference_bump,
    residual_slope,
    support_eta,
    symmetric_bump,
    translate_integral,
    trajectory_values,
    two_sided_average,
)
from orbitcount.group import LatticeElement, reduce_to_fundamental_domain, rotation_w

BASE = canonical_basepoint()


def test_bump_shape(rng):
    psi = reference_bump()
    (xl, xh), (yl, yh), _ = psi.support_box
    assert yh < 3 and xl > -0.5 and xh < 0.5
    for _ in range(5000):
        x, y, th = rng.uniform(-0.5, 0.5), rng.uniform(0.8, 3), rng.uniform(0, 2 * math.pi)
        v = psi(x, y, th)
        assert 0.0 <= v <= 1.0
        if not psi.in_support_box(x, y, th):
            assert v == 0.0
    assert psi(0.0, 1.6, 1.5 * math.pi) == pytest.approx(1.0)


@pytest.mark.parametrize(
    "center, radii",
    [((0.3, 1.6, 0.0), (0.3, 0.3, 1.0)), ((0.0, 1.2, 0.0), (0.3, 0.3, 1.0)), ((0.0, 2.0, 0.0), (0.1, 0.1, 4.0))],
)
def test_bump_validation(center, radii):
    with pytest.raises(ValueError):
        TestFunction(center, radii)


def test_haar_probability_special_cases():
    assert haar_probability_integral(TestFunction.zero()).value == 0.0
    assert haar_probability_integral(TestFunction.constant_function()).value == 1.0


def test_haar_probability_matches_monte_carlo():
    psi = reference_bump()
    det = haar_probability_integral(psi)
    mc = haar_probability_mc(psi, 10_000_000, seed=11)
    assert det.error < 1e-9
    assert abs(det.value - mc.value) <= 3 * mc.error


def test_zero_function_integrates_to_zero():
    for T in (-3.0, 0.0, 7.0):
        assert translate_integral(TestFunction.zero(), BASE, T).value == 0.0
        assert two_sided_average(TestFunction.zero(), BASE, T or 1.0).value == 0.0


def test_constant_function_has_no_trajectory_integral():
    with pytest.raises(ValueError):
        translate_integral(TestFunction.constant_function(), BASE, 1.0)


def test_untranslated_integral_is_independent_of_margin():
    psi = reference_bump()
    a = translate_integral(psi, BASE, 0.0, margin=2.0)
    b = translate_integral(psi, BASE, 0.0, margin=12.0)
    assert a.value > 0
    assert abs(a.value - b.value) <= 1e-7


def test_horizon_covers_the_support():
    psi = reference_bump()
    for T in (-10.0, -2.0, 0.0, 3.0, 15.0):
        r = translate_integral(psi, BASE, T, samples=20_000)
        assert r.s_max >= abs(T) + compute_M1(BASE.s0, support_eta(psi))
        for s in np.linspace(r.s_max, r.s_max + 10, 101):
            x, y, th = reduced_trajectory_point(BASE, float(s), T)
            assert not psi.in_support_box(x, y, th)


def test_closed_form_trajectory_matches_matrices(rng):
    psi = reference_bump()
    for _ in range(300):
        s, T = rng.uniform(-6, 6), rng.uniform(-6, 6)
        fast = reduced_trajectory_point(BASE, s, T)
        slow = reduce_to_fundamental_domain(BASE.point(s, T))
        assert abs(fast[0] - slow.x) < 1e-7 and abs(fast[1] - slow.y) < 1e-7
        d = (fast[2] - slow.theta + math.pi) % (2 * math.pi) - math.pi
        assert abs(d) < 1e-6 or abs(abs(d) - math.pi) < 1e-6
        val = trajectory_values(psi, BASE, T, np.array([s]))[0]
        assert val == pytest.approx(psi(slow.x, slow.y, slow.theta), abs=1e-6)


def test_chart_invariance():
    psi = reference_bump()
    other = basepoint_from_group(LatticeElement(2, 1, 1, 1).to_group() @ rotation_w().inverse())
    for T in (1.0, 3.0):
        a = translate_integral(psi, BASE, T)
        b = translate_integral(psi, other, T)
        assert abs(a.value - b.value) <= 1e-6


def test_gauss_step_halving_is_consistent():
    psi = reference_bump()
    for T in (0.0, 1.0, 3.0):
        r = translate_integral(psi, BASE, T, method="gauss")
        assert r.method == "gauss"
        assert r.quadrature_error < 1e-6


def test_stratified_agrees_with_gauss():
    psi = reference_bump()
    g = translate_integral(psi, BASE, 3.0, method="gauss")
    st = translate_integral(psi, BASE, 3.0, method="stratified", samples=400_000)
    assert abs(g.value - st.value) <= 4 * st.quadrature_error + 1e-9


def test_stratified_is_deterministic_and_worker_independent():
    psi = reference_bump()
    a = translate_integral(psi, BASE, 6.0, samples=300_000, seed=5, workers=1)
    b = translate_integral(psi, BASE, 6.0, samples=300_000, seed=5, workers=3)
    assert a == b


def test_negative_translation_runs_backwards_in_time():
    psi = symmetric_bump()
    for T in (2.0, 4.0):
        fwd = translate_integral(psi, BASE, -T)
        assert fwd.value > 0
        assert fwd.s_max >= T


def test_symmetric_bump_gives_equal_halves():
    psi = symmetric_bump()
    for T in (2.0, 4.0):
        fwd = translate_integral(psi, BASE, T)
        bwd = backward_integral(psi, BASE, T)
        assert abs(fwd.value - bwd.value) <= 10 * math.hypot(fwd.quadrature_error, bwd.quadrature_error) + 1e-12


def test_two_sided_average_converges():
    psi = reference_bump()
    mu = haar_probability_integral(psi).value
    a = two_sided_average(psi, BASE, 8.0, samples=1_000_000)
    b = two_sided_average(psi, BASE, 16.0, samples=1_000_000)
    assert abs(a.value - b.value) <= mu / 8
    assert abs(b.value - mu) < 0.1 * mu
    with pytest.raises(ValueError):
        two_sided_average(psi, BASE, 0.0)


def test_correlation_probe_examples():
    psi = reference_bump()
    assert correlation_decay_probe(psi, psi, 0.0, 500_000).value > 0
    assert correlation_decay_probe(psi, TestFunction.zero(), 2.0, 100_000).value == 0.0
    with pytest.raises(ArithmeticError):
        correlation_decay_probe(psi, psi, 0.0, 1000, max_error=1e-9)


def test_correlation_decays():
    psi = reference_bump()
    ts = np.arange(0.0, 8.5, 2.0)
    vals = [abs(correlation_decay_probe(psi, psi, T, 1_000_000, seed=2).value) for T in ts]
    assert np.polyfit(ts, np.log(vals), 1)[0] < 0


def test_report_rows_and_slope():
    psi = reference_bump()
    rows = equidist_report(psi, BASE, [1.0, 2.0, 3.0])
    assert [r.T for r in rows] == [1.0, 2.0, 3.0]
    assert all(r.residual == pytest.approx(r.integral - r.expected) for r in rows)
    assert math.isfinite(residual_slope(rows))


def test_integrate_rejects_unknown_method():
    with pytest.raises(ValueError):
        integrate_trajectory(reference_bump(), BASE, 1.0, 0.0, 1.0, method="simpson")
