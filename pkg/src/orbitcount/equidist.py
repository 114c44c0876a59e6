"""Integrals of test functions along translated divergent geodesics in SL2(Z)\\SL2(R).

A trajectory point g0 h(s) a(T) is evaluated as M0 a(s + s0) w^-1 a(T) with
M0 = sigma0 u w.  The middle factor only rescales a fixed point of the upper
half-plane, so each evaluation costs one Mobius map plus a reduction, without
forming matrices with entries of size e^(s/2).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .asymptotics import PI_OVER_3
from .cusp import DivergentBasepoint, compute_M1, eta_for_height, reversed_basepoint
from .group import TWO_PI

BLOCK_STRATA = 1 << 16
DEFAULT_SAMPLES = 2_000_000
DEFAULT_EVAL_BUDGET = 4_000_000
GAUSS_ORDER = 8
BOUNDARY_MARGIN = 0.05


class Estimate(NamedTuple):
    value: float
    error: float


@dataclass(frozen=True)
class TestFunction:
    """A product of C-infinity bumps exp(1 - 1/(1 - u^2)) in (x, y, theta).

    The support box must stay at least 0.05 inside the fundamental domain so
    that boundary identifications never matter.  ``constant`` marks the
    special constant function, which has no compact support.
    """

    __test__ = False

    center: tuple[float, float, float]
    radii: tuple[float, float, float]
    amplitude: float = 1.0
    constant: bool = False

    def __post_init__(self) -> None:
        if self.constant:
            return
        (x0, y0, _), (rx, ry, rt) = self.center, self.radii
        if min(rx, ry, rt) <= 0 or rt >= math.pi:
            raise ValueError("radii must be positive with theta radius below pi")
        if abs(x0) + rx > 0.5 - BOUNDARY_MARGIN:
            raise ValueError("support leaves the strip |x| <= 1/2")
        x_near = max(0.0, abs(x0) - rx)
        if math.hypot(x_near, y0 - ry) < 1.0 + BOUNDARY_MARGIN or y0 - ry <= 0:
            raise ValueError("support reaches the unit circle")

    @classmethod
    def constant_function(cls, value: float = 1.0) -> TestFunction:
        return cls((0.0, 2.0, 0.0), (0.1, 0.1, 0.1), value, True)

    @classmethod
    def zero(cls) -> TestFunction:
        return cls((0.0, 1.6, 0.0), (0.3, 0.3, 1.0), 0.0)

    @property
    def support_box(self) -> tuple[tuple[float, float], tuple[float, float], tuple[float, float]]:
        (x0, y0, t0), (rx, ry, rt) = self.center, self.radii
        return (x0 - rx, x0 + rx), (y0 - ry, y0 + ry), (t0 - rt, t0 + rt)

    @property
    def y_max(self) -> float:
        return self.center[1] + self.radii[1]

    def params(self) -> np.ndarray:
        return np.array([*self.center, *self.radii, self.amplitude, 1.0 if self.constant else 0.0])

    def __call__(self, x: float, y: float, theta: float) -> float:
        return _kernels.psi_eval(x, y, theta, self.params())

    def in_support_box(self, x: float, y: float, theta: float) -> bool:
        (xl, xh), (yl, yh), _ = self.support_box
        d = (theta - self.center[2] + math.pi) % TWO_PI - math.pi
        return xl < x < xh and yl < y < yh and abs(d) < self.radii[2]


def reference_bump() -> TestFunction:
    """Bump used by the acceptance experiments.

    The theta window avoids the angle pi, where the canonical trajectory
    spends its long excursions into the cusp.
    """
    return TestFunction((0.0, 1.6, 1.5 * math.pi), (0.35, 0.45, 1.2))


def symmetric_bump() -> TestFunction:
    """A bump invariant under (x, y, theta) -> (-x, y, -theta)."""
    return TestFunction((0.0, 1.6, 0.0), (0.35, 0.45, 1.2))


def _gauss_1d(f, lo: float, hi: float, n: int) -> float:
    nodes, weights = np.polynomial.legendre.leggauss(n)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return float(half * np.dot(weights, f(mid + half * nodes)))


def haar_probability_integral(psi: TestFunction, samples: int = 200) -> Estimate:
    """Integral of psi against the probability Haar measure, by product Gauss quadrature.

    The error estimate compares ``samples`` nodes per axis with half as many.
    """
    if samples < 2:
        raise ValueError("samples must be at least 2")
    if psi.constant:
        return Estimate(psi.amplitude, 0.0)
    if psi.amplitude == 0:
        return Estimate(0.0, 0.0)
    (x0, y0, t0), (rx, ry, rt) = psi.center, psi.radii

    def bump(u):
        out = np.zeros_like(u)
        inside = np.abs(u) < 1
        out[inside] = np.exp(1 - 1 / (1 - u[inside] ** 2))
        return out

    def rule(n: int) -> float:
        ix = _gauss_1d(lambda x: bump((x - x0) / rx), x0 - rx, x0 + rx, n)
        iy = _gauss_1d(lambda y: bump((y - y0) / ry) / y**2, y0 - ry, y0 + ry, n)
        it = _gauss_1d(lambda t: bump((t - t0) / rt), t0 - rt, t0 + rt, n) / TWO_PI
        return psi.amplitude * ix * iy * it / PI_OVER_3

    fine = rule(samples)
    return Estimate(fine, abs(fine - rule(max(2, samples // 2))))


def haar_probability_mc(psi: TestFunction, samples: int, seed: int = 0) -> Estimate:
    """Monte Carlo estimate with standard error, sampling the fundamental domain directly."""
    mean, var = _kernels.haar_mc(psi.params(), samples, seed)
    return Estimate(mean, math.sqrt(var))


@dataclass(frozen=True)
class TrajectoryIntegral:
    T: float
    value: float
    s_max: float
    quadrature_error: float
    method: str = "stratified"
    s_min: float = 0.0


def support_eta(psi: TestFunction) -> float:
    """Cusp depth whose region lies above the support of psi."""
    return eta_for_height(psi.y_max)


def trajectory_horizon(psi: TestFunction, basepoint: DivergentBasepoint, T: float, margin: float = 5.0) -> float:
    return max(0.0, abs(T) + compute_M1(basepoint.s0, support_eta(psi)) + margin)


def _prefix(basepoint: DivergentBasepoint) -> np.ndarray:
    return basepoint.mobius_prefix.matrix.ravel().copy()


def trajectory_values(psi: TestFunction, basepoint: DivergentBasepoint, T: float, s) -> np.ndarray:
    """psi evaluated at g0 h(s) a(T) for an array of s."""
    s = np.ascontiguousarray(np.atleast_1d(np.asarray(s, dtype=float)))
    return _kernels.trajectory_values(float(T), s, _prefix(basepoint), basepoint.s0, psi.params())


def reduced_trajectory_point(basepoint: DivergentBasepoint, s: float, T: float) -> tuple[float, float, float]:
    x, y, th, ok = _kernels.trajectory_point(float(T), float(s), _prefix(basepoint), basepoint.s0)
    if not ok:
        raise RuntimeError("reduction did not terminate")
    return x, y, th


def _stratified(psi, basepoint, T, lo, hi, samples, seed, workers) -> Estimate:
    n_strata = max(1, samples // 2)
    width = (hi - lo) / n_strata
    m0, prm = _prefix(basepoint), psi.params()
    blocks = []
    start = 0
    while start < n_strata:
        count = min(BLOCK_STRATA, n_strata - start)
        blocks.append((start, count))
        start += count

    def run(i: int):
        start, count = blocks[i]
        return _kernels.stratified_block(
            float(T), lo + start * width, width, count, seed * 1_000_003 + i, m0, basepoint.s0, prm
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(blocks))))
    else:
        parts = [run(i) for i in range(len(blocks))]
    return Estimate(sum(p[0] for p in parts), math.sqrt(sum(p[1] for p in parts)))


def _panel_width(psi: TestFunction, T: float) -> float:
    # The trajectory moves at speed about cosh(T) in the s parameter.
    return 0.25 * min(psi.radii[0], psi.radii[1] / psi.y_max, psi.radii[2]) / math.cosh(T)


def _gauss(psi, basepoint, T, lo, hi, n_panels) -> float:
    nodes, weights = np.polynomial.legendre.leggauss(GAUSS_ORDER)
    return _kernels.gauss_panels(float(T), lo, hi, n_panels, nodes, weights, _prefix(basepoint), basepoint.s0, psi.params())


def integrate_trajectory(
    psi: TestFunction,
    basepoint: DivergentBasepoint,
    T: float,
    lo: float,
    hi: float,
    *,
    method: str = "auto",
    samples: int | None = None,
    seed: int = 0,
    eval_budget: int = DEFAULT_EVAL_BUDGET,
    workers: int = 1,
) -> tuple[Estimate, str]:
    """Integral of psi(g0 h(s) a(T)) over lo <= s <= hi.

    Composite Gauss-Legendre is used when panels fine enough to resolve the
    bump fit in the evaluation budget; otherwise stratified sampling with two
    points per stratum, whose error is a standard error.
    """
    if hi <= lo:
        return Estimate(0.0, 0.0), "empty"
    if method == "auto":
        n_panels = math.ceil((hi - lo) / _panel_width(psi, T))
        method = "gauss" if 3 * GAUSS_ORDER * n_panels <= eval_budget and samples is None else "stratified"
    if method == "gauss":
        n_panels = max(1, math.ceil((hi - lo) / _panel_width(psi, T)))
        coarse = _gauss(psi, basepoint, T, lo, hi, n_panels)
        fine = _gauss(psi, basepoint, T, lo, hi, 2 * n_panels)
        return Estimate(fine, abs(fine - coarse)), "gauss"
    if method != "stratified":
        raise ValueError(f"unknown method {method!r}")
    return _stratified(psi, basepoint, T, lo, hi, samples or DEFAULT_SAMPLES, seed, workers), "stratified"


def translate_integral(
    psi: TestFunction,
    basepoint: DivergentBasepoint,
    T: float,
    *,
    margin: float = 5.0,
    method: str = "auto",
    samples: int | None = None,
    seed: int = 0,
    workers: int = 1,
    max_error: float | None = None,
) -> TrajectoryIntegral:
    """Integral over s >= 0 of psi(g0 h(s) a(T)), truncated where the cusp certificate holds."""
    if psi.constant:
        raise ValueError("the constant function has no compact support")
    s_max = trajectory_horizon(psi, basepoint, T, margin)
    if psi.amplitude == 0:
        return TrajectoryIntegral(T, 0.0, s_max, 0.0, "zero")
    est, used = integrate_trajectory(
        psi, basepoint, T, 0.0, s_max, method=method, samples=samples, seed=seed, workers=workers
    )
    if max_error is not None and est.error > max_error:
        raise ArithmeticError(f"quadrature error {est.error:.3g} exceeds {max_error:.3g}")
    return TrajectoryIntegral(T, est.value, s_max, est.error, used)


def backward_integral(psi: TestFunction, basepoint: DivergentBasepoint, T: float, *, margin: float = 5.0, **kw) -> TrajectoryIntegral:
    """Integral over s <= 0, with the horizon taken from the reversed basepoint."""
    if psi.constant:
        raise ValueError("the constant function has no compact support")
    s_min = -trajectory_horizon(psi, reversed_basepoint(basepoint), T, margin)
    if psi.amplitude == 0:
        return TrajectoryIntegral(T, 0.0, 0.0, 0.0, "zero", s_min)
    est, used = integrate_trajectory(psi, basepoint, T, s_min, 0.0, **kw)
    return TrajectoryIntegral(T, est.value, 0.0, est.error, used, s_min)


def two_sided_average(psi: TestFunction, basepoint: DivergentBasepoint, T: float, **kw) -> Estimate:
    if T == 0:
        raise ValueError("T must be nonzero")
    fwd = translate_integral(psi, basepoint, T, **kw)
    bwd = backward_integral(psi, basepoint, T, **kw)
    scale = 1.0 / (2 * abs(T))
    return Estimate(scale * (fwd.value + bwd.value), scale * math.hypot(fwd.quadrature_error, bwd.quadrature_error))


def correlation_decay_probe(
    psi1: TestFunction,
    psi2: TestFunction,
    T: float,
    samples: int,
    seed: int = 0,
    max_error: float | None = None,
) -> Estimate:
    """Monte Carlo estimate of the correlation of psi1(g a(T)) and psi2(g), means removed."""
    mu1 = haar_probability_integral(psi1).value
    mu2 = haar_probability_integral(psi2).value
    mean, var = _kernels.correlation_mc(psi1.params(), mu1, psi2.params(), mu2, float(T), samples, seed)
    est = Estimate(mean, math.sqrt(var))
    if max_error is not None and est.error > max_error:
        raise ArithmeticError(f"standard error {est.error:.3g} exceeds {max_error:.3g}")
    return est


@dataclass(frozen=True)
class EquidistRow:
    T: float
    integral: float
    expected: float
    residual: float
    s_max: float
    quad_error: float


def equidist_report(
    psi: TestFunction, basepoint: DivergentBasepoint, schedule, *, samples: int | None = None, seed: int = 0, workers: int = 1
) -> list[EquidistRow]:
    mu = haar_probability_integral(psi).value
    rows = []
    for T in schedule:
        r = translate_integral(psi, basepoint, T, samples=samples, seed=seed, workers=workers)
        expected = abs(T) * mu
        rows.append(EquidistRow(float(T), r.value, expected, r.value - expected, r.s_max, r.quadrature_error))
    return rows


def residual_slope(rows: list[EquidistRow]) -> float:
    """Least-squares slope of |residual| against T."""
    t = np.array([r.T for r in rows])
    res = np.abs([r.residual for r in rows])
    return float(np.polyfit(t, res, 1)[0])
