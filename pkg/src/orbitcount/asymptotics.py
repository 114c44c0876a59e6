"""Constants in the orbit-counting asymptotics and least-squares fits of counts.

Volumes use the measure cosh(t) ds dt dtheta/(2 pi) in the coordinates
g = +-h(s) a(t) k(theta), where k(theta) for theta in [0, 2pi) covers
SO(2)/{+-I}.  ``haar_kappa`` relates it to dx dy/y^2 dtheta/(2 pi) in
Iwasawa coordinates; the two agree exactly, which the numerical Jacobian
confirms.
"""
from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

from .group import TWO_PI, iwasawa, make_a, make_h, make_k, spin_cover_matrix
from .norms import NormSpec
from .orbits import PolyVec, coefficients_of, poly_action_matrix

PI_OVER_3 = math.pi / 3


class QuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SectorSpec:
    """A finite union of closed angle intervals inside [0, 2pi]."""

    intervals: tuple[tuple[float, float], ...]
    description: str = ""

    def __post_init__(self) -> None:
        clean = []
        for a, b in self.intervals:
            a, b = float(a), float(b)
            if not (0.0 <= a <= b <= TWO_PI + 1e-12):
                raise ValueError(f"interval ({a}, {b}) must satisfy 0 <= a <= b <= 2pi")
            if b > a:
                clean.append((a, min(b, TWO_PI)))
        object.__setattr__(self, "intervals", tuple(sorted(clean)))

    @classmethod
    def full(cls) -> SectorSpec:
        return cls(((0.0, TWO_PI),), "full circle")

    @classmethod
    def empty(cls) -> SectorSpec:
        return cls((), "empty")

    @classmethod
    def parse(cls, text: str) -> SectorSpec:
        """Parse "a1,b1;a2,b2"; an interval with a > b wraps through 0."""
        parts = []
        for chunk in filter(None, (c.strip() for c in text.split(";"))):
            a, b = (float(x) for x in chunk.split(","))
            if a > b:
                parts += [(a, TWO_PI), (0.0, b)]
            else:
                parts.append((a, b))
        return cls(tuple(parts), text)

    @classmethod
    def from_indicator(cls, indicator: Callable[[float], bool], grid: int = 4096, description: str = "") -> SectorSpec:
        """Locate the intervals of an indicator by a grid scan plus bisection at each switch."""
        ts = np.linspace(0.0, TWO_PI, grid + 1)
        vals = [bool(indicator(t)) for t in ts]
        edges = []
        for i in range(grid):
            if vals[i] != vals[i + 1]:
                lo, hi = ts[i], ts[i + 1]
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    if bool(indicator(mid)) == vals[i]:
                        lo = mid
                    else:
                        hi = mid
                edges.append(0.5 * (lo + hi))
        bounds = [0.0, *edges, TWO_PI]
        inside = vals[0]
        out = []
        for a, b in zip(bounds[:-1], bounds[1:]):
            if inside:
                out.append((a, b))
            inside = not inside
        return cls(tuple(out), description)

    def theta_indicator(self, theta: float) -> bool:
        return any(a <= theta <= b for a, b in self.intervals)

    @property
    def measure(self) -> float:
        return sum(b - a for a, b in self.intervals)


def v_plus(d: float) -> np.ndarray:
    if not d > 0:
        raise ValueError("d must be positive")
    return 0.5 * math.sqrt(d) * np.array([1.0, 0.0, 1.0])


def v_minus(d: float) -> np.ndarray:
    if not d > 0:
        raise ValueError("d must be positive")
    return 0.5 * math.sqrt(d) * np.array([1.0, 0.0, -1.0])


def _resolve_action(dim: int, m: int, action: str | None) -> str:
    if action is None:
        action = "spin" if (m == 1 and dim == 3) else "poly"
    if action == "spin" and (dim != 3 or m != 1):
        raise ValueError("the spin action needs 3-vectors and m = 1")
    if action == "poly" and dim != 2 * m + 1:
        raise ValueError(f"degree-{2 * m} forms have {2 * m + 1} coefficients, got {dim}")
    if action not in ("spin", "poly"):
        raise ValueError(f"unknown action {action!r}")
    return action


def rotation_action(theta: float, m: int, action: str) -> np.ndarray:
    """Matrix of k(theta) on row vectors in the chosen representation."""
    if action == "spin":
        c, s = math.cos(theta), math.sin(theta)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return poly_action_matrix(make_k(theta), m)


def diagonal_action(t: float, m: int, action: str) -> np.ndarray:
    if action == "spin":
        return spin_cover_matrix(math.exp(t / 2), 0.0, 0.0, math.exp(-t / 2))
    return np.diag([math.exp(t * (m - j)) for j in range(2 * m + 1)])


def highest_weight_component(v0, m: int = 1, action: str | None = None) -> np.ndarray:
    """lim e^{-mt} v0 a(t): the part of v0 that dominates along the diagonal flow."""
    if isinstance(v0, PolyVec) and action is None:
        action = "poly"
    v = np.asarray(coefficients_of(v0) if isinstance(v0, PolyVec) else v0, dtype=float)
    action = _resolve_action(v.size, m, action)
    out = np.zeros_like(v)
    if action == "spin":
        out[[0, 2]] = 0.5 * (v[0] + v[2])
    else:
        out[0] = v[0]
    if not np.any(out):
        raise ValueError("v0 has no highest-weight component")
    return out


def v0_plus_limit(v0, norm: NormSpec, m: int | None = None, action: str | None = None, tol: float = 1e-10) -> np.ndarray:
    """Limit direction of v0 a(t) / |v0 a(t)| as t grows, found by doubling t."""
    if isinstance(v0, PolyVec) and action is None:
        action = "poly"
    v = np.asarray(coefficients_of(v0) if isinstance(v0, PolyVec) else v0, dtype=float)
    m = m or (v.size - 1) // 2
    action = _resolve_action(v.size, m, action)
    highest_weight_component(v, m, action)

    def direction(t: float) -> np.ndarray:
        if action == "spin":
            # e^{-t} v a(t), written without overflow
            w = np.array(
                [
                    v[0] * 0.5 * (1 + math.exp(-2 * t)) + v[2] * 0.5 * (1 - math.exp(-2 * t)),
                    v[1] * math.exp(-t),
                    v[0] * 0.5 * (1 - math.exp(-2 * t)) + v[2] * 0.5 * (1 + math.exp(-2 * t)),
                ]
            )
        else:
            w = v * np.exp(-t * np.arange(v.size))
        return w / norm(w)

    prev = direction(1.0)
    t = 2.0
    while t <= 1024:
        cur = direction(t)
        if np.abs(cur - prev).max() < tol:
            return cur
        prev, t = cur, 2 * t
    raise ArithmeticError("limit direction did not converge")


def _kinks(components: Callable[[float], np.ndarray], a: float, b: float, grid: int = 2048) -> list[float]:
    ts = np.linspace(a, b, grid + 1)
    vals = np.abs(np.array([components(t) for t in ts]))
    idx = vals.argmax(axis=1)
    out = []
    for i in np.nonzero(idx[1:] != idx[:-1])[0]:
        j, k = idx[i], idx[i + 1]

        def gap(t, j=j, k=k):
            c = np.abs(components(t))
            return c[j] - c[k]

        lo, hi = ts[i], ts[i + 1]
        if gap(lo) * gap(hi) < 0:
            out.append(optimize.brentq(gap, lo, hi, xtol=1e-15, rtol=8.9e-16))
        else:
            out.append(0.5 * (lo + hi))
    return out


def boundary_integral(
    v0_plus,
    m: int,
    norm: NormSpec,
    sector: SectorSpec | None = None,
    *,
    action: str | None = None,
    tol: float = 1e-10,
    limit: int = 2000,
) -> float:
    """(1/2pi) * integral over the sector of |v0_plus k(theta)|^(-1/m).

    Sup-norm corners are located first and passed to the adaptive integrator
    as breakpoints so that every panel sees a smooth integrand.
    """
    sector = SectorSpec.full() if sector is None else sector
    v = np.asarray(v0_plus, dtype=float)
    action = _resolve_action(v.size, m, action)
    if not sector.intervals:
        return 0.0

    def comps(theta: float) -> np.ndarray:
        return norm.components(v @ rotation_action(theta, m, action))

    def f(theta: float) -> float:
        n = norm.evaluator(comps(theta)).item()
        if not n > 0:
            raise ValueError("norm vanishes on the boundary orbit")
        return n ** (-1.0 / m)

    budget = tol * TWO_PI / len(sector.intervals)
    total = 0.0
    for a, b in sector.intervals:
        pts = _kinks(comps, a, b) if norm.piecewise else []
        pts = [p for p in pts if a < p < b]
        val, err, *_ = integrate.quad(
            f, a, b, points=pts or None, epsabs=0.1 * budget, epsrel=0.0, limit=max(limit, 2 * len(pts) + 50), full_output=1
        )
        if err > budget:
            raise QuadratureError(f"error estimate {err:.3g} exceeds tolerance on ({a}, {b})")
        total += val
    return total / TWO_PI


def _kappa_at(s: float, t: float, theta: float, step: float) -> float:
    def chart(p: np.ndarray) -> np.ndarray:
        return np.array(iwasawa(make_h(p[0]) @ make_a(p[1]) @ make_k(p[2])))

    def jacobian(h: float) -> np.ndarray:
        base = np.array([s, t, theta])
        cols = []
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            d = chart(base + e) - chart(base - e)
            d[2] = (d[2] + math.pi) % TWO_PI - math.pi
            cols.append(d / (2 * h))
        return np.array(cols).T

    j = (4 * jacobian(step / 2) - jacobian(step)) / 3
    y = chart(np.array([s, t, theta]))[1]
    return math.cosh(t) * y * y / abs(np.linalg.det(j))


def kappa_samples(samples: int = 12, step: float = 1e-3, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    pts = np.column_stack([rng.uniform(-1.5, 1.5, samples), rng.uniform(-1.5, 1.5, samples), rng.uniform(0, TWO_PI, samples)])
    return np.array([_kappa_at(*p, step) for p in pts])


@functools.lru_cache(maxsize=None)
def haar_kappa(samples: int = 12, step: float = 1e-3) -> float:
    """Density of the hak measure relative to the Iwasawa measure, by numerical Jacobians."""
    vals = kappa_samples(samples, step)
    mean = float(vals.mean())
    spread = float((vals.max() - vals.min()) / mean)
    if spread >= 1e-6:
        raise ArithmeticError(f"kappa varies across sample points (relative spread {spread:.2e})")
    return mean


@functools.lru_cache(maxsize=None)
def fundamental_area() -> float:
    """Hyperbolic area of {|x| <= 1/2, x^2 + y^2 >= 1} by 2-D quadrature of y^-2."""
    val, _ = integrate.dblquad(
        lambda y, x: y**-2, -0.5, 0.5, lambda x: math.sqrt(1 - x * x), lambda x: math.inf, epsabs=1e-13, epsrel=1e-13
    )
    return val


def vol_gamma_g(index: int = 1) -> float:
    if index < 1:
        raise ValueError("index must be a positive integer")
    return haar_kappa() * fundamental_area() * index


@dataclass(frozen=True)
class HaarNormalization:
    kappa: float
    area: float
    vol_gamma_g: float


def haar_normalization(index: int = 1) -> HaarNormalization:
    return HaarNormalization(haar_kappa(), fundamental_area(), vol_gamma_g(index))


def _ball_interval(T: float, d: float, theta: float, norm: NormSpec) -> tuple[float, float] | None:
    c, s = math.cos(theta), math.sin(theta)
    root = math.sqrt(d)

    def f(t: float) -> float:
        return norm(root * np.array([math.cosh(t) * c, -math.cosh(t) * s, math.sinh(t)])) - T

    # t -> |v0 a(t) k| is convex, so the sublevel set is an interval; any
    # interior point brackets both ends.
    t0 = 0.0
    if f(t0) >= 0:
        res = optimize.minimize_scalar(f, bounds=(-60.0, 60.0), method="bounded", options={"xatol": 1e-12})
        t0 = float(res.x)
        if f(t0) >= 0:
            return None
    hi = t0 + 1.0
    while f(hi) < 0:
        hi = t0 + 2 * (hi - t0)
    lo = t0 - 1.0
    while f(lo) < 0:
        lo = t0 - 2 * (t0 - lo)
    kw = dict(xtol=1e-15, rtol=8.9e-16, maxiter=500)
    return optimize.brentq(f, lo, t0, **kw), optimize.brentq(f, t0, hi, **kw)


def vol_ball(T: float, d: float = 1.0, norm: NormSpec | None = None, *, tol: float = 1e-9) -> float:
    """Measure of {g in H\\G : |v0 g| < T} with v0 = (sqrt d, 0, 0) on the hyperboloid.

    The t-integral of cosh is done exactly, leaving a quadrature over theta of
    sinh(t_plus) - sinh(t_minus).
    """
    norm = norm or NormSpec.euclidean()
    if not T > norm(np.array([math.sqrt(d), 0.0, 0.0])):
        raise ValueError("T must exceed the norm of v0")

    def inner(theta: float) -> float:
        iv = _ball_interval(T, d, theta, norm)
        return 0.0 if iv is None else math.sinh(iv[1]) - math.sinh(iv[0])

    pts = [k * math.pi / 4 for k in range(1, 8)]
    if norm.piecewise:
        root = math.sqrt(d)
        for side in (0, 1):

            def endpoint(theta: float, side=side) -> np.ndarray:
                iv = _ball_interval(T, d, theta, norm)
                t = 0.0 if iv is None else iv[side]
                c, s = math.cos(theta), math.sin(theta)
                return norm.components(root * np.array([math.cosh(t) * c, -math.cosh(t) * s, math.sinh(t)]))

            pts += _kinks(endpoint, 0.0, TWO_PI, grid=256)
        pts = sorted({p for p in pts if 0.0 < p < TWO_PI})
    val, err = integrate.quad(inner, 0.0, TWO_PI, points=pts, epsabs=tol * T, epsrel=1e-10, limit=400)
    if err > 10 * tol * T + 1e-12 * abs(val):
        raise QuadratureError(f"vol_ball quadrature error {err:.3g}")
    return val / TWO_PI


def predicted_coefficient(
    m: int,
    norm: NormSpec,
    sector: SectorSpec | None = None,
    stab_order: int = 2,
    vol: float | None = None,
    *,
    v_top=None,
    action: str | None = None,
) -> float:
    """Coefficient c of T^(1/m) log T in the predicted main term.

    ``v_top`` is the unnormalised highest-weight component of v0; it defaults
    to that of (x^2 - y^2)^m for the form action and to v_plus(1) for the
    hyperboloid action.
    """
    if stab_order < 1:
        raise ValueError("stab_order must be positive")
    vol = vol_gamma_g() if vol is None else vol
    if v_top is None:
        if action == "spin":
            v_top = v_plus(1.0)
        else:
            action = "poly"
            v_top = highest_weight_component(PolyVec.split_power(m), m, "poly")
    integral = boundary_integral(v_top, m, norm, sector, action=action)
    return 4.0 * integral / (stab_order * vol) / m


def predicted_count(
    T: float,
    m: int,
    norm: NormSpec,
    sector: SectorSpec | None = None,
    stab_order: int = 2,
    vol: float | None = None,
    *,
    v_top=None,
    action: str | None = None,
) -> float:
    """4 I / (|stab| vol) * (log T / m) * T^(1/m), with I the boundary integral."""
    if not T > 1:
        raise ValueError("T must exceed 1")
    c = predicted_coefficient(m, norm, sector, stab_order, vol, v_top=v_top, action=action)
    return c * math.log(T) * T ** (1.0 / m)


@dataclass(frozen=True)
class CountSeries:
    T: tuple[float, ...]
    N: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.T) != len(self.N):
            raise ValueError("T and N must have equal length")

    @classmethod
    def from_csv(cls, path: str | Path) -> CountSeries:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        return cls(tuple(float(r["T"]) for r in rows), tuple(float(r["N"]) for r in rows))

    def window(self, lo: float, hi: float) -> CountSeries:
        keep = [(t, n) for t, n in zip(self.T, self.N) if lo <= t <= hi]
        return CountSeries(tuple(t for t, _ in keep), tuple(n for _, n in keep))


@dataclass(frozen=True)
class FitResult:
    c: float
    c_prime: float
    residual: float
    window: tuple[float, float]


def fit_asymptotic(series: CountSeries, m: int = 1) -> FitResult:
    """Least squares N(T) ~ c T^(1/m) log T + c' T^(1/m).

    Dividing by T^(1/m) turns the model into a straight line in log T, which
    keeps the normal equations well conditioned across many decades.
    """
    T = np.asarray(series.T, dtype=float)
    N = np.asarray(series.N, dtype=float)
    if len(np.unique(T)) < 4:
        raise ValueError("need at least 4 distinct T values")
    if np.any(T <= 1):
        raise ValueError("T values must exceed 1")
    scale = T ** (1.0 / m)
    design = np.column_stack([np.log(T), np.ones_like(T)])
    coef, _, rank, _ = np.linalg.lstsq(design, N / scale, rcond=None)
    if rank < 2:
        raise np.linalg.LinAlgError("singular design matrix")
    c, cp = (float(x) for x in coef)
    leading = c * scale * np.log(T)
    resid = N - (leading + cp * scale)
    rel = float(np.sqrt(np.mean((resid / leading) ** 2))) if c != 0 else math.inf
    return FitResult(c, cp, rel, (float(T.min()), float(T.max())))


def windowed_fits(series: CountSeries, m: int = 1, factor: float = 10.0) -> list[FitResult]:
    """Fits on successive windows [T0, factor*T0], [factor*T0, factor^2*T0], ..."""
    lo = min(series.T)
    top = max(series.T)
    out = []
    while lo * factor <= top * (1 + 1e-12):
        out.append(fit_asymptotic(series.window(lo * (1 - 1e-12), lo * factor * (1 + 1e-12)), m))
        lo *= factor
    return out


def smoothed_count(
    points: Sequence,
    T: float,
    m: int,
    eps: float,
    samples: int = 256,
    seed: int = 0,
    norm: NormSpec | None = None,
) -> float:
    """Mollified count: mean over g near I (bump weights, radius eps) of #{v : |v g| < T}."""
    norm = norm or NormSpec.sup()
    if not eps > 0:
        raise ValueError("eps must be positive")
    rng = np.random.default_rng(seed)
    arr = np.array([coefficients_of(p) for p in points], dtype=float)
    total = 0.0
    weight = 0.0
    for _ in range(samples):
        u = rng.uniform(-1, 1, 3)
        w = float(np.prod(np.exp(1 - 1 / (1 - u * u))))
        g = make_h(eps * u[0]) @ make_a(eps * u[1]) @ make_k(eps * u[2])
        total += w * int(np.count_nonzero(norm.rows(arr @ poly_action_matrix(g, m)) < T))
        weight += w
    return total / weight
