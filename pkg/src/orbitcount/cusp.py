"""Cusp neighbourhoods of SL2(Z)\\SL2(R) and certificates for divergent trajectories.

The cusp neighbourhood of depth eta is the set of g with |p g| < eta, where
p = (0, 1) w^-1 is fixed by the unipotent group U.  Along g0 h(s) a(T) the
quantity |p g| has a closed form, which is what the divergence certificate
uses instead of multiplying large matrices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Final, Sequence

import numpy as np

from .group import (
    TWO_PI,
    GroupElement,
    LatticeElement,
    make_a,
    make_h,
    make_k,
    reduce_to_fundamental_domain,
    rotation_w,
)

# Reduced height is at least HEIGHT_CONSTANT / |p g|^2 (see min_reduced_height).
HEIGHT_CONSTANT: Final = 0.5
DEFAULT_ETA0: Final = 0.5


def p_vector() -> np.ndarray:
    return np.array([0.0, 1.0]) @ rotation_w().inverse().matrix


def excursion_norm(g: GroupElement) -> float:
    return float(np.linalg.norm(p_vector() @ g.matrix))


def compute_M1(s0: float, eta: float) -> float:
    if not eta > 0:
        raise ValueError("eta must be positive")
    return -s0 - 2.0 * math.log(eta)


def eta_for_height(y_max: float) -> float:
    """Depth eta whose cusp region lies strictly above reduced height y_max."""
    if not y_max > 0:
        raise ValueError("y_max must be positive")
    return math.sqrt(HEIGHT_CONSTANT / y_max)


def min_reduced_height(g: GroupElement) -> float:
    """Lower bound for the reduced height of g implied by its excursion norm.

    p g is the bottom row of w^-1 g, so |p g|^-2 is the height of w^-1 g(i).
    The integer matrix [[0, -1], [1, -1]] differs from w^-1 by a diagonal
    factor that halves heights, and the reduced point has the largest height
    in its orbit.
    """
    return HEIGHT_CONSTANT / excursion_norm(g) ** 2


def unipotent(k: float) -> GroupElement:
    """Element of U, the unipotent group fixing p and the cusp +1."""
    return GroupElement(1.0 + k, -k, k, 1.0 - k)


@dataclass(frozen=True)
class UHKCoordinates:
    u: GroupElement
    s: float
    theta: float


def uhk_decompose(g: GroupElement) -> UHKCoordinates:
    """Write g = u h(s) k(theta) with u in U and theta in [0, 4pi)."""
    q = p_vector() @ g.matrix
    norm = float(np.linalg.norm(q))
    s = -2.0 * math.log(norm)
    # p k(theta) = (sin((theta - pi/2)/2), cos((theta - pi/2)/2))
    theta = (2.0 * math.atan2(q[0], q[1]) + math.pi / 2) % (2 * TWO_PI)
    u = g @ make_k(-theta) @ make_h(-s)
    return UHKCoordinates(u, s, theta)


def is_unipotent_u(g: GroupElement, tol: float = 1e-9) -> bool:
    k = 0.5 * (g.a21 - g.a12)
    return g.max_abs_diff(unipotent(k)) <= tol * max(1.0, abs(k))


@dataclass(frozen=True)
class CuspData:
    """Cusp representatives sigma and the disjointness depth eta0."""

    sigma: tuple[GroupElement, ...]
    eta0: float = DEFAULT_ETA0
    widths: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not self.sigma:
            raise ValueError("at least one cusp representative is required")
        if not self.eta0 > 0:
            raise ValueError("eta0 must be positive")


def modular_cusp_data(eta0: float = DEFAULT_ETA0) -> CuspData:
    return CuspData((GroupElement.identity(),), eta0, (1,))


def _coset_index(g: LatticeElement, reps: Sequence[LatticeElement], contains) -> int:
    for i, r in enumerate(reps):
        if contains(g @ r.inverse()):
            return i
    return -1


def right_cosets(contains: Callable[[LatticeElement], bool], max_index: int = 10_000) -> list[LatticeElement]:
    """Right coset representatives of a finite-index subgroup, found by closing under S and T."""
    gens = (LatticeElement.inversion(), LatticeElement.translation(1))
    reps = [LatticeElement.identity()]
    i = 0
    while i < len(reps):
        for gen in gens:
            cand = reps[i] @ gen
            if _coset_index(cand, reps, contains) < 0:
                reps.append(cand)
                if len(reps) > max_index:
                    raise RuntimeError("coset enumeration exceeded max_index")
        i += 1
    return reps


def subgroup_cusp_data(contains: Callable[[LatticeElement], bool], eta0: float = DEFAULT_ETA0) -> CuspData:
    """Cusp representatives of a finite-index subgroup containing -I.

    Cusps correspond to orbits of the parabolic generator of U on the right
    cosets; each orbit contributes its first coset representative, and the
    orbit size is the cusp width.
    """
    if not contains(-LatticeElement.identity()):
        raise ValueError("subgroup must contain -I")
    reps = right_cosets(contains)
    parabolic = LatticeElement(2, -1, 1, 0)
    seen = [False] * len(reps)
    sigma: list[GroupElement] = []
    widths: list[int] = []
    for start in range(len(reps)):
        if seen[start]:
            continue
        width = 0
        j = start
        while not seen[j]:
            seen[j] = True
            width += 1
            j = _coset_index(reps[j] @ parabolic, reps, contains)
        sigma.append(reps[start].to_group())
        widths.append(width)
    return CuspData(tuple(sigma), eta0, tuple(widths))


@dataclass(frozen=True)
class DivergentBasepoint:
    """The point Gamma g0 with g0 = sigma0 u h(s0)."""

    sigma0: GroupElement
    u: GroupElement
    s0: float
    reducer: LatticeElement | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        p = p_vector()
        if np.abs(p @ self.u.matrix - p).max() > 1e-9 * max(1.0, float(np.abs(self.u.matrix).max())):
            raise ValueError("u does not fix p")

    @property
    def group_element(self) -> GroupElement:
        return self.sigma0 @ self.u @ make_h(self.s0)

    @property
    def mobius_prefix(self) -> GroupElement:
        """M0 with g0 h(s) a(T) = M0 a(s + s0) w^-1 a(T)."""
        return self.sigma0 @ self.u @ rotation_w()

    def point(self, s: float, T: float) -> GroupElement:
        return self.group_element @ make_h(s) @ make_a(T)


def _rationalize(num: float, den: float, max_denominator: int) -> tuple[int, int] | None:
    """Return (p, q) with num/den = p/q, q >= 0, or (1, 0) for infinity."""
    scale = max(abs(num), abs(den))
    if abs(den) <= 1e-12 * scale:
        return 1, 0
    frac = Fraction(num / den).limit_denominator(max_denominator)
    if abs(float(frac) - num / den) > 1e-9 * max(1.0, abs(num / den)):
        return None
    return frac.numerator, frac.denominator


def _lattice_sending_to_infinity(p: int, q: int) -> LatticeElement:
    if q == 0:
        return LatticeElement.identity()
    # x p + y q = 1
    g, x, y = _ext_gcd(p, q)
    if g != 1:
        raise ValueError("cusp must be in lowest terms")
    return LatticeElement(x, y, -q, p)


def _ext_gcd(a: int, b: int) -> tuple[int, int, int]:
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        k, r = divmod(a, b)
        a, b = b, r
        x0, x1 = x1, x0 - k * x1
        y0, y1 = y1, y0 - k * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def basepoint_from_group(g0: GroupElement, max_denominator: int = 10**6) -> DivergentBasepoint:
    """Rewrite Gamma g0 in the form Gamma sigma0 u h(s0).

    Requires the forward endpoint g0(1) of g0 H to be a cusp (rational or
    infinite).  A lattice element moves that cusp to +1, after which the
    element lies in +-UH.
    """
    m = g0.matrix
    pq = _rationalize(m[0, 0] + m[0, 1], m[1, 0] + m[1, 1], max_denominator)
    if pq is None:
        raise ValueError("forward endpoint is not a rational cusp; trajectory does not diverge")
    to_inf = _lattice_sending_to_infinity(*pq)
    gamma = LatticeElement(1, 0, 1, 1) @ to_inf
    g = gamma @ g0
    sign = 1.0 if g.a11 + g.a22 > 0 else -1.0
    if sign < 0:
        g = -g
    coords = uhk_decompose(g)
    k = make_k(coords.theta)
    if k.max_abs_diff(GroupElement.identity()) > 1e-8:
        raise ValueError("trajectory is not asymptotic to the cusp at +1")
    u = g @ make_h(-coords.s)
    sigma0 = GroupElement(sign, 0.0, 0.0, sign)
    return DivergentBasepoint(sigma0, u, coords.s, gamma)


def canonical_basepoint() -> DivergentBasepoint:
    """Gamma w^-1: the geodesic over the imaginary axis, divergent in both directions."""
    return basepoint_from_group(rotation_w().inverse())


def reversed_basepoint(basepoint: DivergentBasepoint) -> DivergentBasepoint:
    """Basepoint g0 w0 of the same geodesic run backwards.

    Since h(-s) = w0 h(s) w0^-1 and w0^-1 a(T) = a(-T) w0^-1, the backward
    half of g0 h(s) a(T) is the forward half of (g0 w0) h(s) a(-T), up to a
    rotation that does not move the point in the upper half-plane.
    """
    return basepoint_from_group(basepoint.group_element @ make_k(math.pi))


def log_trajectory_excursion(basepoint: DivergentBasepoint, s: float, T: float) -> float:
    """log |p sigma0^-1 g0 h(s) a(T)| = -(s + s0)/2 + log cosh(T)/2, exactly."""
    a = abs(T)
    log_cosh = a + math.log1p(math.exp(-2 * a)) - math.log(2.0)
    return -0.5 * (s + basepoint.s0) + 0.5 * log_cosh


def divergence_certificate(basepoint: DivergentBasepoint, s: float, T: float, eta: float) -> bool:
    """True when g0 h(s) a(T) lies in the cusp region |p g| < eta."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    return log_trajectory_excursion(basepoint, s, T) < math.log(eta)


def horizon(basepoint: DivergentBasepoint, T: float, eta: float, margin: float = 0.0) -> float:
    return abs(T) + compute_M1(basepoint.s0, eta) + margin


def height_ratio_samples(n: int, seed: int = 0, spread: float = 3.0) -> np.ndarray:
    """Empirical y_reduced * |p g|^2 over random group elements (calibrates HEIGHT_CONSTANT)."""
    rng = np.random.default_rng(seed)
    out = np.empty(n)
    for i in range(n):
        s, t, th = rng.uniform(-spread, spread), rng.uniform(-spread, spread), rng.uniform(0, TWO_PI)
        g = make_h(s) @ make_a(t) @ make_k(th)
        out[i] = reduce_to_fundamental_domain(g).y * excursion_norm(g) ** 2
    return out
