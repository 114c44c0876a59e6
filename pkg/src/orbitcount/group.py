"""Linear algebra for SL2(R), its integer points, and the spin cover onto SO(2,1).

Real matrices are 64-bit floats. Integer matrices use Python ints with an
explicit entry bound so overflow surfaces as an error instead of silently
wrapping.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Final

import numpy as np

INT_BOUND: Final = 2**127
DET_TOL: Final = 1e-12
MAX_REDUCTION_STEPS: Final = 10_000
TWO_PI: Final = 2.0 * math.pi


class IntegerOverflowError(OverflowError):
    """An exact integer left the supported range of +-2**127."""


def checked(n: int) -> int:
    if not -INT_BOUND < n < INT_BOUND:
        raise IntegerOverflowError(f"integer {n} exceeds the 128-bit bound")
    return n


def _det_tolerance(a11: float, a12: float, a21: float, a22: float) -> float:
    # Rounding in a11*a22 - a12*a21 grows with the size of the two products.
    return DET_TOL * max(1.0, abs(a11 * a22) + abs(a12 * a21))


@dataclass(frozen=True)
class GroupElement:
    """An element of SL2(R) stored as four floats."""

    a11: float
    a12: float
    a21: float
    a22: float

    def __post_init__(self) -> None:
        entries = (self.a11, self.a12, self.a21, self.a22)
        if not all(math.isfinite(e) for e in entries):
            raise ValueError(f"non-finite entries {entries}")
        if abs(self.det - 1.0) > _det_tolerance(*entries):
            raise ValueError(f"determinant {self.det!r} is not 1")

    @classmethod
    def from_matrix(cls, m) -> GroupElement:
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))

    @classmethod
    def normalized(cls, m) -> GroupElement:
        """Rescale a matrix with positive determinant onto SL2(R)."""
        m = np.asarray(m, dtype=float)
        d = float(np.linalg.det(m))
        if d <= 0:
            raise ValueError("matrix must have positive determinant")
        return cls.from_matrix(m / math.sqrt(d))

    @classmethod
    def identity(cls) -> GroupElement:
        return cls(1.0, 0.0, 0.0, 1.0)

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    def __matmul__(self, other: GroupElement) -> GroupElement:
        if isinstance(other, LatticeElement):
            other = other.to_group()
        e = (
            self.a11 * other.a11 + self.a12 * other.a21,
            self.a11 * other.a12 + self.a12 * other.a22,
            self.a21 * other.a11 + self.a22 * other.a21,
            self.a21 * other.a12 + self.a22 * other.a22,
        )
        # Cancellation in ill-conditioned products can push the computed
        # determinant past tolerance; only then project back onto SL2.
        det = e[0] * e[3] - e[1] * e[2]
        if det > 0 and abs(det - 1.0) > _det_tolerance(*e):
            r = math.sqrt(det)
            e = tuple(x / r for x in e)
        return GroupElement(*e)

    def __neg__(self) -> GroupElement:
        return GroupElement(-self.a11, -self.a12, -self.a21, -self.a22)

    def inverse(self) -> GroupElement:
        return GroupElement(self.a22, -self.a12, -self.a21, self.a11)

    def max_abs_diff(self, other: GroupElement) -> float:
        return float(np.abs(self.matrix - other.matrix).max())


@dataclass(frozen=True)
class LatticeElement:
    """An element of SL2(Z) with exact, range-checked integer entries."""

    a11: int
    a12: int
    a21: int
    a22: int

    def __post_init__(self) -> None:
        for e in (self.a11, self.a12, self.a21, self.a22):
            if not isinstance(e, (int, np.integer)) or isinstance(e, bool):
                raise TypeError(f"entry {e!r} is not an integer")
            checked(int(e))
        det = int(self.a11) * int(self.a22) - int(self.a12) * int(self.a21)
        if det != 1:
            raise ValueError(f"determinant {det} is not 1")

    @classmethod
    def identity(cls) -> LatticeElement:
        return cls(1, 0, 0, 1)

    @classmethod
    def inversion(cls) -> LatticeElement:
        """The order-four generator z -> -1/z."""
        return cls(0, -1, 1, 0)

    @classmethod
    def translation(cls, n: int = 1) -> LatticeElement:
        return cls(1, n, 0, 1)

    @property
    def entries(self) -> tuple[int, int, int, int]:
        return (int(self.a11), int(self.a12), int(self.a21), int(self.a22))

    def __matmul__(self, other):
        if isinstance(other, GroupElement):
            return self.to_group() @ other
        a, b, c, d = self.entries
        e, f, g, h = other.entries
        return LatticeElement(
            checked(a * e + b * g),
            checked(a * f + b * h),
            checked(c * e + d * g),
            checked(c * f + d * h),
        )

    def __neg__(self) -> LatticeElement:
        a, b, c, d = self.entries
        return LatticeElement(-a, -b, -c, -d)

    def inverse(self) -> LatticeElement:
        a, b, c, d = self.entries
        return LatticeElement(d, -b, -c, a)

    def canonical(self) -> LatticeElement:
        """Representative of the coset +-I gamma whose first nonzero entry is positive."""
        first = next(e for e in self.entries if e != 0)
        return self if first > 0 else -self

    def to_group(self) -> GroupElement:
        return GroupElement(*(float(e) for e in self.entries))

    def __repr__(self) -> str:
        a, b, c, d = self.entries
        return f"LatticeElement([[{a}, {b}], [{c}, {d}]])"


def _is_q_preserving(m: np.ndarray, tol: float) -> bool:
    j = np.diag([1.0, 1.0, -1.0])
    return bool(np.abs(m @ j @ m.T - j).max() <= tol)


@dataclass(frozen=True, eq=False)
class SO21Element:
    """A 3x3 matrix acting on row vectors and preserving x1^2 + x2^2 - x3^2."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("expected a 3x3 matrix")
        scale = max(1.0, float(np.abs(m).max()) ** 2)
        if not _is_q_preserving(m, 1e-9 * scale):
            raise ValueError("matrix does not preserve the quadratic form")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __matmul__(self, other: SO21Element) -> SO21Element:
        return SO21Element(self.matrix @ other.matrix)

    def act(self, v) -> np.ndarray:
        return np.asarray(v, dtype=float) @ self.matrix


def quadratic_value(v) -> float:
    v = np.asarray(v)
    return v[..., 0] ** 2 + v[..., 1] ** 2 - v[..., 2] ** 2


@dataclass(frozen=True)
class CartanCoordinates:
    """Coordinates with g = sign * h(s) a(t) k(theta)."""

    s: float
    t: float
    theta: float
    sign: int

    def recompose(self) -> GroupElement:
        g = make_h(self.s) @ make_a(self.t) @ make_k(self.theta)
        return g if self.sign > 0 else -g


@dataclass(frozen=True)
class FundamentalPoint:
    """A point of SL2(Z)\\SL2(R): reduced upper half-plane point plus fibre angle.

    ``reducer`` is the lattice element carrying the input to this point.
    """

    x: float
    y: float
    theta: float
    reducer: LatticeElement

    def __post_init__(self) -> None:
        if abs(self.x) > 0.5 + 1e-12 or self.x * self.x + self.y * self.y < 1.0 - 1e-12:
            raise ValueError(f"({self.x}, {self.y}) is outside the fundamental domain")

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)


def make_h(s: float) -> GroupElement:
    return GroupElement(math.cosh(s / 2), math.sinh(s / 2), math.sinh(s / 2), math.cosh(s / 2))


def make_a(t: float) -> GroupElement:
    return GroupElement(math.exp(t / 2), 0.0, 0.0, math.exp(-t / 2))


def make_k(theta: float) -> GroupElement:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    if theta == math.pi:
        c, s = 0.0, 1.0
    return GroupElement(c, -s, s, c)


def rotation_w() -> GroupElement:
    """Rotation by pi/4 conjugating the diagonal flow onto h: h(s) = w a(s) w^-1."""
    r = math.sqrt(0.5)
    return GroupElement(r, -r, r, r)


def weyl_w0() -> GroupElement:
    return make_k(math.pi)


def spin_cover_matrix(a: float, b: float, c: float, d: float) -> np.ndarray:
    aa, bb, cc, dd = a * a, b * b, c * c, d * d
    return np.array(
        [
            [(aa - bb - cc + dd) / 2, a * b - c * d, (aa + bb - cc - dd) / 2],
            [a * c - b * d, b * c + a * d, a * c + b * d],
            [(aa - bb + cc - dd) / 2, a * b + c * d, (aa + bb + cc + dd) / 2],
        ]
    )


def spin_cover(g: GroupElement) -> SO21Element:
    """Image of g in SO(2,1), acting on row vectors; kernel is +-I."""
    return SO21Element(spin_cover_matrix(g.a11, g.a12, g.a21, g.a22))


def cartan_decompose(g: GroupElement) -> CartanCoordinates:
    """Write g = sign * h(s) a(t) k(theta) with theta in [0, 2pi).

    The first row of the spin-cover image is the orbit point
    (cosh t cos theta, -cosh t sin theta, sinh t), which fixes t and theta;
    the remaining factor g k(-theta) a(-t) is +-h(s).
    """
    r = spin_cover_matrix(g.a11, g.a12, g.a21, g.a22)[0]
    t = math.asinh(r[2])
    theta = math.atan2(-r[1], r[0]) % TWO_PI
    m = (g @ make_k(-theta) @ make_a(-t)).matrix
    sign = 1 if m[0, 0] + m[1, 1] > 0 else -1
    m = sign * m
    s = 2.0 * math.asinh(0.5 * (m[0, 1] + m[1, 0]))
    return CartanCoordinates(s, t, theta, sign)


def mobius_act(g: GroupElement, z: complex) -> complex:
    if not z.imag > 0:
        raise ValueError(f"{z} is not in the upper half-plane")
    den = g.a21 * z + g.a22
    x, y = z.real, z.imag
    n2 = abs(den) ** 2
    # Im from the determinant identity avoids cancellation when g is large.
    re = ((g.a11 * x + g.a12) * (g.a21 * x + g.a22) + g.a11 * g.a21 * y * y) / n2
    return complex(re, y / n2)


def iwasawa(g: GroupElement) -> tuple[float, float, float]:
    """(x, y, theta) with g = n(x) a(log y) k(theta), theta taken mod 2pi."""
    z = mobius_act(g, 1j)
    theta = (2.0 * math.atan2(g.a21, g.a22)) % TWO_PI
    return z.real, z.imag, theta


def reduce_point(x: float, y: float, theta: float) -> FundamentalPoint:
    """Move (x, y, theta) into the standard fundamental domain, tracking the word."""
    if not y > 0:
        raise ValueError("y must be positive")
    gamma = LatticeElement.identity()
    inv = LatticeElement.inversion()
    for _ in range(MAX_REDUCTION_STEPS):
        n = math.floor(x + 0.5)
        if n:
            x -= n
            gamma = LatticeElement.translation(-n) @ gamma
        r2 = x * x + y * y
        if r2 >= 1.0:
            break
        theta += 2.0 * math.atan2(y, x)
        x, y = -x / r2, y / r2
        gamma = inv @ gamma
    else:
        raise RuntimeError("reduction did not terminate")
    return FundamentalPoint(x, y, theta % TWO_PI, gamma)


def reduce_to_fundamental_domain(g: GroupElement) -> FundamentalPoint:
    return reduce_point(*iwasawa(g))
