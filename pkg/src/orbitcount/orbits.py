"""Exact orbits of SL2(Z) on binary quadratic forms and on binary forms of degree 2m.

Actions are by substitution of column vectors, P -> P(a x + b y, c x + d y),
which is a right action: acting by g1 and then g2 equals acting by g1 g2.
A form is stored as its coefficient vector (coefficient of x^(2m-j) y^j at
index j), so every action is a coefficient vector times an integer matrix.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .group import INT_BOUND, GroupElement, IntegerOverflowError, LatticeElement, checked
from .norms import NormSpec

INT64_SAFE = 2**62
DEFAULT_MAX_POINTS = 20_000_000


@dataclass(frozen=True, order=True)
class QuadForm:
    """The binary quadratic form a x^2 + b x y + c y^2."""

    a: int
    b: int
    c: int

    def __post_init__(self) -> None:
        for e in (self.a, self.b, self.c):
            checked(int(e))

    @property
    def disc(self) -> int:
        return int(self.b) ** 2 - 4 * int(self.a) * int(self.c)

    @property
    def coefficients(self) -> tuple[int, int, int]:
        return (int(self.a), int(self.b), int(self.c))

    def __call__(self, x, y):
        return self.a * x * x + self.b * x * y + self.c * y * y


@dataclass(frozen=True, order=True)
class PolyVec:
    """A binary form of degree 2m by its coefficients c_0..c_2m."""

    coefficients: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.coefficients) % 2 == 0 or len(self.coefficients) < 3:
            raise ValueError("a degree-2m form has 2m+1 >= 3 coefficients")
        object.__setattr__(self, "coefficients", tuple(checked(int(c)) for c in self.coefficients))

    @property
    def m(self) -> int:
        return (len(self.coefficients) - 1) // 2

    @classmethod
    def split_power(cls, m: int) -> PolyVec:
        """(x^2 - y^2)^m."""
        coeffs = [0] * (2 * m + 1)
        for i in range(m + 1):
            coeffs[2 * i] = (-1) ** i * math.comb(m, i)
        return cls(tuple(coeffs))


OrbitVector = QuadForm | PolyVec


def coefficients_of(v) -> tuple[int, ...]:
    if isinstance(v, (QuadForm, PolyVec)):
        return v.coefficients
    return tuple(int(c) for c in v)


def _poly_mul(p: list, q: list) -> list:
    out = [0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a:
            for j, b in enumerate(q):
                out[i + j] += a * b
    return out


def poly_action_matrix(g, m: int):
    """Matrix M with (P g) coefficients = (P coefficients) @ M.

    Row j holds the coefficients of (a x + b y)^(2m-j) (c x + d y)^j.  For a
    LatticeElement the result is a nested list of exact ints, otherwise a
    float array.
    """
    exact = isinstance(g, LatticeElement)
    if exact:
        a, b, c, d = g.entries
    elif isinstance(g, GroupElement):
        a, b, c, d = g.a11, g.a12, g.a21, g.a22
    else:
        (a, b), (c, d) = np.asarray(g, dtype=float)
    n = 2 * m
    if not exact:
        rows = []
        for j in range(n + 1):
            r = np.array([1.0])
            for _ in range(n - j):
                r = np.convolve(r, [a, b])
            for _ in range(j):
                r = np.convolve(r, [c, d])
            rows.append(r)
        return np.array(rows)
    rows = []
    for j in range(n + 1):
        r = [1]
        for _ in range(n - j):
            r = _poly_mul(r, [a, b])
        for _ in range(j):
            r = _poly_mul(r, [c, d])
        rows.append([checked(x) for x in r])
    return rows


def _apply_exact(coeffs: Sequence[int], matrix: list) -> tuple[int, ...]:
    n = len(coeffs)
    return tuple(checked(sum(coeffs[j] * matrix[j][i] for j in range(n))) for i in range(n))


def act_poly(P: PolyVec, g: LatticeElement) -> PolyVec:
    return PolyVec(_apply_exact(P.coefficients, poly_action_matrix(g, P.m)))


def act_form(q: QuadForm, g: LatticeElement) -> QuadForm:
    """q -> q(g (x, y)^T); in matrix terms M -> g^T M g."""
    return QuadForm(*_apply_exact(q.coefficients, poly_action_matrix(g, 1)))


def form_to_vector(q: QuadForm) -> tuple[int, int, int]:
    """Integral hyperboloid coordinates (a - c, b, a + c); Q(v) = disc(q)."""
    a, b, c = q.coefficients
    return (checked(a - c), b, checked(a + c))


def vector_to_form(v: Sequence[int]) -> QuadForm:
    x1, x2, x3 = (int(t) for t in v)
    if (x1 + x3) % 2:
        raise ValueError("first and third coordinates must have equal parity")
    return QuadForm((x1 + x3) // 2, x2, (x3 - x1) // 2)


def spin_cover_doubled(g: LatticeElement) -> list[list[int]]:
    """Twice the spin-cover image of an integer matrix, with integer entries."""
    a, b, c, d = g.entries
    aa, bb, cc, dd = a * a, b * b, c * c, d * d
    return [
        [aa - bb - cc + dd, 2 * (a * b - c * d), aa + bb - cc - dd],
        [2 * (a * c - b * d), 2 * (b * c + a * d), 2 * (a * c + b * d)],
        [aa - bb + cc - dd, 2 * (a * b + c * d), aa + bb + cc + dd],
    ]


def vector_act(v: Sequence[int], g: LatticeElement) -> tuple[int, int, int]:
    """Exact v @ spin_cover(g) on the lattice {x1 = x3 mod 2} of form vectors."""
    v = tuple(int(t) for t in v)
    if (v[0] - v[2]) % 2:
        raise ValueError("vector is not in the form lattice (x1 and x3 must share parity)")
    doubled = _apply_exact(v, spin_cover_doubled(g))
    if any(t % 2 for t in doubled):
        raise ArithmeticError("spin-cover image is not integral on this vector")
    return tuple(t // 2 for t in doubled)


def quadratic_value_exact(v: Sequence[int]) -> int:
    return int(v[0]) ** 2 + int(v[1]) ** 2 - int(v[2]) ** 2


class FrontierCapExceeded(MemoryError):
    def __init__(self, cap: int):
        super().__init__(f"orbit enumeration exceeded the cap of {cap} points")
        self.cap = cap


@dataclass(frozen=True)
class OrbitResult:
    """Orbit points of norm < T, as coefficient tuples."""

    points: frozenset
    T: float
    slack: float
    exact: bool = False
    norm_name: str = "sup"
    explored: int = field(default=0, compare=False)

    def __len__(self) -> int:
        return len(self.points)

    def __contains__(self, v) -> bool:
        return coefficients_of(v) in self.points


def _generator_matrices(m: int) -> list[np.ndarray]:
    gens = (LatticeElement.inversion(), LatticeElement.translation(1), LatticeElement.translation(-1))
    return [np.array(poly_action_matrix(g, m), dtype=np.int64) for g in gens]


def _expand(frontier: np.ndarray, gens: list[np.ndarray]) -> np.ndarray:
    gmax = max(int(np.abs(g).max()) for g in gens)
    if frontier.dtype != object:
        fmax = int(np.abs(frontier).max()) if frontier.size else 0
        if fmax * gmax * frontier.shape[1] < INT64_SAFE:
            return np.concatenate([frontier @ g for g in gens])
        frontier = frontier.astype(object)
    out = np.concatenate([frontier @ g.astype(object) for g in gens])
    if out.size and int(np.abs(out).max()) >= INT_BOUND:
        raise IntegerOverflowError("orbit coordinates exceed the 128-bit bound")
    return out


def _expand_parallel(frontier: np.ndarray, gens, workers: int) -> np.ndarray:
    if workers <= 1 or len(frontier) < 4096:
        return _expand(frontier, gens)
    chunks = np.array_split(frontier, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda c: _expand(c, gens), chunks))
    return np.concatenate(parts)


def _bfs(seed: tuple[int, ...], bound: float, norm: NormSpec, strict: bool, max_points: int, workers: int) -> set:
    m = (len(seed) - 1) // 2
    gens = _generator_matrices(m)
    seen = {seed}
    frontier = np.array([seed], dtype=np.int64 if max(map(abs, seed)) < INT64_SAFE else object)
    while len(frontier):
        cand = _expand_parallel(frontier, gens, workers)
        norms = norm.rows(cand)
        keep = cand[norms < bound] if strict else cand[norms <= bound]
        fresh = []
        for row in map(tuple, keep.tolist()):
            if row not in seen:
                seen.add(row)
                fresh.append(row)
        if len(seen) > max_points:
            raise FrontierCapExceeded(max_points)
        if not fresh:
            break
        frontier = np.array(fresh, dtype=keep.dtype)
    return seen


def orbit_points_within(
    v0,
    T: float,
    slack: float = 2.0,
    norm: NormSpec | None = None,
    *,
    max_points: int = DEFAULT_MAX_POINTS,
    workers: int = 1,
) -> OrbitResult:
    """Orbit points of norm < T, found by breadth-first search under S, T and T^-1.

    Words are explored through points of norm < slack * T; generator moves can
    increase the norm before decreasing it, which is what the slack absorbs.
    """
    if slack < 1:
        raise ValueError("slack must be at least 1")
    norm = norm or NormSpec.sup()
    seed = coefficients_of(v0)
    seen = _bfs(seed, slack * T, norm, True, max_points, workers)
    arr = np.array(sorted(seen), dtype=object)
    inside = norm.rows(arr) < T
    points = frozenset(p for p, ok in zip(sorted(seen), inside) if ok)
    return OrbitResult(points, T, slack, False, norm.name, len(seen))


def count_orbit_series(
    v0, thresholds: Sequence[float], slack: float = 2.0, norm: NormSpec | None = None, *, workers: int = 1
) -> np.ndarray:
    """Counts #{v in orbit : |v| < T} for every T in ``thresholds`` from one search."""
    norm = norm or NormSpec.sup()
    ts = np.asarray(sorted(thresholds), dtype=float)
    res = orbit_points_within(v0, float(ts[-1]), slack, norm, workers=workers)
    norms = np.sort(norm.rows(np.array(sorted(res.points), dtype=object)).astype(float))
    counts = np.searchsorted(norms, ts, side="left")
    order = np.argsort(np.argsort(thresholds))
    return counts[order]


def box_enumerate_disc(D: int, T: int, norm: NormSpec | None = None) -> set[QuadForm]:
    """All integral forms of discriminant D with norm <= T, by exhaustive search."""
    norm = norm or NormSpec.sup()
    out: set[QuadForm] = set()
    if T < 1 or D % 4 in (2, 3):
        return out
    for a in range(-T, T + 1):
        for c in range(-T, T + 1):
            b2 = D + 4 * a * c
            if b2 < 0:
                continue
            b = math.isqrt(b2)
            if b * b != b2 or b > T:
                continue
            for bb in {b, -b}:
                if norm((a, bb, c)) <= T:
                    out.add(QuadForm(a, bb, c))
    return out


def count_forms_box(D: int, thresholds: Sequence[float], norm: NormSpec | None = None) -> np.ndarray:
    """#{integral forms of discriminant D with norm <= T} for each T.

    Positive square discriminants with the sup or Euclidean norm use the
    compiled divisor-pair counter; anything else falls back to the exhaustive
    box search.
    """
    norm = norm or NormSpec.sup()
    ts = np.asarray(thresholds, dtype=float)
    order = np.argsort(ts)
    root = math.isqrt(D) if D > 0 else -1
    if root > 0 and root * root == D and norm.name in ("sup", "euclidean") and norm.transform is None:
        counts = _kernels.count_square_disc(root, ts[order], norm.name == "euclidean")
    else:
        forms = box_enumerate_disc(D, int(math.floor(ts.max())), norm)
        norms = np.sort([norm(q.coefficients) for q in forms]) if forms else np.array([])
        counts = np.searchsorted(norms, ts[order], side="right")
    out = np.empty(len(ts), dtype=np.int64)
    out[order] = counts
    return out


@dataclass(frozen=True)
class OrbitPartition:
    """Orbit classes of a point set, valid if the saturation bound was large enough."""

    classes: tuple[frozenset, ...]
    saturation_bound: float
    heuristic: bool = True

    def __len__(self) -> int:
        return len(self.classes)


def orbit_partition(
    points: Iterable, saturation_bound: float, norm: NormSpec | None = None, *, workers: int = 1
) -> OrbitPartition:
    """Group points into orbits by exploring generator moves through norm <= saturation_bound.

    Two points land in the same class when a word joins them without leaving
    the saturation ball, so classes can only be too fine, never too coarse.
    """
    norm = norm or NormSpec.sup()
    pts = sorted(points)
    if not pts:
        return OrbitPartition((), saturation_bound)
    kind = type(pts[0])
    wrap = (lambda t: kind(*t)) if kind is QuadForm else (lambda t: PolyVec(t)) if kind is PolyVec else tuple
    discs = {_disc_of(p) for p in pts}
    if len(discs) > 1:
        raise ValueError("all points must share one discriminant")
    label: dict[tuple, int] = {}
    classes: list[list] = []
    for p in pts:
        key = coefficients_of(p)
        if key in label:
            classes[label[key]].append(p)
            continue
        idx = len(classes)
        classes.append([p])
        for node in _bfs(key, saturation_bound, norm, False, DEFAULT_MAX_POINTS, workers):
            label[node] = idx
    out = tuple(frozenset(wrap(coefficients_of(p)) for p in c) for c in classes)
    return OrbitPartition(out, saturation_bound)


def _disc_of(p) -> int | None:
    if isinstance(p, QuadForm):
        return p.disc
    c = coefficients_of(p)
    if len(c) == 3:
        return c[1] ** 2 - 4 * c[0] * c[2]
    return None


def stabilizer_search(v, bound: int = 10) -> list[LatticeElement]:
    """Elements of SL2(Z) with entries bounded by ``bound`` that fix v."""
    coeffs = coefficients_of(v)
    m = (len(coeffs) - 1) // 2
    found = []
    for g in lattice_elements_within(bound):
        if _apply_exact(coeffs, poly_action_matrix(g, m)) == coeffs:
            found.append(g)
    return found


def lattice_elements_within(bound: int) -> Iterable[LatticeElement]:
    rng = range(-bound, bound + 1)
    for a in rng:
        for b in rng:
            for c in rng:
                if a == 0:
                    if b * c == -1:
                        for d in rng:
                            yield LatticeElement(a, b, c, d)
                    continue
                num = 1 + b * c
                if num % a == 0 and abs(num // a) <= bound:
                    yield LatticeElement(a, b, c, num // a)


def split_form_group(q: QuadForm) -> GroupElement:
    """g in SL2(R) with q(x, y) = (sqrt(D)/2) (x'^2 - y'^2) where (x', y') = g (x, y).

    Factor q into real linear forms L1 L2 with det[L1; L2] = sqrt(D); then
    x' - y' and x' + y' are multiples of L1 and L2.
    """
    D = q.disc
    if D <= 0:
        raise ValueError("only positive discriminants split over R")
    a, b, c = (float(t) for t in q.coefficients)
    r = math.sqrt(D)
    if a != 0:
        r1, r2 = (-b + r) / (2 * a), (-b - r) / (2 * a)
        l1, l2 = np.array([a, -a * r1]), np.array([1.0, -r2])
    else:
        l1, l2 = np.array([0.0, 1.0]), np.array([b, c])
    if l1[0] * l2[1] - l1[1] * l2[0] < 0:
        l1, l2 = l2, l1
    # balance the scaling so that alpha * beta = 2 / sqrt(D)
    det = l1[0] * l2[1] - l1[1] * l2[0]
    n1, n2 = np.linalg.norm(l1), np.linalg.norm(l2)
    alpha = math.sqrt(2 / r * n2 / n1)
    beta = 2 / r / alpha
    row1 = (alpha * l1 + beta * l2) / 2
    row2 = (beta * l2 - alpha * l1) / 2
    g = np.array([row1, row2])
    if abs(det - r) > 1e-9 * max(1.0, r):
        raise ArithmeticError("factorisation lost accuracy")
    return GroupElement.from_matrix(g)


def orbit_rows(points: Iterable, norm: NormSpec | None = None) -> list[tuple]:
    """Sorted (coefficients..., norm) rows for CSV dumps."""
    norm = norm or NormSpec.sup()
    rows = sorted(coefficients_of(p) for p in points)
    return [(*r, norm(r)) for r in rows]


def write_orbit_csv(points: Iterable, path: str | Path, norm: NormSpec | None = None) -> None:
    rows = orbit_rows(points, norm)
    width = len(rows[0]) - 1 if rows else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"c{j}" for j in range(width)] + ["norm"])
        w.writerows(rows)
