"""Compiled inner loops: reduction, bump evaluation, trajectory sampling, counting."""
from __future__ import annotations

import math

import numba
import numpy as np

TWO_PI = 2.0 * math.pi
MAX_STEPS = 10_000

# Parameter layout shared with equidist.TestFunction.params():
# [x0, y0, theta0, rx, ry, rtheta, amplitude, constant_flag]


@numba.njit(cache=True, nogil=True)
def bump(u):
    if abs(u) >= 1.0:
        return 0.0
    return math.exp(1.0 - 1.0 / (1.0 - u * u))


@numba.njit(cache=True, nogil=True)
def reduce_xyt(x, y, th):
    """Reduce into the fundamental domain; returns (x, y, theta, ok)."""
    for _ in range(MAX_STEPS):
        x -= math.floor(x + 0.5)
        r2 = x * x + y * y
        if r2 >= 1.0:
            return x, y, th % TWO_PI, True
        th += 2.0 * math.atan2(y, x)
        x = -x / r2
        y = y / r2
    return x, y, th % TWO_PI, False


@numba.njit(cache=True, nogil=True)
def psi_eval(x, y, th, prm):
    if prm[7] != 0.0:
        return prm[6]
    d = (th - prm[2] + math.pi) % TWO_PI - math.pi
    return prm[6] * bump((x - prm[0]) / prm[3]) * bump((y - prm[1]) / prm[4]) * bump(d / prm[5])


@numba.njit(cache=True, nogil=True)
def trajectory_point(T, s, m0, s0):
    """Reduced coordinates of M0 a(s + s0) w^-1 a(T).

    w^-1 a(T) sends i to -tanh T + i sech T with fibre angle
    2 atan2(-e^{T/2}, e^{-T/2}); a(s + s0) scales the point; M0 acts by
    Mobius transformation with the usual angle cocycle.
    """
    e = math.exp(s + s0)
    zx = -e * math.tanh(T)
    zy = e / math.cosh(T)
    th = 2.0 * math.atan2(-math.exp(0.5 * T), math.exp(-0.5 * T))
    a, b, c, d = m0[0], m0[1], m0[2], m0[3]
    dx = c * zx + d
    dy = c * zy
    n2 = dx * dx + dy * dy
    x = ((a * zx + b) * dx + a * c * zy * zy) / n2
    y = zy / n2
    th += 2.0 * math.atan2(dy, dx)
    return reduce_xyt(x, y, th)


@numba.njit(cache=True, nogil=True)
def trajectory_values(T, s_values, m0, s0, prm):
    out = np.empty(s_values.size)
    for i in range(s_values.size):
        x, y, th, ok = trajectory_point(T, s_values[i], m0, s0)
        if not ok:
            raise RuntimeError("reduction did not terminate")
        out[i] = psi_eval(x, y, th, prm)
    return out


@numba.njit(cache=True, nogil=True)
def stratified_block(T, s_lo, width, n_strata, seed, m0, s0, prm):
    """Two uniform samples per stratum; returns (integral, variance estimate)."""
    np.random.seed(seed)
    total = 0.0
    var = 0.0
    for i in range(n_strata):
        base = s_lo + i * width
        x, y, th, ok = trajectory_point(T, base + np.random.random() * width, m0, s0)
        if not ok:
            raise RuntimeError("reduction did not terminate")
        f1 = psi_eval(x, y, th, prm)
        x, y, th, ok = trajectory_point(T, base + np.random.random() * width, m0, s0)
        if not ok:
            raise RuntimeError("reduction did not terminate")
        f2 = psi_eval(x, y, th, prm)
        total += 0.5 * width * (f1 + f2)
        var += 0.25 * width * width * (f1 - f2) ** 2
    return total, var


@numba.njit(cache=True, nogil=True)
def gauss_panels(T, s_lo, s_hi, n_panels, nodes, weights, m0, s0, prm):
    h = (s_hi - s_lo) / n_panels
    total = 0.0
    for j in range(n_panels):
        mid = s_lo + (j + 0.5) * h
        for q in range(nodes.size):
            x, y, th, ok = trajectory_point(T, mid + 0.5 * h * nodes[q], m0, s0)
            if not ok:
                raise RuntimeError("reduction did not terminate")
            total += 0.5 * h * weights[q] * psi_eval(x, y, th, prm)
    return total


@numba.njit(cache=True, nogil=True)
def _sample_haar(xs, ys, ts, n):
    # x uniform, then y >= sqrt(1 - x^2) with density y^-2 via u = 1/y uniform.
    umax = 2.0 / math.sqrt(3.0)
    i = 0
    while i < n:
        x = np.random.random() - 0.5
        u = np.random.random() * umax
        if u * u * (1.0 - x * x) > 1.0 or u == 0.0:
            continue
        xs[i] = x
        ys[i] = 1.0 / u
        ts[i] = np.random.random() * TWO_PI
        i += 1


@numba.njit(cache=True, nogil=True)
def haar_mc(prm, n, seed):
    np.random.seed(seed)
    xs = np.empty(n)
    ys = np.empty(n)
    ts = np.empty(n)
    _sample_haar(xs, ys, ts, n)
    acc = 0.0
    acc2 = 0.0
    for i in range(n):
        v = psi_eval(xs[i], ys[i], ts[i], prm)
        acc += v
        acc2 += v * v
    mean = acc / n
    return mean, max(acc2 / n - mean * mean, 0.0) / n


@numba.njit(cache=True, nogil=True)
def correlation_mc(prm1, mu1, prm2, mu2, T, n, seed):
    """Mean and variance-of-mean of (psi1(g a(T)) - mu1)(psi2(g) - mu2)."""
    np.random.seed(seed)
    xs = np.empty(n)
    ys = np.empty(n)
    ts = np.empty(n)
    _sample_haar(xs, ys, ts, n)
    eT = math.exp(T)
    acc = 0.0
    acc2 = 0.0
    for i in range(n):
        x, y, th = xs[i], ys[i], ts[i]
        f2 = psi_eval(x, y, th, prm2) - mu2
        # n(x) a(y) k(th) a(T): k(th) moves i to a point zk, a(T) scales first.
        c, s = math.cos(0.5 * th), math.sin(0.5 * th)
        # k(th)(e^T i) = (c e^T i - s) / (s e^T i + c)
        dx, dy = c, s * eT
        n2 = dx * dx + dy * dy
        kx = (-s * c + c * s * eT * eT) / n2
        ky = eT / n2
        th2 = 2.0 * math.atan2(s * math.exp(0.5 * T), c * math.exp(-0.5 * T))
        rx, ry, rt, ok = reduce_xyt(x + y * kx, y * ky, th2)
        f1 = psi_eval(rx, ry, rt, prm1) - mu1
        v = f1 * f2
        acc += v
        acc2 += v * v
    mean = acc / n
    return mean, max(acc2 / n - mean * mean, 0.0) / n


@numba.njit(cache=True)
def smallest_prime_factors(n):
    spf = np.zeros(n + 1, np.int64)
    for i in range(2, n + 1):
        if spf[i] == 0:
            for j in range(i, n + 1, i):
                if spf[j] == 0:
                    spf[j] = i
    return spf


@numba.njit(cache=True)
def _merge_factors(x, spf, primes, exps, k):
    while x > 1:
        p = spf[x]
        e = 0
        while x % p == 0:
            x //= p
            e += 1
        found = False
        for i in range(k):
            if primes[i] == p:
                exps[i] += e
                found = True
                break
        if not found:
            primes[k] = p
            exps[k] = e
            k += 1
    return k


@numba.njit(cache=True)
def _form_norm(a, b, c, euclidean):
    if euclidean:
        return math.sqrt(float(a) * a + float(b) * b + float(c) * c)
    return float(max(abs(a), abs(b), abs(c)))


@numba.njit(cache=True)
def count_square_disc(n, thresholds, euclidean):
    """Forms ax^2+bxy+cy^2 with b^2-4ac = n^2 and norm <= each threshold.

    Writing b = n + 2k turns the equation into ac = k(k+n), so forms are
    divisor pairs of k(k+n); both factors are sieved separately and merged.
    """
    tmax = int(math.floor(thresholds[-1]))
    hist = np.zeros(thresholds.size + 1, np.int64)
    if tmax < 1:
        return np.zeros(thresholds.size, np.int64)
    k_lo = -(n // 2)
    k_hi = (tmax - n) // 2
    if k_hi < k_lo:
        return np.zeros(thresholds.size, np.int64)
    spf = smallest_prime_factors(max(abs(k_lo), abs(k_hi) + n) + 2)
    primes = np.zeros(64, np.int64)
    exps = np.zeros(64, np.int64)
    divs = np.zeros(1 << 16, np.int64)
    for k in range(k_lo, k_hi + 1):
        b = n + 2 * k
        wb = 2 if b > 0 else 1
        prod = k * (k + n)
        if prod == 0:
            for c in range(-tmax, tmax + 1):
                hist[np.searchsorted(thresholds, _form_norm(0, b, c, euclidean))] += wb
            for a in range(-tmax, tmax + 1):
                if a != 0:
                    hist[np.searchsorted(thresholds, _form_norm(a, b, 0, euclidean))] += wb
            continue
        m = abs(prod)
        nf = _merge_factors(abs(k), spf, primes, exps, 0)
        nf = _merge_factors(abs(k + n), spf, primes, exps, nf)
        total = 1
        for i in range(nf):
            total *= exps[i] + 1
        if total > divs.size:
            divs = np.zeros(total, np.int64)
        divs[0] = 1
        nd = 1
        for i in range(nf):
            base = nd
            pw = 1
            for _ in range(exps[i]):
                pw *= primes[i]
                for j in range(base):
                    divs[nd] = divs[j] * pw
                    nd += 1
            exps[i] = 0
        for j in range(nd):
            d = divs[j]
            e = m // d
            if d <= tmax and e <= tmax:
                hist[np.searchsorted(thresholds, _form_norm(d, b, e, euclidean))] += 2 * wb
    return np.cumsum(hist[:-1])
