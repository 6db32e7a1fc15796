"""Compactly supported kernels of arbitrary order, anisotropic product and
convolved kernel evaluation, and the bandwidth lattices used by the estimators.

All base kernels live on [-1/2, 1/2], are symmetric, and integrate to one.
An order-k kernel additionally has vanishing moments through degree k.  The
order-1 default is the triangle kernel 2(1-2|x|)_+; higher orders are even
polynomials multiplied by (1 - 4x^2) so they stay Lipschitz on the closed
support.  Kernels are stored as exact piecewise polynomials, which lets both
moment checks and one-dimensional convolutions be computed by panel-split
Gauss-Legendre quadrature that is exact up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import EmptyGridError, KernelConstructionError

__all__ = [
    "KernelSpec",
    "Bandwidth",
    "make_kernel",
    "kernel_moment",
    "eval_product",
    "eval_convolved",
    "convolved_1d",
    "grid_HT",
    "grid_scriptHT",
]


# ---------------------------------------------------------------------------
# kernel representation


@dataclass(frozen=True)
class KernelSpec:
    """A symmetric base kernel on [-1/2, 1/2] stored as piecewise polynomials.

    ``breaks`` partitions the support; ``coeffs[i]`` holds ascending-power
    polynomial coefficients valid on [breaks[i], breaks[i+1]].  The kernel is
    zero outside [-1/2, 1/2].
    """

    order: int
    breaks: tuple = field(repr=False)
    coeffs: tuple = field(repr=False)
    lipschitz_const: float = 0.0
    sup_norm: float = 0.0
    l1_norm: float = 1.0
    moment_residuals: tuple = field(default=(), repr=False)

    @property
    def degree(self) -> int:
        return max(len(c) - 1 for c in self.coeffs)

    @property
    def interior_breaks(self) -> tuple:
        return tuple(b for b in self.breaks[1:-1])

    def __call__(self, u):
        return self.evaluator(u)

    def evaluator(self, u):
        """Vectorized kernel evaluation, zero outside the support."""
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        inside = np.abs(u) <= 0.5
        if not inside.any():
            return out
        ui = u[inside]
        vals = np.zeros_like(ui)
        # right-closed intervals keep interior boundaries unambiguous; the
        # pieces agree at shared breakpoints so the choice is cosmetic
        idx = np.clip(np.searchsorted(self.breaks, ui, side="right") - 1, 0,
                      len(self.coeffs) - 1)
        for i, c in enumerate(self.coeffs):
            m = idx == i
            if m.any():
                vals[m] = np.polynomial.polynomial.polyval(ui[m], np.asarray(c))
        out[inside] = vals
        return out


@dataclass(frozen=True)
class Bandwidth:
    """Anisotropic multi-bandwidth h in (0,1)^d."""

    h: tuple

    def __post_init__(self):
        h = tuple(float(v) for v in np.atleast_1d(np.asarray(self.h, dtype=float)))
        object.__setattr__(self, "h", h)
        if not all(0.0 < v < 1.0 for v in h):
            raise ValueError(f"bandwidth entries must lie in (0,1), got {h}")

    @property
    def d(self) -> int:
        return len(self.h)

    @property
    def volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def log_inv_sum(self) -> float:
        return float(np.log(np.sum(1.0 / np.asarray(self.h))))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.h, dtype=float)


# ---------------------------------------------------------------------------
# construction


def _solve_fraction_system(a, b):
    """Exact Gaussian elimination over Fractions. a: list of rows, b: rhs."""
    n = len(b)
    a = [row[:] for row in a]
    b = b[:]
    for col in range(n):
        piv = next(r for r in range(col, n) if a[r][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        b[col], b[piv] = b[piv], b[col]
        inv = Fraction(1) / a[col][col]
        a[col] = [v * inv for v in a[col]]
        b[col] = b[col] * inv
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [v - f * w for v, w in zip(a[r], a[col])]
                b[r] = b[r] - f * b[col]
    return b


def _poly_kernel_coeffs(order):
    """Even polynomial kernel (1-4x^2) * sum_j c_j x^(2j) with exact moments.

    Returns ascending-power coefficients on [-1/2, 1/2].  The moment system is
    solved over the rationals so the vanishing moments hold to rounding error.
    """
    J = order // 2

    def mu(level):
        # integral of x^(2*level) (1 - 4x^2) over [-1/2, 1/2]
        return Fraction(2, (2 * level + 1) * (2 * level + 3)) / Fraction(4) ** level

    rows = [[mu(i + j) for j in range(J + 1)] for i in range(J + 1)]
    rhs = [Fraction(1 if i == 0 else 0) for i in range(J + 1)]
    c = _solve_fraction_system(rows, rhs)
    # expand (1 - 4x^2) * sum c_j x^(2j): coefficient of x^(2j) is c_j - 4 c_{j-1}
    full = [Fraction(0)] * (2 * J + 3)
    for j in range(J + 2):
        cj = c[j] if j <= J else Fraction(0)
        cjm = c[j - 1] if 1 <= j <= J + 1 else Fraction(0)
        full[2 * j] = cj - 4 * cjm
    return tuple(float(v) for v in full)


def _piece_moment(lo, hi, coeffs, power):
    """Exact integral of x^power * poly over [lo, hi] via the antiderivative."""
    c = np.zeros(len(coeffs) + power)
    c[power:] = coeffs
    anti = np.polynomial.polynomial.polyint(c)
    return float(np.polynomial.polynomial.polyval(hi, anti)
                 - np.polynomial.polynomial.polyval(lo, anti))


def kernel_moment(spec: KernelSpec, power: int) -> float:
    """Integral of x^power * k(x) over the support, exact up to rounding."""
    return sum(_piece_moment(spec.breaks[i], spec.breaks[i + 1], spec.coeffs[i], power)
               for i in range(len(spec.coeffs)))


def _poly_extrema(coeffs, lo, hi):
    c = np.asarray(coeffs, dtype=float)
    der = np.polynomial.polynomial.polyder(c)
    pts = [lo, hi]
    if len(der) > 1:
        roots = np.polynomial.polynomial.polyroots(der)
        pts += [float(r.real) for r in roots
                if abs(r.imag) < 1e-12 and lo - 1e-12 <= r.real <= hi + 1e-12]
    vals = np.polynomial.polynomial.polyval(np.asarray(pts), c)
    return pts, vals


def make_kernel(order: int) -> KernelSpec:
    """Build the order-k base kernel and verify its defining moments.

    k=1 is the triangle kernel; k>=2 are even polynomial kernels vanishing at
    the support edges.  Raises KernelConstructionError if the verification
    quadrature finds a moment residual beyond tolerance (mass 1e-10, higher
    moments 1e-8).
    """
    if order < 1:
        raise ValueError("kernel order must be >= 1")
    if order == 1:
        breaks = (-0.5, 0.0, 0.5)
        coeffs = ((2.0, 4.0), (2.0, -4.0))
        lipschitz = 4.0
    else:
        full = _poly_kernel_coeffs(order)
        breaks = (-0.5, 0.5)
        coeffs = (full,)
        der = np.polynomial.polynomial.polyder(np.asarray(full))
        grid = np.linspace(-0.5, 0.5, 4001)
        lipschitz = float(np.max(np.abs(np.polynomial.polynomial.polyval(grid, der))))

    residuals = []
    mass = None
    for i in range(order + 1):
        m = sum(_piece_moment(breaks[j], breaks[j + 1], coeffs[j], i)
                for j in range(len(coeffs)))
        if i == 0:
            mass = m
            res = abs(m - 1.0)
            tol = 1e-10
        else:
            res = abs(m)
            tol = 1e-8
        residuals.append(res)
        if res > tol:
            raise KernelConstructionError(i, res)
    assert mass is not None

    sup = 0.0
    l1 = 0.0
    for j in range(len(coeffs)):
        _, vals = _poly_extrema(coeffs[j], breaks[j], breaks[j + 1])
        sup = max(sup, float(np.max(np.abs(vals))))
        # |k| integral: split the piece at interior sign changes
        c = np.asarray(coeffs[j], dtype=float)
        roots = np.polynomial.polynomial.polyroots(c) if len(c) > 1 else np.array([])
        cuts = sorted({breaks[j], breaks[j + 1]}
                      | {float(r.real) for r in np.atleast_1d(roots)
                         if abs(r.imag) < 1e-12
                         and breaks[j] < r.real < breaks[j + 1]})
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            l1 += abs(_piece_moment(lo, hi, coeffs[j], 0))

    return KernelSpec(order=order, breaks=breaks, coeffs=coeffs,
                      lipschitz_const=lipschitz, sup_norm=sup, l1_norm=l1,
                      moment_residuals=tuple(residuals))


# ---------------------------------------------------------------------------
# product and convolved evaluation


def _as_points(x, d):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        if d != 1:
            raise ValueError("scalar point given for a d>1 kernel")
        x = x.reshape(1, 1)
        return x, True
    if x.ndim == 1:
        if x.shape[0] == d:
            return x.reshape(1, d), True
        if d == 1:
            return x.reshape(-1, 1), False
        raise ValueError(f"cannot interpret point array of shape {x.shape} for d={d}")
    if x.shape[-1] != d:
        raise ValueError(f"last axis of x must have length {d}")
    return x.reshape(-1, d), False


def eval_product(spec: KernelSpec, h: Bandwidth, x) -> np.ndarray | float:
    """Anisotropic product kernel K_h(x) = prod_i h_i^{-1} k(x_i/h_i)."""
    pts, single = _as_points(x, h.d)
    out = np.ones(pts.shape[0])
    for i, hi in enumerate(h.h):
        out *= spec.evaluator(pts[:, i] / hi) / hi
    return float(out[0]) if single else out


def _gl_nodes(n):
    return np.polynomial.legendre.leggauss(n)


def convolved_1d(spec: KernelSpec, h: float, eta: float, u) -> np.ndarray:
    """One-dimensional convolution (k_h * k_eta)(u) for scaled copies of k.

    Panels split the integration range at every kink of either factor, then a
    Gauss-Legendre rule exact for the product degree integrates each panel, so
    the result is the piecewise-polynomial convolution up to rounding.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    a, c = h / 2.0, eta / 2.0
    lo = np.maximum(-a, u - c)
    hi = np.minimum(a, u + c)

    cols = [lo]
    for b in spec.interior_breaks:
        cols.append(np.clip(h * b, lo, hi))
    for b in spec.interior_breaks:
        cols.append(np.clip(u - eta * b, lo, hi))
    cols.append(hi)
    panels = np.sort(np.stack(cols, axis=1), axis=1)

    n_nodes = spec.degree + 1  # GL exact through degree 2*deg + 1
    nodes, weights = _gl_nodes(n_nodes)

    total = np.zeros_like(u)
    for p in range(panels.shape[1] - 1):
        p_lo = panels[:, p]
        p_hi = panels[:, p + 1]
        half = np.maximum(p_hi - p_lo, 0.0) / 2.0
        mid = (p_hi + p_lo) / 2.0
        for q in range(n_nodes):
            t = mid + half * nodes[q]
            total += weights[q] * half * spec.evaluator(t / h) * spec.evaluator((u - t) / eta)
    return total / (h * eta)


def eval_convolved(spec: KernelSpec, h: Bandwidth, eta: Bandwidth, x) -> np.ndarray | float:
    """(K_h * K_eta)(x) as the product of one-dimensional convolutions."""
    if h.d != eta.d:
        raise ValueError("bandwidths must share a dimension")
    pts, single = _as_points(x, h.d)
    out = np.ones(pts.shape[0])
    for i in range(h.d):
        out *= convolved_1d(spec, h.h[i], eta.h[i], pts[:, i])
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# bandwidth lattices


def grid_HT(T: float, d: int, log_power: float = 4.0):
    """Membership test for the continuous bandwidth class H_T.

    h belongs iff every h_i is in (0,1) with h_i <= log(1+T)^{-1} and
    V(h) >= T^{-1/2} log(sum h_i^{-1})^log_power.  The exponent defaults to
    the theoretical 4; smaller values give the desk-scale surrogate classes
    used by the experiment harness.
    """
    if T < 3:
        raise ValueError("grid_HT requires T >= 3")
    cap = 1.0 / math.log1p(T)

    def member(h) -> bool:
        arr = h.as_array() if isinstance(h, Bandwidth) else np.atleast_1d(np.asarray(h, dtype=float))
        if arr.shape[0] != d:
            raise ValueError(f"expected {d}-dimensional bandwidth")
        if np.any(arr <= 0.0) or np.any(arr >= 1.0):
            return False
        if np.any(arr > cap):
            return False
        vol = float(np.prod(arr))
        logterm = math.log(float(np.sum(1.0 / arr)))
        return vol >= T ** -0.5 * logterm ** log_power

    return member


def grid_scriptHT(T: float, d: int, iota: float = 2.0,
                  log_power: float = 4.0) -> list[Bandwidth]:
    """Enumerate the candidate lattice: h_i = iota^{-k_i} with
    h_i < log(1+T)^{-1} and iota^{sum k} log(sum iota^{k_i})^log_power <= sqrt(T).

    Candidates are returned sorted by decreasing volume.  Raises
    EmptyGridError when no lattice point satisfies both constraints.
    """
    if T < 3:
        raise ValueError("grid_scriptHT requires T >= 3")
    if iota <= 1:
        raise ValueError("iota must exceed 1")
    cap = 1.0 / math.log1p(T)
    k_min = 1
    while iota ** -k_min >= cap:
        k_min += 1
    sqrtT = math.sqrt(T)
    # generous per-axis cap: with k >= k_min >= 1 the log term is bounded below
    min_log = math.log(d * iota ** k_min) ** log_power if log_power > 0 else 1.0
    k_hard = k_min
    while iota ** k_hard * min(min_log, 1.0) <= sqrtT * iota:
        k_hard += 1

    out = []

    def rec(prefix):
        if len(prefix) == d:
            s = sum(iota ** k for k in prefix)
            if iota ** sum(prefix) * math.log(s) ** log_power <= sqrtT:
                out.append(Bandwidth(tuple(iota ** -k for k in prefix)))
            return
        for k in range(k_min, k_hard + 1):
            if iota ** (sum(prefix) + k + (d - len(prefix) - 1) * k_min) > sqrtT / min(min_log, 1.0):
                break
            rec(prefix + [k])

    rec([])
    if not out:
        raise EmptyGridError(
            f"candidate grid is empty at T={T:g} (d={d}, iota={iota}, "
            f"log_power={log_power}); increase T")
    out.sort(key=lambda b: (-b.volume, b.h))
    return out
