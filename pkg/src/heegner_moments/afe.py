"""Cutoff functions by inverse Mellin quadrature and the central derivative
L'_d(E, 1) through the approximate functional equation.

With Lambda_d(s) = (N|d|)^s ((2 pi)^-s Gamma(s))^2 L_d(s) and root number -1,

    L'_d(E, 1) = 2 sum_{(m,N)=1} sum_n chi_d(m) a_n r_d(n) / (m n) V(4 pi^2 n m^2 / (N|d|)),
    V(x) = (1 / 2 pi i) int_(c) Gamma(1 + w)^2 x^-w dw / w^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, special

from . import kernels
from .curve import CoefficientTable, CurveData
from .heegner import chi_table
from .numtheory import kronecker

EULER_GAMMA = 0.57721566490153286061

# Sums are cut where the cutoff argument exceeds this value; V(200) ~ 1e-13.
X_CUT = 200.0
EPSILON = 0.1


class QuadratureError(RuntimeError):
    """Two contours or two step sizes disagree beyond tolerance."""


class TableTooShort(ValueError):
    """The coefficient table does not reach the truncation point."""


def mellin_quadrature(x: np.ndarray, c: float, T: float, h: float, power: int) -> np.ndarray:
    """(1/2 pi i) int_{c-iT}^{c+iT} Gamma(1+w)^2 x^-w dw / w^power, trapezoidal.

    The integrand is conjugate-symmetric in t, so only t >= 0 is summed.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    t = np.arange(0.0, T + 0.5 * h, h)
    w = c + 1j * t
    base = 2.0 * special.loggamma(1.0 + w) - power * np.log(w)
    weights = np.full(t.shape, h)
    weights[0] = 0.5 * h
    weights[-1] = 0.5 * h
    out = np.empty(x.shape)
    logx = np.log(x)
    for lo in range(0, x.size, 256):
        chunk = logx[lo : lo + 256, None]
        vals = np.exp(base[None, :] - w[None, :] * chunk).real
        out[lo : lo + 256] = vals @ weights / math.pi
    return out


@dataclass(frozen=True)
class CutoffSpec:
    """Contour and quadrature parameters for V, plus its interpolation grid.

    The grid is geometric in x with ratio ``ratio`` on [x_lo, x_hi] and
    holds V and dV/d(log x) = -W for cubic Hermite interpolation.
    """

    c: float = 0.7
    T: float = 30.0
    h: float = 0.025
    ratio: float = 1.02
    x_lo: float = 1e-7
    x_hi: float = 2.0 * X_CUT

    def __post_init__(self):
        if not 0.3 < self.c < 1.5:
            raise ValueError("contour abscissa must lie in (0.3, 1.5)")
        if self.T <= 0 or self.h <= 0:
            raise ValueError("T and h must be positive")

    def V(self, x) -> np.ndarray:
        """Direct quadrature, no interpolation."""
        return mellin_quadrature(x, self.c, self.T, self.h, 2)

    def W(self, x) -> np.ndarray:
        return mellin_quadrature(x, self.c, self.T, self.h, 1)

    @cached_property
    def grid(self) -> "CutoffGrid":
        log_lo = math.log(self.x_lo)
        step = math.log(self.ratio)
        count = int(math.ceil((math.log(self.x_hi) - log_lo) / step)) + 2
        xs = np.exp(log_lo + step * np.arange(count))
        return CutoffGrid(log_lo, 1.0 / step, self.V(xs), -self.W(xs), float(xs[-1]))

    def refined(self) -> "CutoffSpec":
        return CutoffSpec(self.c, self.T, self.h / 2, self.ratio, self.x_lo, self.x_hi)


@dataclass(frozen=True)
class CutoffGrid:
    log_lo: float
    inv_step: float
    vals: np.ndarray = field(repr=False)
    dvals: np.ndarray = field(repr=False)
    x_max: float

    def __call__(self, x: float) -> float:
        if not 0 < x:
            raise ValueError("x must be positive")
        return kernels.hermite_eval(float(x), self.log_lo, self.inv_step, self.vals, self.dvals)


def cutoff_V(x, spec: CutoffSpec = CutoffSpec(), interpolate: bool = False):
    if np.any(np.asarray(x) <= 0):
        raise ValueError("V is defined for x > 0")
    if interpolate:
        g = spec.grid
        return np.array([g(float(v)) for v in np.atleast_1d(x)])
    return spec.V(x)


def decay_constant(spec: CutoffSpec, lo: float = 1.0, hi: float = 100.0, points: int = 400) -> float:
    """max V(x) x^{1/4} e^{2 sqrt x} over a geometric grid of [lo, hi]."""
    xs = np.geomspace(lo, hi, points)
    return float(np.max(spec.V(xs) * xs**0.25 * np.exp(2 * np.sqrt(xs))))


def quarter_power_constant(spec: CutoffSpec) -> float:
    """sup_x |V(x)| x^{1/4}, the constant of the decay bound without the
    exponential (used for termwise majorants)."""
    xs = np.geomspace(1e-7, 400.0, 4000)
    return float(np.max(np.abs(spec.V(xs)) * xs**0.25)) * 1.001


def check_contours(spec: CutoffSpec, other_c: float, xs, tol: float = 1e-10) -> float:
    """Largest difference of V between two contours; raises if above tol."""
    alt = CutoffSpec(other_c, spec.T, spec.h, spec.ratio, spec.x_lo, spec.x_hi)
    diff = float(np.max(np.abs(spec.V(xs) - alt.V(xs))))
    if diff > tol:
        raise QuadratureError(f"contours c={spec.c} and c={other_c} differ by {diff:.3e}")
    return diff


# ---------------------------------------------------------------- truncation


@dataclass(frozen=True)
class TruncationParams:
    """Summation ranges for one family scale Y and conductor N.

    U, V_bound and N0 are the asymptotic ranges; ``n_cap`` is the cut on
    n m^2 actually applied, never below the point where the cutoff
    argument reaches X_CUT.
    """

    N: int
    Y: float
    epsilon: float = EPSILON
    x_cut: float = X_CUT

    @property
    def U(self) -> float:
        e = self.epsilon
        return self.N ** (0.5 + e / 2) * self.Y ** (0.5 + e / 2)

    @property
    def V_bound(self) -> float:
        e = self.epsilon
        return self.N ** (0.5 + e / 2) * self.Y ** (e / 2)

    @property
    def N0(self) -> float:
        return (self.N * self.Y) ** (1 + self.epsilon)

    def n_cap(self, absd: int) -> int:
        by_decay = self.x_cut * self.N * absd / (4 * math.pi**2)
        return int(math.ceil(max(self.N0, by_decay)))

    def tail_bound(self, absd: int, spec: CutoffSpec = CutoffSpec()) -> float:
        """Bound for the discarded part of the L'_d series.

        Uses |a_n| <= d(n) sqrt(n), the divisor bound
        d(n) <= n^{1.5379 log 2 / log log n}, the decay envelope
        |V(x)| <= C x^{-1/4} e^{-2 sqrt x} and the lattice-point density
        2 pi / sqrt|d| per unit n (times 2 for the boundary error).
        """
        cap = self.n_cap(absd)
        theta = 1.5379 * math.log(2) / math.log(math.log(max(cap, 16)))
        scale = 4 * math.pi**2 / (self.N * absd)
        x0 = scale * cap
        cv = 1.01 * math.sqrt(math.pi)
        expo = theta - 0.5

        def envelope(x):
            return x ** (expo - 0.25) * cv * math.exp(-2 * math.sqrt(x))

        inner, _ = integrate.quad(envelope, x0, np.inf, limit=200)
        # sum over m of m^-1 (scale m^2)^{-(1+expo)}
        msum = sum(m ** (-1 - 2 * (1 + expo)) for m in range(1, 1000))
        return 2 * 2 * (2 * math.pi / math.sqrt(absd)) * scale ** (-(1 + expo)) * inner * msum


# ---------------------------------------------------------------- L'_d


def lattice_sum(d: int, N: int, coeffs: CoefficientTable, spec: CutoffSpec, n_cap: int,
                mode: int = kernels.MODE_FULL, use_abs: bool = False, grid=None) -> tuple[float, int]:
    """sum_m chi_d(m)/m sum_(u,v) w a_n/n V(4 pi^2 n m^2/(N|d|)) over n m^2 <= n_cap."""
    absd = -d
    if n_cap > coeffs.n_max:
        raise TableTooShort(f"need a_n up to {n_cap}, table stops at {coeffs.n_max}")
    grid = grid or spec.grid
    scale = 4 * math.pi**2 / (N * absd)
    if scale < math.exp(grid.log_lo) * (1 - 1e-12):
        raise ValueError(f"cutoff grid starts above x={scale:.3e}; lower x_lo")
    if scale * n_cap > grid.x_max:
        raise ValueError("cutoff grid ends before the truncation point")
    chi = chi_table(d, N, math.isqrt(n_cap))
    return kernels.lattice_sum(absd, N, chi, coeffs.a, n_cap, scale, grid.log_lo, grid.inv_step,
                               grid.vals, grid.dvals, grid.x_max, mode, use_abs)


def l_prime_central(curve: CurveData, d: int, coeffs: CoefficientTable, spec: CutoffSpec = CutoffSpec(),
                    trunc: TruncationParams | None = None) -> float:
    """L'_d(E, 1) for a Heegner discriminant d < 0."""
    N = curve.conductor
    if d >= 0 or d % 4 != 1:
        raise ValueError("d must be a negative discriminant congruent to 1 mod 4")
    trunc = trunc or TruncationParams(N, -d)
    value, _ = lattice_sum(d, N, coeffs, spec, trunc.n_cap(-d))
    # six units for d = -3: the lattice count over-counts ideals threefold
    return 2.0 * value / 3.0 if d == -3 else 2.0 * value


def antisymmetry_sums(curve: CurveData, d: int, coeffs: CoefficientTable, X: float = 2.0,
                      spec: CutoffSpec = CutoffSpec()) -> tuple[float, float]:
    """(S(X), S(1/X)) with S(X) = sum_m sum_n chi_d(m) a_n r_d(n)/(m n) W(x X),
    x = 4 pi^2 n m^2 / (N|d|), evaluated by direct quadrature of W.

    Root number -1 makes L_d(E, 1) = S(X) - S(1/X) vanish.
    """
    N, absd = curve.conductor, -d
    trunc = TruncationParams(N, absd)
    cap = int(math.ceil(trunc.n_cap(absd) * max(X, 1 / X)))
    if cap > coeffs.n_max:
        raise TableTooShort(f"need a_n up to {cap}, table stops at {coeffs.n_max}")
    ns, weights = ideal_count_terms(d, cap)
    out = []
    for scale_x in (X, 1.0 / X):
        total = 0.0
        for m in range(1, math.isqrt(cap) + 1):
            if math.gcd(m, N) != 1:
                continue
            ch = kronecker(d, m)
            if ch == 0:
                continue
            keep = ns * m * m <= cap
            if not keep.any():
                break
            n = ns[keep]
            x = 4 * math.pi**2 * n * m * m / (N * absd) * scale_x
            w = spec.W(x)
            total += ch / m * float(np.sum(weights[keep] * coeffs.a[n] * w / n))
        out.append(total)
    return out[0], out[1]


def ideal_count_terms(d: int, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """(n, r_d(n)) for 1 <= n <= n_max with r_d(n) > 0, by lattice enumeration."""
    absd = -d
    r = np.zeros(n_max + 1, dtype=np.float64)
    v = 0
    while absd * v * v <= 4 * n_max:
        us = np.arange(v % 2, math.isqrt(4 * n_max - absd * v * v) + 1, 2)
        q4 = us * us + absd * v * v
        ok = (q4 > 0) & (q4 % 4 == 0)
        us, q4 = us[ok], q4[ok]
        w = np.where(us > 0, 2.0, 1.0) * (2.0 if v > 0 else 1.0) / 2.0
        np.add.at(r, q4 // 4, w)
        v += 1
    n = np.flatnonzero(r)
    return n, r[n]
