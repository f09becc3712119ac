"""First moment of L'_d(E, 1) over Heegner discriminants, the off-diagonal
error term and its divisor split, twisted coefficient sums, and height sums."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate

from . import kernels
from .afe import (EULER_GAMMA, CutoffSpec, TruncationParams, lattice_sum,
                  quarter_power_constant)
from .curve import (BAD_FACTOR_SHIFTED, BAD_FACTOR_TRIVIAL, CoefficientTable, CompositeL,
                    CurveData, MainLValues, Sym2Params, coefficient_table, periods)
from .heegner import (ResidueSet, chi_table, density_constant, enumerate_D,
                      enumerate_D_prime)
from .numtheory import PrimeSieve, kronecker, mobius_small
from .summation import NeumaierSum

log = logging.getLogger(__name__)

# relative error allowance for Hermite interpolation of V (measured: 4e-11)
INTERPOLATION_REL = 1e-9


# ---------------------------------------------------------------- test function


@dataclass(frozen=True)
class BumpFunction:
    """F(t) = amplitude * exp(-1 / ((t - t0)(t1 - t))) on (t0, t1), 0 elsewhere."""

    t0: float = 1.0
    t1: float = 2.0
    amplitude: float = 1.0

    def __post_init__(self):
        if not 0 < self.t0 < self.t1:
            raise ValueError("support must satisfy 0 < t0 < t1")

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        out = np.zeros_like(t)
        inside = (t > self.t0) & (t < self.t1)
        ti = t[inside]
        out[inside] = self.amplitude * np.exp(-1.0 / ((ti - self.t0) * (self.t1 - ti)))
        return out if out.ndim else float(out)

    def scaled(self, factor: float) -> "BumpFunction":
        return BumpFunction(self.t0, self.t1, self.amplitude * factor)

    def _integral(self, weight) -> float:
        val, _ = integrate.quad(lambda t: float(self(t)) * weight(t), self.t0, self.t1,
                                epsabs=1e-14, epsrel=1e-12, limit=200)
        return val

    @cached_property
    def I0(self) -> float:
        return self._integral(lambda t: 1.0)

    @cached_property
    def I1(self) -> float:
        return self._integral(math.log)


# ---------------------------------------------------------------- context


class MomentContext:
    """Shared state for one curve: sieve, coefficient table, cutoff grid
    and the L-values of the main terms. Grows the table on demand."""

    def __init__(self, curve: CurveData, spec: CutoffSpec = CutoffSpec(),
                 sym2_params: Sym2Params = Sym2Params(), prime_bound: int = 10**6, threads: int = 1):
        if threads < 1:
            raise ValueError("threads must be at least 1")
        self.curve = curve
        self.threads = threads
        self.spec = spec
        self.sym2_params = sym2_params
        self.prime_bound = prime_bound
        self._sieve: PrimeSieve | None = None
        self._coeffs: CoefficientTable | None = None
        self._lvals: dict[tuple[int, bool], MainLValues] = {}

    @property
    def N(self) -> int:
        return self.curve.conductor

    def sieve(self, bound: int) -> PrimeSieve:
        if self._sieve is None or self._sieve.bound < bound:
            self._sieve = PrimeSieve.build(max(bound, 1000))
        return self._sieve

    def coeffs(self, n_max: int) -> CoefficientTable:
        if self._coeffs is None or self._coeffs.n_max < n_max:
            self._coeffs = coefficient_table(self.curve, n_max, self.sieve(n_max))
        return self._coeffs

    def n_cap(self, absd: int) -> int:
        return TruncationParams(self.N, absd).n_cap(absd)

    def l_values(self, bad_factor: int = BAD_FACTOR_TRIVIAL, zeta_ratio: bool = True) -> MainLValues:
        key = (bad_factor, zeta_ratio)
        if key not in self._lvals:
            params = Sym2Params(self.sym2_params.X0, self.sym2_params.cutoff,
                                self.sym2_params.tolerance, bad_factor)
            need = max(self.prime_bound, int(math.ceil(4 * params.X0 * params.cutoff)))
            comp = CompositeL(self.curve, params, self.prime_bound, self.sieve(need), zeta_ratio)
            self._lvals[key] = comp.values
        return self._lvals[key]

    @cached_property
    def period_data(self):
        return periods(self.curve)

    def lattice(self, d: int, mode: int, use_abs: bool = False) -> float:
        cap = self.n_cap(-d)
        value, _ = lattice_sum(d, self.N, self.coeffs(cap), self.spec, cap, mode, use_abs)
        return value

    def l_prime(self, d: int) -> float:
        """L'_d(E, 1); d = -3 carries the weight 1/3 of its six units."""
        val = 2.0 * self.lattice(d, kernels.MODE_FULL)
        return val / 3.0 if d == -3 else val

    def l_prime_error(self, d: int, value: float) -> float:
        """Truncation tail bound plus the cutoff interpolation allowance."""
        tail = TruncationParams(self.N, -d).tail_bound(-d, self.spec)
        if d == -3:
            tail /= 3.0
        return tail + INTERPOLATION_REL * abs(value)

    def prepare(self, max_absd: int) -> None:
        self.coeffs(self.n_cap(max_absd))
        self.spec.grid

    def map(self, fn, ds: list[int]) -> list:
        """fn over ds in order; the lattice kernels release the GIL, so a
        thread pool gives real parallelism without changing any result."""
        if self.threads == 1 or len(ds) < 2:
            return [fn(d) for d in ds]
        with ThreadPoolExecutor(self.threads) as ex:
            return list(ex.map(fn, ds))


# ---------------------------------------------------------------- main terms


@dataclass(frozen=True)
class MainTerms:
    alpha: float
    beta: float
    alpha_err: float
    beta_err: float
    c_N: float
    L1: float
    dL1: float
    I0: float
    I1: float


def main_term_constants(curve: CurveData, F: BumpFunction, lvals: MainLValues) -> MainTerms:
    """alpha = c_N L(1) int F, beta = c_N int F(t)(L'(1) + L(1)(log(N t / 4 pi^2) - 2 gamma)) dt."""
    N = curve.conductor
    cN = density_constant(N)
    K = math.log(N / (4 * math.pi**2)) - 2 * EULER_GAMMA
    alpha = cN * lvals.L1 * F.I0
    beta = cN * ((lvals.dL1 + lvals.L1 * K) * F.I0 + lvals.L1 * F.I1)
    alpha_err = cN * lvals.L1_err * F.I0
    beta_err = cN * (lvals.dL1_err * F.I0 + lvals.L1_err * (abs(K) * F.I0 + abs(F.I1)))
    return MainTerms(alpha, beta, alpha_err, beta_err, cN, lvals.L1, lvals.dL1, F.I0, F.I1)


# ---------------------------------------------------------------- moment


@dataclass(frozen=True)
class MomentReport:
    Y: float
    empirical_moment: float
    alpha: float
    beta: float
    alpha_err: float
    beta_err: float
    count: int
    per_d: tuple = field(repr=False, default=())
    runtime: float = field(default=0.0, compare=False)
    empirical_error: float = 0.0

    @property
    def main_term(self) -> float:
        return self.alpha * self.Y * math.log(self.Y) + self.beta * self.Y

    @property
    def residual(self) -> float:
        return self.empirical_moment - self.main_term

    @property
    def ratio(self) -> float:
        return self.empirical_moment / self.main_term

    @property
    def main_term_error(self) -> float:
        return self.alpha_err * self.Y * math.log(self.Y) + self.beta_err * self.Y


def family_window(ctx: MomentContext, F: BumpFunction, Y: float):
    lo, hi = F.t0 * Y, F.t1 * Y
    D = enumerate_D(ctx.N, int(math.floor(hi)))
    return D.window(lo, hi)


def weighted_window(window, F: BumpFunction, Y: float) -> tuple[list[int], list[float]]:
    """Discriminants of the window with nonzero weight F(|d|/Y)."""
    ds, ws = [], []
    for d in window.d.tolist():
        w = float(F(-d / Y))
        if w != 0.0:
            ds.append(d)
            ws.append(w)
    return ds, ws


def empirical_moment(ctx: MomentContext, F: BumpFunction, Y: float, main: MainTerms | None = None) -> MomentReport:
    """sum_{d} L'_d(E, 1) F(|d| / Y) over the Heegner set, summed exactly."""
    start = time.perf_counter()
    window = family_window(ctx, F, Y)
    main = main or main_term_constants(ctx.curve, F, ctx.l_values())
    if len(window) == 0:
        return MomentReport(Y, 0.0, main.alpha, main.beta, main.alpha_err, main.beta_err, 0)
    ctx.prepare(int(-window.d.min()))
    ds, ws = weighted_window(window, F, Y)
    acc = NeumaierSum()
    err = NeumaierSum()
    rows = []
    for d, w, lp in zip(ds, ws, ctx.map(ctx.l_prime, ds)):
        acc.add(w * lp)
        err.add(w * ctx.l_prime_error(d, lp))
        rows.append((d, lp, w))
    return MomentReport(Y, acc.value, main.alpha, main.beta, main.alpha_err, main.beta_err, len(rows),
                        tuple(rows), time.perf_counter() - start, err.value)


@dataclass(frozen=True)
class ErrorTerm:
    """Off-diagonal part of the moment with its companions."""

    Y: float
    error: float  # 2 sum F a_n chi r'_d / (m n) V
    abs_sum: float  # same with absolute values
    majorant: float  # termwise majorant from |a_n| <= d(n) sqrt n, |V| <= C x^-1/4
    diagonal: float  # v = 0 part
    u0_part: float  # u = 0 boundary terms, r'_d weight
    count: int

    @property
    def reassembled(self) -> float:
        """diagonal + error with the u = 0 boundary converted from the r'_d
        weight (2) to the ideal-count weight (1)."""
        return self.diagonal + self.error - 0.5 * self.u0_part


def error_direct(ctx: MomentContext, F: BumpFunction, Y: float, with_majorant: bool = True) -> ErrorTerm:
    window = family_window(ctx, F, Y)
    if len(window) == 0:
        return ErrorTerm(Y, 0.0, 0.0, 0.0, 0.0, 0.0, 0)
    ctx.prepare(int(-window.d.min()))
    ds, ws = weighted_window(window, F, Y)
    cq = quarter_power_constant(ctx.spec) if with_majorant else 0.0
    dn = None
    if with_majorant:
        cap = ctx.n_cap(-ds[-1]) if ds else 1
        dn = ctx.sieve(cap).divisor_count_table(cap).astype(np.float64)

    def parts(d):
        out = [2 * ctx.lattice(d, kernels.MODE_OFF),
               2 * ctx.lattice(d, kernels.MODE_OFF, use_abs=True),
               0.0,
               2 * ctx.lattice(d, kernels.MODE_DIAG),
               2 * ctx.lattice(d, kernels.MODE_U0)]
        if with_majorant:
            cap = ctx.n_cap(-d)
            chi = chi_table(d, ctx.N, math.isqrt(cap))
            scale = 4 * math.pi**2 / (ctx.N * -d)
            out[2] = kernels.lattice_majorant(-d, chi, dn, cap, scale, cq, ctx.spec.grid.x_max)
        return out

    sums = [NeumaierSum() for _ in range(5)]
    for w, row in zip(ws, ctx.map(parts, ds)):
        for acc, val in zip(sums, row):
            acc.add(w * val)
    return ErrorTerm(Y, sums[0].value, sums[1].value, sums[2].value, sums[3].value, sums[4].value, len(window))


def trivial_bound_scale(N: int, Y: float, eps: float = 0.1) -> float:
    """N^{1/2+eps} Y^{1+eps}, the size of the trivial estimate."""
    return N ** (0.5 + eps) * Y ** (1 + eps)


# ---------------------------------------------------------------- divisor split


@dataclass(frozen=True)
class ErrorSplit:
    Y: float
    A: int
    per_a: dict = field(repr=False)  # a -> Error(a), for a^2 <= t1 Y
    E1: float  # sum_{a <= A} |Error(a)|
    E2: float  # sum_{a > A} |Error(a)|
    signed_small: float  # sum_{a <= A} mu(a) Error(a)
    signed_large: float
    error_direct: float

    @property
    def reassembled(self) -> float:
        return self.signed_small + self.signed_large

    def E2_at(self, A: int) -> float:
        return sum(abs(v) for a, v in self.per_a.items() if a > A)


def optimal_threshold(N: int, Y: float) -> int:
    """ceil(Y^{1/6} N^{-7/12}), at least 1."""
    return max(1, math.ceil(Y ** (1 / 6) * N ** (-7 / 12)))


def error_split(ctx: MomentContext, F: BumpFunction, Y: float, direct: float | None = None) -> ErrorSplit:
    """Error(a) over d in D' with a^2 | d (squarefreeness dropped), and the
    Moebius reassembly sum_a mu(a) Error(a)."""
    lo, hi = F.t0 * Y, F.t1 * Y
    dprime = enumerate_D_prime(ctx.N, int(math.ceil(lo)), int(math.floor(hi)))
    if dprime.size:
        ctx.prepare(int(-dprime.min()))
    ds, ws = [], []
    for d in dprime.tolist():
        w = float(F(-d / Y))
        if w != 0.0:
            ds.append(d)
            ws.append(w)
    vals = ctx.map(lambda d: 2 * ctx.lattice(d, kernels.MODE_OFF), ds)
    off = {d: w * v for d, w, v in zip(ds, ws, vals)}
    a_max = math.isqrt(int(math.floor(hi)))
    per_a: dict[int, float] = {}
    for a in range(1, a_max + 1):
        acc = NeumaierSum()
        a2 = a * a
        for d, val in off.items():
            if d % a2 == 0:
                acc.add(val)
        per_a[a] = acc.value
    A = optimal_threshold(ctx.N, Y)
    small, large = NeumaierSum(), NeumaierSum()
    E1 = E2 = 0.0
    for a, val in per_a.items():
        mu = mobius_small(a)
        if a <= A:
            E1 += abs(val)
            small.add(mu * val)
        else:
            E2 += abs(val)
            large.add(mu * val)
    if direct is None:
        direct = error_direct(ctx, F, Y, with_majorant=False).error
    return ErrorSplit(Y, A, per_a, E1, E2, small.value, large.value, direct)


# ---------------------------------------------------------------- twisted sums

# The fixed configuration suite and the largest normalized ratio it produced
# when first run; later runs must not exceed it.
TWIST_SUITE = {"label": "11a1", "seed": 0, "x": 100_000, "count": 100, "q_max": 10_000,
               "record": 0.0005967526606445862}


@dataclass(frozen=True)
class TwistConfig:
    """eta(n) = phi((u^2 - n) / (a^2 v^2)) on n = u^2 mod a^2 v^2, phi(d) =
    chi_d(m) [d in D']; eta has period 4 N m a^2 v^2."""

    N: int
    m: int
    a: int
    v: int
    u: int

    @property
    def q(self) -> int:
        return 4 * self.N * self.m * self.a**2 * self.v**2

    def eta(self, n: np.ndarray) -> np.ndarray:
        n = np.asarray(n, dtype=np.int64)
        step = self.a**2 * self.v**2
        u2 = self.u**2
        out = np.zeros(n.shape, dtype=np.int64)
        hit = ((n - u2) % step == 0) & (n > u2)
        k = (n[hit] - u2) // step  # d = -k
        out[hit] = self.phi_table()[(-k) % (4 * self.N * self.m)]
        return out

    @cached_property
    def _phi(self) -> np.ndarray:
        period = 4 * self.N * self.m
        rs = ResidueSet.build(self.N)
        tab = np.zeros(period, dtype=np.int64)
        for r in range(period):
            # r stands for any d = r mod 4Nm; both factors depend only on r
            if r % rs.modulus in rs.residues:
                tab[r] = kronecker(r - period, self.m)
        return tab

    def phi_table(self) -> np.ndarray:
        return self._phi


@dataclass(frozen=True)
class TwistedSum:
    config: TwistConfig
    x: int
    S: float
    abs_sum: float

    @property
    def ratio(self) -> float:
        """|S(x)| / (sqrt(q) x log x)."""
        return abs(self.S) / (math.sqrt(self.config.q) * self.x * math.log(self.x))


def twisted_partial_sum(coeffs: CoefficientTable, config: TwistConfig, x: int) -> TwistedSum:
    """S(x) = sum_{n <= x} a_n eta(n)."""
    if x > coeffs.n_max:
        raise ValueError("x exceeds the coefficient table")
    n = np.arange(1, x + 1, dtype=np.int64)
    eta = config.eta(n)
    terms = coeffs.a[1 : x + 1] * eta
    return TwistedSum(config, x, float(np.sum(terms)), float(np.sum(np.abs(terms))))


def twisted_cumulative(coeffs: CoefficientTable, config: TwistConfig, x: int) -> np.ndarray:
    """Partial sums S(0..x) as exact integers."""
    n = np.arange(1, x + 1, dtype=np.int64)
    out = np.zeros(x + 1, dtype=np.int64)
    out[1:] = np.cumsum(coeffs.a[1 : x + 1] * config.eta(n))
    return out


def abel_summation(coeffs: CoefficientTable, config: TwistConfig, G, n1: int, n2: int) -> tuple[float, float]:
    """(direct, by parts) for sum_{n1 <= n <= n2} a_n eta(n) G(n).

    By parts: S(n2) G(n2) - S(n1 - 1) G(n1) - sum_{n1 <= n < n2} S(n) (G(n+1) - G(n)).
    """
    S = twisted_cumulative(coeffs, config, n2).astype(np.float64)
    n = np.arange(n1, n2 + 1)
    g = np.asarray(G(n.astype(np.float64)), dtype=np.float64)
    eta = config.eta(n)
    direct = NeumaierSum()
    direct.extend((coeffs.a[n] * eta * g).tolist())
    parts = NeumaierSum()
    parts.add(S[n2] * g[-1])
    parts.add(-S[n1 - 1] * g[0])
    parts.extend((-S[n1:n2] * np.diff(g)).tolist())
    return direct.value, parts.value


def abel_weight(N: int, Y: float, m: int, u: int, v: int, F: BumpFunction, spec: CutoffSpec):
    """G(x) = V(4 pi^2 x m^2 / (N (x - u^2)/v^2)) F(((x - u^2)/v^2) / Y) / x."""
    grid = spec.grid

    def G(x):
        x = np.asarray(x, dtype=np.float64)
        dd = (x - u * u) / (v * v)
        out = np.zeros_like(x)
        ok = dd > 0
        arg = 4 * math.pi**2 * x[ok] * m * m / (N * dd[ok])
        vals = np.array([grid(a) if a < grid.x_max else 0.0 for a in arg])
        out[ok] = vals * F(dd[ok] / Y) / x[ok]
        return out

    return G


def random_twist_configs(N: int, count: int, seed: int, q_max: int = 10**4, u_max: int = 100) -> list[TwistConfig]:
    """Seeded (m, a, v, u) with (m, N) = 1, (a, 4N) = 1 and q <= q_max."""
    rng = np.random.default_rng(seed)
    out: list[TwistConfig] = []
    budget = q_max // (4 * N)
    while len(out) < count:
        m = int(rng.integers(1, budget + 1))
        if math.gcd(m, N) != 1:
            continue
        a = int(rng.integers(1, math.isqrt(budget // m) + 1))
        if math.gcd(a, 4 * N) != 1:
            continue
        vmax = math.isqrt(budget // (m * a * a))
        if vmax < 1:
            continue
        v = int(rng.integers(1, vmax + 1))
        u = int(rng.integers(0, u_max + 1))
        cfg = TwistConfig(N, m, a, v, u)
        if cfg.q <= q_max:
            out.append(cfg)
    return out


# ---------------------------------------------------------------- heights


@dataclass(frozen=True)
class HeightReport:
    Y: float
    empirical: float
    predicted_theorem: float
    predicted_printed: float
    C_P_theorem: float
    C_P_prime_theorem: float
    C_P_printed: float
    C_P_prime_printed: float
    Omega: float
    count: int
    per_d: tuple = field(repr=False, default=())
    empirical_error: float = 0.0

    @property
    def ratio_theorem(self) -> float:
        return self.empirical / self.predicted_theorem

    @property
    def ratio_printed(self) -> float:
        return self.empirical / self.predicted_printed


def height_from_lprime(lprime: float, d: int, Omega: float) -> float:
    u = 3 if d == -3 else 1
    return u * u * math.sqrt(-d) * lprime / (2 * Omega)


def lprime_from_height(height: float, d: int, Omega: float) -> float:
    u = 3 if d == -3 else 1
    return 2 * Omega * height / (u * u * math.sqrt(-d))


def height_constants(curve: CurveData, lvals: MainLValues, Omega: float) -> dict[str, float]:
    N = curve.conductor
    cN = density_constant(N)
    K = math.log(N / (4 * math.pi**2)) - 2.0 / 3.0 - 2 * EULER_GAMMA
    cp_thm = cN * lvals.L1 / (3 * Omega)
    cpp_thm = cp_thm * K + cN * lvals.dL1 / (3 * Omega)
    cp_print = (math.pi / 3) * cN / lvals.correction_at_1 * lvals.sym2_at_2 / (math.pi * Omega)
    cpp_print = cp_print * K + cN * lvals.dL1 / (3 * Omega)
    return {"C_P_theorem": cp_thm, "C_P_prime_theorem": cpp_thm,
            "C_P_printed": cp_print, "C_P_prime_printed": cpp_print}


def height_predictions(constants: dict[str, float], Y: float) -> tuple[float, float]:
    """(theorem, printed) predictions C Y^{3/2} log Y + C' Y^{3/2}."""
    y15 = Y**1.5
    thm = constants["C_P_theorem"] * y15 * math.log(Y) + constants["C_P_prime_theorem"] * y15
    printed = constants["C_P_printed"] * y15 * math.log(Y) + constants["C_P_prime_printed"] * y15
    return thm, printed


def height_sum(ctx: MomentContext, Y: int, lvals: MainLValues | None = None) -> HeightReport:
    """Sum of Heegner heights over |d| <= Y against the two predictions."""
    Omega = ctx.period_data.volume_Omega
    D = enumerate_D(ctx.N, Y)
    if len(D):
        ctx.prepare(int(-D.d.min()))
    acc = NeumaierSum()
    err = NeumaierSum()
    rows = []
    ds = D.d.tolist()
    for d, lp in zip(ds, ctx.map(ctx.l_prime, ds)):
        h = height_from_lprime(lp, d, Omega)
        acc.add(h)
        err.add(height_from_lprime(ctx.l_prime_error(d, lp), d, Omega))
        rows.append((d, lp, h))
    k = height_constants(ctx.curve, lvals or ctx.l_values(), Omega)
    thm, printed = height_predictions(k, Y)
    return HeightReport(Y, acc.value, thm, printed, k["C_P_theorem"], k["C_P_prime_theorem"],
                        k["C_P_printed"], k["C_P_prime_printed"], Omega, len(rows), tuple(rows), err.value)


# ---------------------------------------------------------------- trends


def residual_slope(Ys, residuals) -> float:
    """Least-squares slope of log max(|residual|, 1e-3 sqrt(Y)) against log Y."""
    Ys = np.asarray(Ys, dtype=np.float64)
    r = np.maximum(np.abs(np.asarray(residuals, dtype=np.float64)), 1e-3 * np.sqrt(Ys))
    slope, _ = np.polyfit(np.log(Ys), np.log(r), 1)
    return float(slope)


def residual_trend_ok(Ys, residuals, allowed_inversions: int = 1) -> bool:
    """|residual|/Y non-increasing along Ys, up to the allowed inversions."""
    scaled = np.abs(np.asarray(residuals)) / np.asarray(Ys)
    inversions = int(np.sum(np.diff(scaled) > 0))
    return inversions <= allowed_inversions
