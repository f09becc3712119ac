"""Elliptic curve data: Frobenius traces, Hecke coefficients, periods and
the symmetric-square L-value entering the main terms of the moment."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import special

from . import kernels
from .numtheory import PrimeSieve, prime_divisors
from .summation import NeumaierSum, fsum_array

log = logging.getLogger(__name__)

# Largest intermediate allowed in the int64 tables (|a_n| <= d(n) sqrt(n),
# sym^2 coefficients <= d_3(n) n).
INT64_SAFE = 2**62


class CurveError(ValueError):
    """Inconsistent or unsupported curve model."""


@dataclass(frozen=True)
class CurveData:
    label: str
    a_invariants: tuple[int, int, int, int, int]
    conductor: int
    modular_degree: int | None = None

    def __post_init__(self):
        if len(self.a_invariants) != 5:
            raise CurveError("need five a-invariants")
        if self.discriminant == 0:
            raise CurveError(f"{self.label}: singular model")
        if self.conductor < 1 or any(self.conductor % (p * p) == 0 for p in prime_divisors(self.conductor)):
            raise CurveError(f"{self.label}: conductor {self.conductor} is not squarefree")
        bad = set(prime_divisors(self.discriminant))
        if not set(prime_divisors(self.conductor)) <= bad:
            raise CurveError(f"{self.label}: conductor has a prime of good reduction")
        if self.modular_degree is not None and self.modular_degree < 1:
            raise CurveError("modular degree must be positive")

    @classmethod
    def from_json(cls, doc: dict | str | Path) -> "CurveData":
        if isinstance(doc, (str, Path)):
            doc = json.loads(Path(doc).read_text())
        try:
            return cls(
                label=str(doc["label"]),
                a_invariants=tuple(int(a) for a in doc["a_invariants"]),
                conductor=int(doc["conductor"]),
                modular_degree=None if doc.get("modular_degree") is None else int(doc["modular_degree"]),
            )
        except KeyError as exc:
            raise CurveError(f"curve document missing field {exc}") from None

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "a_invariants": list(self.a_invariants),
            "conductor": self.conductor,
            "modular_degree": self.modular_degree,
        }

    @property
    def b_invariants(self) -> tuple[int, int, int, int]:
        a1, a2, a3, a4, a6 = self.a_invariants
        b2 = a1 * a1 + 4 * a2
        b4 = 2 * a4 + a1 * a3
        b6 = a3 * a3 + 4 * a6
        b8 = a1 * a1 * a6 + 4 * a2 * a6 - a1 * a3 * a4 + a2 * a3 * a3 - a4 * a4
        return b2, b4, b6, b8

    @property
    def c_invariants(self) -> tuple[int, int]:
        b2, b4, b6, _ = self.b_invariants
        return b2 * b2 - 24 * b4, -(b2**3) + 36 * b2 * b4 - 216 * b6

    @property
    def discriminant(self) -> int:
        b2, b4, b6, b8 = self.b_invariants
        return -b2 * b2 * b8 - 8 * b4**3 - 27 * b6 * b6 + 9 * b2 * b4 * b6

    def bad_primes(self) -> list[int]:
        return prime_divisors(self.conductor)

    def fingerprint(self) -> str:
        key = ",".join(map(str, self.a_invariants)) + f"|{self.conductor}"
        return hashlib.sha256(key.encode()).hexdigest()[:16]


def builtin_curves() -> dict[str, CurveData]:
    """The five small-conductor test curves shipped with the package."""
    doc = json.loads(resources.files("heegner_moments.data").joinpath("curves.json").read_text())
    return {c["label"]: CurveData.from_json(c) for c in doc}


def load_curve(spec: str) -> CurveData:
    """A built-in label such as ``11a1`` or a path to a curve JSON file."""
    curves = builtin_curves()
    if spec in curves:
        return curves[spec]
    return CurveData.from_json(Path(spec))


# ---------------------------------------------------------------- a_p


def count_points_naive(curve: CurveData, p: int) -> int:
    """#E(F_p) including the point at infinity, by double loop over (x, y).

    Singular points of a bad fibre are counted too, so p + 1 - count is
    a_p for every prime of good or multiplicative reduction.
    """
    a1, a2, a3, a4, a6 = (a % p for a in curve.a_invariants)
    count = 1
    for x in range(p):
        rhs = (x * x * x + a2 * x * x + a4 * x + a6) % p
        for y in range(p):
            if (y * y + a1 * x * y + a3 * y) % p == rhs:
                count += 1
    return count


def a_p(curve: CurveData, p: int) -> int:
    """Trace of Frobenius at p by point counting."""
    if p > 10**6:
        raise ValueError("point counting limited to p <= 10^6")
    bad = curve.conductor % p == 0
    if not bad and curve.discriminant % p == 0:
        raise CurveError(f"{curve.label}: p={p} divides the discriminant but not the conductor")
    if p < 5:
        ap = p + 1 - count_points_naive(curve, p)
    else:
        b2, b4, b6, _ = curve.b_invariants
        ap = int(kernels.traces_for_primes(np.array([p], dtype=np.int64), b2 % p, b4 % p, b6 % p)[0])
    if bad and ap not in (-1, 1):
        raise CurveError(f"{curve.label}: reduction at {p} is not multiplicative")
    return ap


def _cache_dir() -> Path:
    root = os.environ.get("HEEGNER_MOMENTS_CACHE")
    path = Path(root) if root else Path.home() / ".cache" / "heegner_moments"
    path.mkdir(parents=True, exist_ok=True)
    return path


# Below this bound a_p comes from the character sum over all x; above it
# from the group order found in the Hasse interval.
FAST_COUNT_FROM = 1000


def ap_array(curve: CurveData, bound: int, sieve: PrimeSieve, use_cache: bool = True) -> np.ndarray:
    """Array indexed by n whose prime entries are a_p, for p <= bound."""
    cache = _cache_dir() / f"ap_{curve.fingerprint()}.npy" if use_cache else None
    have = np.zeros(1, dtype=np.int64)
    if cache is not None and cache.exists():
        have = np.load(cache)
    if have.shape[0] > bound:
        return have[: bound + 1].copy()
    out = np.zeros(bound + 1, dtype=np.int64)
    start = have.shape[0]
    out[:start] = have
    primes = sieve.primes(bound)
    new = primes[primes >= start]
    small = new[new < 5]
    for p in small:
        out[p] = a_p(curve, int(p))
    big = new[new >= 5]
    if big.size:
        b2, b4, b6, _ = curve.b_invariants
        c4, c6 = curve.c_invariants
        bad = np.isin(big, curve.bad_primes())
        slow = big[(big < FAST_COUNT_FROM) | bad]
        fast = big[(big >= FAST_COUNT_FROM) & ~bad]
        out[slow] = kernels.traces_for_primes(slow.astype(np.int64), b2, b4, b6)
        out[fast] = kernels.traces_fast(fast.astype(np.int64), c4, c6, b2, b4, b6, 12)
        for p in curve.bad_primes():
            if start <= p <= bound and p >= 5 and out[p] not in (-1, 1):
                raise CurveError(f"{curve.label}: reduction at {p} is not multiplicative")
    if cache is not None and bound + 1 > have.shape[0]:
        tmp = cache.with_suffix(".tmp.npy")
        np.save(tmp, out)
        os.replace(tmp, cache)
    return out


@dataclass(frozen=True)
class CoefficientTable:
    """Exact a_1..a_{n_max}; ``a[0]`` is unused."""

    n_max: int
    a: np.ndarray = field(repr=False)

    def __getitem__(self, n: int) -> int:
        if n < 1 or n > self.n_max:
            raise IndexError(f"a_{n} outside table (n_max={self.n_max})")
        return int(self.a[n])


def coefficient_table(curve: CurveData, n_max: int, sieve: PrimeSieve | None = None) -> CoefficientTable:
    if sieve is None:
        sieve = PrimeSieve.build(max(n_max, 2))
    if n_max > sieve.bound:
        raise ValueError("n_max exceeds the sieve bound")
    # |a_n| <= d(n) sqrt(n) keeps every intermediate far below 2^62
    if n_max > 10**12:
        raise OverflowError("n_max too large for 64-bit coefficient table")
    ap = ap_array(curve, n_max, sieve)
    a = kernels.hecke_table(n_max, sieve.lpf, ap, curve.conductor)
    a.flags.writeable = False
    return CoefficientTable(n_max, a)


# ---------------------------------------------------------------- periods


@dataclass(frozen=True)
class PeriodData:
    omega1: float
    omega2_im: float
    rectangular: bool

    @property
    def area(self) -> float:
        return self.omega1 * self.omega2_im

    @property
    def volume_Omega(self) -> float:
        """Twice the area of a fundamental parallelogram."""
        return 2.0 * self.area


def _agm(a: float, b: float, tol: float, max_iter: int = 80) -> float:
    for _ in range(max_iter):
        if abs(a - b) <= tol * abs(a):
            return 0.5 * (a + b)
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    raise CurveError("AGM did not converge in 80 iterations")


def two_torsion_roots(curve: CurveData) -> np.ndarray:
    """Real roots of 4x^3 + b2 x^2 + 2 b4 x + b6, Newton-polished, descending."""
    b2, b4, b6, _ = curve.b_invariants
    coeffs = [4.0, float(b2), 2.0 * b4, float(b6)]
    roots = np.roots(coeffs)
    real = sorted((r.real for r in roots if abs(r.imag) < 1e-7 * max(1.0, abs(r))), reverse=True)
    polished = []
    for r in real:
        for _ in range(8):
            f = ((4 * r + b2) * r + 2 * b4) * r + b6
            df = (12 * r + 2 * b2) * r + 2 * b4
            if df == 0:
                break
            r -= f / df
        polished.append(r)
    return np.array(polished)


def periods(curve: CurveData, tol: float = 1e-14) -> PeriodData:
    """Real period and imaginary part of the second lattice generator by AGM."""
    if tol < 1e-14:
        raise ValueError("tol must be >= 1e-14")
    b2, b4, _, _ = curve.b_invariants
    roots = two_torsion_roots(curve)
    if curve.discriminant > 0:
        if len(roots) != 3:
            raise CurveError("expected three real 2-torsion roots")
        e1, e2, e3 = roots
        w1 = math.pi / _agm(math.sqrt(e1 - e3), math.sqrt(e1 - e2), tol)
        w2 = math.pi / _agm(math.sqrt(e1 - e3), math.sqrt(e2 - e3), tol)
        return PeriodData(w1, w2, True)
    e1 = roots[0]
    a = 3 * e1 + b2 / 4.0
    b = math.sqrt(3 * e1 * e1 + b2 * e1 / 2.0 + b4 / 2.0)
    w1 = 2 * math.pi / _agm(2 * math.sqrt(b), math.sqrt(2 * b + a), tol)
    w2 = math.pi / _agm(2 * math.sqrt(b), math.sqrt(2 * b - a), tol)
    return PeriodData(w1, w2, False)


# ---------------------------------------------------------------- Sym^2

BAD_FACTOR_TRIVIAL = 0  # 1/(1 - p^-s) at p | N
BAD_FACTOR_SHIFTED = 1  # 1/(1 - p^{1-s})


@dataclass(frozen=True)
class Sym2Params:
    X0: float = 2_500.0
    # e^{-n/X} is dropped once n > cutoff * X
    cutoff: float = 32.0
    tolerance: float = 1e-8
    bad_factor: int = BAD_FACTOR_TRIVIAL


@dataclass(frozen=True)
class Sym2Value:
    value: float
    error: float
    raw: tuple[float, float, float]
    within_tolerance: bool


class Sym2Series:
    """Dirichlet coefficients of L(Sym^2 E, s) with damped evaluation."""

    def __init__(self, curve: CurveData, params: Sym2Params = Sym2Params(), sieve: PrimeSieve | None = None):
        self.curve = curve
        self.params = params
        self.n_max = int(math.ceil(4 * params.X0 * params.cutoff))
        if sieve is None or sieve.bound < self.n_max:
            sieve = PrimeSieve.build(self.n_max)
        ap = ap_array(curve, self.n_max, sieve)
        b = kernels.sym2_table(self.n_max, sieve.lpf, ap, curve.conductor, params.bad_factor)
        self.b = b.astype(np.float64)
        self.logn = np.log(np.arange(1, self.n_max + 1, dtype=np.float64))
        self.n = np.arange(1, self.n_max + 1, dtype=np.float64)

    def damped(self, s: float, X: float) -> float:
        lim = min(self.n_max, int(self.params.cutoff * X))
        terms = self.b[1 : lim + 1] * np.exp(-s * self.logn[:lim] - self.n[:lim] / X)
        return fsum_array(terms)

    def value(self, s: float) -> Sym2Value:
        """Damped sums at X0, 2X0, 4X0 combined to cancel the 1/X and 1/X^2
        terms of the smoothing error."""
        X0 = self.params.X0
        t1, t2, t4 = (self.damped(s, k * X0) for k in (1, 2, 4))
        value = (t1 - 6 * t2 + 8 * t4) / 3.0
        two_point = 2 * t4 - t2
        err = abs(value - two_point)
        return Sym2Value(value, err, (t1, t2, t4), err <= self.params.tolerance * abs(value))


def sym2_value(curve: CurveData, s: float, params: Sym2Params = Sym2Params(), sieve: PrimeSieve | None = None) -> Sym2Value:
    if not 1.5 <= s <= 3.0:
        raise ValueError("s must lie in [1.5, 3]")
    return Sym2Series(curve, params, sieve).value(s)


def sym2_euler_product(curve: CurveData, s: float, prime_bound: int, sieve: PrimeSieve | None = None,
                       bad_factor: int = BAD_FACTOR_TRIVIAL) -> float:
    """Truncated Euler product of L(Sym^2 E, s); meaningful for s > 2."""
    if sieve is None or sieve.bound < prime_bound:
        sieve = PrimeSieve.build(prime_bound)
    ap = ap_array(curve, prime_bound, sieve)
    logs = NeumaierSum()
    for p in sieve.primes(prime_bound):
        p = int(p)
        x = float(p) ** (-s)
        if curve.conductor % p == 0:
            logs.add(-math.log1p(-(p**bad_factor) * x))
        else:
            a = float(ap[p])
            e1 = a * a - p
            e2 = p * a * a - p * p
            e3 = float(p) ** 3
            logs.add(-math.log(1 - e1 * x + e2 * x * x - e3 * x**3))
    return math.exp(logs.value)


# ---------------------------------------------------------------- L(s)


def correction_product(conductor: int, exponent: float, prime_bound: int, sieve: PrimeSieve | None = None) -> float:
    """prod_{p <= bound, (p, 2N) = 1} (1 - p^{-exponent} / (p + 1))."""
    if sieve is None or sieve.bound < prime_bound:
        sieve = PrimeSieve.build(prime_bound)
    ps = sieve.primes(prime_bound).astype(np.float64)
    ps = ps[(ps != 2) & (np.fmod(conductor, ps) != 0)]
    return math.exp(fsum_array(np.log1p(-ps ** (-exponent) / (ps + 1.0))))


def partial_zeta(x: float, conductor: int) -> float:
    """zeta^{(N)}(x): the Riemann zeta function with Euler factors at p | N removed."""
    val = float(special.zeta(x, 1))
    for p in prime_divisors(conductor):
        val *= 1 - p ** (-x)
    return val


@dataclass(frozen=True)
class MainLValues:
    L1: float
    L1_err: float
    dL1: float
    dL1_err: float
    sym2_at_2: float
    sym2_at_2_err: float
    correction_at_1: float
    bad_factor: int
    derivative_h: tuple[float, float]
    zeta_ratio: bool = True


class CompositeL:
    """L(s) = L(Sym^2 E, 2s) zeta^(N)(4s-2)/zeta^(N)(2s) prod_{(p,2N)=1}(1 - p^{-(4s-2)}/(p+1)).

    With ``zeta_ratio=False`` the zeta quotient is dropped. Both forms agree
    at s = 1; they differ in L'(1) by 2 L(1) (zeta^(N)'/zeta^(N))(2). The
    averaged diagonal sum_{k,l} a_{k^2} g(l) (k l^2)^{-2s} has the form
    without the quotient, since sum a_{k^2} k^{-s} = L(Sym^2, s)/zeta^(N)(2s-2).
    """

    def __init__(self, curve: CurveData, sym2_params: Sym2Params = Sym2Params(), prime_bound: int = 10**6,
                 sieve: PrimeSieve | None = None, zeta_ratio: bool = True):
        self.curve = curve
        self.use_zeta_ratio = zeta_ratio
        self.prime_bound = prime_bound
        need = max(prime_bound, int(math.ceil(4 * sym2_params.X0 * sym2_params.cutoff)))
        if sieve is None or sieve.bound < need:
            sieve = PrimeSieve.build(need)
        self.sieve = sieve
        self.series = Sym2Series(curve, sym2_params, sieve)
        ps = sieve.primes(prime_bound).astype(np.float64)
        self._ps = ps[(ps != 2) & (np.fmod(curve.conductor, ps) != 0)]

    def correction(self, s: float) -> float:
        e = 4 * s - 2
        return math.exp(fsum_array(np.log1p(-self._ps ** (-e) / (self._ps + 1.0))))

    def zeta_ratio(self, s: float) -> float:
        if s == 1.0 or not self.use_zeta_ratio:
            return 1.0
        return partial_zeta(4 * s - 2, self.curve.conductor) / partial_zeta(2 * s, self.curve.conductor)

    def value(self, s: float) -> tuple[float, float]:
        """(L(s), error bar) for |s - 1| <= 0.1."""
        if abs(s - 1) > 0.1:
            raise ValueError("L(s) only evaluated for |s - 1| <= 0.1")
        sv = self.series.value(2 * s)
        factor = self.zeta_ratio(s) * self.correction(s)
        return sv.value * factor, sv.error * abs(factor)

    def derivative_at_1(self, h: float = 1e-4) -> tuple[float, float, tuple[float, float]]:
        """Central differences at h and h/2 with one Richardson step."""
        def central(step):
            (lp, ep), (lm, em) = self.value(1 + step), self.value(1 - step)
            return (lp - lm) / (2 * step), (ep + em) / (2 * step)

        d1, e1 = central(h)
        d2, e2 = central(h / 2)
        richardson = (4 * d2 - d1) / 3
        err = abs(richardson - d2) + (4 * e2 + e1) / 3
        return richardson, err, (d1, d2)

    @cached_property
    def values(self) -> MainLValues:
        sv = self.series.value(2.0)
        corr = self.correction(1.0)
        dL, dL_err, (d1, d2) = self.derivative_at_1()
        return MainLValues(
            L1=sv.value * corr,
            L1_err=sv.error * corr,
            dL1=dL,
            dL1_err=dL_err,
            sym2_at_2=sv.value,
            sym2_at_2_err=sv.error,
            correction_at_1=corr,
            bad_factor=self.series.params.bad_factor,
            derivative_h=(d1, d2),
            zeta_ratio=self.use_zeta_ratio,
        )


def sym2_identity_target(curve: CurveData, per: PeriodData | None = None) -> float:
    """pi * Omega * deg(Phi) / N, the expected value of L(Sym^2 E, 2)."""
    if curve.modular_degree is None:
        raise CurveError(f"{curve.label}: modular degree not supplied")
    per = per or periods(curve)
    return math.pi * per.volume_Omega * curve.modular_degree / curve.conductor
