"""Heegner discriminants, the density constant c_N, the characters chi_d and
lattice representation counts."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from pathlib import Path

import numpy as np

from .numtheory import euler_phi, kronecker, prime_divisors, squarefree_mask, unit_squares_mod


class RootOfUnityCase(ValueError):
    """d = -3: the unit group has order 6 and ideal counts need weight 1/3."""


@dataclass(frozen=True)
class ResidueSet:
    """Classes d mod 4N with d = nu^2, gcd(nu, 4N) = 1."""

    N: int
    residues: frozenset[int]
    witnesses: dict = field(repr=False, compare=False, hash=False)

    @classmethod
    @lru_cache(maxsize=64)
    def build(cls, N: int) -> "ResidueSet":
        q = 4 * N
        wit: dict[int, int] = {}
        for nu in range(1, q):
            if math.gcd(nu, q) == 1:
                wit.setdefault(nu * nu % q, nu)
        res = frozenset(wit)
        assert res == unit_squares_mod(q)
        return cls(N, res, wit)

    @property
    def modulus(self) -> int:
        return 4 * self.N

    def __contains__(self, d: int) -> bool:
        return d % self.modulus in self.residues

    def __len__(self) -> int:
        return len(self.residues)

    def mask(self) -> np.ndarray:
        out = np.zeros(self.modulus, dtype=bool)
        out[list(self.residues)] = True
        return out


@dataclass(frozen=True)
class HeegnerDiscriminant:
    d: int
    witness_nu: int

    def __post_init__(self):
        if self.d >= 0 or self.d % 2 == 0:
            raise ValueError("Heegner discriminants are odd and negative")

    @property
    def absd(self) -> int:
        return -self.d

    @property
    def units_half(self) -> int:
        """u with 2u roots of unity in Q(sqrt d)."""
        return 3 if self.d == -3 else 1


@dataclass(frozen=True)
class HeegnerSet:
    N: int
    Y: int
    d: np.ndarray = field(repr=False)
    witness: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return int(self.d.size)

    def __iter__(self):
        for d, nu in zip(self.d.tolist(), self.witness.tolist()):
            yield HeegnerDiscriminant(d, nu)

    @property
    def discriminants(self) -> list[HeegnerDiscriminant]:
        return list(self)

    def window(self, lo: float, hi: float) -> "HeegnerSet":
        """Members with lo <= |d| <= hi."""
        a = -self.d
        keep = (a >= lo) & (a <= hi)
        return HeegnerSet(self.N, self.Y, self.d[keep], self.witness[keep])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["d", "witness_nu"])
            for d, nu in zip(self.d.tolist(), self.witness.tolist()):
                w.writerow([d, nu])

    @classmethod
    def from_csv(cls, path: str | Path, N: int) -> "HeegnerSet":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        d = np.array([int(r["d"]) for r in rows], dtype=np.int64)
        nu = np.array([int(r["witness_nu"]) for r in rows], dtype=np.int64)
        return cls(N, int(-d.min()) if d.size else 0, d, nu)


def enumerate_D(N: int, Y: int) -> HeegnerSet:
    """All d in the Heegner set with |d| <= Y, sorted by |d|."""
    if any(N % (p * p) == 0 for p in prime_divisors(N)):
        raise ValueError("N must be squarefree")
    rs = ResidueSet.build(N)
    absd = np.arange(1, Y + 1, dtype=np.int64)
    in_class = rs.mask()[(-absd) % rs.modulus]
    keep = in_class & squarefree_mask(Y)[1:]
    a = absd[keep]
    d = -a
    wit = np.array([rs.witnesses[int(r)] for r in (d % rs.modulus)], dtype=np.int64)
    return HeegnerSet(N, Y, d, wit)


def enumerate_D_prime(N: int, lo: int, hi: int, divisible_by: int = 1) -> np.ndarray:
    """d in the non-squarefree set D' (congruence condition only) with
    lo <= |d| <= hi and divisible_by | d; returned as negative integers."""
    rs = ResidueSet.build(N)
    absd = np.arange(max(lo, 1), hi + 1, dtype=np.int64)
    keep = rs.mask()[(-absd) % rs.modulus] & (absd % divisible_by == 0)
    return -absd[keep]


def density_constant(N: int) -> float:
    """c_N = 3/(pi^2 N) prod_{p | 2N} (1 - p^-2)^-1 card(ResidueSet)."""
    euler = math.prod(1.0 / (1.0 - p ** -2.0) for p in prime_divisors(2 * N))
    return 3.0 / (math.pi**2 * N) * euler * len(ResidueSet.build(N))


def residue_count_formula(N: int) -> int:
    """Size of the unit-square group mod 4N: phi(4N) / 2^{omega(4N)}, with one
    more factor 2 when 8 | 4N (squares of units mod 2^k, k >= 3, have index 4)."""
    q = 4 * N
    extra = 1 if q % 8 == 0 else 0
    return euler_phi(q) // 2 ** (len(prime_divisors(q)) + extra)


def chi_d(d: int, m: int) -> int:
    if d >= 0 or d % 4 != 1:
        raise ValueError("chi_d needs d < 0 with d = 1 mod 4")
    if m < 1:
        raise ValueError("m must be positive")
    return kronecker(d, m)


def chi_d_reciprocity(d: int, m: int) -> int:
    """chi_d(m) through the case table m = m1 m2^2 with m1 squarefree:
    (d/m1) for odd m1, chi_8(d)(d/m1) for even m1, 0 if (m2, d) > 1."""
    m1, m2 = 1, 1
    rest = m
    p = 2
    while p * p <= rest:
        k = 0
        while rest % p == 0:
            rest //= p
            k += 1
        m2 *= p ** (k // 2)
        m1 *= p ** (k % 2)
        p += 1
    m1 *= rest
    if math.gcd(m2, d) != 1:
        return 0
    if m1 % 2 == 1:
        return _jacobi(d, m1)
    chi8 = {1: 1, 7: 1, 3: -1, 5: -1}.get(d % 8, 0)
    return chi8 * _jacobi(d, m1 // 2)


def _jacobi(a: int, n: int) -> int:
    """Jacobi symbol for odd n > 0 via Legendre symbols of the prime factors."""
    out = 1
    for p in prime_divisors(n):
        k = 0
        while n % p == 0:
            n //= p
            k += 1
        leg = pow(a % p, (p - 1) // 2, p)
        leg = -1 if leg == p - 1 else leg
        out *= leg**k
    return out


def chi_table(d: int, N: int, m_max: int) -> np.ndarray:
    """chi_d(m) for 0 <= m <= m_max, zeroed where gcd(m, N) > 1."""
    m_max = max(m_max, 1)
    chi = np.zeros(m_max + 1, dtype=np.int64)
    chi[1] = 1
    lpf = _small_lpf(m_max)
    for m in range(2, m_max + 1):
        p = lpf[m]
        if p == m:
            chi[m] = 0 if N % p == 0 else kronecker(d, m)
        else:
            chi[m] = chi[p] * chi[m // p]
    return chi


@lru_cache(maxsize=8)
def _small_lpf(n: int) -> list[int]:
    lpf = list(range(n + 1))
    for p in range(2, math.isqrt(n) + 1):
        if lpf[p] == p:
            for k in range(p * p, n + 1, p):
                if lpf[k] == k:
                    lpf[k] = p
    return lpf


def detection_identity(d: int, N: int) -> Fraction:
    """2^{-omega(N)-1} sum_{chi mod 4} sum_{psi^2 = 1 mod N} chi(d) psi(d), N odd."""
    if N % 2 == 0:
        raise ValueError("character detection is only set up for odd N")
    primes = prime_divisors(N)
    chars4 = (lambda x: 1 if x % 2 else 0, lambda x: 0 if x % 2 == 0 else (1 if x % 4 == 1 else -1))
    total = 0
    for chi in chars4:
        for choice in product((0, 1), repeat=len(primes)):
            val = chi(d)
            for p, legendre in zip(primes, choice):
                if d % p == 0:
                    val = 0
                elif legendre:
                    val *= kronecker(d, p)
            total += val
    return Fraction(total, 2 ** (len(primes) + 1))


def _lattice_points(absd: int, n: int):
    """All (u, v) in Z^2 with u^2 + |d| v^2 = 4n."""
    out = []
    v = 0
    while absd * v * v <= 4 * n:
        rest = 4 * n - absd * v * v
        u = math.isqrt(rest)
        if u * u == rest:
            for uu in {u, -u}:
                for vv in {v, -v}:
                    out.append((uu, vv))
        v += 1
    return out


def r_prime(d: int, n: int) -> int:
    """card{(u, v) : u >= 0, v != 0, u^2 + |d| v^2 = 4n}."""
    if n < 1:
        raise ValueError("n must be positive")
    return sum(1 for u, v in _lattice_points(-d, n) if u >= 0 and v != 0)


def r_ideal(d: int, n: int) -> Fraction:
    """Number of principal ideals of norm n in Q(sqrt d), d < -4."""
    if d == -3:
        raise RootOfUnityCase("d = -3: divide the lattice count by 6, not 2")
    if d >= -4:
        raise ValueError("r_ideal expects d < -4")
    if n < 1:
        raise ValueError("n must be positive")
    return Fraction(len(_lattice_points(-d, n)), 2)


def sparsity_counts(N: int, n_max: int) -> np.ndarray:
    """Array whose entry n is sum_{d in D} r'_d(n), for n <= n_max.

    Every d contributing to r'_d(n) has |d| <= 4n, so the full set up to
    4 n_max is enumerated once and its lattice points are binned by n.
    """
    counts = np.zeros(n_max + 1, dtype=np.int64)
    D = enumerate_D(N, 4 * n_max)
    for a in (-D.d).tolist():
        v = 1
        while a * v * v <= 4 * n_max:
            base = a * v * v
            us = np.arange(v % 2, math.isqrt(4 * n_max - base) + 1, 2)
            q4 = us * us + base
            q4 = q4[q4 % 4 == 0]
            np.add.at(counts, q4 // 4, 2)
            v += 1
    return counts
