"""Exact integer arithmetic shared by the rest of the package.

Everything here is pure integer code: a least-prime-factor sieve, the
Moebius and prime-omega functions computed from it, the Kronecker symbol
and the group of unit squares modulo q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Desk-scale quantities must fit a signed 128-bit integer.
INT128_MAX = 2**127 - 1


class SieveRangeError(ValueError):
    """Raised when a query exceeds the sieve bound."""


@dataclass(frozen=True)
class PrimeSieve:
    """Least-prime-factor table on ``2..bound``.

    ``lpf[n]`` is the smallest prime dividing ``n``; ``lpf[0]`` and
    ``lpf[1]`` are 0.
    """

    bound: int
    lpf: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, bound: int) -> "PrimeSieve":
        if bound < 2:
            raise ValueError("sieve bound must be >= 2")
        if bound > INT128_MAX:
            raise OverflowError("sieve bound exceeds 128-bit range")
        lpf = np.zeros(bound + 1, dtype=np.int64)
        for p in range(2, math.isqrt(bound) + 1):
            if lpf[p] == 0:
                seg = lpf[p * p :: p]
                seg[seg == 0] = p
        rest = np.flatnonzero(lpf == 0)
        rest = rest[rest >= 2]
        lpf[rest] = rest
        lpf.flags.writeable = False
        return cls(bound, lpf)

    def _check(self, n: int) -> None:
        if n < 1 or n > self.bound:
            raise SieveRangeError(f"{n} outside sieve range [1, {self.bound}]")

    def primes(self, upto: int | None = None) -> np.ndarray:
        hi = self.bound if upto is None else min(upto, self.bound)
        idx = np.arange(2, hi + 1)
        return idx[self.lpf[2 : hi + 1] == idx]

    def is_prime(self, n: int) -> bool:
        self._check(n)
        return n >= 2 and int(self.lpf[n]) == n

    def factor(self, n: int) -> dict[int, int]:
        self._check(n)
        out: dict[int, int] = {}
        while n > 1:
            p = int(self.lpf[n])
            k = 0
            while n % p == 0:
                n //= p
                k += 1
            out[p] = k
        return out

    def mobius(self, n: int) -> int:
        fac = self.factor(n)
        if any(k > 1 for k in fac.values()):
            return 0
        return -1 if len(fac) % 2 else 1

    def omega(self, n: int) -> int:
        return len(self.factor(n))

    def divisor_count(self, n: int) -> int:
        return math.prod(k + 1 for k in self.factor(n).values())

    def is_squarefree(self, n: int) -> bool:
        return all(k == 1 for k in self.factor(abs(n)).values())

    def divisor_count_table(self, upto: int) -> np.ndarray:
        """d(n) for 0 <= n <= upto (entry 0 unused)."""
        if upto > self.bound:
            raise SieveRangeError(f"{upto} outside sieve range")
        d = np.zeros(upto + 1, dtype=np.int64)
        d[1:] = 1
        for p in self.primes(upto):
            p = int(p)
            pk, k = p, 1
            while pk <= upto:
                # n with exact p-adic valuation k: multiply d by (k+1)/k
                idx = np.arange(pk, upto + 1, pk)
                d[idx] = d[idx] // k * (k + 1)
                pk *= p
                k += 1
        return d


def squarefree_mask(upto: int) -> np.ndarray:
    """Boolean mask ``m`` with ``m[n]`` true iff n is squarefree (n >= 1)."""
    mask = np.ones(upto + 1, dtype=bool)
    mask[0] = False
    for a in range(2, math.isqrt(upto) + 1):
        mask[a * a :: a * a] = False
    return mask


def mobius_small(n: int) -> int:
    """Moebius function by trial division, for callers without a sieve."""
    if n < 1:
        raise ValueError("mobius needs n >= 1")
    k = 0
    p = 2
    while p * p <= n:
        if n % p == 0:
            n //= p
            if n % p == 0:
                return 0
            k += 1
        p += 1
    if n > 1:
        k += 1
    return -1 if k % 2 else 1


def prime_divisors(n: int) -> list[int]:
    n = abs(n)
    out = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def kronecker(d: int, m: int) -> int:
    """Kronecker symbol (d/m) for integer d and m >= 0.

    Reduction by quadratic reciprocity; powers of 2 and the sign of d are
    handled explicitly so the function is total.
    """
    if m < 0:
        raise ValueError("kronecker symbol needs m >= 0")
    if m == 0:
        return 1 if abs(d) == 1 else 0
    if d % 2 == 0 and m % 2 == 0:
        return 0
    # strip factors of two from m
    v = (m & -m).bit_length() - 1
    m >>= v
    k = 1
    if v % 2 == 1 and d % 8 in (3, 5):
        k = -k
    # m is now odd and positive
    a = d % m
    while a != 0:
        t = (a & -a).bit_length() - 1
        a >>= t
        if t % 2 == 1 and m % 8 in (3, 5):
            k = -k
        if a % 4 == 3 and m % 4 == 3:
            k = -k
        a, m = m % a, a
    return k if m == 1 else 0


def unit_squares_mod(q: int) -> frozenset[int]:
    """{nu^2 mod q : gcd(nu, q) = 1}."""
    if q < 1:
        raise ValueError("modulus must be positive")
    if q == 1:
        return frozenset({0})
    return frozenset((v * v) % q for v in range(q) if math.gcd(v, q) == 1)


def euler_phi(n: int) -> int:
    out = n
    for p in prime_divisors(n):
        out = out // p * (p - 1)
    return out
