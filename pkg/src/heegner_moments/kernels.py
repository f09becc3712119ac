"""Compiled inner loops (numba).

These functions take plain arrays and scalars only; the typed wrappers
live in :mod:`curve`, :mod:`afe` and :mod:`moments`.
"""

import math

import numba
import numpy as np


@numba.njit(cache=True)
def trace_of_frobenius_odd(p, b2, b4, b6, chi):
    """a_p = -sum_x chi(4x^3 + b2 x^2 + 2 b4 x + b6) for odd p.

    ``chi`` is a scratch int8 buffer of length >= p, overwritten with the
    quadratic character mod p.
    """
    for i in range(p):
        chi[i] = -1
    chi[0] = 0
    s = 0
    for k in range(1, (p - 1) // 2 + 1):
        s += 2 * k - 1
        if s >= p:
            s -= p
        chi[s] = 1
    # finite differences of the cubic, all reduced mod p
    g = b6 % p
    d1 = (4 + b2 + 2 * b4) % p
    d2 = (24 + 2 * b2) % p
    d3 = 24 % p
    acc = 0
    for _ in range(p):
        acc += chi[g]
        g += d1
        if g >= p:
            g -= p
        d1 += d2
        if d1 >= p:
            d1 -= p
        d2 += d3
        if d2 >= p:
            d2 -= p
    return -acc


@numba.njit(cache=True)
def traces_for_primes(primes, b2, b4, b6):
    out = np.zeros(primes.shape[0], dtype=np.int64)
    if primes.shape[0] == 0:
        return out
    chi = np.empty(primes[-1] + 1, dtype=np.int8)
    for i in range(primes.shape[0]):
        out[i] = trace_of_frobenius_odd(primes[i], b2, b4, b6, chi)
    return out


@numba.njit(cache=True)
def _powmod(b, e, p):
    r = 1
    b %= p
    while e > 0:
        if e & 1:
            r = r * b % p
        b = b * b % p
        e >>= 1
    return r


@numba.njit(cache=True)
def _sqrtmod(a, p):
    """Tonelli-Shanks square root of a quadratic residue a mod odd p."""
    if a == 0:
        return 0
    if p % 4 == 3:
        return _powmod(a, (p + 1) // 4, p)
    q = p - 1
    s = 0
    while q % 2 == 0:
        q //= 2
        s += 1
    z = 2
    while _powmod(z, (p - 1) // 2, p) != p - 1:
        z += 1
    m = s
    c = _powmod(z, q, p)
    t = _powmod(a, q, p)
    r = _powmod(a, (q + 1) // 2, p)
    while t != 1:
        i = 0
        t2 = t
        while t2 != 1:
            t2 = t2 * t2 % p
            i += 1
        b = c
        for _ in range(m - i - 1):
            b = b * b % p
        m = i
        c = b * b % p
        t = t * c % p
        r = r * b % p
    return r


@numba.njit(cache=True)
def _proj_add(X1, Y1, Z1, X2, Y2, Z2, A, p):
    """Sum of two points of y^2 = x^3 + A x + B in homogeneous coordinates."""
    if Z1 == 0:
        return X2, Y2, Z2
    if Z2 == 0:
        return X1, Y1, Z1
    u = (Y2 * Z1 - Y1 * Z2) % p
    v = (X2 * Z1 - X1 * Z2) % p
    if v == 0:
        if u != 0:
            return 0, 1, 0
        # doubling
        if Y1 == 0:
            return 0, 1, 0
        w = (A * Z1 % p * Z1 + 3 * X1 % p * X1) % p
        s = Y1 * Z1 % p
        B = X1 * Y1 % p * s % p
        h = (w * w - 8 * B) % p
        X3 = 2 * h % p * s % p
        Y3 = (w * ((4 * B - h) % p) - 8 * (Y1 * Y1 % p) % p * (s * s % p)) % p
        Z3 = 8 * s % p * (s * s % p) % p
        return X3, Y3, Z3
    uu = u * u % p
    vv = v * v % p
    vvv = vv * v % p
    z12 = Z1 * Z2 % p
    R = vv * X1 % p * Z2 % p
    Aa = (uu * z12 - vvv - 2 * R) % p
    X3 = v * Aa % p
    Y3 = (u * ((R - Aa) % p) - vvv * (Y1 * Z2 % p)) % p
    Z3 = vvv * z12 % p
    return X3, Y3, Z3


@numba.njit(cache=True)
def _proj_mul(k, X, Y, Z, A, p):
    RX, RY, RZ = 0, 1, 0
    QX, QY, QZ = X, Y, Z
    while k > 0:
        if k & 1:
            RX, RY, RZ = _proj_add(RX, RY, RZ, QX, QY, QZ, A, p)
        QX, QY, QZ = _proj_add(QX, QY, QZ, QX, QY, QZ, A, p)
        k >>= 1
    return RX, RY, RZ


@numba.njit(cache=True)
def group_order_hasse_scan(p, A, B, max_points):
    """#E(F_p) for y^2 = x^3 + A x + B (p >= 5, good reduction).

    For successive points P, the multiples M of the order of P inside the
    Hasse interval are found by stepping [M]P through the interval; the
    candidate sets are intersected until one value remains. Returns -1 if
    ``max_points`` points leave the order ambiguous.
    """
    r = int(math.sqrt(p))
    while r * r > p:
        r -= 1
    while (r + 1) * (r + 1) <= p:
        r += 1
    lo = p + 1 - 2 * (r + 1)
    hi = p + 1 + 2 * (r + 1)
    width = hi - lo + 1
    alive = np.ones(width, dtype=np.bool_)
    n_alive = width
    x = 0
    used = 0
    while used < max_points and x < p:
        f = (x * x % p * x + A * x + B) % p
        x += 1
        if f == 0 or _powmod(f, (p - 1) // 2, p) != 1:
            continue
        y = _sqrtmod(f, p)
        used += 1
        X, Y, Z = _proj_mul(lo, x - 1, y, 1, A, p)
        n_alive = 0
        for j in range(width):
            if alive[j]:
                if Z != 0:
                    alive[j] = False
                else:
                    n_alive += 1
            X, Y, Z = _proj_add(X, Y, Z, x - 1, y, 1, A, p)
        if n_alive == 1:
            for j in range(width):
                if alive[j]:
                    return lo + j
    return -1


@numba.njit(cache=True)
def traces_fast(primes, c4, c6, b2, b4, b6, max_points):
    """a_p for good primes p >= 5 via group orders; falls back to the
    character sum when the scan stays ambiguous."""
    out = np.zeros(primes.shape[0], dtype=np.int64)
    chi = np.empty(1, dtype=np.int8)
    for i in range(primes.shape[0]):
        p = primes[i]
        A = (-27 * (c4 % p)) % p
        B = (-54 * (c6 % p)) % p
        order = group_order_hasse_scan(p, A, B, max_points)
        if order < 0:
            if chi.shape[0] < p:
                chi = np.empty(p, dtype=np.int8)
            out[i] = trace_of_frobenius_odd(p, b2, b4, b6, chi)
        else:
            out[i] = p + 1 - order
    return out


@numba.njit(cache=True)
def hecke_table(n_max, lpf, ap, conductor):
    """a_1..a_{n_max} from a_p (indexed by p) via multiplicativity and the
    Hecke recurrence; entry 0 is unused."""
    a = np.zeros(n_max + 1, dtype=np.int64)
    ppart = np.zeros(n_max + 1, dtype=np.int64)
    a[1] = 1
    ppart[1] = 1
    for n in range(2, n_max + 1):
        p = lpf[n]
        m = n // p
        if m % p == 0:
            ppart[n] = ppart[m] * p
        else:
            ppart[n] = p
        q = ppart[n]
        if q == n:
            if n == p:
                a[n] = ap[p]
            elif conductor % p == 0:
                a[n] = ap[p] * a[m]
            else:
                a[n] = ap[p] * a[m] - p * a[m // p]
        else:
            a[n] = a[q] * a[n // q]
    return a


@numba.njit(cache=True)
def sym2_table(n_max, lpf, ap, conductor, bad_shift):
    """Dirichlet coefficients of L(Sym^2 E, s) up to n_max.

    Good p: local factor 1/((1 - alpha^2 X)(1 - p X)(1 - beta^2 X)), X = p^-s.
    Bad p:  1/(1 - p^bad_shift X), bad_shift in {0, 1}.
    """
    b = np.zeros(n_max + 1, dtype=np.int64)
    ppart = np.zeros(n_max + 1, dtype=np.int64)
    b[1] = 1
    ppart[1] = 1
    for n in range(2, n_max + 1):
        p = lpf[n]
        m = n // p
        if m % p == 0:
            ppart[n] = ppart[m] * p
        else:
            ppart[n] = p
        q = ppart[n]
        if q == n:
            if conductor % p == 0:
                b[n] = b[m] * (p if bad_shift == 1 else 1)
            else:
                e1 = ap[p] * ap[p] - p
                e2 = p * ap[p] * ap[p] - p * p
                e3 = p * p * p
                # c_k = e1 c_{k-1} - e2 c_{k-2} + e3 c_{k-3}
                val = e1 * b[m]
                if m >= p:
                    val -= e2 * b[m // p]
                    if m >= p * p:
                        val += e3 * b[m // (p * p)]
                b[n] = val
        else:
            b[n] = b[q] * b[n // q]
    return b


@numba.njit(cache=True)
def hermite_eval(x, log_lo, inv_step, vals, dvals):
    """Cubic Hermite interpolation in t = log x of a tabulated function.

    ``vals[k]`` and ``dvals[k]`` are f and df/dt at t_k = log_lo + k / inv_step.
    """
    t = (math.log(x) - log_lo) * inv_step
    k = int(t)
    if k < 0:
        k = 0
    if k > vals.shape[0] - 2:
        k = vals.shape[0] - 2
    s = t - k
    h = 1.0 / inv_step
    s2 = s * s
    s3 = s2 * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    return h00 * vals[k] + h10 * h * dvals[k] + h01 * vals[k + 1] + h11 * h * dvals[k + 1]


# lattice-sum modes
MODE_FULL = 0  # r_d(n): ideals, (u, v) in Z^2 counted with weight 1/2
MODE_DIAG = 1  # v = 0 only
MODE_OFF = 2  # r'_d(n): u >= 0, v != 0
MODE_U0 = 3  # u = 0, v != 0 boundary terms (weight as in r'_d)


@numba.njit(cache=True, nogil=True)
def lattice_sum(absd, conductor, chi_m, a, n_cap, x_scale, log_lo, inv_step, vals, dvals, x_hi, mode, use_abs):
    """sum_m chi(m)/m sum_(u,v) w(u,v) a_n / n * V(x_scale n m^2), 4n = u^2 + |d| v^2.

    ``chi_m[m]`` holds chi_d(m) for (m, N) = 1 and 0 otherwise; terms with
    n m^2 > n_cap are dropped. Order is m, |v|, u ascending with Neumaier
    compensation. With ``use_abs`` every term enters in absolute value.
    Returns (sum, number of terms).
    """
    s = 0.0
    c = 0.0
    count = 0
    m_max = chi_m.shape[0] - 1
    for m in range(1, m_max + 1):
        ch = chi_m[m]
        if ch == 0:
            continue
        m2 = m * m
        if m2 > n_cap:
            break
        lim4 = 4 * (n_cap // m2)
        v = 0
        if mode == MODE_OFF or mode == MODE_U0:
            v = 1
        while True:
            base = absd * v * v
            if base > lim4:
                break
            if mode == MODE_DIAG and v > 0:
                break
            u = v % 2
            if mode == MODE_U0:
                u = 0
            while True:
                q4 = u * u + base
                if q4 > lim4:
                    break
                if mode == MODE_U0 and u > 0:
                    break
                if q4 > 0 and q4 % 4 == 0:
                    n = q4 // 4
                    if mode == MODE_FULL:
                        if v == 0:
                            w = 1.0
                        elif u == 0:
                            w = 1.0
                        else:
                            w = 2.0
                    elif mode == MODE_DIAG:
                        w = 1.0
                    else:
                        w = 2.0
                    x = x_scale * n * m2
                    if x < x_hi:
                        vx = hermite_eval(x, log_lo, inv_step, vals, dvals)
                        term = w * ch * a[n] * vx / (m * n)
                        if use_abs:
                            term = abs(term)
                        t = s + term
                        if abs(s) >= abs(term):
                            c += (s - t) + term
                        else:
                            c += (term - t) + s
                        s = t
                        count += 1
                u += 2
            v += 1
    return s + c, count


@numba.njit(cache=True, nogil=True)
def lattice_majorant(absd, chi_m, dn, n_cap, x_scale, cv_quarter, x_hi):
    """Termwise majorant of the off-diagonal sum:
    2 d(n) n^{-1/2} / m * C * x^{-1/4}, using |a_n| <= d(n) sqrt(n) and
    |V(x)| <= C x^{-1/4}."""
    s = 0.0
    c = 0.0
    m_max = chi_m.shape[0] - 1
    for m in range(1, m_max + 1):
        if chi_m[m] == 0:
            continue
        m2 = m * m
        if m2 > n_cap:
            break
        lim4 = 4 * (n_cap // m2)
        v = 1
        while absd * v * v <= lim4:
            base = absd * v * v
            u = v % 2
            while u * u + base <= lim4:
                n = (u * u + base) // 4
                x = x_scale * n * m2
                if x < x_hi:
                    term = 2.0 * dn[n] / (math.sqrt(n) * m) * cv_quarter * x ** (-0.25)
                    t = s + term
                    if abs(s) >= abs(term):
                        c += (s - t) + term
                    else:
                        c += (term - t) + s
                    s = t
                u += 2
            v += 1
    return s + c
