import math

import numpy as np
import pytest
from scipy.special import k0, k1

from heegner_moments import kernels
from heegner_moments.afe import (CutoffSpec, QuadratureError, TableTooShort, TruncationParams,
                                 antisymmetry_sums, check_contours, cutoff_V, decay_constant,
                                 ideal_count_terms, l_prime_central, lattice_sum,
                                 quarter_power_constant)
from heegner_moments.curve import coefficient_table, load_curve
from heegner_moments.heegner import chi_d, enumerate_D
from heegner_moments.numtheory import PrimeSieve

SPEC = CutoffSpec()
XS = np.geomspace(1e-4, 300.0, 300)


def V_closed(x):
    # (1/2 pi i) int Gamma(1+w)^2 x^-w dw/w^2 = 2 K_0(2 sqrt x)
    return 2 * k0(2 * np.sqrt(x))


def W_closed(x):
    return 2 * np.sqrt(x) * k1(2 * np.sqrt(x))


@pytest.fixture(scope="module")
def curve():
    return load_curve("11a1")


@pytest.fixture(scope="module")
def coeffs(curve):
    return coefficient_table(curve, 400_000, PrimeSieve.build(400_000))


def test_V_matches_bessel_closed_form():
    assert np.max(np.abs(SPEC.V(XS) - V_closed(XS))) < 1e-12


def test_W_matches_bessel_closed_form():
    assert np.max(np.abs(SPEC.W(XS) - W_closed(XS))) < 1e-12


def test_V_limits():
    # V(x) ~ -log x - 2 gamma near 0, and V decays like sqrt(pi) x^-1/4 e^{-2 sqrt x}
    x = 1e-6
    assert cutoff_V(x)[0] == pytest.approx(-math.log(x) - 2 * 0.5772156649015329, abs=1e-4)
    assert cutoff_V(300.0)[0] < 1e-14


def test_contour_independence():
    assert check_contours(SPEC, 1.1, XS, tol=1e-10) < 1e-10
    assert check_contours(SPEC, 0.5, XS, tol=1e-10) < 1e-10


def test_contour_check_raises_on_disagreement():
    coarse = CutoffSpec(T=3.0)
    with pytest.raises(QuadratureError):
        check_contours(coarse, 1.1, XS, tol=1e-12)


def test_interpolation_accuracy():
    xs = np.geomspace(1e-7, 390.0, 2000)
    approx = cutoff_V(xs, SPEC, interpolate=True)
    assert np.max(np.abs(approx - V_closed(xs))) < 1e-9


def test_decay_constant_stable_under_refinement():
    c1 = decay_constant(SPEC)
    c2 = decay_constant(SPEC.refined())
    assert abs(c1 - c2) / c1 < 0.01
    # the envelope constant tends to sqrt(pi) from below
    assert c1 < math.sqrt(math.pi) * 1.01


def test_quarter_power_constant_dominates():
    cq = quarter_power_constant(SPEC)
    xs = np.geomspace(1e-7, 400, 5000)
    assert np.all(V_closed(xs) * xs**0.25 <= cq)


def test_invalid_spec():
    with pytest.raises(ValueError):
        CutoffSpec(c=0.1)
    with pytest.raises(ValueError):
        cutoff_V(-1.0)


def test_truncation_ranges():
    t = TruncationParams(11, 1000)
    e = 0.1
    assert t.U == pytest.approx(11 ** (0.5 + e / 2) * 1000 ** (0.5 + e / 2))
    assert t.V_bound == pytest.approx(11 ** (0.5 + e / 2) * 1000 ** (e / 2))
    assert t.N0 == pytest.approx((11 * 1000) ** 1.1)
    assert t.n_cap(1000) >= t.N0
    assert t.tail_bound(1000) < 1e-8


def lprime_oracle(curve, d, coeffs, cap):
    """2 sum_m chi(m)/m sum_n a_n r_d(n)/n V(.) with r_d from explicit
    lattice enumeration and V in closed form."""
    N, absd = curve.conductor, -d
    ns, rs = ideal_count_terms(d, cap)
    total = 0.0
    for m in range(1, math.isqrt(cap) + 1):
        if math.gcd(m, N) != 1:
            continue
        ch = chi_d(d, m)
        keep = ns * m * m <= cap
        if not ch or not keep.any():
            continue
        n = ns[keep]
        x = 4 * math.pi**2 * n * m * m / (N * absd)
        total += ch / m * math.fsum(rs[keep] * coeffs.a[n] / n * V_closed(x))
    return 2 * total


@pytest.mark.parametrize("d", [-7, -19, -35, -39, -43, -211])
def test_lprime_against_oracle(curve, coeffs, d):
    cap = TruncationParams(11, -d).n_cap(-d)
    assert l_prime_central(curve, d, coeffs) == pytest.approx(lprime_oracle(curve, d, coeffs, cap), rel=1e-9)


def test_lprime_frozen_values(curve, coeffs):
    frozen = {-7: 0.3111001759, -19: 1.9073465611, -35: 2.7097767846, -39: 3.7358619083, -43: 3.0160084982}
    for d, val in frozen.items():
        assert l_prime_central(curve, d, coeffs) == pytest.approx(val, abs=2e-10)


def test_truncation_tail_is_honest(curve, coeffs):
    d = -43
    t = TruncationParams(11, 43)
    cap = t.n_cap(43)
    base, _ = lattice_sum(d, 11, coeffs, SPEC, cap)
    longer, _ = lattice_sum(d, 11, coeffs, SPEC, int(cap * 1.5))
    assert abs(2 * (longer - base)) <= t.tail_bound(43)


@pytest.mark.parametrize("d", [-7, -19, -35, -39, -43, -79, -83, -107, -131, -151])
def test_antisymmetry(curve, coeffs, d):
    sX, sinv = antisymmetry_sums(curve, d, coeffs, 2.0)
    # root number -1: L_d(1) = S(X) - S(1/X) = 0
    assert abs(sX - sinv) <= 1e-8 * max(abs(sX), abs(sinv))
    assert abs(sX + sinv) > 0.1 * abs(sX)


def test_lattice_modes_decompose(curve, coeffs):
    d = -131
    cap = TruncationParams(11, 131).n_cap(131)
    full, _ = lattice_sum(d, 11, coeffs, SPEC, cap, kernels.MODE_FULL)
    diag, _ = lattice_sum(d, 11, coeffs, SPEC, cap, kernels.MODE_DIAG)
    off, _ = lattice_sum(d, 11, coeffs, SPEC, cap, kernels.MODE_OFF)
    u0, _ = lattice_sum(d, 11, coeffs, SPEC, cap, kernels.MODE_U0)
    assert full == pytest.approx(diag + off - 0.5 * u0, rel=1e-13)
    absolute, _ = lattice_sum(d, 11, coeffs, SPEC, cap, kernels.MODE_OFF, use_abs=True)
    assert absolute >= abs(off)


def test_table_too_short(curve):
    small = coefficient_table(curve, 1000)
    with pytest.raises(TableTooShort):
        l_prime_central(curve, -43, small)


def test_rejects_non_discriminant(curve, coeffs):
    with pytest.raises(ValueError):
        l_prime_central(curve, -8, coeffs)


def test_positivity_small_family(curve, coeffs):
    for d in enumerate_D(11, 1500).d.tolist():
        assert l_prime_central(curve, d, coeffs) >= -1e-6
