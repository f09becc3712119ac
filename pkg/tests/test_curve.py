import math

import mpmath
import numpy as np
import pytest

from heegner_moments.curve import (BAD_FACTOR_SHIFTED, BAD_FACTOR_TRIVIAL, CompositeL, CurveData,
                                   CurveError, Sym2Params, a_p, ap_array, builtin_curves,
                                   coefficient_table, count_points_naive, load_curve,
                                   partial_zeta, periods, sym2_euler_product,
                                   sym2_identity_target, sym2_value)
from heegner_moments.numtheory import PrimeSieve

LABELS = ["11a1", "14a1", "15a1", "17a1", "19a1"]

# weight-2 newforms of levels 11, 14, 15 as eta products
ETA_PRODUCTS = {
    "11a1": [(1, 2), (11, 2)],
    "14a1": [(1, 1), (2, 1), (7, 1), (14, 1)],
    "15a1": [(1, 1), (3, 1), (5, 1), (15, 1)],
}


def eta_product_coefficients(factors, n_max):
    """q-expansion of q prod_k prod_n (1 - q^{kn})^e, by integer power-series
    multiplication; the exponents of q sum to 1 for these levels."""
    series = np.zeros(n_max + 1, dtype=object)
    series[0] = 1
    for k, e in factors:
        for _ in range(e):
            for n in range(1, n_max // k + 1):
                step = k * n
                # multiply by (1 - q^step)
                series[step:] = series[step:] - series[: n_max + 1 - step]
    out = np.zeros(n_max + 1, dtype=np.int64)
    out[1:] = series[: n_max].astype(np.int64)
    return out


@pytest.fixture(scope="module")
def sieve():
    return PrimeSieve.build(200_000)


@pytest.mark.parametrize("label", sorted(ETA_PRODUCTS))
def test_hecke_table_matches_eta_product(label, sieve):
    curve = load_curve(label)
    n_max = 1500
    expected = eta_product_coefficients(ETA_PRODUCTS[label], n_max)
    table = coefficient_table(curve, n_max, sieve)
    assert np.array_equal(table.a[1:], expected[1:])


def test_known_ap_11a1():
    curve = load_curve("11a1")
    known = {2: -2, 3: -1, 5: 1, 7: -2, 11: 1, 13: 4, 17: -2, 19: 0, 23: -1, 29: 0, 31: 7}
    assert {p: a_p(curve, p) for p in known} == known


@pytest.mark.parametrize("label", LABELS)
def test_fast_point_count_agrees_with_naive(label, sieve):
    curve = load_curve(label)
    ap = ap_array(curve, 200_000, sieve, use_cache=False)
    ps = sieve.primes(200_000)
    for p in [int(q) for q in ps[(ps > 1000)][::997]][:12]:
        # naive count over F_p x F_p is O(p^2); keep p moderate
        if p < 3000:
            assert ap[p] == p + 1 - count_points_naive(curve, p)
    slow = ps[(ps >= 1000) & (ps < 20000)]
    from heegner_moments import kernels
    b2, b4, b6, _ = curve.b_invariants
    naive = kernels.traces_for_primes(slow.astype(np.int64), b2, b4, b6)
    assert np.array_equal(ap[slow], naive)


@pytest.mark.parametrize("label", LABELS)
def test_hasse_bound(label, sieve):
    ap = ap_array(load_curve(label), 50_000, sieve)
    ps = sieve.primes(50_000)
    assert np.all(ap[ps] ** 2 <= 4 * ps)


def test_bad_primes_are_multiplicative():
    for label, curve in builtin_curves().items():
        for p in curve.bad_primes():
            assert a_p(curve, p) in (-1, 1)


def test_ap_cache_roundtrip(tmp_path, monkeypatch, sieve):
    monkeypatch.setenv("HEEGNER_MOMENTS_CACHE", str(tmp_path))
    curve = load_curve("17a1")
    first = ap_array(curve, 5000, sieve)
    assert (tmp_path / f"ap_{curve.fingerprint()}.npy").exists()
    longer = ap_array(curve, 9000, sieve)
    assert np.array_equal(longer[:5001], first)
    assert np.array_equal(ap_array(curve, 9000, sieve, use_cache=False), longer)


def test_invalid_curves_rejected():
    with pytest.raises(CurveError):
        CurveData("sing", (0, 0, 0, 0, 0), 11)
    with pytest.raises(CurveError):
        CurveData("sq", (0, -1, 1, -10, -20), 44)
    with pytest.raises(CurveError):
        CurveData("wrongN", (0, -1, 1, -10, -20), 13)


def test_json_roundtrip(tmp_path):
    curve = load_curve("15a1")
    path = tmp_path / "c.json"
    import json
    path.write_text(json.dumps(curve.to_json()))
    assert load_curve(str(path)) == curve


def _period_oracle(curve):
    """Real period and the imaginary part of the second basis vector by
    direct quadrature of dx / sqrt(f(x))."""
    b2, b4, b6, _ = curve.b_invariants
    mpmath.mp.dps = 30
    f = lambda x: 4 * x**3 + b2 * x**2 + 2 * b4 * x + b6
    all_roots = mpmath.polyroots([4, b2, 2 * b4, b6], extraprec=60)
    roots = sorted(mpmath.re(r) for r in all_roots if abs(mpmath.im(r)) < 1e-20)
    e1 = roots[-1]
    g = lambda x: 1 / mpmath.sqrt(abs(f(x)))
    w1 = 2 * mpmath.quad(g, [e1, e1 + 1, mpmath.inf], maxdegree=10)
    if len(roots) == 3:
        w2 = 2 * mpmath.quad(g, [roots[1], e1], maxdegree=10)
    else:
        # one real root: the lattice is spanned by w1 and w1/2 + i y with
        # y = int_{-inf}^{e1} dx / sqrt(-f(x)); split near the complex pair
        c = min(mpmath.re(r) for r in all_roots if abs(mpmath.im(r)) >= 1e-20)
        pts = sorted({c - 1, c, c + 1, e1 - 1})
        pts = [x for x in pts if x < e1]
        w2 = mpmath.quad(g, [-mpmath.inf] + pts + [e1], maxdegree=10)
    return float(w1), float(w2)


@pytest.mark.parametrize("label", LABELS)
def test_periods_against_quadrature(label):
    curve = load_curve(label)
    per = periods(curve)
    w1, w2 = _period_oracle(curve)
    assert per.omega1 == pytest.approx(w1, rel=1e-12)
    assert per.omega2_im == pytest.approx(w2, rel=1e-12)


def test_period_11a1_frozen():
    per = periods(load_curve("11a1"))
    assert per.omega1 == pytest.approx(1.26920930427955, rel=1e-13)
    assert per.omega2_im == pytest.approx(1.45881661693849, rel=1e-12)


@pytest.mark.parametrize("label", LABELS)
def test_sym2_identity(label, sieve):
    curve = load_curve(label)
    val = sym2_value(curve, 2.0, Sym2Params(X0=1000), sieve)
    target = sym2_identity_target(curve)
    assert val.value == pytest.approx(target, rel=1e-10)
    assert val.within_tolerance


def test_shifted_bad_factor_breaks_identity(sieve):
    curve = load_curve("11a1")
    shifted = sym2_value(curve, 2.0, Sym2Params(X0=1000, bad_factor=BAD_FACTOR_SHIFTED), sieve)
    assert abs(shifted.value / sym2_identity_target(curve) - 1) > 0.05


def test_series_matches_euler_product_at_three(sieve):
    curve = load_curve("11a1")
    series = sym2_value(curve, 3.0, Sym2Params(X0=1000), sieve).value
    euler = sym2_euler_product(curve, 3.0, 200_000, sieve)
    assert series == pytest.approx(euler, rel=1e-5)


def test_sym2_domain():
    with pytest.raises(ValueError):
        sym2_value(load_curve("11a1"), 1.2)


def test_composite_l_values(sieve):
    curve = load_curve("11a1")
    comp = CompositeL(curve, Sym2Params(X0=1000), 10**5, sieve)
    lv = comp.values
    assert comp.zeta_ratio(1.0) == 1.0
    assert lv.L1 == pytest.approx(lv.sym2_at_2 * lv.correction_at_1, rel=1e-15)
    assert lv.dL1_err < 1e-6
    alt = CompositeL(curve, Sym2Params(X0=1000), 10**5, sieve, zeta_ratio=False).values
    assert alt.L1 == lv.L1
    # the two forms differ by 2 L(1) (zeta^(N)'/zeta^(N))(2) in L'(1)
    logderiv = float(mpmath.diff(lambda x: mpmath.log(mpmath.zeta(x) * (1 - mpmath.mpf(11) ** -x)), 2))
    assert alt.dL1 - lv.dL1 == pytest.approx(-2 * logderiv * lv.L1, rel=1e-7)


def test_partial_zeta():
    assert partial_zeta(2.0, 11) == pytest.approx(math.pi**2 / 6 * (1 - 1 / 121), rel=1e-15)
