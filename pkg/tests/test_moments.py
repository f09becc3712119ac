import math

import mpmath
import numpy as np
import pytest

from heegner_moments.afe import CutoffSpec, l_prime_central
from heegner_moments.curve import load_curve
from heegner_moments.heegner import ResidueSet, enumerate_D
from heegner_moments.moments import (TWIST_SUITE, BumpFunction, MomentContext, TwistConfig,
                                     abel_summation, empirical_moment, error_direct, error_split,
                                     height_from_lprime, height_sum, lprime_from_height,
                                     main_term_constants, optimal_threshold, abel_weight,
                                     random_twist_configs, residual_slope, residual_trend_ok,
                                     twisted_partial_sum)
from heegner_moments.numtheory import kronecker

F = BumpFunction(1.0, 2.0)


@pytest.fixture(scope="module")
def ctx():
    return MomentContext(load_curve("11a1"))


@pytest.fixture(scope="module")
def split_2000(ctx):
    direct = error_direct(ctx, F, 2000)
    return direct, error_split(ctx, F, 2000, direct=direct.error)


def test_bump_integrals_against_mpmath():
    mpmath.mp.dps = 30
    f = lambda t: mpmath.exp(-1 / ((t - 1) * (2 - t)))
    assert F.I0 == pytest.approx(float(mpmath.quad(f, [1, 1.5, 2])), rel=1e-10)
    assert F.I1 == pytest.approx(float(mpmath.quad(lambda t: f(t) * mpmath.log(t), [1, 1.5, 2])), rel=1e-10)
    assert F.I0 == pytest.approx(0.007029858406609657, rel=1e-12)


def test_bump_shape():
    assert F(1.0) == 0.0 and F(2.0) == 0.0 and F(0.5) == 0.0
    assert F(1.5) == pytest.approx(math.exp(-4))
    assert np.all(F(np.linspace(1.01, 1.99, 50)) > 0)
    with pytest.raises(ValueError):
        BumpFunction(2.0, 1.0)


def test_main_term_constants(ctx):
    lv = ctx.l_values()
    mt = main_term_constants(ctx.curve, F, lv)
    assert mt.alpha == pytest.approx(11 / (6 * math.pi**2) * lv.L1 * F.I0, rel=1e-14)
    # beta = c_N int F(t) (L'(1) + L(1) log(N t / 4 pi^2) - 2 gamma L(1)) dt
    integrand = lambda t: float(F(t)) * (lv.dL1 + lv.L1 * (math.log(11 * t / (4 * math.pi**2)) - 2 * float(mpmath.euler)))
    from scipy.integrate import quad
    expected = mt.c_N * quad(integrand, 1, 2, epsabs=1e-14, epsrel=1e-12)[0]
    assert mt.beta == pytest.approx(expected, rel=1e-9)
    doubled = main_term_constants(ctx.curve, F.scaled(2.0), lv)
    assert doubled.alpha == pytest.approx(2 * mt.alpha) and doubled.beta == pytest.approx(2 * mt.beta)


def test_empty_window(ctx):
    rep = empirical_moment(ctx, F, 3.0)
    assert rep.count == 0 and rep.empirical_moment == 0.0


def test_moment_matches_direct_sum(ctx):
    Y = 300
    rep = empirical_moment(ctx, F, Y)
    coeffs = ctx.coeffs(ctx.n_cap(600))
    direct = math.fsum(float(F(-d / Y)) * l_prime_central(ctx.curve, d, coeffs)
                       for d in enumerate_D(11, 600).d.tolist() if 300 < -d < 600)
    assert rep.empirical_moment == pytest.approx(direct, rel=1e-12)
    assert rep.empirical_moment >= 0


def test_moment_is_linear_in_F(ctx):
    a = empirical_moment(ctx, F, 500)
    b = empirical_moment(ctx, F.scaled(2.0), 500)
    assert b.empirical_moment == pytest.approx(2 * a.empirical_moment, rel=1e-14)


def test_moment_frozen_at_2000(ctx):
    rep = empirical_moment(ctx, F, 2000)
    assert rep.empirical_moment == pytest.approx(16.961872265470237, rel=1e-9)
    assert rep.empirical_error < 1e-6 * rep.empirical_moment


def test_threads_do_not_change_results():
    c1 = MomentContext(load_curve("11a1"), threads=1)
    c4 = MomentContext(load_curve("11a1"), threads=4)
    r1, r4 = empirical_moment(c1, F, 800), empirical_moment(c4, F, 800)
    assert r1.per_d == r4.per_d and r1.empirical_moment == r4.empirical_moment


def test_error_decomposition(ctx, split_2000):
    direct, _ = split_2000
    moment = empirical_moment(ctx, F, 2000).empirical_moment
    assert direct.reassembled == pytest.approx(moment, rel=1e-12)
    assert abs(direct.error) <= direct.abs_sum <= direct.majorant


def test_mobius_reassembly(split_2000):
    direct, split = split_2000
    assert split.reassembled == pytest.approx(direct.error, rel=1e-12, abs=1e-14)
    assert split.A == optimal_threshold(11, 2000) == 1


def test_error_vanishes_for_non_coprime_a(split_2000):
    _, split = split_2000
    for a, val in split.per_a.items():
        if math.gcd(a, 44) > 1:
            assert val == 0.0


def test_tail_sum_decreases_with_threshold(split_2000):
    _, split = split_2000
    tails = [split.E2_at(A) for A in (1, 2, 3)]
    assert tails[0] >= tails[1] >= tails[2]
    assert split.E1 + split.E2 == pytest.approx(sum(abs(v) for v in split.per_a.values()))


def test_eta_matches_definition():
    cfg = TwistConfig(11, 3, 5, 1, 7)
    rs = ResidueSet.build(11)
    n = np.arange(1, 20_000)
    eta = cfg.eta(n)
    step = cfg.a**2 * cfg.v**2
    for k, e in zip(n.tolist(), eta.tolist()):
        if k > 49 and (k - 49) % step == 0:
            d = -((k - 49) // step)
            expected = kronecker(d, 3) if d % 44 in rs.residues else 0
        else:
            expected = 0
        assert e == expected


def test_eta_periodic():
    cfg = TwistConfig(11, 7, 3, 2, 5)
    n = np.arange(cfg.u**2 + 1, cfg.u**2 + 1 + 3 * cfg.q)
    eta = cfg.eta(n)
    assert np.array_equal(eta[: cfg.q], eta[cfg.q : 2 * cfg.q])


def test_random_configs_respect_constraints():
    cfgs = random_twist_configs(11, 50, seed=3)
    assert cfgs == random_twist_configs(11, 50, seed=3)
    for c in cfgs:
        assert c.q <= 10**4 and math.gcd(c.m, 11) == 1 and math.gcd(c.a, 44) == 1


def test_twisted_suite_against_record(ctx):
    x = TWIST_SUITE["x"]
    coeffs = ctx.coeffs(x)
    sums = [twisted_partial_sum(coeffs, c, x)
            for c in random_twist_configs(11, TWIST_SUITE["count"], TWIST_SUITE["seed"], TWIST_SUITE["q_max"])]
    worst = max(s.ratio for s in sums)
    assert worst <= 1.0
    assert worst <= TWIST_SUITE["record"] * (1 + 1e-12)
    assert sum(abs(s.S) <= 0.1 * s.abs_sum for s in sums) >= 90


def test_twisted_sum_exceeds_table(ctx):
    coeffs = ctx.coeffs(1000)
    with pytest.raises(ValueError):
        twisted_partial_sum(coeffs, TwistConfig(11, 1, 1, 1, 0), coeffs.n_max + 1)


def test_abel_summation(ctx):
    coeffs = ctx.coeffs(50_000)
    cfg = TwistConfig(11, 1, 1, 1, 3)
    G = abel_weight(11, 2000, 1, 3, 1, F, CutoffSpec())
    direct, parts = abel_summation(coeffs, cfg, G, 10, 40_000)
    assert parts == pytest.approx(direct, rel=1e-10, abs=1e-15)


def test_height_roundtrip():
    Omega = 3.7030872469119194
    for d in (-3, -7, -43, -131):
        assert lprime_from_height(height_from_lprime(1.234, d, Omega), d, Omega) == pytest.approx(1.234)
    # d = -3 counts u^2 = 9
    assert height_from_lprime(1.0, -3, Omega) == pytest.approx(9 * math.sqrt(3) / (2 * Omega))


def test_height_sum_small(ctx):
    rep = height_sum(ctx, 400)
    assert rep.count == len(enumerate_D(11, 400))
    assert rep.empirical == pytest.approx(math.fsum(h for _, _, h in rep.per_d), rel=1e-14)
    assert all(h >= 0 for _, _, h in rep.per_d)
    assert rep.Omega == pytest.approx(3.7030872469119194, rel=1e-13)


def test_residual_helpers():
    Ys = [1000, 2000, 4000, 8000]
    assert residual_slope(Ys, [10 * y**0.5 for y in Ys]) == pytest.approx(0.5)
    assert residual_trend_ok(Ys, [5, 8, 12, 20])
    assert not residual_trend_ok(Ys, [1, 3, 8, 20])
    assert residual_trend_ok(Ys, [1, 3, 4, 6], allowed_inversions=1)
