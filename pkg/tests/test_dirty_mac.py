import math

import numpy as np
import pytest
from scipy.optimize import minimize

from cfmac import dirty_mac as dm
from cfmac import two_user as tu
from cfmac.channel import ChannelConfig
from cfmac.oracle import zoom_min_1d, zoom_min_2d


def _params(rng):
    return dm.DirtyParams(rng.uniform(-2, 2, 2), np.array([1.0, rng.choice([-1, 1]) * rng.uniform(0.2, 3)]))


def _pair(rng):
    while True:
        a, b = rng.integers(-3, 4, 2), rng.integers(-3, 4, 2)
        if a.any() and b.any() and a[0] * b[1] != a[1] * b[0]:
            return a, b


def test_config_validation():
    with pytest.raises(ValueError):
        dm.DirtyConfig([1, 0], [0, 0])
    with pytest.raises(ValueError):
        dm.DirtyConfig([1, 1], [-1, 0])
    with pytest.raises(ValueError):
        dm.DirtyParams([0, 0], [1, 0])


def test_N1_reductions(rng):
    P = 3.0
    d = dm.DirtyConfig([P, P], [0, 0])
    cfg = ChannelConfig([1, 1], P)
    from cfmac.comp_rate import equivalent_noise_power

    for _ in range(20):
        prm = _params(rng)
        a, _ = _pair(rng)
        al = float(rng.normal())
        assert dm.N1(d, a, prm, al) == pytest.approx(equivalent_noise_power(cfg, a, prm.beta, al))
    d = dm.DirtyConfig([2.0, 5.0], [1.5, 0.5])
    prm = dm.DirtyParams([0.3, -0.7], [1.0, 1.4])
    a = np.array([2, 1])
    expect = np.sum(a**2 * (prm.beta**2 * d.P + prm.gamma**2 * d.Q))
    assert dm.N1(d, a, prm, 0.0) == pytest.approx(expect)


def test_N1_N2_resummation(rng):
    for _ in range(50):
        d = dm.DirtyConfig(rng.uniform(0.1, 10, 2), rng.uniform(0, 10, 2))
        prm = _params(rng)
        a, b = _pair(rng)
        x, lam = rng.normal(size=2)
        n1 = x * x
        n2 = x * x
        for k in range(2):
            n1 += (x - a[k] * prm.beta[k]) ** 2 * d.P[k] + (x - a[k] * prm.gamma[k]) ** 2 * d.Q[k]
            n2 += (x - lam * a[k] * prm.gamma[k] - b[k] * prm.gamma[k]) ** 2 * d.Q[k]
            n2 += (x - lam * a[k] * prm.beta[k] - b[k] * prm.beta[k]) ** 2 * d.P[k]
        assert dm.N1(d, a, prm, x) == pytest.approx(n1, rel=1e-12)
        assert dm.N2(d, a, b, prm, x, lam) == pytest.approx(n2, rel=1e-12)
        # lambda = 0 turns N2 into N1 with b in place of a
        assert dm.N2(d, a, b, prm, x, 0.0) == pytest.approx(dm.N1(d, b, prm, x), rel=1e-12)


def test_closed_forms_match_grid_oracles(rng):
    for _ in range(200):
        d = dm.DirtyConfig(rng.uniform(0.1, 10, 2), rng.uniform(0, 10, 2))
        prm = _params(rng)
        a, b = _pair(rng)
        w = np.concatenate([d.P, d.Q])
        n1, _ = zoom_min_1d(1.0, w, np.ones(4), np.concatenate([a * prm.beta, a * prm.gamma]), half=10.0)
        r1 = 0.5 * np.log2(prm.beta**2 * d.P / n1)
        np.testing.assert_allclose(dm.r_a_dirty(d, a, prm).raw, r1, atol=1e-6)
        n2, _ = zoom_min_2d(
            1.0, w, np.ones(4), np.concatenate([a * prm.beta, a * prm.gamma]),
            np.concatenate([b * prm.beta, b * prm.gamma]), half=(10.0, 10.0),
        )
        r2 = 0.5 * np.log2(prm.beta**2 * d.P / n2)
        np.testing.assert_allclose(dm.r_b_given_a_dirty(d, a, b, prm).raw, r2, atol=1e-5)


def test_clean_reduction_equal_powers(rng):
    P = 4.0
    d = dm.DirtyConfig([P, P], [0, 0])
    cfg = ChannelConfig([1, 1], P)
    for _ in range(100):
        prm = _params(rng)
        a, b = _pair(rng)
        np.testing.assert_allclose(dm.r_a_dirty(d, a, prm).raw, tu.r_a(cfg, a, prm.beta).raw, atol=1e-9)
        np.testing.assert_allclose(dm.r_b_given_a_dirty(d, a, b, prm).raw, tu.r_b_given_a(cfg, a, b, prm.beta).raw, atol=1e-9)


def test_clean_reduction_unequal_powers(rng):
    d = dm.DirtyConfig([10.0, 2.0], [0, 0])
    cfg = ChannelConfig.with_powers([1, 1], [10.0, 2.0])
    scale = np.sqrt(d.P / cfg.P)
    for _ in range(100):
        prm = _params(rng)
        a, b = _pair(rng)
        rt = dm.message_rates_dirty(d, a, b, prm)
        ct = tu.message_rates_two_sums(cfg, tu.TwoSumChoice(tuple(a), tuple(b)), prm.beta * scale)
        if rt.feasible and ct.feasible:
            np.testing.assert_allclose(rt.rates, ct.rates, atol=1e-9)


def test_matched_gamma_gives_single_sum_form():
    P1, P2 = 3.0, 1.5
    d = dm.DirtyConfig([P1, P2], [7.0, 4.0])
    for ratio in (0.8, 1.0, 1.7):
        beta = np.array([ratio, 1.0])
        alpha = (beta[0] * P1 + beta[1] * P2) / (P1 + P2 + 1)
        prm = dm.DirtyParams([alpha, alpha], beta)
        assert dm.r_a_dirty(d, (1, 1), prm).raw[1] == pytest.approx(dm.single_sum_ratio_rate(P1, P2, ratio), abs=1e-12)


def test_unmatched_gamma_large_Q_kills_rate():
    prm = dm.DirtyParams([0.1, -0.3], [1.0, 1.0])
    for Q in (1e4, 1e8):
        assert dm.r_a_dirty(dm.DirtyConfig([1, 1], [Q, Q]), (1, 1), prm).rates.max() < 1e-2


def test_dependent_pair_raises():
    with pytest.raises(ValueError):
        dm.r_b_given_a_dirty(dm.DirtyConfig([1, 1], [1, 1]), (1, 2), (2, 4), dm.DirtyParams([0, 0]))


def test_normal_equations_regular(rng):
    # the Gram determinant is bounded below by the weighted norm of a*beta
    for _ in range(100):
        d = dm.DirtyConfig(rng.uniform(0.1, 10, 2), rng.uniform(0, 10, 2))
        a, b = _pair(rng)
        _, _, singular = dm.optimal_alpha2_lambda(d, a, b, _params(rng))
        assert not singular


def test_message_rates_structure():
    d = dm.DirtyConfig([5, 5], [1, 1])
    prm = dm.DirtyParams([0.5, 0.5], [1, 1])
    rt = dm.message_rates_dirty(d, (1, 0), (0, 1), prm)
    assert rt.binding == ["a", "b|a"]
    rt = dm.message_rates_dirty(dm.DirtyConfig([1, 1], [50, 50]), (1, 1), (1, 0), dm.DirtyParams([3, -3]))
    assert not rt.feasible


def test_optimize_gamma_clean_is_gamma_free():
    d = dm.DirtyConfig([4, 4], [0, 0])
    gamma, rt = dm.optimize_gamma(d, (1, 1), (0, 1), (1, 1.2), budget=200)
    ct = tu.message_rates_two_sums(ChannelConfig([1, 1], 4), tu.A1, (1, 1.2))
    np.testing.assert_allclose(rt.rates, ct.rates, atol=1e-6)


def test_optimize_gamma_moderate_interference():
    d = dm.DirtyConfig([10, 2], [3, 1])
    val, prm = dm.optimize_params(d, (1, 1), (1, 0), objective="min")
    rt = dm.message_rates_dirty(d, (1, 1), (1, 0), prm)
    assert rt.feasible and np.all(rt.rates > 0) and val == pytest.approx(rt.rates.min(), abs=1e-12)
    with pytest.raises(ValueError):
        dm.optimize_gamma(d, (1, 1), (1, 0), budget=0)


def test_single_sum_gamma_recovery():
    d = dm.DirtyConfig([2.0, 1.0], [50.0, 50.0])
    beta = np.array([1.0, 1.0])

    def neg(g):
        return -dm.r_a_dirty(d, (1, 1), dm.DirtyParams(g, beta)).raw[1]

    res = minimize(neg, [0.0, 0.0], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14, "maxfev": 4000})
    alpha = (beta[0] * 2.0 + beta[1] * 1.0) / (2.0 + 1.0 + 1.0)
    np.testing.assert_allclose(res.x, [alpha, alpha], atol=2e-3)


def test_single_sum_examples():
    assert dm.single_sum_rate(10, 2) == 0.5 * math.log2(3)
    assert dm.single_sum_rate(1, 1) == pytest.approx(0.5 * math.log2(1.5))
    assert dm.single_sum_rate(0.4, 0.4) == 0.0
    with pytest.raises(ValueError):
        dm.single_sum_rate(0, 1)


def _single_sum_oracle(P1, P2):
    best = 0.0
    for p2 in np.concatenate([np.linspace(1e-3, P2, 300), [P2]]):
        lo = math.sqrt(p2 / P1)
        r = lo + np.concatenate([[0.0], np.logspace(-7, 2, 4000)])
        v = 0.5 * np.log2(p2 * (1 + P1 + p2) / (r * r * P1 + p2 + P1 * p2 * (r - 1) ** 2))
        best = max(best, float(v.max()))
    return best


def test_single_sum_matches_ratio_maximization(rng):
    for _ in range(25):
        P1, P2 = 10 ** rng.uniform(-1, 1.5, 2)
        assert dm.single_sum_rate(P1, P2) == pytest.approx(_single_sum_oracle(P1, P2), abs=2e-5)


def test_single_sum_continuity_and_monotonicity():
    for P2 in (0.3, 1.0, 2.0, 7.0):
        edge = (P2 + 1) ** 2 / P2
        assert abs(dm.single_sum_rate(edge * (1 + 1e-13), P2) - dm.single_sum_rate(edge * (1 - 1e-13), P2)) < 1e-9
        assert abs(dm.single_sum_rate(P2, edge * (1 + 1e-13)) - dm.single_sum_rate(P2, edge * (1 - 1e-13))) < 1e-9
    grid = np.linspace(0.1, 20, 80)
    vals = [dm.single_sum_rate(p, p) for p in grid]
    assert np.all(np.diff(vals) >= -1e-12)


def test_time_shared_segment():
    seg = dm.time_shared_single_sum_region(1.5, 1.5, 5)
    assert seg.points[2, 0] == pytest.approx(seg.points[2, 1])
    assert seg.points[2, 0] == pytest.approx(0.5 * dm.single_sum_rate(1.5, 1.5))
    seg = dm.time_shared_single_sum_region(10, 2, 33)
    np.testing.assert_allclose(seg.meta["endpoints"], [dm.single_sum_rate(2, 10), dm.single_sum_rate(10, 2)])
    r1, r2 = seg.meta["endpoints"]
    np.testing.assert_allclose(seg.points[:, 0] / r1 + seg.points[:, 1] / r2, 1.0)
    with pytest.raises(ValueError):
        dm.time_shared_single_sum_region(1, 1, 1)


def test_high_interference_nulling():
    assert not dm.high_interference_feasible((1, 1), (1, 0))
    assert dm.high_interference_feasible((1, 2), (2, 4))
    with pytest.raises(dm.OutOfScopeError):
        dm.high_interference_feasible((1, 0), (0, 1))
    for a1 in range(-10, 11):
        for a2 in range(-10, 11):
            if a1 * a2 == 0:
                continue
            for b1 in range(-10, 11):
                for b2 in range(-10, 11):
                    assert dm.high_interference_feasible((a1, a2), (b1, b2)) == (a2 * b1 == a1 * b2)


def test_pareto_front():
    pts = [[0, 1], [0.5, 0.5], [0.4, 0.4], [1, 0], [0.2, 0.9]]
    np.testing.assert_allclose(dm.pareto_front(pts), [[0, 1], [0.2, 0.9], [0.5, 0.5], [1, 0]])


def _ray_values(front, n=31):
    out = []
    for t in np.linspace(0.0, np.pi / 2, n)[1:-1]:
        out.append(dm._scalarize(front, ("ray", np.array([np.cos(t), np.sin(t)]))).max())
    return np.array(out)


def test_ray_scalarization():
    R = np.array([[1.0, 2.0], [3.0, 0.5]])
    np.testing.assert_allclose(dm._scalarize(R, ("ray", [1.0, 1.0])), [1.0, 0.5])
    np.testing.assert_allclose(dm._scalarize(R, ("ray", [0.0, 2.0])), [1.0, 0.25])
    with pytest.raises(ValueError):
        dm._scalarize(R, ("ray", [0.0, 0.0]))


@pytest.mark.slow
def test_region_sweep_larger_coefficients():
    d = dm.DirtyConfig([10, 2], [10, 2])
    big = dm.dirty_region_sweep(d, max_coeff=5, budget=150, n_dirs=24)
    small = dm.dirty_region_sweep(d, max_coeff=1, budget=150, n_dirs=24)
    mid = dm.time_shared_single_sum_region(10, 2, 3).points[1]
    assert np.any(np.all(big.points > mid + 1e-3, axis=1))
    assert np.all(_ray_values(big.points) >= _ray_values(small.points) - 1e-9)


def test_region_sweep_beats_dense_grid():
    d = dm.DirtyConfig([10, 2], [10, 2])
    a, b = (1, 1), (1, 0)
    traced = dm.dirty_region_sweep(d, family=[(a, b)], budget=200, n_dirs=31).meta["traced"][(a, b)]
    b2 = np.concatenate([np.logspace(-2, 2, 61), -np.logspace(-2, 2, 61)])
    g = np.linspace(-6, 6, 61)
    G1, G2 = (x.ravel() for x in np.meshgrid(g, g))
    R = np.vstack([
        dm.batch_message_rates(d, a, b, np.column_stack([np.ones(G1.size), np.full(G1.size, v)]),
                               max(1.0, abs(v)) * np.column_stack([G1, G2]))
        for v in b2
    ])
    assert np.all(_ray_values(traced) >= _ray_values(R) - 1e-6)


def test_region_sweep_clean_matches_two_user():
    d = dm.DirtyConfig([4, 4], [0, 0])
    fam = [((1, 1), (1, 0))]
    traced = dm.dirty_region_sweep(d, family=fam, budget=200, n_dirs=9).meta["traced"][fam[0]]
    cfg = ChannelConfig([1, 1], 4)
    grid = [b for b in np.linspace(-6, 6, 24001) if b != 0]
    C = np.array([tu.message_rates_two_sums(cfg, tu.A2, (1, b)).rates for b in grid])
    # every traced point is a clean two-sum point for some beta2
    for p in traced:
        if p.min() > 0:
            assert np.abs(C - p).max(axis=1).min() < 2e-3


def test_int_det_matches_float(rng):
    for n in (1, 2, 3, 4, 5):
        for _ in range(40):
            M = rng.integers(-4, 5, (n, n))
            assert dm._int_det(M) == round(np.linalg.det(M))
    assert dm._int_det([[0, 1], [1, 0]]) == -1


def test_nulling_determinant_is_lambda_free(rng):
    for _ in range(50):
        a1, a2, b1, b2, lam = rng.integers(-6, 7, 5)
        c1, c2 = lam * a1 + b1, lam * a2 + b2
        M = [[1, 0, -a1, 0], [1, 0, 0, -a2], [0, 1, -c1, 0], [0, 1, 0, -c2]]
        assert dm._int_det(M) == a1 * b2 - a2 * b1
