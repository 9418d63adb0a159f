import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cfmac import comp_rate as cr
from cfmac.channel import UNCONSTRAINED, ChannelConfig

SQ2 = math.sqrt(2)


def _noise_by_hand(h, P, a, beta, alpha):
    total = alpha * alpha
    for hk, ak, bk in zip(h, a, beta):
        total += P * (alpha * hk - ak * bk) ** 2
    return total


def test_noise_power_examples(rng):
    cfg = ChannelConfig([1.0, SQ2, -0.3], 4.0)
    a, beta = [1, 2, -1], [1.0, 0.7, 1.9]
    assert cr.equivalent_noise_power(cfg, a, beta, 0.0) == pytest.approx(4.0 * (1 + (1.4) ** 2 + 1.9**2))
    assert cr.equivalent_noise_power(ChannelConfig([1], 4), [1], [1], 1.0) == pytest.approx(1.0)
    for _ in range(50):
        K = int(rng.integers(1, 5))
        h = rng.normal(size=K)
        P = float(rng.uniform(0.1, 20))
        a = rng.integers(-3, 4, size=K)
        if not a.any():
            a[0] = 1
        beta = rng.uniform(0.2, 3, size=K)
        al = float(rng.normal())
        got = cr.equivalent_noise_power(ChannelConfig(h, P), a, beta, al)
        assert got == pytest.approx(_noise_by_hand(h, P, a, beta, al), rel=1e-12)


def test_optimal_alpha_examples():
    assert cr.optimal_alpha(ChannelConfig([1], 4), [1]) == pytest.approx(4 / 5)
    assert cr.optimal_alpha(ChannelConfig([1, 1], 4), [1, -1]) == 0.0


def test_optimal_alpha_dense_grid():
    cfg = ChannelConfig([1, 1], 4)
    grid = np.arange(-1_000_000, 1_000_001) * 1e-5  # [-10, 10], step 1e-5
    e = grid[:, None] * cfg.h[None, :] - 1.0
    N = cfg.P * (e * e).sum(axis=1) + grid**2
    assert grid[int(np.argmin(N))] == pytest.approx(8 / 9, abs=1e-5)
    assert cr.optimal_alpha(cfg, [1, 1], [1, 1]) == pytest.approx(8 / 9, abs=1e-15)


def test_rate_examples():
    rt = cr.computation_rate_tuple(ChannelConfig([1], 4), [1])
    assert rt.rates[0] == pytest.approx(0.5 * math.log2(5))
    cfg = ChannelConfig([1, SQ2], 4)
    for b1 in (0.3, 1.0, 2.5):
        rt = cr.computation_rate_tuple(cfg, [1, 0], [b1, 1.7])
        assert rt.rates[0] == pytest.approx(0.5 * math.log2(1 + 4 / (1 + 2 * 4)))
        assert math.isinf(rt.rates[1]) and rt.binding[1] == UNCONSTRAINED


def test_validation():
    cfg = ChannelConfig([1, 1], 1)
    with pytest.raises(ValueError):
        cr.computation_rate_tuple(cfg, [0, 0])
    with pytest.raises(ValueError):
        cr.computation_rate_tuple(cfg, [1.5, 1])
    with pytest.raises(ValueError):
        cr.computation_rate_tuple(cfg, [1, 1], [1, 0])
    with pytest.raises(ValueError):
        cr.as_coefficients([6, 1], 2, max_coeff=cr.DEFAULT_MAX_COEFF)
    with pytest.raises(ValueError):
        cr.oracle_rate_grid(cfg, [1, 1], None, [])


def test_single_sum_curve_leaves_pentagon():
    # the computation-rate curve for a=(1,1) crosses outside the capacity region
    from cfmac.channel import single_user_capacities, sum_capacity

    cfg = ChannelConfig([1, SQ2], 4)
    c = single_user_capacities(cfg)
    outside = False
    for b2 in np.linspace(0.2, 3, 200):
        r = cr.computation_rate_tuple(cfg, [1, 1], [1, b2]).rates
        if r.sum() > sum_capacity(cfg) + 1e-9 and r[0] <= c[0] and r[1] <= c[1]:
            outside = True
    assert outside


@given(
    st.integers(1, 4).flatmap(
        lambda K: st.tuples(
            st.lists(st.floats(-3, 3), min_size=K, max_size=K),
            st.lists(st.integers(-3, 3), min_size=K, max_size=K).filter(any),
            st.lists(st.floats(0.2, 3), min_size=K, max_size=K),
        )
    ),
    st.floats(0.1, 30),
)
def test_oracle_matches_closed_form(args, P):
    h, a, beta = args
    cfg = ChannelConfig(h, P)
    al = cr.optimal_alpha(cfg, a, beta)
    exact = cr.computation_rate_tuple(cfg, a, beta).rates
    grid = cr.oracle_rate_grid(cfg, a, beta, cr.alpha_grid(al + 0.3e-4, 1.0, 1e-4)).rates
    fin = np.isfinite(exact)
    assert np.all(np.abs(exact[fin] - grid[fin]) < 1e-6)
    q = cr.min_noise_factor(cfg, a, beta)
    assert q > 0
    assert cfg.P * q == pytest.approx(cr.equivalent_noise_power(cfg, a, beta, al), rel=1e-12, abs=1e-12)


def test_oracle_exact_on_grid_point():
    cfg = ChannelConfig([1], 3)
    rt = cr.oracle_rate_grid(cfg, [1], [1], cr.alpha_grid(cr.optimal_alpha(cfg, [1]), 0.5, 1e-3))
    assert rt.rates[0] == pytest.approx(0.5 * math.log2(4), abs=1e-14)


def test_common_beta_scaling_shifts_rates(rng):
    cfg = ChannelConfig([1.0, -0.4, 2.0], 5.0)
    a, beta = [1, 2, 1], np.array([1.0, 0.8, 1.3])
    r1 = cr.raw_computation_rates(cfg, a, beta)
    r2 = cr.raw_computation_rates(cfg, a, 3 * beta)
    np.testing.assert_allclose(r1, r2, atol=1e-12)
    g = cr.alpha_grid(cr.optimal_alpha(cfg, a, 3 * beta), 1.0, 1e-4)
    np.testing.assert_allclose(cr.oracle_rate_grid(cfg, a, 3 * beta, g).rates, np.maximum(r2, 0), atol=1e-6)


def test_sign_flip_invariance():
    cfg = ChannelConfig([1.0, 0.5], 3.0)
    r = cr.computation_rate_tuple(cfg, [1, 2], [1.0, 0.7]).rates
    s = cr.computation_rate_tuple(cfg, [1, -2], [1.0, -0.7]).rates
    np.testing.assert_allclose(r, s, atol=1e-14)


def test_unit_beta_recovers_plain_formula():
    cfg = ChannelConfig([0.7, 1.2], 6.0)
    a = np.array([2.0, 1.0])
    h = cfg.h
    q = a @ a - cfg.P * (h @ a) ** 2 / (1 + cfg.P * (h @ h))
    np.testing.assert_allclose(cr.raw_computation_rates(cfg, a), [0.5 * math.log2(1 / q)] * 2)
