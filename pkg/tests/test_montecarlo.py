import itertools
import math

import numpy as np
import pytest

from oracles import categorical_llr_table, exact_tail, random_valid_matrix
from sociallearn._random import make_rng
from sociallearn.analysis import RateFunction
from sociallearn.engine import run_lambda_batch
from sociallearn.models import CategoricalModel, GaussianModel
from sociallearn.montecarlo import (
    SaturationError,
    WeightOverflowError,
    build_tilted,
    deviation,
    importance_estimate,
    plain_estimate,
    simulate_tilted,
    solve_tilt,
)
from sociallearn.network import lazy_metropolis, ring_graph

SCALAR = GaussianModel.shifted([3.0])
ONE = np.ones((1, 1))
RING2 = lazy_metropolis(ring_graph(2))
RING3 = lazy_metropolis(ring_graph(3))
CAT2 = CategoricalModel([
    [[0.7, 0.3], [0.4, 0.6]],
    [[0.2, 0.8], [0.5, 0.5]],
])


@pytest.fixture(scope="module")
def paper_rate(paper_A, paper_model):
    return RateFunction(paper_A, paper_model)


def expected_under_q(process, probs, start, steps, s, direction):
    """E_Q[weight * indicator] by enumerating every tilted (path, symbols) outcome."""
    K = process.K
    S = probs.shape[-1]
    table = np.array(categorical_llr_table(probs.tolist(), process.true, process.alt))
    tilted = process.model.tilted_probs(np.arange(K), process.t, process.true, process.alt)
    total = 0.0
    for states in itertools.product(range(K), repeat=steps):
        q_path, prev = 1.0, start
        for l in states:
            q_path *= process.kernel[prev, l]
            prev = l
        for symbols in itertools.product(range(S), repeat=steps):
            q = q_path
            lam = 0.0
            for l, x in zip(states, symbols):
                q *= tilted[l, x]
                lam += table[l, x]
            hit = lam < s * steps if direction == "below" else lam > s * steps
            if q > 0 and hit:
                total += q * math.exp(process.log_weight(start, states[-1], lam, steps))
    return total


def test_solve_tilt_at_mean(paper_rate):
    assert abs(solve_tilt(paper_rate, paper_rate.mean)) < 1e-4


def test_solve_tilt_scalar():
    rf = RateFunction(ONE, SCALAR)
    assert solve_tilt(rf, 0.0) == pytest.approx(-0.5, abs=1e-6)
    assert solve_tilt(rf, 9.0) == pytest.approx(0.5, abs=1e-6)


def test_solve_tilt_sign(paper_rate):
    assert solve_tilt(paper_rate, 3.0) < 0 < solve_tilt(paper_rate, 6.0)


def test_solve_tilt_saturation():
    rf = RateFunction(ONE, SCALAR, t_max=1.0)
    with pytest.raises(SaturationError):
        solve_tilt(rf, 50.0)


def test_kernel_at_zero_is_original_chain(paper_A, paper_model):
    proc = build_tilted(paper_A, paper_model, 0, 1, 0.0)
    np.testing.assert_allclose(proc.kernel, paper_A.T, atol=1e-13)
    assert proc.log_lambda == pytest.approx(0.0, abs=1e-12)


def test_tilted_law_at_zero_is_original(rng):
    x0 = SCALAR.sample_tilted_agents(np.zeros(5, dtype=int), 0.0, 0, 1, np.random.default_rng(1))
    x1 = SCALAR.sample_agents(np.zeros(5, dtype=int), 0, np.random.default_rng(1))
    np.testing.assert_array_equal(x0, x1)
    np.testing.assert_allclose(CAT2.tilted_probs(np.arange(2), 0.0, 0, 1), CAT2.probs[:, 0], atol=1e-15)


def test_equal_agents_kernel_untouched():
    m = GaussianModel.shifted([2.0, 2.0])
    for t in (-0.8, 0.4):
        proc = build_tilted(RING2, m, 0, 1, t)
        np.testing.assert_allclose(proc.kernel, RING2.T, atol=1e-13)


@pytest.mark.parametrize("t", [-1.0, -0.5, -0.3, 0.0, 0.5])
def test_kernel_rows_stochastic(paper_A, paper_model, t):
    proc = build_tilted(paper_A, paper_model, 0, 1, t)
    assert np.abs(proc.kernel.sum(axis=1) - 1.0).max() <= 1e-12
    assert np.all(proc.kernel >= 0)
    # zero pattern of the original chain is kept
    np.testing.assert_array_equal(proc.kernel > 0, paper_A.T > 0)


def test_telescoping(paper_A, paper_model):
    proc = build_tilted(paper_A, paper_model, 0, 1, -0.3)
    paths = simulate_tilted(proc, 1, 40, 1000, make_rng(3), keep_factors=True)
    product = np.prod(paths.factors, axis=1)
    telescoped = np.exp(proc.log_weight(paths.start, paths.end, paths.lam, 40))
    np.testing.assert_allclose(product, telescoped, rtol=1e-10)
    np.testing.assert_allclose(paths.log_weight, np.log(telescoped), rtol=0, atol=1e-10)


def test_t_zero_reduces_to_plain(paper_A, paper_model):
    proc = build_tilted(paper_A, paper_model, 0, 1, 0.0)
    est = importance_estimate(proc, 1, 30, 4.0, "below", 500, seed=2)
    paths = simulate_tilted(proc, 1, 30, 500, make_rng(2))
    np.testing.assert_allclose(proc.log_weight(paths.start, paths.end, paths.lam, 30), 0.0, atol=1e-12)
    assert est.p_hat == pytest.approx(np.mean(paths.lam < 120.0), abs=1e-12)


@pytest.mark.parametrize("t,direction,s", [(-0.6, "below", 0.05), (0.4, "above", 0.3), (0.0, "below", 0.1)])
@pytest.mark.parametrize("A", [RING2, np.array([[0.6, 0.3], [0.4, 0.7]])])
def test_unbiased_by_enumeration(A, t, direction, s):
    proc = build_tilted(A, CAT2, 0, 1, t)
    for start in (0, 1):
        truth = exact_tail(A.tolist(), CAT2.probs.tolist(), 0, 1, start, 5, s, direction)
        assert expected_under_q(proc, CAT2.probs, start, 5, s, direction) == pytest.approx(truth, abs=1e-10)


def test_unbiased_three_hypotheses_by_enumeration():
    rng = np.random.default_rng(17)
    A = random_valid_matrix(rng, 3, density=0.7)
    p = rng.random((3, 3, 2)) + 0.1
    m = CategoricalModel(p / p.sum(axis=-1, keepdims=True))
    proc = build_tilted(A, m, 2, 0, -0.7)
    truth = exact_tail(A.tolist(), m.probs.tolist(), 2, 0, 1, 4, 0.0, "below")
    assert expected_under_q(proc, m.probs, 1, 4, 0.0, "below") == pytest.approx(truth, abs=1e-10)


def test_importance_matches_enumeration_k2_i5():
    s, direction = 0.05, "below"
    rf = RateFunction(RING2, CAT2)
    est = deviation(RING2, CAT2, 0, 5, s, 20_000, direction=direction, seed=4, rate=rf)
    truth = exact_tail(RING2.tolist(), CAT2.probs.tolist(), 0, 1, 0, 5, s, direction)
    assert est.method == "importance" and est.t < 0
    assert abs(est.p_hat - truth) <= 3 * est.stderr


def test_plain_limits(paper_A, paper_model):
    lo = plain_estimate(paper_model, paper_A, 0, 10, -math.inf, "below", 50)
    hi = plain_estimate(paper_model, paper_A, 0, 10, math.inf, "below", 50)
    assert lo.p_hat == 0.0 and lo.log_p_hat == -math.inf
    assert hi.p_hat == 1.0 and hi.stderr == 0.0
    with pytest.raises(ValueError):
        plain_estimate(paper_model, paper_A, 0, 10, 1.0, "below", 0)


def test_plain_and_importance_agree_k3_i30():
    m = GaussianModel.shifted([1.5, 0.5, 0.0])
    i, n = 30, 20_000
    # s at the empirical 20% quantile of an independent pilot run
    lam = run_lambda_batch(m, RING3, 0.0, i, 20_000, make_rng(99))[:, 0] / i
    s = float(np.quantile(lam, 0.2))
    plain = plain_estimate(m, RING3, 0, i, s, "below", n, seed=5)
    imp = deviation(RING3, m, 0, i, s, n, direction="below", seed=6)
    assert 0.15 < plain.p_hat < 0.25
    assert abs(plain.p_hat - imp.p_hat) <= 3 * math.hypot(plain.stderr, imp.stderr)


def test_importance_at_mean_matches_plain(paper_A, paper_model, paper_rate):
    s = paper_rate.mean
    imp = deviation(paper_A, paper_model, 1, 50, s, 4000, direction="below", seed=1, rate=paper_rate)
    plain = deviation(paper_A, paper_model, 1, 50, s, 4000, method="plain", direction="below", seed=2)
    assert abs(imp.t) < 1e-4
    assert abs(plain.p_hat - imp.p_hat) <= 3 * math.hypot(plain.stderr, imp.stderr)


def test_variance_reduction(paper_A, paper_model, paper_rate):
    s, i, n = 0.0, 100, 1000
    assert paper_rate(s) * i >= 5
    est = deviation(paper_A, paper_model, 1, i, s, n, seed=1, rate=paper_rate)
    rse_is = est.stderr / est.p_hat
    rse_plain = math.sqrt((1 - est.p_hat) / (est.p_hat * n))
    assert rse_is * 10 <= rse_plain


def test_estimate_invariants(paper_A, paper_model, paper_rate):
    for s in (3.0, 6.0):
        est = deviation(paper_A, paper_model, 5, 200, s, 60, seed=0, rate=paper_rate)
        assert est.p_hat >= 0 and est.stderr >= 0 and est.n == 60
        assert est.direction == ("below" if s < 4.55 else "above")
    plain = deviation(paper_A, paper_model, 5, 200, 3.0, 60, method="plain", seed=0)
    assert 0 <= plain.p_hat <= 1


def test_no_hits_gives_zero():
    proc = build_tilted(ONE, SCALAR, 0, 1, 0.0)
    est = importance_estimate(proc, 0, 5, -1e6, "below", 10)
    assert est.p_hat == 0.0 and est.log_p_hat == -math.inf and math.isinf(est.minus_log_p_over_i)


def test_weight_overflow_reported():
    # consistent tilts give per-step log weights near -I(s) <= 0; an inflated
    # eigenvalue stands in for a mismatched process whose weights blow up
    import dataclasses

    proc = build_tilted(ONE, SCALAR, 0, 1, 0.5)
    bad = dataclasses.replace(proc, log_lambda=proc.log_lambda + 10.0)
    with pytest.raises(WeightOverflowError, match="overflows"):
        importance_estimate(bad, 0, 200, -1e9, "above", 10)


def test_direction_validation():
    proc = build_tilted(ONE, SCALAR, 0, 1, 0.0)
    with pytest.raises(ValueError):
        importance_estimate(proc, 0, 5, 1.0, "sideways", 10)
    with pytest.raises(ValueError):
        deviation(ONE, SCALAR, 0, 5, 1.0, 10, method="magic")


def test_seed_determinism(paper_A, paper_model, paper_rate):
    a = deviation(paper_A, paper_model, 1, 100, 3.5, 60, seed=3, rate=paper_rate)
    b = deviation(paper_A, paper_model, 1, 100, 3.5, 60, seed=3, rate=paper_rate)
    assert a == b


def test_scalar_ldp_consistency():
    # single agent: exact tail of a Gaussian random walk
    from scipy.stats import norm

    i, s = 400, 3.0
    est = deviation(ONE, SCALAR, 0, i, s, 2000, seed=8)
    exact = norm.cdf((s * i - 4.5 * i) / math.sqrt(9 * i))
    assert abs(est.p_hat - exact) <= 3 * est.stderr


LDP_S = (3.0, 3.5, 5.5, 6.0)


@pytest.mark.xfail(strict=True, reason=(
    "finite-horizon prefactor: on the canonical graph the LLR asymptotic variance is ~316, "
    "so I(s) * i is only 3-10 at these horizons and -(1/i) log p is biased by O(log(i)/i) "
    "terms larger than 25% of I(s); see test_ldp_consistency_improves_with_horizon"))
@pytest.mark.parametrize("i", [500, 1000, 2500])
def test_ldp_consistency_paper_scale(paper_A, paper_model, paper_rate, i):
    for k in (1, 5):
        for s in LDP_S:
            est = deviation(paper_A, paper_model, k, i, s, 60, seed=0, rate=paper_rate)
            assert est.minus_log_p_over_i == pytest.approx(paper_rate(s), rel=0.25)


@pytest.mark.slow
def test_ldp_consistency_improves_with_horizon(paper_A, paper_model, paper_rate):
    def worst(i):
        errs = []
        for s in LDP_S:
            est = deviation(paper_A, paper_model, 1, i, s, 60, seed=0, rate=paper_rate)
            errs.append(abs(est.minus_log_p_over_i - paper_rate(s)) / paper_rate(s))
        return max(errs)

    e_small, e_mid, e_large = worst(2500), worst(10_000), worst(40_000)
    assert e_large < e_mid < e_small
    assert e_large <= 0.25
