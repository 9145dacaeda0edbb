"""Renyi-DP accounting checked against a brute-force order grid."""

import math

import numpy as np
import pytest

from pate_fairness import privacy
from pate_fairness.errors import BudgetRangeError
from pate_fairness.privacy import PrivacyParams, RdpLedger


def grid_optimum(coeff, delta, step=1e-3, hi=1e4):
    """Minimize coeff*gamma + log(1/delta)/(gamma-1) by exhaustive grid."""
    gammas = np.arange(1.0 + step, hi + step, step)
    eps = coeff * gammas + math.log(1.0 / delta) / (gammas - 1.0)
    i = int(np.argmin(eps))
    return float(eps[i]), float(gammas[i])


def test_closed_form_matches_grid_search():
    ledger = privacy.record_queries(RdpLedger(), 200, 50.0)
    eps, gamma = privacy.rdp_to_dp(ledger, 1e-5)
    eps_grid, gamma_grid = grid_optimum(ledger.coeff, 1e-5)
    assert abs(eps - eps_grid) < 1e-6
    assert abs(gamma - gamma_grid) < 1e-3
    assert eps == pytest.approx(1.9994, abs=1e-3)
    assert gamma == pytest.approx(12.996, abs=1e-3)


def test_grid_search_across_regimes():
    gen = np.random.default_rng(0)
    for _ in range(10):
        m = int(gen.integers(1, 2000))
        sigma = float(gen.uniform(5, 200))
        delta = 10.0 ** float(gen.uniform(-9, -3))
        ledger = privacy.record_queries(RdpLedger(), m, sigma)
        eps, _ = privacy.rdp_to_dp(ledger, delta)
        eps_grid, _ = grid_optimum(ledger.coeff, delta)
        assert eps <= eps_grid + 1e-9
        assert abs(eps - eps_grid) < 1e-4 * max(1.0, eps)


def test_ledger_is_additive_and_immutable():
    a = privacy.record_queries(RdpLedger(), 100, 50.0)
    b = privacy.record_queries(a, 100, 50.0)
    direct = privacy.record_queries(RdpLedger(), 200, 50.0)
    assert b.coeff == pytest.approx(direct.coeff)
    assert a.coeff == pytest.approx(100 / 50.0 ** 2)  # unchanged by the second call
    merged = privacy.merge(a, a)
    assert merged.coeff == pytest.approx(b.coeff)
    assert len(merged.queries) == 2


def test_zero_queries_cost_nothing():
    ledger = privacy.record_queries(RdpLedger(), 0, 50.0)
    assert ledger.coeff == 0.0
    eps, gamma = privacy.rdp_to_dp(ledger, 1e-5)
    assert eps == 0.0 and gamma is None


def test_epsilon_monotone_in_queries_and_noise():
    eps_m = [privacy.rdp_to_dp(privacy.record_queries(RdpLedger(), m, 50.0), 1e-5)[0]
             for m in [10, 50, 200, 1000]]
    assert all(b > a for a, b in zip(eps_m, eps_m[1:]))
    eps_s = [privacy.rdp_to_dp(privacy.record_queries(RdpLedger(), 200, s), 1e-5)[0]
             for s in [10.0, 30.0, 50.0, 100.0]]
    assert all(b < a for a, b in zip(eps_s, eps_s[1:]))


def test_gaussian_mechanism_delta():
    assert privacy.gaussian_mechanism_delta(1.0, 0.5) == \
        pytest.approx(0.8 * math.exp(-0.125))
    assert privacy.gaussian_mechanism_delta(2.0, 0.5) == \
        pytest.approx(0.48522, abs=5e-6)
    for bad_eps in (0.0, 1.0, 1.5, -0.2):
        with pytest.raises(ValueError):
            privacy.gaussian_mechanism_delta(1.0, bad_eps)
    with pytest.raises(ValueError):
        privacy.gaussian_mechanism_delta(0.0, 0.5)


def test_budget_for_target_hits_epsilon_two():
    sigma = privacy.budget_for_target(200, 1e-5, 2.0)
    assert sigma == pytest.approx(50.0, rel=0.02)
    eps, _ = privacy.rdp_to_dp(privacy.record_queries(RdpLedger(), 200, sigma), 1e-5)
    assert eps <= 2.0
    # just below the returned sigma the budget must be exceeded
    eps_tight, _ = privacy.rdp_to_dp(
        privacy.record_queries(RdpLedger(), 200, sigma * 0.999), 1e-5)
    assert eps_tight > 2.0


def test_budget_for_target_unreachable():
    with pytest.raises(BudgetRangeError):
        privacy.budget_for_target(10 ** 6, 1e-5, 1e-6, sigma_hi=10.0)


def test_privacy_params_validation():
    with pytest.raises(ValueError):
        PrivacyParams(sigma=0.0, delta=1e-5, num_queries=1)
    with pytest.raises(ValueError):
        PrivacyParams(sigma=1.0, delta=0.0, num_queries=1)
    with pytest.raises(ValueError):
        PrivacyParams(sigma=1.0, delta=1e-5, num_queries=-1)


def test_record_queries_validation():
    with pytest.raises(ValueError):
        privacy.record_queries(RdpLedger(), -1, 50.0)
    with pytest.raises(ValueError):
        privacy.record_queries(RdpLedger(), 1, 0.0)
    with pytest.raises(ValueError):
        privacy.rdp_to_dp(RdpLedger(), 1.5)
