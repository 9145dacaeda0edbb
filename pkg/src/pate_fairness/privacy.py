"""Renyi-DP accounting for Gaussian noisy-max voting.

Each labeling query at noise level sigma costs (gamma, gamma / sigma^2) in
Renyi DP for every order gamma, so a whole run composes into a single
coefficient: eps_rdp(gamma) = coeff * gamma with coeff = sum(count / sigma^2).
Converting to (eps, delta)-DP minimizes coeff * gamma + log(1/delta) / (gamma - 1)
over gamma > 1, which has the closed-form minimizer
gamma* = 1 + sqrt(log(1/delta) / coeff).

Hard-label and soft-label voting release the same noisy counts, so they
consume identical budget; the ledger does not distinguish them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import BudgetRangeError


@dataclass(frozen=True)
class PrivacyParams:
    sigma: float
    delta: float
    num_queries: int

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        if not 0 < self.delta < 1:
            raise ValueError("delta must be in (0, 1)")
        if self.num_queries < 0:
            raise ValueError("num_queries must be >= 0")


@dataclass(frozen=True)
class RdpLedger:
    """Accumulated RDP cost; a value type, so merging is an associative fold."""

    coeff: float = 0.0
    queries: tuple[tuple[int, float], ...] = field(default_factory=tuple)


def gaussian_mechanism_delta(sigma: float, eps: float) -> float:
    """Minimal admissible delta for the Gaussian mechanism at eps < 1."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    if not 0 < eps < 1:
        raise ValueError(f"the Gaussian-mechanism bound requires 0 < eps < 1, got {eps}")
    return 0.8 * math.exp(-((sigma * eps) ** 2) / 2.0)


def record_queries(ledger: RdpLedger, count: int, sigma: float) -> RdpLedger:
    """Charge `count` labeling queries at noise level sigma."""
    if count < 0:
        raise ValueError("count must be >= 0")
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    if count == 0:
        return ledger
    return RdpLedger(coeff=ledger.coeff + count / sigma ** 2,
                     queries=ledger.queries + ((count, sigma),))


def merge(a: RdpLedger, b: RdpLedger) -> RdpLedger:
    return RdpLedger(coeff=a.coeff + b.coeff, queries=a.queries + b.queries)


def rdp_to_dp(ledger: RdpLedger | float, delta: float) -> tuple[float, float | None]:
    """Tightest (eps, delta)-DP guarantee and the minimizing Renyi order."""
    coeff = ledger.coeff if isinstance(ledger, RdpLedger) else float(ledger)
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0, 1)")
    if coeff < 0:
        raise ValueError("coefficient must be >= 0")
    if coeff == 0:
        return 0.0, None
    log_inv_delta = math.log(1.0 / delta)
    gamma = 1.0 + math.sqrt(log_inv_delta / coeff)
    eps = coeff * gamma + log_inv_delta / (gamma - 1.0)
    return eps, gamma


def budget_for_target(m: int, delta: float, target_eps: float,
                      sigma_lo: float = 1e-3, sigma_hi: float = 1e6) -> float:
    """Minimal sigma so that m queries stay within target_eps at delta.

    Bisection on sigma, verified by a forward evaluation; raises if the
    target is unreachable in [sigma_lo, sigma_hi].
    """
    if target_eps <= 0:
        raise ValueError("target_eps must be > 0")

    def eps_at(sigma: float) -> float:
        return rdp_to_dp(record_queries(RdpLedger(), m, sigma), delta)[0]

    if eps_at(sigma_hi) > target_eps:
        raise BudgetRangeError(
            f"eps {target_eps} unreachable with sigma <= {sigma_hi}")
    if eps_at(sigma_lo) <= target_eps:
        return sigma_lo
    lo, hi = sigma_lo, sigma_hi
    while (hi - lo) / hi > 1e-4 / 4:
        mid = 0.5 * (lo + hi)
        if eps_at(mid) <= target_eps:
            hi = mid
        else:
            lo = mid
    assert eps_at(hi) <= target_eps
    return hi
