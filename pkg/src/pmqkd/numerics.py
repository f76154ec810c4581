"""Numerically stable scalar kernels.

Binary entropy, Poisson photon-number weights, and the residue-class weights
P(k) = sum_l mu^(lM+k) e^-mu / (lM+k)!  that describe a weak coherent pulse
under M-slice discrete phase randomization, together with their closed-form
upper bounds for even k.

All functions are pure and reentrant.  Factorial ratios go through log-gamma
so nothing overflows past k ~ 170, and series are truncated only once a term
drops below 1e-18 of the running sum (terms are positive and eventually
decreasing, so the discarded tail is bounded by a geometric remainder).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

# Relative size at which a series term is considered exhausted.
_REL_TERM_FLOOR = 1e-18


def binary_entropy(x: float) -> float:
    """Shannon entropy H(x) = -x log2 x - (1-x) log2 (1-x), in bits.

    The endpoints use the limit convention 0*log2(0) = 0 and return an exact
    0.0 rather than an epsilon-clamped approximation.
    """
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"binary_entropy: x must be in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def poisson_pmf(mu: float, k: int) -> float:
    """Poisson weight e^-mu mu^k / k!, evaluated in the log domain.

    Exact at k = 0 by construction (returns e^-mu directly).
    """
    if mu < 0:
        raise DomainError(f"poisson_pmf: mu must be >= 0, got {mu}")
    if k < 0 or int(k) != k:
        raise DomainError(f"poisson_pmf: k must be a nonnegative integer, got {k}")
    k = int(k)
    if k == 0:
        return math.exp(-mu)
    if mu == 0.0:
        return 0.0
    return math.exp(-mu + k * math.log(mu) - math.lgamma(k + 1))


@dataclass(frozen=True)
class PseudoFockWeight:
    """Weight of the residue class k mod M in a phase-randomized pulse.

    For fixed (mu, m_slices) the weights over k = 0 .. M-1 sum to one, and
    each weight dominates the plain Poisson term of the same k.
    """

    mu: float
    m_slices: int
    k: int
    weight: float


def _residue_series(mu: float, start: int, step: int) -> float:
    """sum_{l>=0} mu^(start + l*step) e^-mu / (start + l*step)!.

    Positive terms only; truncated once a term falls below 1e-18 of the
    running sum.
    """
    log_mu = math.log(mu)
    total = 0.0
    n = start
    while True:
        term = math.exp(-mu + n * log_mu - math.lgamma(n + 1))
        total += term
        if total > 0.0 and term < _REL_TERM_FLOOR * total:
            break
        if term == 0.0 and n > mu:
            break  # below double range; remaining terms are smaller still
        n += step
    return total


def pseudo_fock_weight(mu: float, m_slices: int, k: int) -> PseudoFockWeight:
    """Series weight sum_{l>=0} mu^(lM+k) e^-mu / (lM+k)!.

    Truncates when a term falls below 1e-18 of the running sum.
    """
    if mu < 0:
        raise DomainError(f"pseudo_fock_weight: mu must be >= 0, got {mu}")
    if m_slices < 2:
        raise DomainError(f"pseudo_fock_weight: m_slices must be >= 2, got {m_slices}")
    if not 0 <= k < m_slices:
        raise DomainError(
            f"pseudo_fock_weight: k must satisfy 0 <= k < m_slices, got k={k}, M={m_slices}"
        )
    if mu == 0.0:
        return PseudoFockWeight(mu, m_slices, k, 1.0 if k == 0 else 0.0)
    return PseudoFockWeight(mu, m_slices, k, _residue_series(mu, k, m_slices))


def pseudo_fock_weight_ub(mu: float, m_slices: int, k: int) -> float:
    """Closed-form upper bound on pseudo_fock_weight(mu, m_slices, k).weight.

    Relaxing the index set lM + k to all even integers >= k (valid for even
    k and even M) gives the even Poisson tail, whose closed forms are
        k = 0: (1 + e^-2mu) / 2
        k = 2: (1 + e^-2mu - 2 e^-mu) / 2
        k = 4: (1 + e^-2mu - 2 e^-mu - mu^2 e^-mu) / 2
        k = 6: (1 + e^-2mu - 2 e^-mu - mu^2 e^-mu - 2 mu^4 e^-mu / 4!) / 2.
    Those alternating forms cancel catastrophically in doubles once the tail
    is below ~1e-13, which would break the dominance guarantee, so the tail
    is evaluated as its positive term series instead (identical value).

    Supported for k in {0, 2, 4, 6} with even m_slices >= k + 2; the step-2
    relaxation requires every index lM + k to be even.
    """
    if mu < 0:
        raise DomainError(f"pseudo_fock_weight_ub: mu must be >= 0, got {mu}")
    if m_slices % 2 != 0:
        raise DomainError(
            f"pseudo_fock_weight_ub: m_slices must be even, got {m_slices}"
        )
    if k not in (0, 2, 4, 6):
        raise DomainError(
            f"pseudo_fock_weight_ub: only k in {{0, 2, 4, 6}} is supported, got {k}"
        )
    if m_slices < k + 2:
        raise DomainError(
            f"pseudo_fock_weight_ub: need m_slices >= k + 2, got M={m_slices}, k={k}"
        )
    if mu == 0.0:
        return 1.0 if k == 0 else 0.0
    return _residue_series(mu, k, 2)
