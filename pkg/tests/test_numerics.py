"""Scalar kernel tests.

Expected values marked as frozen were computed with mpmath at 60 significant
digits (see the oracle helpers below); the oracles are kept in the test
module so they stay independent of the implementation under test.
"""

import math

import mpmath as mp
import pytest
from hypothesis import given, settings, strategies as st

from pmqkd.errors import DomainError
from pmqkd.numerics import (
    binary_entropy,
    poisson_pmf,
    pseudo_fock_weight,
    pseudo_fock_weight_ub,
)

mp.mp.dps = 60


def oracle_entropy(x: float) -> float:
    xm = mp.mpf(x)
    if xm in (0, 1):
        return 0.0
    return float(-xm * mp.log(xm, 2) - (1 - xm) * mp.log(1 - xm, 2))


def oracle_poisson(mu: float, k: int) -> float:
    mum = mp.mpf(mu)
    return float(mum**k * mp.e**(-mum) / mp.factorial(k))


def oracle_pseudo_fock(mu: float, m: int, k: int, terms: int = 100) -> float:
    """Brute-force partial sum of the residue-class series at 60 digits."""
    mum = mp.mpf(mu)
    total = mp.mpf(0)
    for l in range(terms):
        n = l * m + k
        total += mum**n * mp.e**(-mum) / mp.factorial(n)
    return float(total)


class TestBinaryEntropy:
    def test_symmetry_maximum(self):
        assert binary_entropy(0.5) == 1.0

    def test_limit_convention(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0

    def test_quarter_value(self):
        # frozen: oracle_entropy(0.25) = 0.81127812445913286391...
        assert binary_entropy(0.25) == pytest.approx(0.8112781244591329, rel=1e-14)
        assert binary_entropy(0.25) == pytest.approx(oracle_entropy(0.25), rel=1e-14)

    @pytest.mark.parametrize("x", [-0.1, 1.1, 2.0, -1e-9])
    def test_domain(self, x):
        with pytest.raises(DomainError):
            binary_entropy(x)

    @given(st.floats(min_value=0.0, max_value=1.0, allow_nan=False))
    def test_range_and_symmetry(self, x):
        h = binary_entropy(x)
        assert 0.0 <= h <= 1.0
        assert abs(h - binary_entropy(1.0 - x)) <= 1e-14

    def test_concavity_on_grid(self):
        xs = [i / 1000 for i in range(1001)]
        for x, y in zip(xs[:-1], xs[1:]):
            mid = binary_entropy((x + y) / 2)
            avg = (binary_entropy(x) + binary_entropy(y)) / 2
            assert mid >= avg - 1e-12


class TestPoissonPmf:
    @pytest.mark.parametrize("mu", [0.0, 1e-6, 3.2e-3, 0.5, 1.0, 10.0])
    def test_k0_exact(self, mu):
        assert poisson_pmf(mu, 0) == math.exp(-mu)

    def test_mu1_k1(self):
        # frozen: e^-1 = 0.3678794411714423216...
        assert poisson_pmf(1.0, 1) == pytest.approx(0.36787944117144233, rel=1e-15)

    def test_normalization_small_mu(self):
        total = math.fsum(poisson_pmf(3.2e-3, k) for k in range(201))
        assert abs(total - 1.0) <= 1e-15

    def test_large_k_no_overflow(self):
        # naive mu^k / k! overflows past k ~ 170; the log domain does not
        assert poisson_pmf(50.0, 200) > 0.0
        assert poisson_pmf(50.0, 200) == pytest.approx(
            oracle_poisson(50.0, 200), rel=1e-12
        )

    @pytest.mark.parametrize("mu,k", [(-1.0, 0), (1.0, -1), (1.0, 1.5)])
    def test_domain(self, mu, k):
        with pytest.raises(DomainError):
            poisson_pmf(mu, k)

    @given(
        st.floats(min_value=1e-6, max_value=5.0),
        st.integers(min_value=0, max_value=40),
    )
    def test_against_oracle(self, mu, k):
        assert poisson_pmf(mu, k) == pytest.approx(oracle_poisson(mu, k), rel=1e-12)


class TestPseudoFockWeight:
    def test_vacuum_only(self):
        assert pseudo_fock_weight(0.0, 8, 0).weight == 1.0
        for k in range(1, 8):
            assert pseudo_fock_weight(0.0, 8, k).weight == 0.0

    @pytest.mark.parametrize("mu", [1e-4, 1e-3, 1e-2, 0.5, 1.0])
    @pytest.mark.parametrize("m", [6, 8, 16])
    def test_normalization(self, mu, m):
        total = math.fsum(pseudo_fock_weight(mu, m, k).weight for k in range(m))
        assert abs(total - 1.0) <= 1e-12

    def test_against_series_oracle(self):
        # frozen: oracle_pseudo_fock(0.5, 8, 2) = 0.075816332627305340146...
        w = pseudo_fock_weight(0.5, 8, 2).weight
        assert w == pytest.approx(0.07581633262730534, rel=1e-13)
        assert w == pytest.approx(oracle_pseudo_fock(0.5, 8, 2), rel=1e-13)

    def test_poisson_limit_large_m(self):
        for mu in (1e-3, 0.05, 0.1):
            for k in range(5):
                diff = abs(
                    pseudo_fock_weight(mu, 32, k).weight - poisson_pmf(mu, k)
                )
                assert diff < 1e-12

    @given(
        st.floats(min_value=1e-6, max_value=1.0),
        st.sampled_from([2, 4, 6, 8, 16]),
        st.integers(min_value=0, max_value=15),
    )
    def test_dominates_poisson_term(self, mu, m, k):
        # the series adds nonnegative terms on top of the leading Poisson one
        if k >= m:
            k = k % m
        w = pseudo_fock_weight(mu, m, k).weight
        assert w >= poisson_pmf(mu, k) - 1e-18

    @pytest.mark.parametrize("mu,m,k", [(1.0, 1, 0), (1.0, 8, 8), (1.0, 8, -1), (-0.5, 8, 0)])
    def test_domain(self, mu, m, k):
        with pytest.raises(DomainError):
            pseudo_fock_weight(mu, m, k)


class TestPseudoFockWeightUb:
    def test_mu_zero(self):
        assert pseudo_fock_weight_ub(0.0, 8, 0) == 1.0
        assert pseudo_fock_weight_ub(0.0, 8, 2) == 0.0

    def test_equals_closed_forms_at_moderate_mu(self):
        # away from the cancellation regime the tail equals the closed forms
        mu = 0.5
        e1, e2 = math.exp(-mu), math.exp(-2 * mu)
        assert pseudo_fock_weight_ub(mu, 8, 0) == pytest.approx(
            (1 + e2) / 2, rel=1e-13
        )
        assert pseudo_fock_weight_ub(mu, 8, 2) == pytest.approx(
            (1 + e2 - 2 * e1) / 2, rel=1e-12
        )
        assert pseudo_fock_weight_ub(mu, 8, 4) == pytest.approx(
            (1 + e2 - 2 * e1 - mu * mu * e1) / 2, rel=1e-10
        )
        assert pseudo_fock_weight_ub(mu, 8, 6) == pytest.approx(
            (1 + e2 - 2 * e1 - mu * mu * e1 - 2 * mu**4 * e1 / 24) / 2, rel=1e-8
        )

    @pytest.mark.parametrize("mu", [1e-4, 1e-3, 1e-2, 0.5])
    @pytest.mark.parametrize("m", [6, 8, 16])
    def test_dominates_series(self, mu, m):
        for k in (0, 2, 4, 6):
            if m < k + 2:
                continue
            ub = pseudo_fock_weight_ub(mu, m, k)
            assert ub >= pseudo_fock_weight(mu, m, k).weight - 1e-16

    def test_dominates_high_precision_series(self):
        # guard against float cancellation hiding a genuine violation
        for mu in (1e-4, 1e-3, 1e-2, 0.5):
            for m in (6, 8, 16):
                for k in (0, 2, 4, 6):
                    if m < k + 2:
                        continue
                    assert pseudo_fock_weight_ub(mu, m, k) >= oracle_pseudo_fock(
                        mu, m, k
                    ) * (1 - 1e-12)

    @pytest.mark.parametrize("m,k", [(8, 1), (8, 3), (8, 8), (7, 0), (6, 6), (4, 4)])
    def test_domain(self, m, k):
        with pytest.raises(DomainError):
            pseudo_fock_weight_ub(1e-3, m, k)
