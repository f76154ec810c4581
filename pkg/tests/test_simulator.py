"""Monte Carlo simulator tests: determinism, closed-form agreement,
sifting statistics, and CSV round-trips."""

import math

import numpy as np
import pytest
from scipy import stats

from pmqkd.channel import ChannelSpec, gain, qber, transmittance
from pmqkd.errors import DomainError, NoDataError
from pmqkd.simulator import (
    ObservedTally,
    ProtocolParams,
    simulate,
    tally_to_stats,
    write_tally_csv,
)


def make_params(loss_db=20.0, mu=3.2e-3, n_rounds=2_000_000, p_s=0.07, m=8):
    return ProtocolParams(
        mu=mu, m_slices=m, n_rounds=n_rounds, p_s=p_s,
        channel=ChannelSpec(total_loss_db=loss_db),
    )


class TestParamsValidation:
    def test_rejects_bad_fields(self):
        ch = ChannelSpec(total_loss_db=20)
        with pytest.raises(DomainError):
            ProtocolParams(mu=-1, m_slices=8, n_rounds=10, p_s=0.1, channel=ch)
        with pytest.raises(DomainError):
            ProtocolParams(mu=1e-3, m_slices=7, n_rounds=10, p_s=0.1, channel=ch)
        with pytest.raises(DomainError):
            ProtocolParams(mu=1e-3, m_slices=8, n_rounds=10, p_s=0.0, channel=ch)
        with pytest.raises(DomainError):
            ProtocolParams(mu=1e-3, m_slices=8, n_rounds=0, p_s=0.1, channel=ch)


class TestDeterminism:
    def test_same_seed_same_tally(self):
        params = make_params()
        t1 = simulate(params, seed=11)
        t2 = simulate(params, seed=11)
        assert t1.matched == t2.matched
        assert (t1.n_det, t1.n_double, t1.m_s, t1.n_sifted) == (
            t2.n_det, t2.n_double, t2.m_s, t2.n_sifted
        )

    def test_parallelism_degree_invariant(self):
        params = make_params(n_rounds=3_000_000)
        t1 = simulate(params, seed=3, batch_size=500_000, n_jobs=1)
        t2 = simulate(params, seed=3, batch_size=500_000, n_jobs=3)
        assert t1.matched == t2.matched
        assert (t1.n_det, t1.n_double, t1.m_s, t1.n_sifted) == (
            t2.n_det, t2.n_double, t2.m_s, t2.n_sifted
        )

    def test_different_seeds_differ(self):
        params = make_params()
        assert simulate(params, seed=1).matched != simulate(params, seed=2).matched


class TestDegenerateCases:
    def test_no_light_no_darks(self):
        ch = ChannelSpec(total_loss_db=20, p_d=0.0)
        params = ProtocolParams(mu=0.0, m_slices=8, n_rounds=100_000, p_s=0.07,
                                channel=ch)
        tally = simulate(params, seed=0)
        assert tally.n_det == 0
        assert tally.matched == {}
        with pytest.raises(NoDataError):
            tally_to_stats(tally)

    def test_darks_only_is_random_noise(self):
        ch = ChannelSpec(total_loss_db=20, p_d=1e-3)
        params = ProtocolParams(mu=0.0, m_slices=8, n_rounds=2_000_000, p_s=0.07,
                                channel=ch)
        tally = simulate(params, seed=0)
        _, e_b_emp, _ = tally_to_stats(tally)
        n = tally.total_matched()
        assert abs(e_b_emp - 0.5) <= 3 * math.sqrt(0.25 / n)


class TestClosedFormAgreement:
    def test_reference_point_35db(self):
        params = make_params(loss_db=35.0, mu=3.2e-3, n_rounds=20_000_000)
        tally = simulate(params, seed=99)
        q_emp, e_b_emp, _ = tally_to_stats(tally)
        eta = transmittance(params.channel)
        q = gain(params.mu, eta, params.channel.p_d)
        e_b = qber(params.mu, eta, params.channel.p_d, params.channel.e_d)
        assert abs(q_emp - q) <= 3 * math.sqrt(q * (1 - q) / params.n_rounds)
        n_matched = tally.total_matched()
        assert abs(e_b_emp - e_b) <= 3 * math.sqrt(e_b * (1 - e_b) / n_matched)

    def test_matched_fraction_near_2_over_m(self):
        for m in (6, 8):
            params = make_params(loss_db=15.0, mu=5e-3, n_rounds=5_000_000, m=m)
            tally = simulate(params, seed=5)
            frac = tally.total_matched() / tally.n_det
            expect = 2.0 / m
            sd = math.sqrt(expect * (1 - expect) / tally.n_det)
            assert abs(frac - expect) <= 3 * sd

    def test_random_parameter_sweep(self):
        # 20 random boxes; allow one 4-sigma excursion across all checks
        rng = np.random.default_rng(7)
        excursions = 0
        for _ in range(20):
            mu = float(10 ** rng.uniform(-4, -2))
            loss = float(rng.uniform(10, 50))
            params = make_params(loss_db=loss, mu=mu, n_rounds=10_000_000)
            tally = simulate(params, seed=int(rng.integers(2**31)))
            eta = transmittance(params.channel)
            q = gain(mu, eta, params.channel.p_d)
            e_b = qber(mu, eta, params.channel.p_d, params.channel.e_d)
            q_emp, e_b_emp, _ = tally_to_stats(tally)
            if abs(q_emp - q) > 4 * math.sqrt(q * (1 - q) / params.n_rounds):
                excursions += 1
            n_matched = tally.total_matched()
            if n_matched and abs(e_b_emp - e_b) > 4 * math.sqrt(
                e_b * (1 - e_b) / n_matched
            ):
                excursions += 1
        assert excursions <= 1

    def test_sifting_symmetry(self):
        # counts in the delta = 0 and delta = pi groups are indistinguishable
        params = make_params(loss_db=10.0, mu=5e-3, n_rounds=10_000_000)
        tally = simulate(params, seed=31)
        half = params.m_slices // 2
        zero = sum(
            c for (a, b, _), c in tally.matched.items() if (a - b) % 8 == 0
        )
        pi = sum(
            c for (a, b, _), c in tally.matched.items() if (a - b) % 8 == half
        )
        chi2 = stats.chisquare([zero, pi])
        assert chi2.pvalue > 0.001

    def test_invariants_hold(self):
        params = make_params(loss_db=15.0, mu=5e-3, n_rounds=3_000_000)
        tally = simulate(params, seed=17)
        # every matched key is a |delta| in {0, pi} pair
        for (a, b, det) in tally.matched:
            assert (a - b) % 8 in (0, 4)
            assert det in (1, 2)
        # sampling partition is consistent
        sampled_out = tally.total_matched() - tally.n_sifted
        assert sampled_out >= 0
        assert tally.m_s <= sampled_out
        assert tally.n_det >= tally.total_matched()


class TestTallyToStats:
    def test_empty_tally_errors(self):
        tally = ObservedTally(m_slices=8, n_rounds=1000, mu=1e-3, p_s=0.07)
        with pytest.raises(NoDataError):
            tally_to_stats(tally)

    def test_pure_correct_counts(self):
        tally = ObservedTally(
            m_slices=8, n_rounds=1000, mu=1e-3, p_s=0.07, n_det=40,
            matched={(0, 0, 1): 5, (1, 5, 2): 5}, n_sifted=10,
        )
        _, e_b, n_mu = tally_to_stats(tally)
        assert e_b == 0.0
        assert n_mu == 10

    def test_error_convention(self):
        # D2 at delta = 0 and D1 at delta = pi are the error counts
        tally = ObservedTally(
            m_slices=8, n_rounds=1000, mu=1e-3, p_s=0.07, n_det=40,
            matched={(0, 0, 2): 3, (2, 6, 1): 4, (0, 0, 1): 93}, n_sifted=100,
        )
        assert tally.error_count() == 7


class TestCsvRoundTrip:
    def test_bit_exact_round_trip(self, tmp_path):
        from pmqkd.ingest import parse_tally_csv

        params = make_params(loss_db=15.0, mu=5e-3, n_rounds=2_000_000)
        tally = simulate(params, seed=23)
        path = tmp_path / "tally.csv"
        write_tally_csv(tally, str(path), loss_db=15.0)
        record = parse_tally_csv(str(path))
        kept = {k: v for k, v in tally.matched.items() if v}
        assert record.tally.matched == kept
        assert record.tally.n_det == tally.n_det
        assert record.tally.m_s == tally.m_s
        assert record.tally.n_sifted == tally.n_sifted
        assert record.counts_include_test is True
        assert record.loss_db == 15.0

    def test_byte_identical_rewrites(self, tmp_path):
        params = make_params(n_rounds=1_000_000)
        tally = simulate(params, seed=8)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_tally_csv(tally, str(p1), loss_db=20.0)
        write_tally_csv(tally, str(p2), loss_db=20.0)
        assert p1.read_bytes() == p2.read_bytes()

    def test_merge_is_associative(self):
        params = make_params(n_rounds=900_000)
        t = simulate(params, seed=4, batch_size=300_000)
        single = simulate(params, seed=4, batch_size=900_000)
        # same seed, different layout -> different streams; only structure
        # is comparable here: merge bookkeeping stays consistent
        assert t.n_rounds == single.n_rounds == 900_000
        assert t.total_matched() == t.n_sifted + (t.total_matched() - t.n_sifted)
