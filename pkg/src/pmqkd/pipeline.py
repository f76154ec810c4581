"""Analytic key-rate pipeline: closed-form channel model into the bound chain.

Used by the CLI, the optimizer and the experiment scripts for simulation-mode
evaluations; ingestion-mode evaluations live in :mod:`pmqkd.ingest`.
"""

from __future__ import annotations

from . import defaults
from .channel import ChannelSpec, expected_sifted, gain, qber, transmittance
from .security import KeyRateResult, SecurityBudget, finite_key_rate


def expected_key_rate(
    channel: ChannelSpec,
    mu: float,
    m_slices: int = defaults.M_SLICES,
    n_rounds: float = defaults.N_ROUNDS,
    p_s: float = defaults.P_S,
    f: float = defaults.F_EC,
    budget: SecurityBudget | None = None,
) -> KeyRateResult:
    """Evaluate the finite-key rate from the closed-form detection model.

    The sampled error count enters as its expectation E_b * n_s with
    n_s = n_mu p_s / (1 - p_s); nothing is rounded, so rate curves stay
    smooth in the parameters.
    """
    if budget is None:
        budget = SecurityBudget()
    eta = transmittance(channel)
    q_mu = gain(mu, eta, channel.p_d)
    e_b = qber(mu, eta, channel.p_d, channel.e_d)
    n_mu = expected_sifted(q_mu, n_rounds, m_slices, p_s)
    m_s = e_b * n_mu * p_s / (1.0 - p_s)
    return finite_key_rate(
        mu=mu,
        m_slices=m_slices,
        n_rounds=n_rounds,
        p_s=p_s,
        f=f,
        q_mu=q_mu,
        e_b=e_b,
        n_mu=n_mu,
        m_s=m_s,
        budget=budget,
        q_source="closed-form",
    )
