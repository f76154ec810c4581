"""Closed-form detection model.

Transmittance, total gain, QBER and the expected sifted-key size for a
symmetric two-arm interference link: the quoted channel loss (in dB) splits
evenly between the two arms, and ``eta`` is the single-arm transmittance
times the detector efficiency.  Intensities are symmetric, mu_a = mu_b =
mu/2, so formulas are written in the total intensity mu.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import defaults
from .errors import DomainError, UndefinedRateError


@dataclass(frozen=True)
class ChannelSpec:
    """Physical channel and detector parameters.

    Exactly one of ``total_loss_db`` and ``distance_km`` must be given; a
    distance is converted at ``alpha_db_per_km``.
    """

    eta_d: float = defaults.ETA_D
    p_d: float = defaults.P_D
    e_d: float = defaults.E_D
    total_loss_db: float | None = None
    distance_km: float | None = None
    alpha_db_per_km: float = defaults.ALPHA_DB_PER_KM

    def __post_init__(self):
        if (self.total_loss_db is None) == (self.distance_km is None):
            raise DomainError(
                "ChannelSpec: exactly one of total_loss_db / distance_km required"
            )
        if not 0.0 < self.eta_d <= 1.0:
            raise DomainError(f"ChannelSpec: eta_d must be in (0, 1], got {self.eta_d}")
        if not 0.0 <= self.p_d < 1.0:
            raise DomainError(f"ChannelSpec: p_d must be in [0, 1), got {self.p_d}")
        if not 0.0 <= self.e_d <= 0.5:
            raise DomainError(f"ChannelSpec: e_d must be in [0, 0.5], got {self.e_d}")
        if self.alpha_db_per_km <= 0:
            raise DomainError("ChannelSpec: alpha_db_per_km must be positive")
        if self.loss_db() < 0:
            raise DomainError("ChannelSpec: channel loss must be nonnegative")

    def loss_db(self) -> float:
        """Total channel attenuation in dB (excludes detector efficiency)."""
        if self.total_loss_db is not None:
            return self.total_loss_db
        return self.alpha_db_per_km * self.distance_km


def transmittance(spec: ChannelSpec) -> float:
    """Single-arm transmittance times detector efficiency.

    eta = eta_d * 10^(-(loss_db / 2) / 10); each arm carries half the loss.
    """
    return spec.eta_d * 10.0 ** (-(spec.loss_db() / 2.0) / 10.0)


def gain(mu: float, eta: float, p_d: float) -> float:
    """Total gain Q: probability that a round yields a single-detector click.

    Q = (1 - p_d) * [1 - (1 - 2 p_d) e^(-mu eta)], computed through expm1 so
    the small mu*eta regime keeps full relative precision.
    """
    if mu < 0:
        raise DomainError(f"gain: mu must be >= 0, got {mu}")
    if not 0.0 < eta <= 1.0:
        raise DomainError(f"gain: eta must be in (0, 1], got {eta}")
    if not 0.0 <= p_d < 1.0:
        raise DomainError(f"gain: p_d must be in [0, 1), got {p_d}")
    s = -math.expm1(-mu * eta)  # 1 - e^(-mu eta)
    return (1.0 - p_d) * (s + 2.0 * p_d * (1.0 - s))


def qber(mu: float, eta: float, p_d: float, e_d: float) -> float:
    """Bit error rate among sifted rounds.

    E_b = [e_d (1-p_d) (1 - (1-p_d) e^(-mu eta))
           + (1-e_d) p_d (1-p_d) e^(-mu eta)] / Q.
    The common (1-p_d) factor is cancelled analytically, which makes the
    p_d = 0 limit return e_d exactly and the mu = 0 limit return 1/2.
    """
    if not 0.0 <= e_d <= 0.5:
        raise DomainError(f"qber: e_d must be in [0, 0.5], got {e_d}")
    if mu < 0:
        raise DomainError(f"qber: mu must be >= 0, got {mu}")
    s = -math.expm1(-mu * eta)  # 1 - e^(-mu eta)
    denom = s + 2.0 * p_d * (1.0 - s)
    if denom <= 0.0:
        raise UndefinedRateError("qber: gain is zero (mu = 0 and p_d = 0)")
    num = e_d * (s + p_d * (1.0 - s)) + (1.0 - e_d) * p_d * (1.0 - s)
    return num / denom


def expected_sifted(q_mu: float, n_rounds: float, m_slices: int, p_s: float) -> float:
    """Expected sifted-key size n = (2/M) * Q * N * (1 - p_s).

    Returned as a real expectation, not rounded.
    """
    if m_slices < 2:
        raise DomainError(f"expected_sifted: m_slices must be >= 2, got {m_slices}")
    if not 0.0 <= p_s <= 1.0:
        raise DomainError(f"expected_sifted: p_s must be in [0, 1], got {p_s}")
    if n_rounds < 0:
        raise DomainError("expected_sifted: n_rounds must be nonnegative")
    return (2.0 / m_slices) * q_mu * n_rounds * (1.0 - p_s)
