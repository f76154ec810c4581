"""Monte Carlo emulation of the protocol rounds.

Each round draws random phase slices and key bits for both senders, feeds
the resulting interference pattern through a two-detector click model (dark
counts included), keeps single-click rounds, sifts on matching announced
phases, applies the deterministic flip rule, and samples test rounds.

Rounds are processed in fixed-size batches.  The random stream of batch i is
derived from the counter-based key (seed, i), so the tally is bit-identical
no matter how many workers process the batches: merging is associative and
commutative, and batch boundaries depend only on the round count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import defaults
from .channel import ChannelSpec, transmittance
from .errors import DomainError, NoDataError
from .security import SecurityBudget

DEFAULT_BATCH_SIZE = 2_000_000


@dataclass(frozen=True)
class ProtocolParams:
    """Everything a protocol run needs: source, channel, and postprocessing."""

    mu: float
    m_slices: int
    n_rounds: int
    p_s: float
    channel: ChannelSpec
    f: float = defaults.F_EC
    budget: SecurityBudget = field(default_factory=SecurityBudget)

    def __post_init__(self):
        if self.mu < 0:
            raise DomainError(f"ProtocolParams: mu must be >= 0, got {self.mu}")
        if self.m_slices < 2 or self.m_slices % 2 != 0:
            raise DomainError(
                f"ProtocolParams: m_slices must be an even integer >= 2, got {self.m_slices}"
            )
        if not 0.0 < self.p_s < 1.0:
            raise DomainError(f"ProtocolParams: p_s must be in (0, 1), got {self.p_s}")
        if self.n_rounds < 1:
            raise DomainError("ProtocolParams: n_rounds must be >= 1")


@dataclass
class ObservedTally:
    """Detector counts accumulated over a run.

    ``matched`` maps (phase_a, phase_b, detector) to a count, where phases
    are slice indices (multiples of 2 pi / M) of the total modulated phase
    and detector is 1 or 2.  Matched counts include the rounds later drawn
    into the test sample, so n_sifted + sampled-out = sum(matched).

    ``m_s`` and ``n_sifted`` are None when the dataset does not carry them
    (transcribed tables); the simulator always fills them in.
    """

    m_slices: int
    n_rounds: int
    mu: float
    p_s: float
    n_det: int = 0
    n_double: int = 0
    matched: dict[tuple[int, int, int], int] = field(default_factory=dict)
    m_s: int | None = None
    n_sifted: int | None = None
    seed: int | None = None

    def total_matched(self) -> int:
        return sum(self.matched.values())

    def error_count(self) -> int:
        """Wrong-detector clicks: D2 at phase difference 0, D1 at pi."""
        half = self.m_slices // 2
        total = 0
        for (a, b, det), count in self.matched.items():
            delta = (a - b) % self.m_slices
            if (delta == 0 and det == 2) or (delta == half and det == 1):
                total += count
        return total

    def merge(self, other: "ObservedTally") -> "ObservedTally":
        """Combine two batch tallies; associative and commutative."""
        if (self.m_slices, self.mu, self.p_s) != (other.m_slices, other.mu, other.p_s):
            raise DomainError("ObservedTally.merge: incompatible tallies")
        merged = dict(self.matched)
        for key, count in other.matched.items():
            merged[key] = merged.get(key, 0) + count
        return ObservedTally(
            m_slices=self.m_slices,
            n_rounds=self.n_rounds + other.n_rounds,
            mu=self.mu,
            p_s=self.p_s,
            n_det=self.n_det + other.n_det,
            n_double=self.n_double + other.n_double,
            matched=merged,
            m_s=(self.m_s or 0) + (other.m_s or 0),
            n_sifted=(self.n_sifted or 0) + (other.n_sifted or 0),
            seed=self.seed,
        )


def _click_probabilities(params: ProtocolParams) -> tuple[np.ndarray, np.ndarray]:
    """Per-detector click probability indexed by the effective phase slice."""
    m = params.m_slices
    eta = transmittance(params.channel)
    p_d = params.channel.p_d
    delta_phi = 2.0 * np.pi * np.arange(m) / m
    i1 = params.mu * eta * (1.0 + np.cos(delta_phi)) / 2.0
    i2 = params.mu * eta - i1
    p1 = 1.0 - (1.0 - p_d) * np.exp(-i1)
    p2 = 1.0 - (1.0 - p_d) * np.exp(-i2)
    return p1, p2


def _simulate_batch(params: ProtocolParams, seed: int, batch_index: int,
                    batch_rounds: int) -> ObservedTally:
    m = params.m_slices
    half = m // 2
    p1_table, p2_table = _click_probabilities(params)
    # Misalignment swaps the interference ports: the detection sees the phase
    # difference offset by pi while the announcements keep it.  Entries
    # m .. 2m-1 of the extended tables are the swapped ports.
    p1_ext = np.concatenate([p1_table, p2_table])
    p2_ext = np.concatenate([p2_table, p1_table])
    rng = np.random.Generator(
        np.random.Philox(key=np.array([seed, batch_index], dtype=np.uint64))
    )
    # Fixed draw order per batch; every round consumes the same draws so the
    # stream is independent of which rounds turn out valid.  Click draws
    # compare against probabilities as small as p_d ~ 1e-8 and need float64;
    # the misalignment and sampling thresholds are coarse, so float32
    # quantization (~6e-8) is far below their statistical resolution.
    pair = rng.integers(0, m * m, size=batch_rounds, dtype=np.uint16)
    misaligned = rng.random(batch_rounds, dtype=np.float32) < np.float32(
        params.channel.e_d
    )
    u1 = rng.random(batch_rounds)
    u2 = rng.random(batch_rounds)
    in_test = rng.random(batch_rounds, dtype=np.float32) < np.float32(params.p_s)

    tau_a = (pair // m).astype(np.uint8)
    tau_b = (pair % m).astype(np.uint8)
    delta = (tau_a + np.uint8(m) - tau_b) % np.uint8(m)  # tau_a + m < 256
    idx_eff = delta + misaligned * np.uint8(m)
    click1 = u1 < p1_ext[idx_eff]
    click2 = u2 < p2_ext[idx_eff]
    valid = click1 ^ click2
    matched = (delta == 0) | (delta == half)
    kept = valid & matched

    error = kept & (((delta == 0) & click2) | ((delta == half) & click1))

    tally = ObservedTally(
        m_slices=m,
        n_rounds=batch_rounds,
        mu=params.mu,
        p_s=params.p_s,
        n_det=int(valid.sum()),
        n_double=int((click1 & click2).sum()),
        m_s=int((error & in_test).sum()),
        n_sifted=int((kept & ~in_test).sum()),
    )
    if tally.n_det:
        det2 = click2[kept].astype(np.int64)  # 0 -> D1, 1 -> D2
        idx = pair[kept].astype(np.int64) * 2 + det2
        counts = np.bincount(idx, minlength=2 * m * m)
        matched_map: dict[tuple[int, int, int], int] = {}
        for a in range(m):
            for b in (a, (a + half) % m):
                for det in (1, 2):
                    count = int(counts[(a * m + b) * 2 + (det - 1)])
                    if count:
                        matched_map[(a, b, det)] = count
        tally.matched = matched_map
    return tally


def simulate(
    params: ProtocolParams,
    seed: int,
    batch_size: int = DEFAULT_BATCH_SIZE,
    n_jobs: int = 1,
) -> ObservedTally:
    """Run the protocol for params.n_rounds rounds.

    Deterministic for fixed (params, seed, batch_size); n_jobs only changes
    who processes each batch, never the result.
    """
    if batch_size < 1:
        raise DomainError("simulate: batch_size must be >= 1")
    n = int(params.n_rounds)
    batches = [
        (i, min(batch_size, n - i * batch_size))
        for i in range((n + batch_size - 1) // batch_size)
    ]
    if n_jobs > 1 and len(batches) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            tallies = list(
                pool.map(
                    _simulate_batch,
                    [params] * len(batches),
                    [seed] * len(batches),
                    [i for i, _ in batches],
                    [r for _, r in batches],
                )
            )
    else:
        tallies = [_simulate_batch(params, seed, i, r) for i, r in batches]
    total = tallies[0]
    for t in tallies[1:]:
        total = total.merge(t)
    total.seed = seed
    return total


def tally_to_stats(tally: ObservedTally) -> tuple[float, float, float]:
    """Empirical (gain, QBER, sifted size) from a tally.

    Q = valid clicks / rounds, E_b = wrong-detector fraction of matched
    clicks, and the sifted size is the post-sampling count.
    """
    if tally.n_det == 0:
        raise NoDataError("tally_to_stats: tally has no valid detections")
    total_matched = tally.total_matched()
    if total_matched == 0:
        raise NoDataError("tally_to_stats: tally has no matched detections")
    q_emp = tally.n_det / tally.n_rounds
    e_b_emp = tally.error_count() / total_matched
    n_mu = total_matched if tally.n_sifted is None else tally.n_sifted
    return q_emp, e_b_emp, float(n_mu)


def write_tally_csv(tally: ObservedTally, path: str, loss_db: float) -> None:
    """Serialize a tally in the ingestible CSV schema (bit-exact counts).

    Rows are emitted in canonical order (all delta = 0 pairs, then all
    delta = pi pairs), so equal tallies produce byte-identical files.
    """
    m = tally.m_slices
    half = m // 2
    lines = []
    lines.append(f"# loss_db={loss_db!r}")
    lines.append(f"# N={tally.n_rounds}")
    lines.append(f"# mu={tally.mu!r}")
    lines.append(f"# p_s={tally.p_s!r}")
    lines.append(f"# n_det={tally.n_det}")
    lines.append(f"# m_slices={m}")
    lines.append(f"# n_double={tally.n_double}")
    if tally.m_s is not None:
        lines.append(f"# m_s={tally.m_s}")
    if tally.n_sifted is not None:
        lines.append(f"# n_sifted={tally.n_sifted}")
    lines.append("# counts_include_test=true")
    if tally.seed is not None:
        lines.append(f"# seed={tally.seed}")
    lines.append("phase_a,phase_b,d1_count,d2_count")
    for offset in (0, half):
        for a in range(m):
            b = (a + offset) % m
            d1 = tally.matched.get((a, b, 1), 0)
            d2 = tally.matched.get((a, b, 2), 0)
            lines.append(f"{a},{b},{d1},{d2}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
