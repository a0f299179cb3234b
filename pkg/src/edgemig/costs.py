"""Migration signaling/traffic cost and service disruption time.

The disruption-time formula is an empirical TCP latency model for an
FTP-like transfer: slow-start rounds (log base 1.57 of the packet
count), a loss-recovery component, and a congestion-window term, all
scaled by the connection RTT, plus a fixed VM-conversion time.  The
loss component peaks at RTT = 0.5 s, so monotonicity in RTT is only
guaranteed on [0, 0.5] s when p_loss > 0; that covers any sane WAN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .chain import StationaryDist, state_ring

LOG_BASE = 1.57  # slow-start growth factor of the empirical model


class DomainError(ValueError):
    """Parameters outside the model's domain (e.g. loss rate >= 1)."""


@dataclass(frozen=True)
class TransferParams:
    """Inputs of the migration cost and disruption-time models.

    Sizes are in bits except mss (bytes, TCP segment payload).  w_max is
    the maximum congestion window in segments.
    """

    objects_size: float = 1e9
    sig_size: float = 0.0
    mss: int = 1460
    w_max: int = 512
    p_loss: float = 0.0
    rtt: float = 0.01
    t_vm_conversion: float = 0.0

    def __post_init__(self):
        if self.objects_size < 0 or self.sig_size < 0:
            raise ValueError("sizes must be >= 0")
        if self.mss <= 0:
            raise ValueError("mss must be positive")
        if self.w_max < 1:
            raise ValueError("w_max must be >= 1")
        if not 0.0 <= self.p_loss < 1.0:
            raise DomainError("p_loss must be in [0, 1)")
        if self.rtt < 0 or self.t_vm_conversion < 0:
            raise ValueError("rtt and t_vm_conversion must be >= 0")

    @property
    def packet_count(self) -> int:
        """Number of TCP segments needed for the object transfer."""
        return math.ceil(self.objects_size / (self.mss * 8))

    def scaled(self, fraction: float) -> "TransferParams":
        """Same parameters with only a fraction of the service migrated."""
        if not 0.0 <= fraction <= 1.0:
            raise ValueError("fraction must be in [0, 1]")
        return replace(self, objects_size=self.objects_size * fraction)


@dataclass(frozen=True)
class RttModel:
    """DC-to-DC round-trip time as a function of hop distance: coeff * i**2."""

    coeff: float = 0.01  # seconds per hop^2

    def __post_init__(self):
        if self.coeff < 0:
            raise ValueError("coeff must be >= 0")

    def rtt_at(self, hops: int) -> float:
        return self.coeff * hops * hops


def signaling_cost(params: TransferParams) -> float:
    """Total migration traffic in bits: payload plus three trigger messages."""
    return params.objects_size + 3.0 * params.sig_size


def migration_probability(dist: StationaryDist, k: int, p_step: float = 1.0 / 6.0) -> float:
    """Per-jump probability that the walk exits ring k-1 and triggers migration.

    Corner classes exit with probability 3p, edge classes with 2p.
    """
    edge_ring = k - 1
    total = 0.0
    found = False
    for s, p in zip(dist.states, dist.pi):
        if state_ring(s) != edge_ring:
            continue
        found = True
        outward = 3 if getattr(s, "class_id", 0) == 0 else 2
        total += outward * p_step * p
    if not found:
        raise ValueError(f"distribution has no ring {edge_ring} states")
    return total


def migration_cost(
    dist: StationaryDist,
    k: int,
    cost: float,
    *,
    p_step: float = 1.0 / 6.0,
    mu: float | None = None,
) -> float:
    """Expected migration traffic per jump of the embedded chain, in bits.

    Pass mu to rescale to cost per unit time (mu jumps per second on
    average).
    """
    mc = migration_probability(dist, k, p_step) * cost
    return mc * mu if mu is not None else mc


def _slow_start_rounds(n: int) -> float:
    """log_1.57 of the packet count, clamped at 0 for n <= 1."""
    if n <= 1:
        return 0.0
    return math.log(n) / math.log(LOG_BASE)


def transfer_time(params: TransferParams) -> float:
    """RTT-scaled TCP transfer latency (disruption time minus conversion)."""
    if params.p_loss >= 1.0:
        raise DomainError("p_loss must be < 1")
    n = params.packet_count
    rtt = params.rtt
    if n == 0 or rtt == 0.0:
        return 0.0
    p = params.p_loss
    rounds = _slow_start_rounds(n)
    # Loss factor: recovery burst shrinking with RTT plus a per-packet
    # pacing term whose RTT dependence cancels against the outer scaling.
    f = 32.0 * (2.0 * p + 4.0 * p**2 + 16.0 * p**3) / (1.0 + rtt) ** 3
    f += 2.0 * (1.0 + p) / (rtt * 1e3)
    window_term = (10.0 + 3.0 * rtt) / (4.0 * (1.0 - p) * params.w_max * math.sqrt(params.w_max))
    bracket = rounds + f * n + 4.0 * p * rounds + 20.0 * p + window_term * n
    return bracket * rtt


def service_disruption_time(params: TransferParams) -> float:
    """Seconds the service is unusable while migrating: transfer plus conversion."""
    return transfer_time(params) + params.t_vm_conversion


def sdt_vs_k(
    k: int,
    dist: StationaryDist,
    rtt_model: RttModel,
    params: TransferParams,
) -> float:
    """Disruption time with the worst-case DC-DC RTT at the migration trigger.

    Migration fires when the walk exits ring k-1, so the source and target
    DCs sit k-1 hops apart; the stationary distribution does not enter
    (worst case, not average).
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    return service_disruption_time(replace(params, rtt=rtt_model.rtt_at(k - 1)))
