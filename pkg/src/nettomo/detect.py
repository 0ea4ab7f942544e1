"""Closed-form math for detecting spoofed-address denial-of-service floods.

An attacker spoofs source addresses uniformly at random over an address
space of size N; a monitor watches w of those addresses and sees a reply
packet whenever a spoofed address falls in its window.  Everything below is
exact binomial arithmetic on that model: the chance of seeing anything at
all, how many packets the monitor expects, the distribution of the observed
count, the attack-size estimate it implies, and the spacing between
detected packets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from typing import NamedTuple

__all__ = [
    "MonitorConfig",
    "detection_probability",
    "expected_observed",
    "observed_count_pmf",
    "attack_size_mle",
    "expected_gap",
    "GapEstimate",
]

DEFAULT_ADDRESS_SPACE = 2 ** 32

# beyond these sizes the exact-combinatorial pmf path gets expensive;
# fall back to lgamma arithmetic (documented lower precision ~1e-9)
_EXACT_COMB_MAX_J = 20_000
_EXACT_COMB_MAX_D = 10_000_000


@dataclass(frozen=True)
class MonitorConfig:
    """Monitoring window: ``w`` watched addresses out of ``address_space``."""

    w: int
    address_space: int = DEFAULT_ADDRESS_SPACE

    def __post_init__(self):
        if not 1 <= self.w <= self.address_space:
            raise ValueError(
                f"need 1 <= w <= address space, got w={self.w}, N={self.address_space}"
            )


class GapEstimate(NamedTuple):
    """Expected attack packets between two detected ones, both readings."""

    gap_truncated_as_printed: float
    gap_geometric: float


def detection_probability(m, d):
    """Probability that at least one of d spoofed packets hits the monitor.

    ``1 - (1 - w/N)**d`` evaluated through ``log1p`` so tiny windows keep
    full precision.
    """
    if d < 0:
        raise ValueError(f"attack size must be nonnegative, got {d}")
    if d == 0:
        return 0.0
    if m.w == m.address_space:
        return 1.0
    return -math.expm1(d * math.log1p(-m.w / m.address_space))


def expected_observed(m, d):
    """Expected number of attack packets the monitor sees: w*d/N."""
    if d < 0:
        raise ValueError(f"attack size must be nonnegative, got {d}")
    return m.w * d / m.address_space


def observed_count_pmf(m, d, j):
    """Probability of observing exactly j of the d attack packets.

    Binomial(d, w/N) mass evaluated in log space.  For moderate j the
    binomial coefficient is computed exactly and the logs are assembled in
    high-precision decimal arithmetic, keeping relative error near float
    rounding even at d ~ 1e6; huge j falls back to lgamma sums.
    """
    if d < 0:
        raise ValueError(f"attack size must be nonnegative, got {d}")
    if not 0 <= j <= d:
        raise ValueError(f"need 0 <= j <= d, got j={j}, d={d}")
    if m.w == m.address_space:
        return 1.0 if j == d else 0.0
    if j <= _EXACT_COMB_MAX_J and d <= _EXACT_COMB_MAX_D:
        with localcontext() as ctx:
            ctx.prec = 50
            ratio = Decimal(m.w) / Decimal(m.address_space)
            log_p = (
                Decimal(math.comb(d, j)).ln()
                + j * ratio.ln()
                + (d - j) * (1 - ratio).ln()
            )
            return float(log_p.exp())
    log_p = (
        math.lgamma(d + 1)
        - math.lgamma(j + 1)
        - math.lgamma(d - j + 1)
        + j * math.log(m.w / m.address_space)
        + (d - j) * math.log1p(-m.w / m.address_space)
    )
    return math.exp(log_p)


def attack_size_mle(m, j):
    """Maximum-likelihood attack size from j observed packets: floor(j*N/w).

    Computed in exact integer arithmetic; no float rounding at any scale.
    """
    if j < 0:
        raise ValueError(f"observed count must be nonnegative, got {j}")
    return (int(j) * int(m.address_space)) // int(m.w)


def expected_gap(m):
    """Expected attack packets between two detections, two readings.

    ``gap_truncated_as_printed`` truncates the geometric-mean series at
    ``s = w`` (the finite sum as conventionally printed); ``gap_geometric``
    is the full geometric mean N/w.  Both are reported because the
    truncation point looks inconsistent with the model, and neither reading
    is silently preferred.
    """
    p = m.w / m.address_space
    if m.w == m.address_space:
        return GapEstimate(1.0, 1.0)
    # sum_{s=1}^{M} s q^{s-1} p = (1 - q^M (1 + M p)) / p  with q = 1 - p
    log_q = math.log1p(-p)
    q_pow = math.exp(m.w * log_q)
    truncated = (1.0 - q_pow * (1.0 + m.w * p)) / p
    return GapEstimate(truncated, m.address_space / m.w)
