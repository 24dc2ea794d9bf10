"""Eavesdropper transformations on the pulse stream and their predicted signatures.

The intercept-resend attack measures arrival times on symbol-aligned two-pulse
windows downstream of the lossy channel (per-pulse intensity mu t there) and
resends over a lossless line. Every resent pulse carries the window's own
uniformly random phase, which is what breaks coherence across window
boundaries. Resend amplitudes are scaled by 1/P(at least one detection per
non-empty pair) so the expected intensity reaching Bob matches the unattacked
channel; a one-detection window concentrates its whole restored budget in the
detected pulse. With that bookkeeping the count-based decoy-class visibility
converges to 1 - (1-r) p_ir xi exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .rates import PnsKind, PnsModel, Protocol, ProtocolParams, pns_fraction, xi
from .simulation import DECOY, SymbolStream

__all__ = [
    "AttackKind",
    "AttackConfig",
    "AttackLog",
    "apply_intercept_resend",
    "predicted_signature",
]


class AttackKind(Enum):
    NONE = "none"
    INTERCEPT_RESEND = "intercept-resend"
    PNS_COUNTING = "pns-counting"

    @classmethod
    def parse(cls, name: str) -> "AttackKind":
        for k in cls:
            if k.value == name:
                return k
        raise ValueError(f"unknown attack {name!r} (use none|intercept-resend|pns-counting)")


@dataclass(frozen=True)
class AttackConfig:
    """PNS_COUNTING is accounting-only: it contributes the fraction r to Eve's
    information without touching the stream."""

    kind: AttackKind = AttackKind.NONE
    p_ir: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.p_ir <= 1.0:
            raise ValueError("p_ir must be in [0, 1]")

    def is_active(self) -> bool:
        return self.kind is AttackKind.INTERCEPT_RESEND and self.p_ir > 0.0


@dataclass
class AttackLog:
    attacked_windows: np.ndarray
    eve_conclusive: int
    eve_known_bits: int
    n_windows: int

    def __post_init__(self):
        if self.eve_conclusive > len(self.attacked_windows):
            raise ValueError("conclusive count cannot exceed attacked count")


def apply_intercept_resend(stream: SymbolStream, config: AttackConfig,
                           params: ProtocolParams,
                           rng: np.random.Generator):
    """Attack a fraction p_ir of the symbol windows, returning the modified
    stream and a log of what Eve learned.

    Per attacked window: Eve detects each non-empty pulse with probability
    1 - exp(-mu t). Two detections identify the decoy, resent phase-coherently
    within the window; one detection resends the maximum-posterior symbol for
    that click position; no detection resends vacuum.
    """
    n = stream.n_symbols
    empty_log = AttackLog(attacked_windows=np.empty(0, dtype=np.int64),
                          eve_conclusive=0, eve_known_bits=0, n_windows=n)
    if not config.is_active():
        return stream, empty_log

    mu_t = stream.mu * params.t
    p_det = -math.expm1(-mu_t)
    if p_det <= 0.0:
        return stream, empty_log
    # restores Bob's expected intensity per window across Eve's outcome mix
    boost = 1.0 / (p_det * (2.0 - p_det))

    # fixed draw layout: (attack mask, window phase, two pulse detections) per window
    attacked = rng.random(n) < config.p_ir
    theta = rng.random(n) * (2.0 * math.pi)
    u = rng.random((n, 2))

    first = stream.amplitudes[0::2].copy()
    second = stream.amplitudes[1::2].copy()
    det_first = attacked & (first > 0.0) & (u[:, 0] < p_det)
    det_second = attacked & (second > 0.0) & (u[:, 1] < p_det)

    # MAP guess for a single click: bit at that position unless decoys dominate
    bit_posterior = (1.0 - params.f) / 2.0
    decoy_posterior = params.f * (1.0 - p_det)
    guess_bit = bit_posterior >= decoy_posterior

    a_pair = math.sqrt(boost * stream.mu)
    a_single = math.sqrt(2.0 * boost * stream.mu)

    both = det_first & det_second
    only_first = det_first & ~det_second
    only_second = det_second & ~det_first
    none = attacked & ~det_first & ~det_second

    new_first = first
    new_second = second
    new_first[both] = a_pair
    new_second[both] = a_pair
    if guess_bit:
        new_first[only_first] = a_single
        new_second[only_first] = 0.0
        new_first[only_second] = 0.0
        new_second[only_second] = a_single
    else:
        single = only_first | only_second
        new_first[single] = a_pair
        new_second[single] = a_pair
    new_first[none] = 0.0
    new_second[none] = 0.0

    amplitudes = stream.amplitudes.copy()
    amplitudes[0::2] = new_first
    amplitudes[1::2] = new_second
    phases = stream.phases.copy()
    resent = attacked & (det_first | det_second)
    phases[0::2][resent] = theta[resent]
    phases[1::2][resent] = theta[resent]

    is_bit = stream.kinds != DECOY
    known_bits = int(np.count_nonzero(is_bit & (det_first | det_second)))
    conclusive = int(np.count_nonzero(det_first | det_second))
    log = AttackLog(attacked_windows=np.nonzero(attacked)[0],
                    eve_conclusive=conclusive,
                    eve_known_bits=known_bits,
                    n_windows=n)
    out = SymbolStream(kinds=stream.kinds, mu=stream.mu,
                       amplitudes=amplitudes, phases=phases)
    return out, log


def predicted_signature(config: AttackConfig, params: ProtocolParams,
                        protocol: Protocol = Protocol.COW,
                        model: PnsModel = PnsModel()) -> tuple[float, float]:
    """Closed-form (expected visibility, expected Eve information) for an
    attack configuration; the algebraic inverse of the information estimate
    performed from an observed visibility."""
    if protocol is Protocol.BB84_PLAIN:
        r = pns_fraction(params, PnsModel(PnsKind.ERROR_FREE, model.clamp))
    else:
        r = pns_fraction(params, model)
    if config.kind is AttackKind.INTERCEPT_RESEND and config.p_ir > 0.0:
        if protocol is Protocol.COW:
            info = (1.0 - r) * config.p_ir
            v = 1.0 - info * xi(params.mu, params.t)
        else:
            info = (1.0 - r) * config.p_ir / 2.0
            v = 1.0 - info
        return v, r + info
    return 1.0, r
