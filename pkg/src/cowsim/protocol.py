"""The classical side of the exchange: announcement, sifting, parameter
estimation with an abort rule, and distillation accounting.

Error correction and privacy amplification are rate accounting only: the
sifted key shrinks by the fraction h(Q) + I_Eve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .rates import (
    PnsModel,
    Protocol,
    ProtocolParams,
    binary_entropy,
    eve_information,
)
from .simulation import (
    DECOY,
    BIT1,
    DetectionRecord,
    MonitoringStats,
    OpticsConfig,
    QberEstimate,
    SymbolStream,
    UndefinedEstimateError,
    estimate_visibility,
    run_simulation,
    visibility_stderr,
)

__all__ = [
    "Announcement",
    "SiftedKeyPair",
    "AbortReason",
    "EstimationReport",
    "DistillationSummary",
    "ProtocolReport",
    "announce",
    "sift",
    "estimate_parameters",
    "distill_accounting",
    "run_protocol",
]


@dataclass(frozen=True)
class Announcement:
    """Bob's public message: which symbols produced data-line detections and
    when D_M2 fired. Arrival slots are withheld because the slot is the bit;
    monitoring times carry no bit information."""

    detected_indices: np.ndarray
    ambiguous_indices: np.ndarray
    m2_times: np.ndarray


@dataclass
class SiftedKeyPair:
    alice_bits: np.ndarray
    bob_bits: np.ndarray
    kept_indices: np.ndarray

    def __post_init__(self):
        if len(self.alice_bits) != len(self.bob_bits):
            raise ValueError("sifted keys must have equal length")
        if len(self.kept_indices) != len(self.alice_bits):
            raise ValueError("one kept index per sifted bit")


class AbortReason(Enum):
    NONE = "none"
    VISIBILITY_MISMATCH = "visibility-mismatch"
    NO_DECOY_STATISTICS = "no-decoy-statistics"
    NO_BIT_PAIR_STATISTICS = "no-bit-pair-statistics"


@dataclass(frozen=True)
class EstimationReport:
    v_10: float
    se_10: float
    v_d: float
    se_d: float
    q: float
    abort: bool
    reason: AbortReason
    i_eve: float
    i_eve_feasible: bool


@dataclass(frozen=True)
class DistillationSummary:
    n_sifted: int
    shrink_fraction: float
    n_secret: int


@dataclass(frozen=True)
class ProtocolReport:
    n_symbols: int
    n_detected: int
    n_ambiguous: int
    n_sifted: int
    sifted_rate: float
    qber: QberEstimate | None
    v_10: float
    v_d: float
    abort: bool
    abort_reason: AbortReason
    i_eve: float
    shrink_fraction: float
    n_secret: int
    secret_fraction: float
    empirical_r: float
    monitoring_rate_per_pulse: float
    attack_log: object | None = None


def announce(record: DetectionRecord) -> Announcement:
    """Project the detection record onto what Bob reveals publicly.

    A symbol whose both slots clicked (a dark count in the empty slot) is
    announced once and flagged ambiguous.
    """
    seq = record.d_b_seq
    detected = np.unique(seq)
    counts = np.bincount(seq, minlength=0)
    ambiguous = np.nonzero(counts > 1)[0]
    m2_times = 2 * record.d_m2_seq + record.d_m2_slot
    return Announcement(detected_indices=detected,
                        ambiguous_indices=ambiguous,
                        m2_times=m2_times)


def sift(stream: SymbolStream, announcement: Announcement,
         record: DetectionRecord) -> SiftedKeyPair:
    """Drop decoy detections and ambiguous symbols; pair Alice's sent bits
    with Bob's arrival-slot bits for the surviving indices."""
    keep_mask = np.zeros(stream.n_symbols, dtype=bool)
    keep_mask[announcement.detected_indices] = True
    keep_mask[announcement.ambiguous_indices] = False
    keep_mask &= stream.kinds != DECOY
    kept = np.nonzero(keep_mask)[0]

    bob_slot = np.zeros(stream.n_symbols, dtype=np.int8)
    bob_slot[record.d_b_seq] = record.d_b_slot
    alice_bits = (stream.kinds[kept] == BIT1).astype(np.int8)
    bob_bits = bob_slot[kept]
    return SiftedKeyPair(alice_bits=alice_bits, bob_bits=bob_bits,
                         kept_indices=kept)


def estimate_parameters(stats: MonitoringStats, q: float,
                        params: ProtocolParams,
                        tolerance_sigmas: float = 3.0,
                        protocol: Protocol = Protocol.COW,
                        model: PnsModel = PnsModel()) -> EstimationReport:
    """Visibility estimates per class with binomial standard errors, the abort
    rule, and Eve's information computed from the worst visibility.

    The protocol demands equal visibilities across the two classes; the test
    is |v_10 - v_d| against tolerance_sigmas combined standard errors. An
    undefined class aborts with its own reason code.
    """
    try:
        v_d = estimate_visibility(stats.n_m1_d, stats.n_m2_d)
    except UndefinedEstimateError:
        return EstimationReport(v_10=float("nan"), se_10=0.0, v_d=float("nan"),
                                se_d=0.0, q=q, abort=True,
                                reason=AbortReason.NO_DECOY_STATISTICS,
                                i_eve=1.0, i_eve_feasible=False)
    try:
        v_10 = estimate_visibility(stats.n_m1_10, stats.n_m2_10)
    except UndefinedEstimateError:
        return EstimationReport(v_10=float("nan"), se_10=0.0, v_d=v_d,
                                se_d=visibility_stderr(stats.n_m1_d, stats.n_m2_d),
                                q=q, abort=True,
                                reason=AbortReason.NO_BIT_PAIR_STATISTICS,
                                i_eve=1.0, i_eve_feasible=False)

    se_10 = visibility_stderr(stats.n_m1_10, stats.n_m2_10)
    se_d = visibility_stderr(stats.n_m1_d, stats.n_m2_d)
    combined = math.hypot(se_10, se_d)
    mismatch = abs(v_10 - v_d) > tolerance_sigmas * combined

    v_worst = min(v_10, v_d)
    eve = eve_information(replace(params, v=min(max(v_worst, 0.0), 1.0)),
                          protocol, model)
    return EstimationReport(v_10=v_10, se_10=se_10, v_d=v_d, se_d=se_d, q=q,
                            abort=mismatch,
                            reason=AbortReason.VISIBILITY_MISMATCH if mismatch
                            else AbortReason.NONE,
                            i_eve=eve.i_eve, i_eve_feasible=eve.feasible)


def distill_accounting(n_sifted: int, q: float, i_eve: float) -> DistillationSummary:
    """Secret bits left after removing the fraction h(Q) + I_Eve, never negative."""
    if n_sifted < 0 or not 0.0 <= q <= 1.0 or not 0.0 <= i_eve <= 1.0:
        raise ValueError("inputs out of range")
    shrink = binary_entropy(q) + i_eve
    n_secret = max(0, math.floor(n_sifted * (1.0 - shrink)))
    return DistillationSummary(n_sifted=n_sifted, shrink_fraction=shrink,
                               n_secret=n_secret)


def run_protocol(config: OpticsConfig, n_symbols: int, seed: int,
                 attack=None, tolerance_sigmas: float = 3.0,
                 protocol: Protocol = Protocol.COW,
                 model: PnsModel = PnsModel()) -> ProtocolReport:
    """End-to-end exchange: generate, optionally attack, simulate, announce,
    sift, estimate, distill. An abort is a result, not an exception."""
    sim = run_simulation(config, n_symbols, seed, attack)
    ann = announce(sim.record)
    pair = sift(sim.stream, ann, sim.record)
    n_sifted = len(pair.kept_indices)

    q = sim.summary.qber.value if sim.summary.qber is not None else 0.0
    report = estimate_parameters(sim.stats, q, config.params,
                                 tolerance_sigmas, protocol, model)
    if report.abort or n_sifted == 0:
        distill = DistillationSummary(n_sifted=n_sifted, shrink_fraction=1.0,
                                      n_secret=0)
    else:
        distill = distill_accounting(n_sifted, q, report.i_eve)

    return ProtocolReport(
        n_symbols=n_symbols,
        n_detected=len(ann.detected_indices),
        n_ambiguous=len(ann.ambiguous_indices),
        n_sifted=n_sifted,
        sifted_rate=n_sifted / n_symbols,
        qber=sim.summary.qber,
        v_10=report.v_10,
        v_d=report.v_d,
        abort=report.abort,
        abort_reason=report.reason,
        i_eve=report.i_eve,
        shrink_fraction=distill.shrink_fraction,
        n_secret=distill.n_secret,
        secret_fraction=distill.n_secret / n_symbols,
        empirical_r=sim.summary.empirical_r,
        monitoring_rate_per_pulse=sim.summary.monitoring_rate_per_pulse,
        attack_log=sim.attack_log,
    )
