"""Monte Carlo simulation of the pulse train through channel, tap beam-splitter,
data detector and monitoring delay interferometer.

Time is discrete at the pulse period: a logical symbol occupies two consecutive
slots, the interferometer adds one trailing slot. Randomness comes from
counter-based Philox streams keyed by (seed, stage), so every draw layout is a
fixed function of the stream length and results do not depend on how the work
is chunked. There is no intra-slot jitter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rates import ProtocolParams

__all__ = [
    "SymbolKind",
    "SymbolStream",
    "OpticsConfig",
    "Propagated",
    "DetectionRecord",
    "MonitoringStats",
    "QberEstimate",
    "SimSummary",
    "SimResult",
    "UndefinedEstimateError",
    "generate_symbols",
    "propagate",
    "interfere",
    "interferometer_outputs",
    "detect",
    "run_simulation",
    "simulate_stream",
    "estimate_visibility",
    "estimate_qber",
]

BIT0, BIT1, DECOY = 0, 1, 2

# Philox stage ids; each pipeline stage owns an independent substream.
_STAGE_SYMBOLS = 1
_STAGE_ATTACK = 2
_STAGE_DATA = 3
_STAGE_M1 = 4
_STAGE_M2 = 5


class SymbolKind:
    """Integer codes for Alice's logical symbols."""
    BIT0 = BIT0
    BIT1 = BIT1
    DECOY = DECOY


class UndefinedEstimateError(ValueError):
    """An estimator denominator is empty."""


def stage_rng(seed: int, stage: int) -> np.random.Generator:
    """Counter-based substream: independent per (seed, stage), chunk-invariant."""
    bitgen = np.random.Philox(key=np.uint64(seed), counter=[0, 0, 0, np.uint64(stage)])
    return np.random.Generator(bitgen)


@dataclass
class SymbolStream:
    """Alice's emitted pulse train.

    kinds holds the logical truth (one entry per symbol); amplitudes and phases
    describe the optical field per pulse, two pulses per symbol. An attack may
    rewrite amplitudes and phases while kinds keeps what Alice actually sent.
    """

    kinds: np.ndarray
    mu: float
    amplitudes: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        if len(self.amplitudes) != 2 * len(self.kinds):
            raise ValueError("pulse count must be twice the symbol count")
        if len(self.phases) != len(self.amplitudes):
            raise ValueError("phases must be present for every pulse")

    @property
    def n_symbols(self) -> int:
        return len(self.kinds)


@dataclass(frozen=True)
class OpticsConfig:
    """Bob-side optics and detector behavior.

    The default insertion loss of 0.5 models the monitoring interferometer
    returning half of the light toward its input, which reproduces the average
    monitoring detection rate mu t (1-t_B) eta / 2 per pulse. Set it to 0 for
    a lossless physics check. v_setup multiplies only the interference cross
    term; background is an extra constant per-slot click probability.
    """

    params: ProtocolParams
    insertion_loss: float = 0.5
    gate_ns: float = 25.0
    deadtime_ns: float = 0.0
    background: float = 0.0
    v_setup: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.insertion_loss < 1.0:
            raise ValueError("insertion_loss must be in [0, 1)")
        if self.deadtime_ns < 0.0 or self.gate_ns <= 0.0:
            raise ValueError("gate_ns must be > 0 and deadtime_ns >= 0")
        if not 0.0 <= self.background < 1.0:
            raise ValueError("background must be in [0, 1)")

    @property
    def visibility(self) -> float:
        return self.params.v if self.v_setup is None else self.v_setup


@dataclass(frozen=True)
class Propagated:
    data_intensity: np.ndarray
    monitor_amplitude: np.ndarray
    phases: np.ndarray


@dataclass
class DetectionRecord:
    """Per-detector click lists as (sequence_index, slot_index) pairs.

    Data-line entries index the two pulse slots of a symbol. Monitoring
    entries index interferometer output slots, of which there is one more
    than pulses; the trailing slot maps to (n_symbols, 0).
    """

    d_b_seq: np.ndarray
    d_b_slot: np.ndarray
    d_m1_seq: np.ndarray
    d_m1_slot: np.ndarray
    d_m2_seq: np.ndarray
    d_m2_slot: np.ndarray
    slot_class_totals: dict = field(default_factory=dict)


@dataclass(frozen=True)
class MonitoringStats:
    """Click counts at slots where, for ideal coherence, only D_M1 may fire."""

    n_m1_10: int
    n_m2_10: int
    n_m1_d: int
    n_m2_d: int


@dataclass(frozen=True)
class QberEstimate:
    value: float
    lo: float
    hi: float
    n_errors: int
    n_sifted: int


@dataclass(frozen=True)
class SimSummary:
    n_symbols: int
    n_bits: int
    empirical_r: float
    monitoring_rate_per_pulse: float
    v_10: float
    v_d: float
    v_10_defined: bool
    v_d_defined: bool
    qber: QberEstimate | None
    double_clicks: int


@dataclass
class SimResult:
    record: DetectionRecord
    stats: MonitoringStats
    summary: SimSummary
    stream: SymbolStream
    attack_log: object | None = None


def generate_symbols(n: int, f: float, mu: float, seed: int) -> SymbolStream:
    """Draw n i.i.d. symbols: bit 0 and bit 1 with probability (1-f)/2 each,
    decoy with probability f. Deterministic under the seed."""
    if n <= 0:
        raise ValueError("n must be positive")
    if not 0.0 <= f < 1.0:
        raise ValueError("f must be in [0, 1)")
    u = stage_rng(seed, _STAGE_SYMBOLS).random(n)
    kinds = np.full(n, DECOY, dtype=np.int8)
    kinds[u < (1.0 - f) / 2.0] = BIT0
    kinds[(u >= (1.0 - f) / 2.0) & (u < 1.0 - f)] = BIT1
    amplitudes = np.zeros(2 * n)
    a = math.sqrt(mu)
    amplitudes[0::2][kinds != BIT1] = a
    amplitudes[1::2][kinds != BIT0] = a
    return SymbolStream(kinds=kinds, mu=mu, amplitudes=amplitudes,
                        phases=np.zeros(2 * n))


def propagate(stream: SymbolStream, params: ProtocolParams) -> Propagated:
    """Attenuate through the channel and split at Bob's tap beam-splitter."""
    intensity = stream.amplitudes ** 2 * params.t
    return Propagated(data_intensity=intensity * params.t_b,
                      monitor_amplitude=np.sqrt(intensity * (1.0 - params.t_b)),
                      phases=stream.phases)


def interfere(a_j: float, a_j1: float, phase: float, v_setup: float,
              insertion_loss: float) -> tuple[float, float]:
    """Mean photon numbers at (D_M1, D_M2) for the slot where pulses j and j+1
    overlap after the one-slot delay. phase is their relative phase; v_setup
    scales only the cross term."""
    if a_j < 0.0 or a_j1 < 0.0:
        raise ValueError("amplitudes must be >= 0")
    scale = (1.0 - insertion_loss) / 4.0
    base = a_j * a_j + a_j1 * a_j1
    cross = 2.0 * v_setup * a_j * a_j1 * math.cos(phase)
    return scale * (base + cross), scale * (base - cross)


def interferometer_outputs(amplitudes: np.ndarray, phases: np.ndarray,
                           v_setup: float, insertion_loss: float):
    """Per-slot intensities at both output ports for a whole pulse train.

    Output slot j mixes the delayed pulse j-1 with pulse j; slots 0 and
    n_pulses carry the unpaired edge halves. Summed over slots and ports the
    output equals (1 - insertion_loss) times the input energy exactly.
    """
    left = np.concatenate(([0.0], amplitudes))
    right = np.concatenate((amplitudes, [0.0]))
    dphi = np.concatenate(([0.0], phases)) - np.concatenate((phases, [0.0]))
    base = left * left + right * right
    cross = 2.0 * v_setup * left * right * np.cos(dphi)
    scale = (1.0 - insertion_loss) / 4.0
    return scale * (base + cross), scale * (base - cross)


def detect(intensity: np.ndarray, eta: float, p_d: float,
           rng: np.random.Generator, background: float = 0.0) -> np.ndarray:
    """Threshold detector: click probability 1 - (1-p_d)(1-bg) exp(-eta I)."""
    intensity = np.asarray(intensity, dtype=float)
    p = 1.0 - (1.0 - p_d) * (1.0 - background) * np.exp(-eta * intensity)
    return rng.random(intensity.shape) < p


def _suppress_deadtime(times: np.ndarray, deadtime: float) -> np.ndarray:
    """Non-paralyzable deadtime: keep a click only if it is at least deadtime
    after the previously kept one. times must be ascending."""
    keep = np.zeros(len(times), dtype=bool)
    last = -math.inf
    for i, t in enumerate(times):
        if t - last >= deadtime:
            keep[i] = True
            last = t
    return keep


def _wilson(k: int, n: int, z: float = 1.96) -> tuple[float, float]:
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z / denom * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n))
    return center - half, center + half


def estimate_visibility(n_m1: int, n_m2: int) -> float:
    """Count-based visibility (n1 - n2) / (n1 + n2)."""
    total = n_m1 + n_m2
    if total <= 0:
        raise UndefinedEstimateError("no monitoring clicks in this class")
    return (n_m1 - n_m2) / total


def visibility_stderr(n_m1: int, n_m2: int) -> float:
    """Binomial standard error of the count-based visibility estimate."""
    total = n_m1 + n_m2
    p = n_m1 / total
    return 2.0 * math.sqrt(p * (1.0 - p) / total)


def estimate_qber(record: DetectionRecord, stream: SymbolStream) -> QberEstimate:
    """Fraction of wrong-slot clicks among single-click bit symbols.

    Symbols with clicks in both slots are ambiguous and excluded, matching the
    sifting policy. Clicks are already window-aligned because the model is
    slot-discrete. The interval is a Wilson 95% interval.
    """
    n = stream.n_symbols
    c0 = np.zeros(n, dtype=bool)
    c1 = np.zeros(n, dtype=bool)
    c0[record.d_b_seq[record.d_b_slot == 0]] = True
    c1[record.d_b_seq[record.d_b_slot == 1]] = True
    is_bit = stream.kinds != DECOY
    single = is_bit & (c0 ^ c1)
    n_sifted = int(np.count_nonzero(single))
    if n_sifted == 0:
        raise UndefinedEstimateError("no sifted detections")
    # the arrival slot is the bit: a click in the empty slot is an error
    wrong = single & ((c1 & (stream.kinds == BIT0)) | (c0 & (stream.kinds == BIT1)))
    n_err = int(np.count_nonzero(wrong))
    lo, hi = _wilson(n_err, n_sifted)
    return QberEstimate(value=n_err / n_sifted, lo=lo, hi=hi,
                        n_errors=n_err, n_sifted=n_sifted)


def _monitoring_tally(kinds: np.ndarray, m1_clicks: np.ndarray,
                      m2_clicks: np.ndarray) -> MonitoringStats:
    decoy_slots = 2 * np.nonzero(kinds == DECOY)[0] + 1
    pair_10 = np.nonzero((kinds[:-1] == BIT1) & (kinds[1:] == BIT0))[0]
    slots_10 = 2 * pair_10 + 2
    return MonitoringStats(
        n_m1_10=int(m1_clicks[slots_10].sum()),
        n_m2_10=int(m2_clicks[slots_10].sum()),
        n_m1_d=int(m1_clicks[decoy_slots].sum()),
        n_m2_d=int(m2_clicks[decoy_slots].sum()),
    )


def simulate_stream(config: OpticsConfig, stream: SymbolStream, seed: int) -> SimResult:
    """Run the optical chain for an existing pulse train.

    Deterministic for a fixed (seed, n_symbols); the draw layout per stage is
    one array shaped by the train length, so the result is independent of any
    internal chunking or worker count.
    """
    params = config.params
    n = stream.n_symbols
    prop = propagate(stream, params)
    i_m1, i_m2 = interferometer_outputs(prop.monitor_amplitude, prop.phases,
                                        config.visibility, config.insertion_loss)

    clicks_b = detect(prop.data_intensity, params.eta, params.p_d,
                      stage_rng(seed, _STAGE_DATA), config.background)
    clicks_m1 = detect(i_m1, params.eta, params.p_d,
                       stage_rng(seed, _STAGE_M1), config.background)
    clicks_m2 = detect(i_m2, params.eta, params.p_d,
                       stage_rng(seed, _STAGE_M2), config.background)

    if config.deadtime_ns > 0.0:
        tau = params.pulse_period_ns
        for clicks in (clicks_b, clicks_m1, clicks_m2):
            idx = np.nonzero(clicks)[0]
            keep = _suppress_deadtime(idx * tau, config.deadtime_ns)
            clicks[idx[~keep]] = False

    stats = _monitoring_tally(stream.kinds, clicks_m1, clicks_m2)

    gb = np.nonzero(clicks_b)[0]
    g1 = np.nonzero(clicks_m1)[0]
    g2 = np.nonzero(clicks_m2)[0]
    is_bit = stream.kinds != DECOY
    signal_slot = np.where(stream.kinds == BIT1, 1, 0)
    c0 = clicks_b[0::2]
    c1 = clicks_b[1::2]
    signal_clicked = np.where(signal_slot == 1, c1, c0)
    n_bits = int(np.count_nonzero(is_bit))
    record = DetectionRecord(
        d_b_seq=gb // 2, d_b_slot=gb % 2,
        d_m1_seq=g1 // 2, d_m1_slot=g1 % 2,
        d_m2_seq=g2 // 2, d_m2_slot=g2 % 2,
        slot_class_totals={
            "data_signal": int(np.count_nonzero(signal_clicked & is_bit)),
            "data_wrong": int(np.count_nonzero(
                np.where(signal_slot == 1, c0, c1) & is_bit)),
            "data_decoy": int(np.count_nonzero((c0 | c1) & ~is_bit)),
            "m1_total": int(len(g1)),
            "m2_total": int(len(g2)),
        },
    )

    empirical_r = record.slot_class_totals["data_signal"] / n_bits if n_bits else 0.0
    # per non-empty pulse: with insertion loss L this converges to
    # (1-L) mu t (1-t_B) eta, i.e. half the lossless rate at the default L=0.5
    n_nonempty = int(np.count_nonzero(stream.amplitudes > 0.0))
    monitoring_rate = (len(g1) + len(g2)) / n_nonempty if n_nonempty else 0.0
    try:
        v_10 = estimate_visibility(stats.n_m1_10, stats.n_m2_10)
        v_10_defined = True
    except UndefinedEstimateError:
        v_10, v_10_defined = float("nan"), False
    try:
        v_d = estimate_visibility(stats.n_m1_d, stats.n_m2_d)
        v_d_defined = True
    except UndefinedEstimateError:
        v_d, v_d_defined = float("nan"), False
    try:
        qber_est = estimate_qber(record, stream)
    except UndefinedEstimateError:
        qber_est = None

    summary = SimSummary(
        n_symbols=n, n_bits=n_bits, empirical_r=empirical_r,
        monitoring_rate_per_pulse=monitoring_rate,
        v_10=v_10, v_d=v_d, v_10_defined=v_10_defined, v_d_defined=v_d_defined,
        qber=qber_est,
        double_clicks=int(np.count_nonzero(c0 & c1 & is_bit)),
    )
    return SimResult(record=record, stats=stats, summary=summary, stream=stream)


def run_simulation(config: OpticsConfig, n_symbols: int, seed: int,
                   attack=None) -> SimResult:
    """Generate a fresh symbol stream, optionally attack it, and simulate."""
    stream = generate_symbols(n_symbols, config.params.f, config.params.mu, seed)
    attack_log = None
    if attack is not None and getattr(attack, "is_active", lambda: False)():
        from .attacks import apply_intercept_resend
        stream, attack_log = apply_intercept_resend(
            stream, attack, config.params, stage_rng(seed, _STAGE_ATTACK))
    result = simulate_stream(config, stream, seed)
    result.attack_log = attack_log
    return result
