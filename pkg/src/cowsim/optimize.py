"""Mean-photon-number optimization and loss-sweep curve generation.

The objective R_sk(mu) can develop kinks and flat-zero regions where the PNS
fraction or the required intercept-resend fraction saturates, so a coarse grid
scan locates the winning basin before a golden-section refinement polishes it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .rates import (
    KeyRateResult,
    PnsModel,
    Protocol,
    ProtocolParams,
    QberBreakdown,
    RateMode,
    UndefinedRateError,
    _rsk_arrays,
    eve_information,
    secret_key_rate,
)

__all__ = [
    "OptimizationSpec",
    "OptimizeResult",
    "CurvePoint",
    "RobustnessResult",
    "optimize_mu",
    "sweep_loss",
    "visibility_robustness",
]

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class OptimizationSpec:
    mu_min: float = 1e-4
    mu_max: float = 1.0
    grid_points: int = 2000
    refine_tolerance: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.mu_min < self.mu_max:
            raise ValueError("require 0 < mu_min < mu_max")
        if self.grid_points < 100:
            raise ValueError("grid_points must be >= 100")
        if not 0.0 < self.refine_tolerance < self.mu_max - self.mu_min:
            raise ValueError("refine_tolerance must be in (0, mu_max - mu_min)")


@dataclass(frozen=True)
class OptimizeResult:
    mu_star: float
    keyrate: KeyRateResult
    all_zero: bool = False


@dataclass(frozen=True)
class CurvePoint:
    protocol: Protocol
    v: float
    loss_db: float
    mu_star: float
    r_sk_star: float
    q_total: float
    i_eve: float


@dataclass(frozen=True)
class RobustnessResult:
    cow_ratio: float
    bb84_decoy_ratio: float
    cow_defined: bool
    bb84_defined: bool


def _objective(params: ProtocolParams, protocol: Protocol, model: PnsModel,
               mode: RateMode):
    def f(mu):
        _, clamped = _rsk_arrays(mu, params.t, params.t_b, params.eta,
                                 params.p_d, params.f, params.v,
                                 protocol, model, mode)
        return clamped
    return f


def optimize_mu(params: ProtocolParams, protocol: Protocol = Protocol.COW,
                model: PnsModel = PnsModel(),
                spec: OptimizationSpec = OptimizationSpec(),
                mode: RateMode = RateMode.LINEARIZED) -> OptimizeResult:
    """Maximize the clamped secret-key rate over mu in [mu_min, mu_max].

    Grid scan, then golden-section refinement inside the best grid cell's
    neighborhood. Ties break toward smaller mu (fewer multi-photon pulses).
    Deterministic for a fixed spec.
    """
    f = _objective(params, protocol, model, mode)
    grid = np.linspace(spec.mu_min, spec.mu_max, spec.grid_points)
    vals = f(grid)
    if not np.any(vals > 0.0):
        at_min = replace(params, mu=spec.mu_min)
        try:
            result = secret_key_rate(at_min, protocol, model, mode)
        except UndefinedRateError:
            # degenerate channel: report zero rates alongside the flag
            result = KeyRateResult(mu=spec.mu_min, r_s=0.0,
                                   qber=QberBreakdown(0.0, 0.0, 0.0),
                                   eve=eve_information(at_min, protocol, model),
                                   r_sk_raw=0.0, r_sk=0.0)
        return OptimizeResult(mu_star=spec.mu_min, keyrate=result, all_zero=True)

    i = int(np.argmax(vals))  # first max: smallest-mu tie break on the grid
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, len(grid) - 1)]

    # golden-section maximization; >= keeps the left interval on ties
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc = float(f(c))
    fd = float(f(d))
    best_mu, best_val = float(grid[i]), float(vals[i])
    while b - a > spec.refine_tolerance:
        for mu_cand, val_cand in ((c, fc), (d, fd)):
            if val_cand > best_val or (val_cand == best_val and mu_cand < best_mu):
                best_mu, best_val = float(mu_cand), float(val_cand)
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = float(f(c))
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = float(f(d))
    mid = 0.5 * (a + b)
    fm = float(f(mid))
    if fm > best_val or (fm == best_val and mid < best_mu):
        best_mu, best_val = mid, fm

    result = secret_key_rate(replace(params, mu=best_mu), protocol, model, mode)
    return OptimizeResult(mu_star=best_mu, keyrate=result, all_zero=False)


def sweep_loss(params_template: ProtocolParams, protocols: Sequence[Protocol],
               loss_grid: Sequence[float], model: PnsModel = PnsModel(),
               spec: OptimizationSpec = OptimizationSpec(),
               visibilities: Sequence[float] | None = None,
               mode: RateMode = RateMode.LINEARIZED) -> list[CurvePoint]:
    """One optimized point per (protocol, visibility, loss).

    Rows are emitted protocol-major, then visibility in the given order, then
    loss ascending; points are independent so the ordering is reproducible.
    """
    losses = list(loss_grid)
    if not losses:
        raise ValueError("loss_grid must be nonempty")
    if any(b <= a for a, b in zip(losses, losses[1:])):
        raise ValueError("loss_grid must be strictly ascending")
    if visibilities is None:
        visibilities = [params_template.v]
    points = []
    for protocol in protocols:
        for v in visibilities:
            for loss in losses:
                params = replace(params_template, loss_db=loss, v=v)
                opt = optimize_mu(params, protocol, model, spec, mode)
                points.append(CurvePoint(
                    protocol=protocol, v=v, loss_db=loss,
                    mu_star=opt.mu_star, r_sk_star=opt.keyrate.r_sk,
                    q_total=opt.keyrate.qber.q_total,
                    i_eve=opt.keyrate.eve.i_eve))
    return points


def visibility_robustness(params_template: ProtocolParams, loss_db: float,
                          model: PnsModel = PnsModel(),
                          spec: OptimizationSpec = OptimizationSpec(),
                          mode: RateMode = RateMode.LINEARIZED,
                          v_low: float = 0.8,
                          v_high: float = 1.0) -> RobustnessResult:
    """Ratio R_sk*(v_low) / R_sk*(v_high) for the time-bin protocol and decoy
    BB84, by default the 0.8-versus-1 comparison.

    Each numerator and denominator is separately mu-optimized. A vanishing
    denominator flags the ratio undefined (NaN) rather than raising.
    """
    ratios = {}
    defined = {}
    for protocol in (Protocol.COW, Protocol.BB84_DECOY):
        rates = {}
        for v in (v_low, v_high):
            params = replace(params_template, loss_db=loss_db, v=v)
            rates[v] = optimize_mu(params, protocol, model, spec, mode).keyrate.r_sk
        if rates[v_high] > 0.0:
            ratios[protocol] = rates[v_low] / rates[v_high]
            defined[protocol] = True
        else:
            ratios[protocol] = float("nan")
            defined[protocol] = False
    return RobustnessResult(cow_ratio=ratios[Protocol.COW],
                            bb84_decoy_ratio=ratios[Protocol.BB84_DECOY],
                            cow_defined=defined[Protocol.COW],
                            bb84_defined=defined[Protocol.BB84_DECOY])
