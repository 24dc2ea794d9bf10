"""Command-line front end.

Subcommands: keyrate, curve, optimize, simulate, experiment. Output is CSV
preceded by a metadata block of '#' lines carrying the fully resolved
configuration; reruns with identical configuration and seed are byte
identical. Exit codes: 0 success, 1 configuration error, 2 protocol abort.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .attacks import predicted_signature
from .config import EXPERIMENT_PRESET, ConfigError, RunConfig
from .experiment import DETECTORS, run_experiment
from .optimize import optimize_mu, sweep_loss
from .protocol import run_protocol
from .rates import UndefinedRateError, eve_information, secret_key_rate

__all__ = ["main"]


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.9g}"
    return str(x)


def _emit(out_path, lines):
    text = "\n".join(lines) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _metadata(cfg: RunConfig, command: str) -> list[str]:
    return [f"# cowsim {__version__}", f"# command = {command}"] + cfg.metadata_lines()


def _build_config(args, preset: dict | None = None) -> RunConfig:
    cfg = RunConfig()
    if preset:
        cfg.apply_preset(preset)
    if args.config:
        cfg.load_file(args.config)
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, val = item.partition("=")
        cfg.set(key.strip(), val.strip())
    if getattr(args, "seed", None) is not None:
        cfg.set("seed", args.seed, raw=False)
    if getattr(args, "protocol", None):
        cfg.set("protocol", args.protocol)
    if getattr(args, "pns_model", None):
        cfg.set("pns_model", args.pns_model)
    return cfg


def cmd_keyrate(cfg: RunConfig, out_path) -> int:
    params = cfg.params()
    try:
        res = secret_key_rate(params, cfg.protocol(), cfg.pns_model(),
                              cfg.rate_mode())
        row = (cfg["protocol"], params.v, params.loss_db, res.mu, res.r_s,
               res.qber.q_opt, res.qber.q_det, res.qber.q_total,
               res.eve.r, res.eve.p_ir, res.eve.i_ir, res.eve.i_eve,
               res.eve.feasible, res.r_sk_raw, res.r_sk)
    except UndefinedRateError:
        # dead source and dark-free detectors: every rate is zero
        eve = eve_information(params, cfg.protocol(), cfg.pns_model())
        row = (cfg["protocol"], params.v, params.loss_db, params.mu, 0.0,
               0.0, 0.0, 0.0, eve.r, eve.p_ir, eve.i_ir, eve.i_eve,
               eve.feasible, 0.0, 0.0)
    lines = _metadata(cfg, "keyrate")
    lines.append("protocol,v,loss_db,mu,r_s,q_opt,q_det,q_total,"
                 "r,p_ir,i_ir,i_eve,feasible,r_sk_raw,r_sk")
    lines.append(",".join(_fmt(x) for x in row))
    _emit(out_path, lines)
    return 0


def cmd_curve(cfg: RunConfig, out_path) -> int:
    losses = cfg.float_list("loss_grid")
    if not losses:
        raise ConfigError("loss_grid is empty")
    points = sweep_loss(cfg.params(), cfg.protocol_list(), losses,
                        cfg.pns_model(), cfg.optimization_spec(),
                        visibilities=cfg.float_list("visibilities"),
                        mode=cfg.rate_mode())
    lines = _metadata(cfg, "curve")
    lines.append("protocol,V,loss_db,mu_star,r_sk")
    for p in points:
        lines.append(",".join(_fmt(x) for x in (
            p.protocol.value, p.v, p.loss_db, p.mu_star, p.r_sk_star)))
    _emit(out_path, lines)
    return 0


def cmd_optimize(cfg: RunConfig, out_path) -> int:
    opt = optimize_mu(cfg.params(), cfg.protocol(), cfg.pns_model(),
                      cfg.optimization_spec(), cfg.rate_mode())
    lines = _metadata(cfg, "optimize")
    lines.append("protocol,v,loss_db,mu_star,r_s,q_total,i_eve,r_sk_raw,r_sk,all_zero")
    k = opt.keyrate
    lines.append(",".join(_fmt(x) for x in (
        cfg["protocol"], cfg["v"], cfg["loss_db"], opt.mu_star, k.r_s,
        k.qber.q_total, k.eve.i_eve, k.r_sk_raw, k.r_sk, opt.all_zero)))
    _emit(out_path, lines)
    return 0


def cmd_simulate(cfg: RunConfig, out_path, dump_events=None) -> int:
    attack = cfg.attack_config()
    report = run_protocol(cfg.optics(), cfg["n_symbols"], cfg["seed"],
                          attack=attack,
                          tolerance_sigmas=cfg["tolerance_sigmas"],
                          protocol=cfg.protocol(), model=cfg.pns_model())
    lines = _metadata(cfg, "simulate")
    pred_v, pred_i = predicted_signature(attack, cfg.params(), cfg.protocol(),
                                         cfg.pns_model())
    q = report.qber
    lines.append("n_symbols,n_detected,n_ambiguous,n_sifted,sifted_rate,"
                 "qber,qber_lo,qber_hi,v_10,v_d,abort,abort_reason,i_eve,"
                 "shrink_fraction,n_secret,secret_fraction,empirical_r,"
                 "monitoring_rate,predicted_v,predicted_i_eve")
    lines.append(",".join(_fmt(x) for x in (
        report.n_symbols, report.n_detected, report.n_ambiguous,
        report.n_sifted, report.sifted_rate,
        q.value if q else float("nan"),
        q.lo if q else float("nan"),
        q.hi if q else float("nan"),
        report.v_10, report.v_d, report.abort, report.abort_reason.value,
        report.i_eve, report.shrink_fraction, report.n_secret,
        report.secret_fraction, report.empirical_r,
        report.monitoring_rate_per_pulse, pred_v, pred_i)))
    _emit(out_path, lines)
    if dump_events:
        from .simulation import run_simulation
        sim = run_simulation(cfg.optics(), cfg["n_symbols"], cfg["seed"], attack)
        ev = _metadata(cfg, "simulate-events")
        ev.append("detector,sequence_index,slot_index")
        rec = sim.record
        for name, seqs, slots in (("D_B", rec.d_b_seq, rec.d_b_slot),
                                  ("D_M1", rec.d_m1_seq, rec.d_m1_slot),
                                  ("D_M2", rec.d_m2_seq, rec.d_m2_slot)):
            for s, sl in zip(seqs, slots):
                ev.append(f"{name},{s},{sl}")
        _emit(dump_events, ev)
    return 2 if report.abort else 0


def cmd_experiment(cfg: RunConfig, out_path) -> int:
    cfg.resolve_experiment_visibility()
    result = run_experiment(cfg.experiment(), cfg["seed"])
    lines = _metadata(cfg, "experiment")
    lines.append(f"# raw_rate_hz = {_fmt(result.raw_rate_hz)}")
    for name in DETECTORS:
        lines.append(f"# rate_hz_{name} = {_fmt(result.rate_hz[name])}")
    q = result.qber
    lines.append(f"# data_qber = {_fmt(q.value if q else float('nan'))}")
    lines.append(f"# v_10 = {_fmt(result.v_10)}")
    lines.append(f"# v_d = {_fmt(result.v_d)}")
    lines.append("slot_time_ns,detector,count")
    for name in DETECTORS:
        for slot_time, count in zip(result.slot_times_ns, result.counts[name]):
            lines.append(f"{_fmt(float(slot_time))},{name},{int(count)}")
    _emit(out_path, lines)
    return 0


def _add_common(sub):
    sub.add_argument("--config", help="flat key = value configuration file")
    sub.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override one configuration key (repeatable)")
    sub.add_argument("--seed", type=int, help="random seed")
    sub.add_argument("--out", help="output path (default: stdout)")
    sub.add_argument("--protocol", choices=["cow", "bb84-decoy", "bb84"])
    sub.add_argument("--pns-model", dest="pns_model",
                     choices=["printed", "alt", "error-free"])


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cowsim",
        description="Simulator and key-rate analysis for one-way time-bin QKD")
    parser.add_argument("--version", action="version", version=f"cowsim {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)
    for name in ("keyrate", "curve", "optimize", "simulate", "experiment"):
        sub = subs.add_parser(name)
        _add_common(sub)
        if name == "simulate":
            sub.add_argument("--dump-events", dest="dump_events",
                             help="also write per-click events to this path")

    args = parser.parse_args(argv)
    try:
        preset = EXPERIMENT_PRESET if args.command == "experiment" else None
        cfg = _build_config(args, preset)
        if args.command == "keyrate":
            return cmd_keyrate(cfg, args.out)
        if args.command == "curve":
            return cmd_curve(cfg, args.out)
        if args.command == "optimize":
            return cmd_optimize(cfg, args.out)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out, args.dump_events)
        return cmd_experiment(cfg, args.out)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"cowsim: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
