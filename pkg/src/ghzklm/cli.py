"""Command-line frontend: ``ghzklm {design,evolve,sweep,noise,mismatch,verify}``.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical or
design failure (including any failed verify criterion).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .acceptance import AcceptanceContext, run_all, select
from .config import ConfigError, RunConfig, load_config
from .design import DesignError, Direction, design_pulse
from .dynamics import NumericalError, effective_evolve, lindblad_evolve, schrodinger_evolve
from .model import ControlFields
from .robustness import (
    Scenario,
    mismatch_scan,
    noise_trials,
    sweep,
    write_mismatch_csv,
    write_noise_csv,
)

EXIT_OK, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2
PULSE_COLUMNS = ("t", "omega1_prime", "omega2_prime", "omega3_prime")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(x) -> str:
    return f"{float(x):.12e}"


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_sidecar(csv_path: Path, cfg: RunConfig) -> None:
    """``<file>.meta.json`` next to every emitted CSV."""
    write_json(Path(f"{csv_path}.meta.json"), {
        "file": csv_path.name,
        "config_hash": cfg.config_hash,
        "seed": cfg.seed,
        "assumptions": cfg.assumptions(),
        "version": __version__,
    })


def write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_pulses(path: Path, fields: ControlFields) -> None:
    write_rows(path, PULSE_COLUMNS,
               ([_fmt(t)] + [_fmt(v) for v in w] for t, w in zip(fields.t, fields.omega_prime.T)))


def read_pulses(path: Path) -> ControlFields:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != PULSE_COLUMNS:
            raise ConfigError(f"{path}: expected header {','.join(PULSE_COLUMNS)}")
        data = np.array([[float(x) for x in row] for row in reader])
    return ControlFields(data[:, 0], data[:, 1:].T)


def _fields(cfg: RunConfig) -> ControlFields:
    if cfg.pulses is not None:
        if not cfg.pulses.is_file():
            raise ConfigError(f"pulse file not found: {cfg.pulses}")
        return read_pulses(cfg.pulses)
    return design_pulse(cfg.direction, cfg.design).fields


def _label(direction: Direction) -> str:
    return "F1" if direction is Direction.GHZ_TO_KLM else "F2"


def _base_scenario(cfg: RunConfig) -> Scenario:
    return Scenario(cfg.direction, _fields(cfg), cfg.params, cfg.decoherence, cfg.integrator,
                    snr_units=cfg.snr_units, seed=cfg.seed)


# --------------------------------------------------------------------------


def cmd_design(cfg: RunConfig) -> int:
    res = design_pulse(cfg.direction, cfg.design)
    out = cfg.out
    write_pulses(out / "pulses.csv", res.fields)
    write_sidecar(out / "pulses.csv", cfg)
    tr = res.trajectory
    write_rows(out / "theta.csv",
               ["t"] + [f"theta{j}" for j in range(1, 7)] + [f"dtheta{j}" for j in range(1, 7)],
               ([_fmt(tr.t[k])] + [_fmt(v) for v in tr.theta[:, k]] + [_fmt(v) for v in tr.rates[:, k]]
                for k in range(tr.t.size)))
    write_sidecar(out / "theta.csv", cfg)
    d = res.direction
    prop = effective_evolve(d.initial_state(4), res.fields, d.target_state(4))
    write_json(out / "design_summary.json", {
        "direction": d.short,
        "C": res.C,
        "shooting_residual": res.residual,
        "max_amplitude": res.fields.max_amplitude(),
        "endpoint_fidelity": res.endpoint_fidelity,
        "propagated_fidelity": prop.final_fidelity,
        "terminal_theta": tr.final.tolist(),
        "min_active_denominator": tr.min_active_denominator,
        "theta2_scale_variant": cfg.theta2_variant,
        "warnings": list(res.warnings),
        "config_hash": cfg.config_hash,
    })
    print(f"{d.short}: C = {res.C:.10f}, max |Omega'| = {res.fields.max_amplitude():.4f}/T, "
          f"endpoint fidelity {res.endpoint_fidelity:.12f}")
    return EXIT_OK


def cmd_evolve(cfg: RunConfig) -> int:
    d = cfg.direction
    fields = _fields(cfg)
    if cfg.evolve_mode == "effective":
        rec = effective_evolve(d.initial_state(4), fields, d.target_state(4), n_record=cfg.integrator.n_record)
    elif cfg.evolve_mode == "open":
        rec = lindblad_evolve(d.initial_state(), cfg.params, fields, cfg.decoherence, d.target_state(),
                              cfg.integrator)
    else:
        rec = schrodinger_evolve(d.initial_state(), cfg.params, fields, d.target_state(), cfg.integrator)
    rec.to_csv(cfg.out / "trajectory.csv")
    write_sidecar(cfg.out / "trajectory.csv", cfg)
    label = _label(d)
    dec = cfg.decoherence
    write_json(cfg.out / "summary.json", {
        "direction": d.short,
        "mode": cfg.evolve_mode,
        "fidelity_label": label,
        "final_fidelity": rec.final_fidelity,
        "final_leakage": float(rec.leakage()[-1]),
        "max_norm_drift": rec.max_norm_drift,
        "max_trace_drift": rec.max_trace_drift,
        "min_eigenvalue": rec.min_eigenvalue,
        "steps": rec.steps,
        "V_over_pi": cfg.V / np.pi,
        "decoherence": {"Gamma": list(dec.Gamma), "gamma": list(dec.gamma), "nbar": dec.nbar,
                        "nbar_source": cfg.nbar_source},
        "config_hash": cfg.config_hash,
    })
    print(f"{label}(T) = {rec.final_fidelity:.6f} ({cfg.evolve_mode}, {d.short})")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    if cfg.sweep is None:
        raise ConfigError("sweep needs [sweep] axis1 (and optionally axis2)")
    surface = sweep(_base_scenario(cfg), cfg.sweep, workers=cfg.workers)
    surface.to_csv(cfg.out / "surface.csv")
    write_sidecar(cfg.out / "surface.csv", cfg)
    surface.write_summary(cfg.out / "surface_summary.json")
    s = surface.summary()
    print(f"{s['cells']} cells, {s['failed_cells']} failed, fidelity range "
          f"[{s.get('min', float('nan')):.6f}, {s.get('max', float('nan')):.6f}]")
    return EXIT_OK


def cmd_noise(cfg: RunConfig) -> int:
    base = _base_scenario(cfg)
    trials = noise_trials(base, cfg.snr, cfg.runs, cfg.seed, workers=cfg.workers)
    write_noise_csv(trials, cfg.out / "awgn_trials.csv")
    write_sidecar(cfg.out / "awgn_trials.csv", cfg)
    clean = base.run()
    per = {}
    for snr in cfg.snr:
        f = [t.fidelity for t in trials if t.snr_db == float(snr)]
        per[f"{snr:g}"] = {"runs": len(f), "min": min(f), "mean": float(np.mean(f)), "max": max(f)}
    write_json(cfg.out / "noise_summary.json", {
        "direction": cfg.direction.short, "snr_units": cfg.snr_units, "master_seed": cfg.seed,
        "noiseless_fidelity": clean, "per_snr": per, "config_hash": cfg.config_hash,
    })
    for k, v in per.items():
        print(f"SNR {k} {cfg.snr_units}: min {v['min']:.6f}, mean {v['mean']:.6f} over {v['runs']} runs")
    return EXIT_OK


def cmd_mismatch(cfg: RunConfig) -> int:
    rows = mismatch_scan(_base_scenario(cfg), cfg.etas)
    write_mismatch_csv(rows, cfg.out / "mismatch.csv")
    write_sidecar(cfg.out / "mismatch.csv", cfg)
    write_json(cfg.out / "mismatch_summary.json", {
        "direction": cfg.direction.short,
        "fidelity": {f"{eta:g}": f for eta, f in rows},
        "config_hash": cfg.config_hash,
    })
    for eta, f in rows:
        print(f"eta = {eta:g}: {_label(cfg.direction)}(T) = {f:.6f}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    try:
        ids = select(cfg.criteria)
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from exc
    ctx = AcceptanceContext(cfg.V, cfg.integrator, cfg.design, noise_seed=cfg.seed)
    results = []
    for r in run_all(ctx, ids):
        print(r.line(), flush=True)
        results.append(r)
    ok = all(r.passed for r in results)
    write_json(cfg.out / "verify_report.json", {
        "passed": ok,
        "failed": [r.id for r in results if not r.passed],
        "criteria": [r.as_dict() for r in results],
        "config_hash": cfg.config_hash,
    })
    print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
    return EXIT_OK if ok else EXIT_FAILURE


HELP = {
    "design": "shoot for C and write pulses.csv, theta.csv, design_summary.json",
    "evolve": "propagate the pulses (closed, open or effective) and write trajectory.csv",
    "sweep": "fidelity surface over one or two parameter axes",
    "noise": "seeded AWGN trials per SNR",
    "mismatch": "fidelity versus detuning mismatch eta",
    "verify": "run the acceptance criteria and write verify_report.json",
}

COMMANDS = {
    "design": cmd_design, "evolve": cmd_evolve, "sweep": cmd_sweep,
    "noise": cmd_noise, "mismatch": cmd_mismatch, "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ghzklm", description="Design and test GHZ <-> KLM conversion pulses.")
    p.add_argument("--version", action="version", version=__version__)
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="INI configuration file")
    common.add_argument("--out", type=Path, help="output directory (overrides [run] out)")
    common.add_argument("--seed", type=int, help="master seed (overrides [noise] seed)")
    common.add_argument("--direction", choices=("g2k", "k2g"), help="conversion direction")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HELP[name])
    return p


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    upd = {}
    if args.out is not None:
        upd["out"] = args.out
    if args.seed is not None:
        upd["seed"] = args.seed
    if args.direction is not None:
        upd["direction"] = Direction.parse(args.direction)
    return dataclasses.replace(cfg, **upd)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        cfg.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"ghzklm: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DesignError, NumericalError) as exc:
        print(f"ghzklm: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
