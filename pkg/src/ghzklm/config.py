"""Run configuration: INI parsing, unit conversion and hashing.

The file format is plain ``configparser`` INI. Physical units are accepted
where the natural ones are awkward and converted to units of ``1/T`` here,
so nothing downstream sees kHz or microseconds.

Example::

    [run]
    direction = g2k
    out = results

    [physical]
    V_pi = 100
    T_us = 20

    [decoherence]
    Gamma_kHz = 1
    gamma_kHz = 1
    thermal_freq_MHz = 1
    temperature_uK = 20
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .design import DEFAULT_THETA2_SCALE, DesignConfig, Direction
from .dynamics import DecoherenceParams, IntegratorConfig, thermal_occupation
from .model import SystemParams
from .robustness import SNR_UNITS, Axis, SweepGrid

THETA2_VARIANTS = {"scaled": DEFAULT_THETA2_SCALE, "raw": 1.0}

_KNOWN = {
    "run": {"direction", "out", "workers"},
    "physical": {"V_pi", "T_us"},
    "design": {"n_points", "bracket", "tol", "theta2_scale", "eps_sing", "rate_limit", "probe_points",
               "min_endpoint_fidelity"},
    "decoherence": {"Gamma", "gamma", "Gamma_kHz", "gamma_kHz", "nbar", "thermal_freq_MHz",
                    "temperature_uK"},
    "noise": {"snr", "runs", "seed", "units"},
    "mismatch": {"eta"},
    "sweep": {"axis1", "axis2"},
    "integrator": {"scheme", "step_fraction", "rtol", "atol", "n_record"},
    "evolve": {"mode", "pulses"},
    "verify": {"criteria"},
}


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"expected a list of numbers, got {text!r}") from exc


@dataclass(frozen=True)
class RunConfig:
    """Everything a subcommand needs, in natural units."""

    direction: Direction = Direction.GHZ_TO_KLM
    V: float = 100 * math.pi
    T_us: float = 20.0
    design: DesignConfig = field(default_factory=DesignConfig)
    theta2_variant: str = "scaled"
    decoherence: DecoherenceParams = field(default_factory=DecoherenceParams)
    nbar_source: str = "none"
    snr: tuple[float, ...] = (10.0, 20.0, 30.0)
    runs: int = 10
    seed: int = 0
    snr_units: str = "db"
    etas: tuple[float, ...] = (0.0, 1e-4, 3e-4)
    sweep: SweepGrid | None = None
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    evolve_mode: str = "closed"
    pulses: Path | None = None
    criteria: tuple[str, ...] = ()
    out: Path = Path("out")
    workers: int = 1
    source: str = ""  # normalized text the hash is taken over

    @property
    def params(self) -> SystemParams:
        return SystemParams.canonical(self.V)

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.source.encode()).hexdigest()

    def assumptions(self) -> dict:
        return {
            "fidelity_convention": "modulus |<psi|R^dag rho R|psi>| (not squared)",
            "snr_units": self.snr_units,
            "theta2_scale_variant": self.theta2_variant,
            "noise_runs": "independent seed per run",
        }


def _rate(sec, key: str, T_us: float) -> float | None:
    """A rate in 1/T from either ``key`` (1/T) or ``key_kHz``."""
    natural, khz = sec.get(key), sec.get(f"{key}_kHz")
    if natural is not None and khz is not None:
        raise ConfigError(f"give {key} or {key}_kHz, not both")
    if khz is not None:
        return float(khz) * 1e3 * T_us * 1e-6
    return None if natural is None else float(natural)


def _axis(text: str) -> Axis:
    parts = text.split()
    if len(parts) != 4:
        raise ConfigError(f"sweep axis needs 'name lo hi count', got {text!r}")
    try:
        return Axis(parts[0], float(parts[1]), float(parts[2]), int(parts[3]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(text: str) -> RunConfig:
    """Build a :class:`RunConfig` from INI text."""
    cp = configparser.ConfigParser()
    cp.optionxform = str  # Gamma and gamma are different keys
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    for name in cp.sections():
        if name not in _KNOWN:
            raise ConfigError(f"unknown section [{name}]")
        extra = set(cp[name]) - _KNOWN[name]
        if extra:
            raise ConfigError(f"unknown keys in [{name}]: {', '.join(sorted(extra))}")

    def sec(name):
        return cp[name] if cp.has_section(name) else {}

    try:
        return _build(cp, sec)
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def _build(cp, sec) -> RunConfig:
    run, phys, des, deco = sec("run"), sec("physical"), sec("design"), sec("decoherence")
    noise, mis, swp, integ, evo, ver = (sec(n) for n in
                                        ("noise", "mismatch", "sweep", "integrator", "evolve", "verify"))
    kw = {}
    if "direction" in run:
        kw["direction"] = Direction.parse(run["direction"])
    if "out" in run:
        kw["out"] = Path(run["out"])
    if "workers" in run:
        kw["workers"] = int(run["workers"])
    T_us = float(phys.get("T_us", 20.0))
    if T_us <= 0:
        raise ConfigError("T_us must be positive")
    kw["T_us"] = T_us
    kw["V"] = float(phys.get("V_pi", 100.0)) * math.pi

    dk = {}
    if "bracket" in des:
        b = _floats(des["bracket"])
        if len(b) != 2:
            raise ConfigError("bracket needs two numbers")
        dk["bracket"] = tuple(b)
    for key, conv in (("n_points", int), ("tol", float), ("eps_sing", float), ("rate_limit", float),
                      ("probe_points", int), ("min_endpoint_fidelity", float)):
        if key in des:
            dk[key] = conv(des[key])
    variant = des.get("theta2_scale", "scaled")
    if variant not in THETA2_VARIANTS:
        raise ConfigError(f"theta2_scale must be one of {sorted(THETA2_VARIANTS)}")
    dk["theta2_scale"] = THETA2_VARIANTS[variant]
    kw["design"] = DesignConfig(**dk)
    kw["theta2_variant"] = variant

    Gamma = _rate(deco, "Gamma", T_us) or 0.0
    gamma = _rate(deco, "gamma", T_us) or 0.0
    has_pair = "thermal_freq_MHz" in deco or "temperature_uK" in deco
    if "nbar" in deco and has_pair:
        raise ConfigError("give nbar or (thermal_freq_MHz, temperature_uK), not both")
    if has_pair:
        if not ("thermal_freq_MHz" in deco and "temperature_uK" in deco):
            raise ConfigError("thermal_freq_MHz and temperature_uK must be given together")
        nbar = thermal_occupation(2 * math.pi * float(deco["thermal_freq_MHz"]) * 1e6,
                                  float(deco["temperature_uK"]) * 1e-6)
        kw["nbar_source"] = "thermal"
    else:
        nbar = float(deco.get("nbar", 0.0))
        kw["nbar_source"] = "direct" if "nbar" in deco else "none"
    kw["decoherence"] = DecoherenceParams.uniform(Gamma, gamma, nbar)

    if "snr" in noise:
        kw["snr"] = tuple(_floats(noise["snr"]))
    if "runs" in noise:
        kw["runs"] = int(noise["runs"])
    if "seed" in noise:
        kw["seed"] = int(noise["seed"])
    units = noise.get("units", "db").lower()
    if units not in SNR_UNITS:
        raise ConfigError(f"noise units must be one of {SNR_UNITS}")
    kw["snr_units"] = units
    if "eta" in mis:
        kw["etas"] = tuple(_floats(mis["eta"]))

    axes = [_axis(swp[k]) for k in ("axis1", "axis2") if k in swp]
    if axes:
        kw["sweep"] = SweepGrid(tuple(axes))

    ik = {}
    for key, conv in (("scheme", str), ("step_fraction", float), ("rtol", float), ("atol", float),
                      ("n_record", int)):
        if key in integ:
            ik[key] = conv(integ[key])
    kw["integrator"] = IntegratorConfig(**ik)

    mode = evo.get("mode", "closed")
    if mode not in ("closed", "open", "effective"):
        raise ConfigError("evolve mode must be closed, open or effective")
    kw["evolve_mode"] = mode
    if "pulses" in evo:
        kw["pulses"] = Path(evo["pulses"])
    if "criteria" in ver:
        kw["criteria"] = tuple(ver["criteria"].replace(",", " ").split())

    normalized = {s: dict(sorted(cp[s].items())) for s in sorted(cp.sections())}
    kw["source"] = json.dumps(normalized, sort_keys=True)
    return RunConfig(**kw)


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text())
