"""Imperfection studies: noisy controls, detuning mismatch, parameter sweeps."""

from __future__ import annotations

import csv
import dataclasses
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .design import Direction
from .dynamics import (
    DecoherenceParams,
    IntegratorConfig,
    lindblad_evolve,
    schrodinger_evolve,
)
from .model import ControlFields, SystemParams

SNR_UNITS = ("db", "linear")


@dataclass(frozen=True)
class NoiseSpec:
    """Signal-to-noise ratio of additive white Gaussian noise.

    ``snr`` is in decibels unless ``units == "linear"``.
    """

    snr: float
    seed: int = 0
    runs: int = 1
    units: str = "db"

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.units not in SNR_UNITS:
            raise ValueError(f"units must be one of {SNR_UNITS}")

    @property
    def power_ratio(self) -> float:
        """Signal power over noise power."""
        return 10 ** (self.snr / 10) if self.units == "db" else float(self.snr)


@dataclass(frozen=True)
class MismatchSpec:
    eta: float

    def __post_init__(self):
        if not abs(self.eta) < 1:
            raise ValueError("|eta| must be < 1")


def awgn_noise(fields: ControlFields, spec: NoiseSpec) -> np.ndarray:
    """The noise array that :func:`add_awgn` would add, shape (3, n)."""
    w = fields.omega_prime
    power = np.mean(w**2, axis=1)
    sigma = np.sqrt(power / spec.power_ratio)
    rng = np.random.default_rng(spec.seed)
    return rng.standard_normal(w.shape) * sigma[:, None]


def add_awgn(fields: ControlFields, spec: NoiseSpec) -> ControlFields:
    """Add independent zero-mean Gaussian noise to every Omega' sample.

    Each waveform gets noise of variance ``mean(w**2) / power_ratio``. The
    realization depends only on ``spec.seed``.
    """
    if fields.t.size == 0:
        raise ValueError("empty control fields")
    return fields.with_waveforms(fields.omega_prime + awgn_noise(fields, spec))


def apply_detuning_mismatch(params: SystemParams, spec: MismatchSpec) -> SystemParams:
    """Scale every detuning by (1 + eta); V is untouched."""
    return dataclasses.replace(params, delta=tuple((1 + spec.eta) * d for d in params.delta))


def trial_seed(master_seed: int, *index: int) -> int:
    """Deterministic 32-bit seed for the stream (master, *index)."""
    return int(np.random.SeedSequence([master_seed, *index]).generate_state(1)[0])


@dataclass(frozen=True, eq=False)
class Scenario:
    """Everything needed for one final-fidelity evaluation.

    ``eta`` and ``snr`` are optional perturbations on top of the clean
    fields and canonical params. With no decoherence the cheaper
    Schrödinger propagation is used.
    """

    direction: Direction
    fields: ControlFields
    params: SystemParams
    decoherence: DecoherenceParams = field(default_factory=DecoherenceParams)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    eta: float = 0.0
    snr: float | None = None
    snr_units: str = "db"
    seed: int = 0

    def run(self) -> float:
        d = Direction.parse(self.direction)
        params = apply_detuning_mismatch(self.params, MismatchSpec(self.eta)) if self.eta else self.params
        fields = self.fields
        if self.snr is not None:
            fields = add_awgn(fields, NoiseSpec(self.snr, self.seed, units=self.snr_units))
        if self.decoherence.is_zero:
            rec = schrodinger_evolve(d.initial_state(), params, fields, d.target_state(), self.integrator)
        else:
            rec = lindblad_evolve(d.initial_state(), params, fields, self.decoherence, d.target_state(),
                                  self.integrator)
        return rec.final_fidelity


SWEEP_PARAMETERS = ("Gamma", "gamma", "nbar", "eta", "snr")


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    count: int

    def __post_init__(self):
        if self.name not in SWEEP_PARAMETERS:
            raise ValueError(f"unknown sweep parameter {self.name!r}; expected one of {SWEEP_PARAMETERS}")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)


@dataclass(frozen=True)
class SweepGrid:
    """One or two axes; each needs at least two points unless degenerate (lo == hi)."""

    axes: tuple[Axis, ...]

    def __post_init__(self):
        if not 1 <= len(self.axes) <= 2:
            raise ValueError("a sweep has one or two axes")
        for ax in self.axes:
            if ax.count < 2 and ax.lo != ax.hi:
                raise ValueError(f"axis {ax.name} needs at least two points")
            if ax.count < 1:
                raise ValueError(f"axis {ax.name} is empty")
        if len({a.name for a in self.axes}) != len(self.axes):
            raise ValueError("axes must name distinct parameters")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.count for a in self.axes)

    def cells(self):
        """(flat index, multi-index, {name: value}) in row-major order."""
        vals = [a.values for a in self.axes]
        for flat, idx in enumerate(itertools.product(*(range(a.count) for a in self.axes))):
            yield flat, idx, {a.name: float(v[i]) for a, v, i in zip(self.axes, vals, idx)}


@dataclass(frozen=True, eq=False)
class FidelitySurface:
    grid: SweepGrid
    values: np.ndarray  # NaN where a cell failed
    errors: dict = field(default_factory=dict)
    direction: Direction = Direction.GHZ_TO_KLM

    def summary(self) -> dict:
        finite = np.where(np.isfinite(self.values), self.values, np.nan)
        out = {
            "direction": self.direction.value,
            "axes": [dataclasses.asdict(a) for a in self.grid.axes],
            "cells": int(self.values.size),
            "failed_cells": len(self.errors),
            "errors": {str(k): v for k, v in self.errors.items()},
        }
        if np.any(np.isfinite(finite)):
            amin = np.unravel_index(np.nanargmin(finite), finite.shape)
            out.update(
                min=float(np.nanmin(finite)),
                max=float(np.nanmax(finite)),
                argmin={a.name: float(a.values[i]) for a, i in zip(self.grid.axes, amin)},
            )
        return out

    def to_csv(self, path) -> None:
        """Columns axis1, axis2 (if any), fidelity with a header row naming the parameters."""
        names = [a.name for a in self.grid.axes]
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names + ["fidelity"])
            for _, idx, vals in self.grid.cells():
                w.writerow([f"{vals[n]:.12e}" for n in names] + [f"{self.values[idx]:.12e}"])

    def write_summary(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")


def _cell_scenario(base: Scenario, values: dict, flat: int) -> Scenario:
    dec = base.decoherence
    upd = {}
    if "Gamma" in values or "gamma" in values or "nbar" in values:
        dec = DecoherenceParams(
            (values["Gamma"],) * 3 if "Gamma" in values else dec.Gamma,
            (values["gamma"],) * 3 if "gamma" in values else dec.gamma,
            values.get("nbar", dec.nbar),
        )
    if "eta" in values:
        upd["eta"] = values["eta"]
    if "snr" in values:
        upd["snr"] = values["snr"]
        upd["seed"] = trial_seed(base.seed, flat)
    return dataclasses.replace(base, decoherence=dec, **upd)


def _run_cell(scenario: Scenario):
    try:
        return scenario.run(), None
    except Exception as exc:  # recorded per cell
        return math.nan, f"{type(exc).__name__}: {exc}"


def sweep(base: Scenario, grid: SweepGrid, workers: int = 1) -> FidelitySurface:
    """Final fidelity on every cell of ``grid``.

    Cells are independent; with ``workers > 1`` they run in a process
    pool, and results are still placed in grid order. A failing cell
    becomes NaN and its message lands in ``errors``.
    """
    cells = list(grid.cells())
    scenarios = [_cell_scenario(base, vals, flat) for flat, _, vals in cells]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, scenarios))
    else:
        results = [_run_cell(s) for s in scenarios]
    values = np.full(grid.shape, np.nan)
    errors = {}
    for (flat, idx, _), (val, err) in zip(cells, results):
        values[idx] = val
        if err is not None:
            errors[idx] = err
    return FidelitySurface(grid, values, errors, Direction.parse(base.direction))


@dataclass(frozen=True)
class NoiseTrial:
    snr_db: float
    trial: int
    seed: int
    fidelity: float


def noise_trials(base: Scenario, snrs, runs: int, master_seed: int, workers: int = 1) -> list[NoiseTrial]:
    """Independent noisy runs for each SNR; seeds derive from (master, snr index, trial)."""
    jobs = []
    for i, snr in enumerate(snrs):
        for k in range(runs):
            seed = trial_seed(master_seed, i, k)
            jobs.append((float(snr), k, seed, dataclasses.replace(base, snr=float(snr), seed=seed)))
    scen = [j[3] for j in jobs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            fids = list(pool.map(Scenario.run, scen))
    else:
        fids = [s.run() for s in scen]
    return [NoiseTrial(s, k, seed, f) for (s, k, seed, _), f in zip(jobs, fids)]


def write_noise_csv(trials: list[NoiseTrial], path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["snr_db", "trial", "seed", "fidelity"])
        for tr in trials:
            w.writerow([f"{tr.snr_db:g}", tr.trial, tr.seed, f"{tr.fidelity:.12e}"])


def mismatch_scan(base: Scenario, etas) -> list[tuple[float, float]]:
    """Final fidelity for each detuning mismatch ``eta``."""
    return [(float(e), dataclasses.replace(base, eta=float(e)).run()) for e in etas]


def write_mismatch_csv(rows, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eta", "fidelity"])
        for eta, f in rows:
            w.writerow([f"{eta:.6e}", f"{f:.12e}"])
