"""Closed- and open-system propagation of the three-atom model.

Both integrators work in the original (interaction) picture with the full
Hamiltonian; the frame rotation R(t) = exp(-i H_V t) only enters when the
fidelity is evaluated:

    F = |<psi| R^dag(t) rho(t) R(t) |psi>|
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import constants
from scipy.integrate import solve_ivp

from .model import (
    LOWERING_OPS,
    PAIR_COUNT,
    RAISING_OPS,
    ControlFields,
    SystemParams,
    drive_coefficients,
    effective_hamiltonian_from_prime,
    full_hamiltonian,
    rotation_operator,
)
from .quantum import (
    CHAIN_LABELS,
    LABELS,
    LOWER,
    POPULATION_ORDER,
    PROJ_0,
    PROJ_R,
    RAISE,
    embed_chain,
    single_atom_operator,
)


class NumericalError(RuntimeError):
    """Integration left its accuracy envelope."""


class NormDriftError(NumericalError):
    pass


class TraceDriftError(NumericalError):
    pass


def thermal_occupation(omega: float, temperature: float) -> float:
    """Bose-Einstein occupation 1/(exp(hbar omega / k_B T) - 1).

    Parameters
    ----------
    omega : float
        Angular frequency in rad/s.
    temperature : float
        Temperature in kelvin.
    """
    if not omega > 0 or not temperature > 0:
        raise ValueError("omega and temperature must be positive")
    x = constants.hbar * omega / (constants.k * temperature)
    return float(1.0 / math.expm1(x))


@dataclass(frozen=True)
class DecoherenceParams:
    """Per-atom spontaneous-emission and dephasing rates (1/T) plus n-bar."""

    Gamma: tuple[float, float, float] = (0.0, 0.0, 0.0)
    gamma: tuple[float, float, float] = (0.0, 0.0, 0.0)
    nbar: float = 0.0

    def __post_init__(self):
        G = tuple(float(x) for x in np.broadcast_to(self.Gamma, 3))
        g = tuple(float(x) for x in np.broadcast_to(self.gamma, 3))
        if min(G) < 0 or min(g) < 0 or self.nbar < 0:
            raise ValueError("rates and nbar must be non-negative")
        object.__setattr__(self, "Gamma", G)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "nbar", float(self.nbar))

    @classmethod
    def uniform(cls, Gamma: float = 0.0, gamma: float = 0.0, nbar: float = 0.0) -> "DecoherenceParams":
        return cls((Gamma,) * 3, (gamma,) * 3, nbar)

    @property
    def is_zero(self) -> bool:
        return not any(self.Gamma) and not any(self.gamma)


def lindblad_operators(dec: DecoherenceParams) -> list[np.ndarray]:
    """Jump operators with rates and thermal weights folded in.

    Per atom: sqrt(gamma) (|r><r| - |0><0|), sqrt((n+1) Gamma) |0><r| and
    sqrt(n Gamma) |r><0|. Zero-rate channels are omitted.
    """
    ops = []
    for k in range(3):
        atom = k + 1
        if dec.gamma[k]:
            ops.append(math.sqrt(dec.gamma[k]) * single_atom_operator(PROJ_R - PROJ_0, atom))
        if dec.Gamma[k]:
            ops.append(math.sqrt((dec.nbar + 1) * dec.Gamma[k]) * single_atom_operator(LOWER, atom))
            if dec.nbar:
                ops.append(math.sqrt(dec.nbar * dec.Gamma[k]) * single_atom_operator(RAISE, atom))
    return ops


@dataclass(frozen=True)
class IntegratorConfig:
    """Propagation settings.

    The fixed step is ``step_fraction * 2 pi / (3 V)``, i.e. a fraction of
    the period of the fastest phase in H. ``max_step_fraction`` is the
    oscillation guard; configurations asking for a coarser step are
    rejected outright.
    """

    scheme: str = "rk4"
    step_fraction: float = 1 / 400
    max_step_fraction: float = 1 / 20
    rtol: float = 1e-9
    atol: float = 1e-11
    n_record: int = 201
    norm_tol: float = 1e-6
    trace_tol: float = 1e-6
    neg_eig_tol: float = 1e-6

    def __post_init__(self):
        if self.scheme not in ("rk4", "adaptive"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not self.step_fraction > 0:
            raise ValueError("step_fraction must be positive")
        if self.n_record < 2:
            raise ValueError("n_record must be at least 2")

    def step_count(self, params: SystemParams, duration: float) -> int:
        if self.step_fraction > self.max_step_fraction:
            raise ValueError(
                f"step fraction {self.step_fraction:g} violates the oscillation guard "
                f"(max {self.max_step_fraction:g} of 2pi/3V)")
        h = self.step_fraction * 2 * math.pi / (3 * params.V)
        return max(1, math.ceil(duration / h - 1e-9))


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Sampled fidelity and populations of one propagation."""

    t: np.ndarray
    fidelity: np.ndarray
    populations: np.ndarray  # (n_samples, dim)
    labels: tuple[str, ...]
    final_rho: np.ndarray
    final_state: np.ndarray | None = None
    max_norm_drift: float = 0.0
    max_trace_drift: float = 0.0
    max_hermiticity_error: float = 0.0
    min_eigenvalue: float = 0.0
    steps: int = 0

    @property
    def final_fidelity(self) -> float:
        return float(self.fidelity[-1])

    def leakage(self) -> np.ndarray:
        """Population outside the chain subspace at every sample."""
        if len(self.labels) != 8:
            return np.zeros(self.t.size)
        off = [i for i, s in enumerate(self.labels) if s not in CHAIN_LABELS]
        return self.populations[:, off].sum(axis=1)

    def to_csv(self, path) -> None:
        """Columns t, F, then pop_<label> in excitation order."""
        order = [s for s in POPULATION_ORDER if s in self.labels]
        cols = [self.labels.index(s) for s in order]
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "F"] + [f"pop_{s}" for s in order])
            for k in range(self.t.size):
                w.writerow([_fmt(self.t[k]), _fmt(self.fidelity[k])]
                           + [_fmt(self.populations[k, c]) for c in cols])


def _fmt(x: float) -> str:
    return f"{float(x):.12e}"


def fidelity_original_picture(rho, target, t: float, params: SystemParams) -> float:
    """|<psi| R^dag(t) rho R(t) |psi>| for an 8x8 ``rho`` or 8-vector ket."""
    phi = rotation_operator(t, params) @ np.asarray(target, dtype=complex)
    rho = np.asarray(rho)
    if rho.ndim == 1:
        return float(abs(np.vdot(phi, rho)) ** 2)
    return float(abs(np.vdot(phi, rho @ phi)))


def _record_indices(n_steps: int, n_record: int) -> np.ndarray:
    return np.unique(np.round(np.linspace(0, n_steps, min(n_record, n_steps + 1))).astype(int))


# stacked sigma^+ and sigma^- so that H = H_V + coeffs @ _DRIVE_OPS
_DRIVE_OPS = np.concatenate([RAISING_OPS, LOWERING_OPS]).reshape(6, 64)


def _stage_hamiltonians(params: SystemParams, fields: ControlFields, times: np.ndarray):
    """Yield H(t) for each entry of ``times`` as an 8x8 array."""
    base = np.diag(params.V * PAIR_COUNT).astype(complex).reshape(64)
    chunk = 4096
    for start in range(0, times.size, chunk):
        c = drive_coefficients(times[start:start + chunk], params, fields)
        coeffs = np.concatenate([c, c.conj()]).T
        hs = coeffs @ _DRIVE_OPS + base
        for h in hs:
            yield h.reshape(8, 8)


def _check_ket(psi, dim):
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (dim,):
        raise ValueError(f"initial state must have shape ({dim},)")
    if abs(np.linalg.norm(psi) - 1) > 1e-10:
        raise ValueError("initial state is not normalized")
    return psi


def schrodinger_evolve(initial, params: SystemParams, fields: ControlFields, target=None,
                       integ: IntegratorConfig | None = None) -> TrajectoryRecord:
    """Integrate i d psi/dt = H(t) psi over the field window.

    ``target`` (an 8-vector in the rotated picture) sets the fidelity
    series; without it the fidelity is taken against ``initial``.
    """
    integ = integ or IntegratorConfig()
    psi = _check_ket(initial, 8)
    target = psi.copy() if target is None else np.asarray(target, dtype=complex)
    t0, t1 = float(fields.t[0]), float(fields.t[-1])
    n = integ.step_count(params, t1 - t0)
    if integ.scheme == "adaptive":
        return _adaptive(psi, params, fields, target, integ, n, density=False)

    h = (t1 - t0) / n
    fine = np.linspace(t0, t1, 2 * n + 1)
    rec = set(_record_indices(n, integ.n_record).tolist())
    out_t, out_f, out_p = [], [], []
    max_drift = 0.0

    def record(step, state):
        nonlocal max_drift
        drift = abs(np.linalg.norm(state) - 1)
        max_drift = max(max_drift, drift)
        if drift > integ.norm_tol:
            raise NormDriftError(f"norm drift {drift:.3g} at t={t0 + step * h:.6g}; step too coarse")
        tt = t0 + step * h
        out_t.append(tt)
        out_f.append(fidelity_original_picture(state, target, tt, params))
        out_p.append(np.abs(state) ** 2)

    hs = _stage_hamiltonians(params, fields, fine)
    h_next = next(hs)
    record(0, psi)
    for step in range(n):
        h0 = h_next
        hm = next(hs)
        h_next = h1 = next(hs)
        k1 = -1j * (h0 @ psi)
        k2 = -1j * (hm @ (psi + 0.5 * h * k1))
        k3 = -1j * (hm @ (psi + 0.5 * h * k2))
        k4 = -1j * (h1 @ (psi + h * k3))
        psi = psi + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if step + 1 in rec:
            record(step + 1, psi)

    return TrajectoryRecord(
        np.array(out_t), np.array(out_f), np.array(out_p), LABELS,
        np.outer(psi, psi.conj()), psi, max_norm_drift=max_drift, steps=n)


def _check_density(rho):
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (8, 8):
        raise ValueError("density matrix must be 8x8")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > 1e-10:
        raise ValueError("density matrix must have unit trace")
    if np.linalg.eigvalsh(rho).min() < -1e-10:
        raise ValueError("density matrix is not positive semidefinite")
    return rho


def _dissipator_superop(jumps):
    """Sum of L rho L^dag as a 64x64 matrix on row-major vec(rho)."""
    d = np.zeros((64, 64), dtype=complex)
    for L in jumps:
        d += np.kron(L, L.conj())
    return d


def lindblad_evolve(initial, params: SystemParams, fields: ControlFields, dec: DecoherenceParams,
                    target=None, integ: IntegratorConfig | None = None) -> TrajectoryRecord:
    """Integrate the Lindblad master equation with the full H(t).

    rho' = -i[H, rho] + sum_k (L_k rho L_k^dag - {L_k^dag L_k, rho}/2), where
    the jump set from :func:`lindblad_operators` covers dephasing and the
    thermally weighted emission/absorption channels.
    """
    integ = integ or IntegratorConfig()
    if np.asarray(initial).ndim == 1:
        psi = _check_ket(initial, 8)
        rho = np.outer(psi, psi.conj())
        target = psi if target is None else target
    else:
        rho = _check_density(initial)
        if target is None:
            raise ValueError("target state required with a mixed initial state")
    target = np.asarray(target, dtype=complex)
    jumps = lindblad_operators(dec)
    t0, t1 = float(fields.t[0]), float(fields.t[-1])
    n = integ.step_count(params, t1 - t0)
    if integ.scheme == "adaptive":
        return _adaptive(rho, params, fields, target, integ, n, density=True, jumps=jumps)

    h = (t1 - t0) / n
    fine = np.linspace(t0, t1, 2 * n + 1)
    anti = 0.5j * sum((L.conj().T @ L for L in jumps), np.zeros((8, 8), dtype=complex))
    dsup = _dissipator_superop(jumps)
    rec = set(_record_indices(n, integ.n_record).tolist())
    out_t, out_f, out_p = [], [], []
    stats = {"trace": 0.0, "herm": 0.0, "mineig": 0.0}

    def rhs(hmat, r):
        hn = hmat - anti
        out = -1j * (hn @ r - r @ hn.conj().T)
        if jumps:
            out = out + (dsup @ r.reshape(64)).reshape(8, 8)
        return out

    def record(step, r):
        tt = t0 + step * h
        tr = abs(np.trace(r) - 1)
        stats["trace"] = max(stats["trace"], tr)
        if tr > integ.trace_tol:
            raise TraceDriftError(f"trace drift {tr:.3g} at t={tt:.6g}")
        stats["herm"] = max(stats["herm"], float(np.max(np.abs(r - r.conj().T))))
        mineig = float(np.linalg.eigvalsh(0.5 * (r + r.conj().T)).min())
        stats["mineig"] = min(stats["mineig"], mineig)
        if mineig < -integ.neg_eig_tol:
            warnings.warn(f"density matrix eigenvalue {mineig:.3g} at t={tt:.6g}", RuntimeWarning,
                          stacklevel=3)
        out_t.append(tt)
        out_f.append(fidelity_original_picture(r, target, tt, params))
        out_p.append(np.real(np.diag(r)).copy())

    hs = _stage_hamiltonians(params, fields, fine)
    h_next = next(hs)
    record(0, rho)
    for step in range(n):
        h0 = h_next
        hm = next(hs)
        h_next = h1 = next(hs)
        k1 = rhs(h0, rho)
        k2 = rhs(hm, rho + 0.5 * h * k1)
        k3 = rhs(hm, rho + 0.5 * h * k2)
        k4 = rhs(h1, rho + h * k3)
        rho = rho + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if step + 1 in rec:
            record(step + 1, rho)

    return TrajectoryRecord(
        np.array(out_t), np.array(out_f), np.array(out_p), LABELS, rho,
        max_trace_drift=stats["trace"], max_hermiticity_error=stats["herm"],
        min_eigenvalue=stats["mineig"], steps=n)


def _adaptive(y0, params, fields, target, integ, n, density, jumps=()):
    """DOP853 cross-check path; max step capped at the fixed-step size."""
    t0, t1 = float(fields.t[0]), float(fields.t[-1])
    h = (t1 - t0) / n
    anti = 0.5j * sum((L.conj().T @ L for L in jumps), np.zeros((8, 8), dtype=complex))
    dsup = _dissipator_superop(jumps) if jumps else None

    def f(t, y):
        H = full_hamiltonian(min(max(t, t0), t1), params, fields)
        if not density:
            return -1j * (H @ y)
        r = y.reshape(8, 8)
        hn = H - anti
        out = -1j * (hn @ r - r @ hn.conj().T)
        if dsup is not None:
            out = out + (dsup @ y).reshape(8, 8)
        return out.reshape(64)

    t_eval = t0 + _record_indices(n, integ.n_record) * h
    t_eval[-1] = t1
    sol = solve_ivp(f, (t0, t1), np.asarray(y0, dtype=complex).reshape(-1), method="DOP853",
                    t_eval=t_eval, rtol=integ.rtol, atol=integ.atol,
                    max_step=integ.max_step_fraction * 2 * math.pi / (3 * params.V))
    if not sol.success:
        raise NumericalError(sol.message)
    fids, pops = [], []
    drift = 0.0
    for k, tt in enumerate(sol.t):
        y = sol.y[:, k]
        if density:
            r = y.reshape(8, 8)
            drift = max(drift, abs(np.trace(r) - 1))
            fids.append(fidelity_original_picture(r, target, tt, params))
            pops.append(np.real(np.diag(r)))
        else:
            drift = max(drift, abs(np.linalg.norm(y) - 1))
            fids.append(fidelity_original_picture(y, target, tt, params))
            pops.append(np.abs(y) ** 2)
    y = sol.y[:, -1]
    if density:
        rho = y.reshape(8, 8)
        return TrajectoryRecord(sol.t, np.array(fids), np.array(pops), LABELS, rho,
                                max_trace_drift=drift, steps=sol.nfev)
    return TrajectoryRecord(sol.t, np.array(fids), np.array(pops), LABELS, np.outer(y, y.conj()), y,
                            max_norm_drift=drift, steps=sol.nfev)


def effective_evolve(initial, fields: ControlFields, target=None, embed: bool = False,
                     substeps: int = 1, n_record: int = 201) -> TrajectoryRecord:
    """Propagate the four-level chain Hamiltonian with RK4 on the field grid.

    With ``embed=True`` the chain Hamiltonian is embedded in the eight-state
    space and ``initial``/``target`` may be 8-vectors; any population
    outside the chain then stays exactly zero.
    """
    dim = 8 if embed else 4
    psi = np.asarray(initial, dtype=complex)
    if embed and psi.shape == (4,):
        psi = embed_chain(psi)
    psi = _check_ket(psi, dim)
    if target is None:
        target = psi.copy()
    target = np.asarray(target, dtype=complex)
    if embed and target.shape == (4,):
        target = embed_chain(target)

    def ham(w):
        h = effective_hamiltonian_from_prime(w)
        return embed_chain(h) if embed else h

    ts = fields.t
    if substeps > 1:
        ts = np.interp(np.linspace(0, ts.size - 1, (ts.size - 1) * substeps + 1), np.arange(ts.size), ts)
    W = fields.prime_at(ts)
    mids = fields.prime_at(0.5 * (ts[1:] + ts[:-1]))
    n = ts.size - 1
    rec = set(_record_indices(n, n_record).tolist())
    out_t, out_f, out_p = [ts[0]], [abs(np.vdot(target, psi)) ** 2], [np.abs(psi) ** 2]
    h_next = ham(W[:, 0])
    for k in range(n):
        h = ts[k + 1] - ts[k]
        h0, hm, h_next = h_next, ham(mids[:, k]), ham(W[:, k + 1])
        k1 = -1j * (h0 @ psi)
        k2 = -1j * (hm @ (psi + 0.5 * h * k1))
        k3 = -1j * (hm @ (psi + 0.5 * h * k2))
        k4 = -1j * (h_next @ (psi + h * k3))
        psi = psi + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if k + 1 in rec:
            out_t.append(ts[k + 1])
            out_f.append(abs(np.vdot(target, psi)) ** 2)
            out_p.append(np.abs(psi) ** 2)
    labels = LABELS if embed else CHAIN_LABELS
    return TrajectoryRecord(np.array(out_t), np.array(out_f), np.array(out_p), labels,
                            np.outer(psi, psi.conj()), psi,
                            max_norm_drift=abs(np.linalg.norm(psi) - 1), steps=n)


def chain_population(record: TrajectoryRecord) -> np.ndarray:
    idx = [record.labels.index(s) for s in CHAIN_LABELS]
    return record.populations[:, idx].sum(axis=1)

