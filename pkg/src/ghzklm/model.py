"""Hamiltonians of the driven three-atom Rydberg system.

Natural units throughout: hbar = 1, times in units of the total evolution
time ``T`` and rates/frequencies in ``1/T``.

Physical Rabi frequencies relate to the real design waveforms through a
fixed phase map, ``Omega_k = PHASE_MAP[k] * Omega'_k`` with
``PHASE_MAP = (i, -i, i)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quantum import (
    CHAIN_INDICES,
    LOWER,
    PROJ_R,
    RAISE,
    dagger,
    single_atom_operator,
)

PHASE_MAP = np.array([1j, -1j, 1j])

# sigma_k^+ = |r>_k<0| embedded for atoms 1..3
RAISING_OPS = np.stack([single_atom_operator(RAISE, k) for k in (1, 2, 3)])
LOWERING_OPS = np.stack([single_atom_operator(LOWER, k) for k in (1, 2, 3)])
_RYD_PROJ = [single_atom_operator(PROJ_R, k) for k in (1, 2, 3)]

#: Number of Rydberg pairs in each basis state (0, 1 or 3); H_V = V * diag(this).
PAIR_COUNT = np.real(np.diag(
    _RYD_PROJ[0] @ _RYD_PROJ[1] + _RYD_PROJ[0] @ _RYD_PROJ[2] + _RYD_PROJ[1] @ _RYD_PROJ[2]
))


@dataclass(frozen=True)
class SystemParams:
    """Interaction strength, laser detunings and total time.

    Attributes
    ----------
    V : float
        Rydberg-Rydberg interaction strength (1/T).
    delta : tuple of float
        Detunings of the three driving fields (1/T).
    T : float
        Total evolution time; 1.0 in natural units.
    """

    V: float
    delta: tuple[float, float, float]
    T: float = 1.0

    def __post_init__(self):
        if not self.V > 0:
            raise ValueError(f"V must be positive, got {self.V}")
        if len(self.delta) != 3:
            raise ValueError("delta needs exactly three detunings")
        object.__setattr__(self, "delta", tuple(float(d) for d in self.delta))

    @classmethod
    def canonical(cls, V: float = 100 * np.pi, T: float = 1.0) -> "SystemParams":
        """Resonant chain detunings ``(0, V, 2V)``."""
        return cls(V=V, delta=(0.0, V, 2 * V), T=T)


@dataclass(frozen=True, eq=False)
class ControlFields:
    """Real design waveforms Omega'_1..3 sampled on a shared time grid.

    Between samples the waveforms are interpolated linearly. Arrays are
    stored read-only.
    """

    t: np.ndarray
    omega_prime: np.ndarray  # shape (3, len(t))
    phase_map: np.ndarray = field(default_factory=lambda: PHASE_MAP.copy())

    def __post_init__(self):
        t = np.array(self.t, dtype=float)
        w = np.array(self.omega_prime, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("time grid needs at least two samples")
        if np.any(np.diff(t) <= 0):
            raise ValueError("time grid must be strictly increasing")
        if w.shape != (3, t.size):
            raise ValueError(f"omega_prime must have shape (3, {t.size}), got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("control waveforms contain non-finite samples")
        if not np.array_equal(np.asarray(self.phase_map), PHASE_MAP):
            raise ValueError("phase map is fixed to (i, -i, i)")
        t.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "omega_prime", w)

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def prime_at(self, t) -> np.ndarray:
        """Interpolated Omega' at scalar or array ``t``; shape (3,) or (3, n)."""
        ta = np.asarray(t, dtype=float)
        lo, hi = self.t[0], self.t[-1]
        span = hi - lo
        if np.any(ta < lo - 1e-12 * span) or np.any(ta > hi + 1e-12 * span):
            raise ValueError(f"t outside the field grid [{lo}, {hi}]")
        return np.stack([np.interp(ta, self.t, w) for w in self.omega_prime])

    def omega_at(self, t) -> np.ndarray:
        """Physical complex Rabi frequencies at ``t``."""
        w = self.prime_at(t)
        return w * (PHASE_MAP if w.ndim == 1 else PHASE_MAP[:, None])

    def max_amplitude(self) -> float:
        return float(np.max(np.abs(self.omega_prime)))

    def with_waveforms(self, omega_prime) -> "ControlFields":
        return ControlFields(self.t, omega_prime)

    @classmethod
    def zeros(cls, n: int = 101, T: float = 1.0) -> "ControlFields":
        return cls(np.linspace(0.0, T, n), np.zeros((3, n)))


def interaction_shift(params: SystemParams) -> np.ndarray:
    """H_V: ``V`` on each doubly excited state and ``3V`` on ``rrr``."""
    return np.diag(params.V * PAIR_COUNT).astype(complex)


def rotation_operator(t: float, params: SystemParams) -> np.ndarray:
    """R(t) = exp(-i H_V t), diagonal."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return np.diag(np.exp(-1j * params.V * PAIR_COUNT * t))


def drive_coefficients(t, params: SystemParams, fields: ControlFields) -> np.ndarray:
    """Complex prefactors ``Omega_k(t) exp(-i delta_k t)`` of sigma_k^+.

    Vectorized over ``t``; returns shape (3,) for scalar ``t`` and (3, n)
    for an array.
    """
    ta = np.asarray(t, dtype=float)
    om = fields.omega_at(ta)
    delta = np.asarray(params.delta)
    if ta.ndim == 0:
        return om * np.exp(-1j * delta * ta)
    return om * np.exp(-1j * np.outer(delta, ta))


def full_hamiltonian(t: float, params: SystemParams, fields: ControlFields) -> np.ndarray:
    """Interaction-picture Hamiltonian H(t) of the driven three-atom system."""
    c = drive_coefficients(t, params, fields)
    drive = np.tensordot(c, RAISING_OPS, axes=1)
    return drive + dagger(drive) + interaction_shift(params)


def rotated_hamiltonian(t: float, params: SystemParams, fields: ControlFields) -> np.ndarray:
    """H'(t) = R^dag H R - i R^dag dR/dt in closed form.

    The derivative term is exactly -H_V, so only the drive survives, with
    each coupling |x><y| rephased by exp(i V (n_x - n_y) t) where n counts
    Rydberg pairs.
    """
    c = drive_coefficients(t, params, fields)
    drive = np.tensordot(c, RAISING_OPS, axes=1)
    phase = np.exp(1j * params.V * t * np.subtract.outer(PAIR_COUNT, PAIR_COUNT))
    drive = drive * phase
    return drive + dagger(drive)


def effective_hamiltonian(t: float, fields: ControlFields) -> np.ndarray:
    """Four-level chain Hamiltonian on (000, r00, rr0, rrr).

    Couplings Omega_1 |r00><000| + Omega_2 |rr0><r00| + Omega_3 |rrr><rr0|
    plus the Hermitian conjugate.
    """
    om = fields.omega_at(t)
    h = np.zeros((4, 4), dtype=complex)
    h[1, 0], h[2, 1], h[3, 2] = om
    return h + dagger(h)


def effective_hamiltonian_from_prime(omega_prime) -> np.ndarray:
    """Same as :func:`effective_hamiltonian` from three real Omega' values."""
    om = np.asarray(omega_prime, dtype=float) * PHASE_MAP
    h = np.zeros((4, 4), dtype=complex)
    h[1, 0], h[2, 1], h[3, 2] = om
    return h + dagger(h)


def chain_resonant_part(t: float, params: SystemParams, fields: ControlFields) -> np.ndarray:
    """Restriction of H'(t) to the chain with every V-phased term dropped.

    Used to check the rotating-wave reduction: for canonical detunings this
    equals :func:`effective_hamiltonian`.
    """
    c = drive_coefficients(t, params, fields)
    drive = np.tensordot(c, RAISING_OPS, axes=1)
    # total phase of |x><y| in H' is exp(-i (delta_k - V (n_x - n_y)) t)
    delta_k = np.zeros((8, 8))
    for k in range(3):
        delta_k[RAISING_OPS[k] != 0] = params.delta[k]
    detune = delta_k - params.V * np.subtract.outer(PAIR_COUNT, PAIR_COUNT)
    resonant = np.where(np.abs(detune) < 1e-9 * params.V, drive * np.exp(1j * (delta_k * t)), 0.0)
    idx = np.array(CHAIN_INDICES)
    h = resonant[np.ix_(idx, idx)]
    return h + dagger(h)
