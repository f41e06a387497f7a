"""Inverse engineering of the chain control fields by Lie transforms.

The chain propagator is written as an ordered product of six real plane
rotations ``exp(-i theta_j A_j)``. Three angles follow a prescribed ansatz,
the other three obey constraint ODEs that keep the Hamiltonian inside the
span of the three physical couplings. The free ansatz coefficient ``C`` is
fixed by shooting on the terminal value of ``theta_5``.

Angles are indexed 1..6 in docstrings and 0..5 in arrays.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .model import ControlFields, effective_hamiltonian_from_prime
from .quantum import ghz_state, klm_state

# (row, col) of the +i entry of each generator: A_j = i|b><a| - i|a><b| -> (b, a)
GENERATOR_PLANES: tuple[tuple[int, int], ...] = ((1, 0), (3, 2), (1, 2), (3, 0), (2, 0), (3, 1))

DEFAULT_THETA2_SCALE = math.pi / 8


class Direction(str, Enum):
    GHZ_TO_KLM = "ghz_to_klm"
    KLM_TO_GHZ = "klm_to_ghz"

    @classmethod
    def parse(cls, value) -> "Direction":
        if isinstance(value, Direction):
            return value
        aliases = {"g2k": cls.GHZ_TO_KLM, "k2g": cls.KLM_TO_GHZ}
        key = str(value).strip().lower()
        if key in aliases:
            return aliases[key]
        return cls(key)

    @property
    def short(self) -> str:
        return "g2k" if self is Direction.GHZ_TO_KLM else "k2g"

    def initial_state(self, dim: int = 8) -> np.ndarray:
        return ghz_state(dim) if self is Direction.GHZ_TO_KLM else klm_state(dim)

    def target_state(self, dim: int = 8) -> np.ndarray:
        return klm_state(dim) if self is Direction.GHZ_TO_KLM else ghz_state(dim)


class DesignError(RuntimeError):
    """Pulse design could not be completed."""


class SingularityError(DesignError):
    """Constraint equations hit a pole (or a tangent blew up)."""

    def __init__(self, t: float, detail: str):
        self.t = t
        super().__init__(f"constraint singularity at t={t:.6g}: {detail}")


class ShootingError(DesignError):
    pass


# --------------------------------------------------------------------------
# generators and the analytic propagator
# --------------------------------------------------------------------------


def generators() -> np.ndarray:
    """The six 4x4 Hermitian generators A_1..A_6, stacked as (6, 4, 4)."""
    gens = np.zeros((6, 4, 4), dtype=complex)
    for j, (b, a) in enumerate(GENERATOR_PLANES):
        gens[j, b, a] = 1j
        gens[j, a, b] = -1j
    return gens


def generator_rotation(j: int, theta: float) -> np.ndarray:
    """exp(-i theta A_j) for ``j`` in 0..5, built as a real plane rotation."""
    b, a = GENERATOR_PLANES[j]
    c, s = math.cos(theta), math.sin(theta)
    r = np.eye(4)
    r[a, a] = r[b, b] = c
    r[b, a] = s
    r[a, b] = -s
    return r


def rotation_product(theta) -> np.ndarray:
    """exp(-i th1 A1) exp(-i th2 A2) ... exp(-i th6 A6)."""
    u = np.eye(4)
    for j, th in enumerate(theta):
        u = u @ generator_rotation(j, th)
    return u


def evolution_operator(theta, theta_at_t0=None) -> np.ndarray:
    """Chain propagator from ``t0`` to ``t`` given both angle sets.

    With ``theta_at_t0`` omitted (all zero) the result is the real
    orthogonal matrix obtained by multiplying the six rotations.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (6,):
        raise ValueError("expected six angles")
    u = rotation_product(theta)
    if theta_at_t0 is not None:
        u = u @ rotation_product(theta_at_t0).T
    return u


def evolve_chain_state(theta) -> np.ndarray:
    """Chain state reached from zeta_1 = |000>, i.e. first column of U."""
    return evolution_operator(theta)[:, 0]


# --------------------------------------------------------------------------
# ansatz and boundary conditions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundaryConditions:
    """Fixed angle values (1-based keys) at each end of a conversion."""

    start: dict[int, float]
    end: dict[int, float]

    @staticmethod
    def ghz_end() -> dict[int, float]:
        return {1: 0.0, 2: 0.0, 5: 0.0, 4: math.pi / 4}

    @staticmethod
    def klm_end() -> dict[int, float]:
        return {1: -math.pi / 4, 2: math.pi / 4, 3: math.pi / 4, 5: math.pi / 2}

    @classmethod
    def for_direction(cls, direction) -> "BoundaryConditions":
        d = Direction.parse(direction)
        if d is Direction.GHZ_TO_KLM:
            return cls(cls.ghz_end(), cls.klm_end())
        return cls(cls.klm_end(), cls.ghz_end())

    @staticmethod
    def violations(theta, fixed: dict[int, float]) -> dict[int, float]:
        return {j: float(theta[j - 1] - v) for j, v in fixed.items()}


@dataclass(frozen=True)
class AnsatzParams:
    """Prescribed forms of theta_1..theta_3.

    ``theta2_scale`` multiplies the theta_2 shape; the raw shape ends at 2
    while the KLM end needs pi/4, so pi/8 is the default.
    """

    direction: Direction
    C: float
    theta2_scale: float = DEFAULT_THETA2_SCALE
    T: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction.parse(self.direction))
        if not math.isfinite(self.C):
            raise ValueError("C must be finite")
        if not self.theta2_scale > 0:
            raise ValueError("theta2_scale must be positive")

    def evaluate(self, t):
        return theta_ansatz(self.direction, t, self.T, self.C, self.theta2_scale)


def theta_ansatz(direction, t, T: float, C: float, theta2_scale: float = DEFAULT_THETA2_SCALE):
    """Angles theta_1..3 and their analytic time derivatives.

    Returns ``(angles, rates)``, each of shape (3,) for scalar ``t`` or
    (3, n) for an array.
    """
    d = Direction.parse(direction)
    t = np.asarray(t, dtype=float)
    if np.any(t < -1e-12 * T) or np.any(t > T * (1 + 1e-12)):
        raise ValueError(f"t outside [0, {T}]")
    w = math.pi / T
    # theta_1, theta_2 argument is shifted by -T in the reverse direction
    x = w * t if d is Direction.GHZ_TO_KLM else w * (t - T)
    cx, sx = np.cos(x), np.sin(x)
    one_m = 1.0 - cx
    sh, ch = np.sin(x / 2), np.cos(x / 2)

    th1 = -(math.pi / 16) * one_m**2
    dth1 = -(math.pi / 8) * one_m * sx * w
    th2 = theta2_scale * sh**2 * one_m
    dth2 = theta2_scale * (sh * ch * one_m + sh**2 * sx) * w
    y = w * t
    th3 = math.pi / 4 + C * np.sin(y) ** 2
    dth3 = C * np.sin(2 * y) * w
    return np.stack([th1, th2, th3]), np.stack([dth1, dth2, dth3])


# --------------------------------------------------------------------------
# constraint ODE
# --------------------------------------------------------------------------

# weights below this do not make a pole active
_ACTIVE_WEIGHT = 1e-6


def constraint_rates(th1, th2, th3, dth3, th4, eps_sing=1e-3, rate_limit=1e3, t=float("nan")):
    """d/dt of (theta_4, theta_5, theta_6).

    The theta_5/theta_6 equations share the denominator
    cos2th3 + cos2th4 = 2 cos(th3+th4) cos(th3-th4) and are evaluated in the
    equivalent partial-fraction form

        th5' = th3'/2 [ (tan th2 - tan th1)/cos(th3+th4) - (tan th2 + tan th1)/cos(th3-th4) ]
        th6' = th3'/2 [ (tan th2 - tan th1)/cos(th3+th4) + (tan th2 + tan th1)/cos(th3-th4) ]

    so that a vanishing factor whose weight is zero (a removable point)
    does not produce 0/0. A pole is reported when a factor falls below
    ``eps_sing`` while its term exceeds ``rate_limit``.
    """
    c1, c2 = math.cos(th1), math.cos(th2)
    if abs(c1) < 1e-12 or abs(c2) < 1e-12:
        raise SingularityError(t, "tan(theta_1) or tan(theta_2) overflow")
    t1, t2 = math.tan(th1), math.tan(th2)
    dth4 = dth3 * t1 * t2

    terms = []
    for weight, factor, name in ((t2 - t1, math.cos(th3 + th4), "cos(th3+th4)"),
                                 (t2 + t1, math.cos(th3 - th4), "cos(th3-th4)")):
        num = 0.5 * dth3 * weight
        if num == 0.0:
            terms.append(0.0)
            continue
        if factor == 0.0:
            raise SingularityError(t, f"{name} = 0 with nonzero numerator")
        term = num / factor
        if abs(factor) < eps_sing and abs(term) > rate_limit:
            raise SingularityError(t, f"{name} = {factor:.3g}, rate {term:.3g}")
        terms.append(term)
    plus, minus = terms
    dth5 = plus - minus
    dth6 = plus + minus
    if not (abs(dth5) <= rate_limit and abs(dth6) <= rate_limit and abs(dth4) <= rate_limit):
        raise SingularityError(t, f"constraint rate exceeds {rate_limit:g}")
    return dth4, dth5, dth6


@dataclass(frozen=True, eq=False)
class ThetaTrajectory:
    """All six angles and their rates on a shared grid.

    ``min_denominator`` is the smallest |cos2th3 + cos2th4| on the grid
    (zero where a removable point sits on the grid). ``min_active_denominator``
    only counts factors whose numerator weight is non-negligible.
    """

    t: np.ndarray
    theta: np.ndarray  # (6, n)
    rates: np.ndarray  # (6, n)
    ansatz: AnsatzParams
    min_denominator: float
    min_active_denominator: float

    @property
    def final(self) -> np.ndarray:
        return self.theta[:, -1]

    @property
    def initial(self) -> np.ndarray:
        return self.theta[:, 0]

    def rate_consistency(self) -> float:
        """Max deviation between stored rates and centred differences."""
        dt = np.diff(self.t)
        fd = (self.theta[:, 2:] - self.theta[:, :-2]) / (dt[1:] + dt[:-1])
        return float(np.max(np.abs(fd - self.rates[:, 1:-1])))


def _denominator_stats(theta: np.ndarray) -> tuple[float, float]:
    th1, th2, th3, th4 = theta[:4]
    literal = np.abs(np.cos(2 * th3) + np.cos(2 * th4))
    t1, t2 = np.tan(th1), np.tan(th2)
    plus = np.where(np.abs(t2 - t1) > _ACTIVE_WEIGHT, np.abs(np.cos(th3 + th4)), np.inf)
    minus = np.where(np.abs(t2 + t1) > _ACTIVE_WEIGHT, np.abs(np.cos(th3 - th4)), np.inf)
    return float(literal.min()), float(min(plus.min(), minus.min()))


def integrate_constraints(
    ansatz: AnsatzParams,
    initial=(math.pi / 4, 0.0, 0.0),
    n_points: int = 4001,
    eps_sing: float = 1e-3,
    rate_limit: float = 1e3,
) -> ThetaTrajectory:
    """Integrate theta_4..6 with fixed-step RK4 on a uniform grid.

    ``initial`` holds theta_4, theta_5, theta_6 at t = 0. The ansatz
    angles are evaluated analytically at grid points and midpoints.
    """
    if n_points < 3:
        raise ValueError("n_points must be at least 3")
    T = ansatz.T
    n = n_points - 1
    h = T / n
    fine = np.linspace(0.0, T, 2 * n + 1)
    ang, rat = ansatz.evaluate(fine)
    th1, th2, th3 = (a.tolist() for a in ang)
    dth3 = rat[2].tolist()
    tt = fine.tolist()

    y = [float(v) for v in initial]
    if len(y) != 3:
        raise ValueError("initial needs theta_4, theta_5, theta_6")
    out = np.empty((3, n_points))
    out_rates = np.empty((3, n_points))

    def f(i, th4):
        return constraint_rates(th1[i], th2[i], th3[i], dth3[i], th4, eps_sing, rate_limit, tt[i])

    k1 = f(0, y[0])
    out[:, 0] = y
    out_rates[:, 0] = k1
    for step in range(n):
        i = 2 * step
        k2 = f(i + 1, y[0] + 0.5 * h * k1[0])
        k3 = f(i + 1, y[0] + 0.5 * h * k2[0])
        k4 = f(i + 2, y[0] + h * k3[0])
        y = [y[m] + h / 6.0 * (k1[m] + 2 * k2[m] + 2 * k3[m] + k4[m]) for m in range(3)]
        if not all(math.isfinite(v) for v in y):
            raise SingularityError(tt[i + 2], "non-finite angle")
        k1 = f(i + 2, y[0])
        out[:, step + 1] = y
        out_rates[:, step + 1] = k1

    grid = fine[::2]
    theta = np.vstack([ang[:, ::2], out])
    rates = np.vstack([rat[:, ::2], out_rates])
    lit, active = _denominator_stats(theta)
    return ThetaTrajectory(grid, theta, rates, ansatz, lit, active)


# --------------------------------------------------------------------------
# shooting for C
# --------------------------------------------------------------------------


def theta5_target(direction) -> float:
    return math.pi / 2 if Direction.parse(direction) is Direction.GHZ_TO_KLM else 0.0


def default_initial(direction, forward_theta4_end: float | None = None) -> tuple[float, float, float]:
    """theta_4..6 at t = 0.

    The reverse conversion starts from the forward design's terminal
    theta_4 (time-reversal ansatz); theta_6 never enters the state or the
    fields, so it starts at 0.
    """
    d = Direction.parse(direction)
    if d is Direction.GHZ_TO_KLM:
        return (math.pi / 4, 0.0, 0.0)
    if forward_theta4_end is None:
        raise ValueError("reverse design needs the forward terminal theta_4")
    return (forward_theta4_end, math.pi / 2, 0.0)


def shooting_residual(C: float, direction, initial, theta2_scale=DEFAULT_THETA2_SCALE,
                      n_points=4001, eps_sing=1e-3, rate_limit=1e3) -> float:
    """theta_5(T) - target for a trial ``C``; raises on singular trials."""
    traj = integrate_constraints(AnsatzParams(direction, C, theta2_scale), initial,
                                 n_points, eps_sing, rate_limit)
    return float(traj.final[4] - theta5_target(direction))


def probe_residuals(direction, initial, bracket, points=5, **kw) -> list[tuple[float, float | None]]:
    """Residual at evenly spaced C values; ``None`` marks infeasible trials."""
    out = []
    for C in np.linspace(bracket[0], bracket[1], points):
        try:
            out.append((float(C), shooting_residual(float(C), direction, initial, **kw)))
        except SingularityError:
            out.append((float(C), None))
    return out


def shoot_for_C(direction, theta2_scale=DEFAULT_THETA2_SCALE, bracket=(1.0, 4.0), tol=1e-6,
                initial=None, n_points=4001, probe_points=5, eps_sing=1e-3, rate_limit=1e3,
                max_iter=200) -> float:
    """Solve theta_5(T) = target for C by bracketing bisection.

    The bracket is first probed at ``probe_points`` evenly spaced values;
    singular trials are dropped and bisection runs on the first feasible
    adjacent pair with a sign change.
    """
    d = Direction.parse(direction)
    a, b = (float(v) for v in bracket)
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
        raise ShootingError(f"invalid bracket {bracket!r}: need finite lo < hi")
    if initial is None:
        if d is Direction.GHZ_TO_KLM:
            initial = default_initial(d)
        else:
            fwd = design_pulse(Direction.GHZ_TO_KLM, DesignConfig(
                n_points=n_points, bracket=(a, b), tol=tol, theta2_scale=theta2_scale,
                eps_sing=eps_sing, rate_limit=rate_limit, probe_points=probe_points))
            initial = default_initial(d, fwd.trajectory.final[3])
    kw = dict(theta2_scale=theta2_scale, n_points=n_points, eps_sing=eps_sing, rate_limit=rate_limit)

    probes = probe_residuals(d, initial, (a, b), max(probe_points, 2), **kw)
    feasible = [(c, r) for c, r in probes if r is not None]
    if not feasible:
        raise ShootingError(f"every trial in bracket [{a}, {b}] is singular")
    for c, r in feasible:
        if abs(r) < tol:
            return c
    lo = hi = None
    for (c0, r0), (c1, r1) in zip(feasible, feasible[1:]):
        if r0 * r1 < 0:
            lo, hi = (c0, r0), (c1, r1)
            break
    if lo is None:
        raise ShootingError(f"no sign change of the residual in bracket [{a}, {b}]; try a wider bracket")

    (ca, ra), (cb, _) = lo, hi
    for _ in range(max_iter):
        cm = 0.5 * (ca + cb)
        try:
            rm = shooting_residual(cm, d, initial, **kw)
        except SingularityError as exc:
            raise ShootingError(f"singular trial C={cm} inside the bracket") from exc
        if abs(rm) < tol or cb - ca < 1e-15:
            return cm
        if (rm < 0) == (ra < 0):
            ca, ra = cm, rm
        else:
            cb = cm
    raise ShootingError("bisection did not converge")


# --------------------------------------------------------------------------
# control fields
# --------------------------------------------------------------------------


def control_fields_from_theta(traj: ThetaTrajectory) -> ControlFields:
    """Omega'_1..3 from the angles and their rates."""
    th1, th2, th3, th4 = traj.theta[:4]
    d1, d2, d3, d4, d5, d6 = traj.rates
    c1, c2, c3, c4 = np.cos(th1), np.cos(th2), np.cos(th3), np.cos(th4)
    s1, s2, s3, s4 = np.sin(th1), np.sin(th2), np.sin(th3), np.sin(th4)
    om1 = d1 + d5 * c4 * s3 + d6 * c3 * s4
    om2 = (d3 * c1 * c2 + d4 * s1 * s2
           - d5 * (c2 * c3 * c4 * s1 + c1 * s2 * s3 * s4)
           + d6 * (c1 * c3 * c4 * s2 + c2 * s1 * s3 * s4))
    om3 = d2 - d5 * c3 * s4 - d6 * c4 * s3
    return ControlFields(traj.t, np.stack([om1, om2, om3]))


def effective_hamiltonian_from_theta(theta, rates) -> np.ndarray:
    """H_eff = i (dU/dt) U^dag written directly in terms of the angles.

    Independent of the closed-form field expressions: each rate multiplies
    its generator conjugated by the rotations to its left.
    """
    gens = generators()
    h = np.zeros((4, 4), dtype=complex)
    left = np.eye(4)
    for j in range(6):
        h += rates[j] * (left @ gens[j] @ left.T)
        left = left @ generator_rotation(j, theta[j])
    return h


# --------------------------------------------------------------------------
# end-to-end design
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DesignConfig:
    n_points: int = 4001
    bracket: tuple[float, float] = (1.0, 4.0)
    tol: float = 1e-6
    theta2_scale: float = DEFAULT_THETA2_SCALE
    eps_sing: float = 1e-3
    rate_limit: float = 1e3
    probe_points: int = 5
    min_endpoint_fidelity: float = 0.999
    theta4_atol: float = 1e-3


@dataclass(frozen=True, eq=False)
class DesignResult:
    direction: Direction
    fields: ControlFields
    trajectory: ThetaTrajectory
    C: float
    endpoint_state: np.ndarray
    endpoint_fidelity: float
    config: DesignConfig
    warnings: tuple[str, ...] = field(default=())

    @property
    def residual(self) -> float:
        return float(self.trajectory.final[4] - theta5_target(self.direction))


def design_pulse(direction, config: DesignConfig | None = None) -> DesignResult:
    """Ansatz, shooting, constraint integration and field synthesis.

    The reverse direction first designs the forward pulse to obtain its
    terminal theta_4.
    """
    cfg = config or DesignConfig()
    d = Direction.parse(direction)
    kw = dict(n_points=cfg.n_points, eps_sing=cfg.eps_sing, rate_limit=cfg.rate_limit)
    if d is Direction.GHZ_TO_KLM:
        initial = default_initial(d)
    else:
        fwd = design_pulse(Direction.GHZ_TO_KLM, cfg)
        initial = default_initial(d, fwd.trajectory.final[3])
    C = shoot_for_C(d, cfg.theta2_scale, cfg.bracket, cfg.tol, initial,
                    probe_points=cfg.probe_points, **kw)
    traj = integrate_constraints(AnsatzParams(d, C, cfg.theta2_scale), initial, **kw)
    if traj.min_active_denominator < cfg.eps_sing:
        raise DesignError(f"designed trajectory passes within {traj.min_active_denominator:.3g} "
                          f"of a pole (guard {cfg.eps_sing:g})")
    fields = control_fields_from_theta(traj)

    start_state = evolve_chain_state(traj.initial)
    init_fid = abs(np.vdot(d.initial_state(4), start_state)) ** 2
    state = evolve_chain_state(traj.final)
    fid = abs(np.vdot(d.target_state(4), state)) ** 2
    if init_fid < 1 - 1e-9:
        raise DesignError(f"initial angles do not encode the initial state (overlap {init_fid:.6f})")
    if fid < cfg.min_endpoint_fidelity:
        raise DesignError(f"endpoint fidelity {fid:.6f} below {cfg.min_endpoint_fidelity}")

    notes = []
    if d is Direction.KLM_TO_GHZ:
        off = traj.final[3] - math.pi / 4
        if abs(off) > cfg.theta4_atol:
            msg = f"terminal theta_4 misses pi/4 by {off:.3g}"
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
            notes.append(msg)
    return DesignResult(d, fields, traj, C, state, float(fid), cfg, tuple(notes))


def mirror_discrepancy(forward: ControlFields, reverse: ControlFields) -> dict[str, float]:
    """Compare reverse fields with the time-mirrored forward fields.

    Reversing time flips every angle rate, so the expected relation is
    ``Omega'_rev(t) = -Omega'_fwd(T - t)``; the unsigned mirror is
    reported alongside.
    """
    T = forward.t[-1]
    mirrored = forward.prime_at(T - reverse.t[::-1])[:, ::-1]
    return {
        "negated_mirror": float(np.max(np.abs(reverse.omega_prime + mirrored))),
        "plain_mirror": float(np.max(np.abs(reverse.omega_prime - mirrored))),
    }


def max_effective_deviation(traj: ThetaTrajectory, fields: ControlFields | None = None) -> float:
    """Largest |H_eff(fields) - H_eff(angles)| over the grid."""
    fields = fields or control_fields_from_theta(traj)
    worst = 0.0
    for k in range(traj.t.size):
        a = effective_hamiltonian_from_prime(fields.omega_prime[:, k])
        b = effective_hamiltonian_from_theta(traj.theta[:, k], traj.rates[:, k])
        worst = max(worst, float(np.max(np.abs(a - b))))
    return worst
