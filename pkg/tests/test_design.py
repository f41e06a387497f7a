import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from ghzklm.acceptance import commutator_closure_residual
from ghzklm.design import (
    AnsatzParams,
    BoundaryConditions,
    DesignConfig,
    DesignError,
    Direction,
    ShootingError,
    SingularityError,
    constraint_rates,
    default_initial,
    design_pulse,
    effective_hamiltonian_from_theta,
    evolution_operator,
    evolve_chain_state,
    generator_rotation,
    generators,
    integrate_constraints,
    max_effective_deviation,
    mirror_discrepancy,
    probe_residuals,
    shoot_for_C,
    theta_ansatz,
)
from ghzklm.model import effective_hamiltonian_from_prime
from ghzklm.quantum import ghz_state, klm_state

FORWARD_C = 2.408444404602051
REVERSE_C = 2.408444404602051

angle = st.floats(-math.pi, math.pi, allow_nan=False)
six_angles = st.lists(angle, min_size=6, max_size=6).map(np.array)


def test_generators_hermitian_and_planar():
    gens = generators()
    planes = [(1, 0), (3, 2), (1, 2), (3, 0), (2, 0), (3, 1)]
    for g, (b, a) in zip(gens, planes):
        np.testing.assert_array_equal(g, g.conj().T)
        assert g[b, a] == 1j and g[a, b] == -1j
        assert np.count_nonzero(g) == 2


@given(st.integers(0, 5), angle)
def test_rotation_matches_expm(j, th):
    np.testing.assert_allclose(generator_rotation(j, th), expm(-1j * th * generators()[j]), atol=1e-13)


def test_evolution_operator_identity():
    np.testing.assert_array_equal(evolution_operator(np.zeros(6)), np.eye(4))
    with pytest.raises(ValueError):
        evolution_operator(np.zeros(5))


@given(six_angles, six_angles)
def test_evolution_operator_unitary_and_composes(th, th0):
    u = evolution_operator(th, th0)
    assert np.max(np.abs(u @ u.conj().T - np.eye(4))) < 1e-12
    expected = evolution_operator(th) @ evolution_operator(th0).conj().T
    np.testing.assert_allclose(u, expected, atol=1e-12)


@given(six_angles)
def test_first_entry_closed_form(th):
    oracle = np.eye(4, dtype=complex)
    for j, g in enumerate(generators()):
        oracle = oracle @ expm(-1j * th[j] * g)
    u = evolution_operator(th)
    np.testing.assert_allclose(u, oracle, atol=1e-12)
    c, s = np.cos(th), np.sin(th)
    assert u[0, 0] == pytest.approx(c[0] * c[3] * c[4] - s[0] * s[2] * s[4], abs=1e-12)


def test_boundary_states():
    np.testing.assert_allclose(evolve_chain_state(np.zeros(6)), [1, 0, 0, 0])
    ghz = np.array([0, 0, 0.7, math.pi / 4, 0, -1.1])
    np.testing.assert_allclose(evolve_chain_state(ghz), ghz_state(4), atol=1e-15)
    klm = np.array([-math.pi / 4, math.pi / 4, math.pi / 4, 0.3, math.pi / 2, 2.0])
    np.testing.assert_allclose(evolve_chain_state(klm), klm_state(4), atol=1e-15)


@given(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.sampled_from(["ghz", "klm"]))
def test_boundary_insensitive_to_free_angles(a, b, end):
    fixed = BoundaryConditions.ghz_end() if end == "ghz" else BoundaryConditions.klm_end()
    free = [j for j in range(1, 7) if j not in fixed]
    base = np.zeros(6)
    for j, v in fixed.items():
        base[j - 1] = v
    moved = base.copy()
    moved[free[0] - 1] += a
    moved[free[1] - 1] += b
    assert np.max(np.abs(evolve_chain_state(moved) - evolve_chain_state(base))) < 1e-12


def test_commutators_close():
    assert commutator_closure_residual() < 1e-10


def test_effective_hamiltonian_in_generator_basis():
    w = np.array([0.7, -1.3, 2.2])
    a = generators()
    np.testing.assert_allclose(effective_hamiltonian_from_prime(w), w[0] * a[0] + w[1] * a[2] + w[2] * a[1])


# -- ansatz ----------------------------------------------------------------


def test_ansatz_endpoints():
    (th, _) = theta_ansatz(Direction.GHZ_TO_KLM, 0.0, 1.0, FORWARD_C)
    np.testing.assert_allclose(th, [0, 0, math.pi / 4], atol=1e-15)
    (th, _) = theta_ansatz(Direction.GHZ_TO_KLM, 1.0, 1.0, FORWARD_C)
    np.testing.assert_allclose(th, [-math.pi / 4, math.pi / 4, math.pi / 4], atol=1e-14)
    (th, _) = theta_ansatz(Direction.KLM_TO_GHZ, 0.0, 1.0, REVERSE_C)
    np.testing.assert_allclose(th, [-math.pi / 4, math.pi / 4, math.pi / 4], atol=1e-14)
    (th, _) = theta_ansatz(Direction.KLM_TO_GHZ, 1.0, 1.0, REVERSE_C)
    np.testing.assert_allclose(th, [0, 0, math.pi / 4], atol=1e-14)


def test_raw_theta2_ends_at_two():
    (th, _) = theta_ansatz(Direction.GHZ_TO_KLM, 1.0, 1.0, FORWARD_C, theta2_scale=1.0)
    assert th[1] == pytest.approx(2.0)
    # scaling by pi/8 is what restores the pi/4 boundary
    assert th[1] * math.pi / 8 == pytest.approx(math.pi / 4)


@settings(max_examples=40)
@given(st.floats(0.01, 0.99), st.floats(0.5, 4.0), st.sampled_from(list(Direction)))
def test_ansatz_rates_match_finite_differences(t, C, d):
    h = 1e-6
    (lo, _), (hi, _) = theta_ansatz(d, t - h, 1.0, C), theta_ansatz(d, t + h, 1.0, C)
    _, rates = theta_ansatz(d, t, 1.0, C)
    np.testing.assert_allclose((hi - lo) / (2 * h), rates, atol=1e-6)


def test_scaled_theta2_mirrors_theta1():
    t = np.linspace(0, 1, 101)
    th, _ = theta_ansatz(Direction.GHZ_TO_KLM, t, 1.0, FORWARD_C)
    np.testing.assert_allclose(th[1], -th[0], atol=1e-15)


def test_ansatz_rejects_out_of_range():
    with pytest.raises(ValueError):
        theta_ansatz(Direction.GHZ_TO_KLM, 1.1, 1.0, FORWARD_C)
    with pytest.raises(ValueError):
        AnsatzParams(Direction.GHZ_TO_KLM, float("nan"))


# -- constraint ODE --------------------------------------------------------


def literal_rates(th1, th2, th3, dth3, th4):
    """The constraint equations with their shared denominator written out."""
    den = math.cos(2 * th3) + math.cos(2 * th4)
    s3, s4, c3, c4 = math.sin(th3), math.sin(th4), math.cos(th3), math.cos(th4)
    t1, t2 = math.tan(th1), math.tan(th2)
    return (dth3 * t1 * t2,
            2 * dth3 * (s3 * s4 * t2 - c3 * c4 * t1) / den,
            2 * dth3 * (c3 * c4 * t2 - s3 * s4 * t1) / den)


@settings(max_examples=200)
@given(st.floats(-1.2, 1.2), st.floats(-1.2, 1.2), angle, st.floats(-5, 5), angle)
def test_partial_fractions_match_literal_form(th1, th2, th3, dth3, th4):
    den = math.cos(2 * th3) + math.cos(2 * th4)
    assume(abs(den) > 0.05)
    got = constraint_rates(th1, th2, th3, dth3, th4, rate_limit=1e9)
    np.testing.assert_allclose(got, literal_rates(th1, th2, th3, dth3, th4), rtol=1e-9, atol=1e-12)


@given(angle, st.floats(-5, 5), angle)
def test_zero_theta12_freezes_constraints(th3, dth3, th4):
    assert constraint_rates(0.0, 0.0, th3, dth3, th4) == (0.0, 0.0, 0.0)


def test_true_pole_raises():
    with pytest.raises(SingularityError):
        constraint_rates(-0.3, 0.4, math.pi / 2 - 0.2, 3.0, 0.2)


def test_forward_integration_hits_target():
    traj = integrate_constraints(AnsatzParams(Direction.GHZ_TO_KLM, FORWARD_C), default_initial("g2k"))
    assert traj.final[4] == pytest.approx(math.pi / 2, abs=1e-6)
    assert traj.theta.shape == (6, 4001)
    assert traj.rate_consistency() < 1e-4


def test_richardson_step_halving():
    ans = AnsatzParams(Direction.GHZ_TO_KLM, FORWARD_C)
    a = integrate_constraints(ans, n_points=4001)
    b = integrate_constraints(ans, n_points=8001)
    assert abs(a.final[4] - b.final[4]) < 1e-8


def test_literal_denominator_vanishes_at_start(forward):
    # theta_3(0) = theta_4(0) = pi/4 forces cos2th3 + cos2th4 = 0; the zero is removable
    assert forward.trajectory.min_denominator < 1e-12
    assert forward.trajectory.min_active_denominator > forward.config.eps_sing


# -- shooting --------------------------------------------------------------


def test_forward_shooting_constant(forward):
    assert forward.C == pytest.approx(2.4084, abs=5e-4)
    assert forward.C == pytest.approx(FORWARD_C, abs=1e-12)


def test_reverse_shooting_constant_frozen(reverse):
    assert reverse.C == pytest.approx(REVERSE_C, abs=1e-12)
    assert abs(reverse.residual) < 1e-6


def test_probe_changes_sign_once():
    probes = probe_residuals(Direction.GHZ_TO_KLM, default_initial("g2k"), (1.0, 4.0), 5)
    feasible = [r for _, r in probes if r is not None]
    signs = np.sign(feasible)
    assert len(feasible) >= 2
    assert np.count_nonzero(np.diff(signs)) == 1


def test_invalid_bracket_named():
    with pytest.raises(ShootingError, match=r"\(3\.0, 1\.0\)"):
        shoot_for_C(Direction.GHZ_TO_KLM, bracket=(3.0, 1.0))


def test_bracket_without_sign_change():
    with pytest.raises(ShootingError, match="wider bracket"):
        shoot_for_C(Direction.GHZ_TO_KLM, bracket=(1.0, 1.5))


def test_raw_theta2_scale_is_singular():
    with pytest.raises(DesignError):
        design_pulse(Direction.GHZ_TO_KLM, DesignConfig(theta2_scale=1.0))


# -- designed pulses -------------------------------------------------------


def test_endpoint_fidelities(forward, reverse):
    assert forward.endpoint_fidelity > 0.999
    assert reverse.endpoint_fidelity > 0.999
    assert abs(np.vdot(klm_state(4), forward.endpoint_state)) ** 2 > 0.999
    assert abs(np.vdot(ghz_state(4), reverse.endpoint_state)) ** 2 > 0.999


def test_reverse_starts_from_forward_terminal_angle(forward, reverse):
    assert reverse.trajectory.initial[3] == forward.trajectory.final[3]
    assert reverse.trajectory.final[3] == pytest.approx(math.pi / 4, abs=1e-3)
    assert reverse.warnings == ()


def test_pulse_amplitude(forward):
    assert forward.fields.max_amplitude() == pytest.approx(11.4, abs=0.5)


def test_fields_match_generator_expansion(forward):
    assert max_effective_deviation(forward.trajectory) < 1e-12


def test_fields_reproduce_propagator_derivative(forward):
    tr = forward.trajectory
    dt = tr.t[1] - tr.t[0]
    worst = 0.0
    for k in range(2, tr.t.size - 2, 97):
        us = [evolution_operator(tr.theta[:, k + m]) for m in (-2, -1, 1, 2)]
        dudt = (us[0] - 8 * us[1] + 8 * us[2] - us[3]) / (12 * dt)
        oracle = 1j * dudt @ evolution_operator(tr.theta[:, k]).conj().T
        worst = max(worst, np.max(np.abs(oracle - effective_hamiltonian_from_prime(forward.fields.omega_prime[:, k]))))
    assert worst < 1e-6


def test_theta_form_matches_fields(forward):
    tr = forward.trajectory
    k = 1234
    np.testing.assert_allclose(effective_hamiltonian_from_theta(tr.theta[:, k], tr.rates[:, k]),
                               effective_hamiltonian_from_prime(forward.fields.omega_prime[:, k]), atol=1e-12)


def test_reverse_is_negated_time_mirror(forward, reverse):
    d = mirror_discrepancy(forward.fields, reverse.fields)
    assert d["negated_mirror"] < 1e-10
    assert d["plain_mirror"] > 1.0
