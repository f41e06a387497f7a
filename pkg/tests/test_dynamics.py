import csv
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import constants
from scipy.linalg import expm

from ghzklm.design import Direction
from ghzklm.dynamics import (
    DecoherenceParams,
    IntegratorConfig,
    NormDriftError,
    effective_evolve,
    fidelity_original_picture,
    lindblad_evolve,
    lindblad_operators,
    schrodinger_evolve,
    thermal_occupation,
)
from ghzklm.model import (
    PHASE_MAP,
    RAISING_OPS,
    ControlFields,
    SystemParams,
    interaction_shift,
    rotation_operator,
)
from ghzklm.quantum import (
    POPULATION_ORDER,
    PROJ_R,
    basis_state,
    ghz_state,
    ket_to_dm,
    klm_state,
    single_atom_operator,
)

P = SystemParams.canonical()
SMALL = SystemParams.canonical(20 * math.pi)
G2K = Direction.GHZ_TO_KLM


def constant_fields(values=(3.0, -2.0, 4.0), n=3):
    t = np.linspace(0, 1, n)
    return ControlFields(t, np.tile(np.asarray(values, float)[:, None], n))


# -- thermal occupation ----------------------------------------------------


def test_thermal_occupation_reference_point():
    assert thermal_occupation(2 * math.pi * 1e6, 20e-6) == pytest.approx(0.0999, abs=5e-4)


def test_thermal_occupation_limits():
    omega = 1e6
    temp_ln2 = constants.hbar * omega / (constants.k * math.log(2))
    assert thermal_occupation(omega, temp_ln2) == pytest.approx(1.0)
    frozen = constants.hbar * omega / (constants.k * 50)
    assert thermal_occupation(omega, frozen) < 1e-21
    with pytest.raises(ValueError):
        thermal_occupation(omega, 0.0)
    with pytest.raises(ValueError):
        thermal_occupation(-1.0, 1.0)


@given(st.floats(1e-7, 1e-3), st.floats(1.01, 10))
def test_thermal_occupation_grows_with_temperature(temp, factor):
    w = 2 * math.pi * 1e6
    assert thermal_occupation(w, temp * factor) > thermal_occupation(w, temp)


# -- decoherence model -----------------------------------------------------


def test_lindblad_operator_set():
    assert lindblad_operators(DecoherenceParams()) == []
    assert len(lindblad_operators(DecoherenceParams.uniform(0.02, 0.02, 0.1))) == 9
    assert len(lindblad_operators(DecoherenceParams.uniform(0.02, 0.0, 0.0))) == 3
    ops = lindblad_operators(DecoherenceParams.uniform(Gamma=0.5, nbar=1.0))
    down, up = ops[0], ops[1]
    # atom 1: |0><r| weighted by (n+1) Gamma, |r><0| by n Gamma
    assert down[0, 4] == pytest.approx(math.sqrt(2 * 0.5))
    assert up[4, 0] == pytest.approx(math.sqrt(0.5))


def test_decoherence_validation():
    with pytest.raises(ValueError):
        DecoherenceParams.uniform(-0.1)
    assert DecoherenceParams.uniform(0, 0, 1.0).is_zero
    assert DecoherenceParams((0.01, 0.0, 0.0)).Gamma == (0.01, 0.0, 0.0)


def test_integrator_guards():
    with pytest.raises(ValueError):
        IntegratorConfig(step_fraction=1 / 10).step_count(P, 1.0)
    with pytest.raises(ValueError):
        IntegratorConfig(scheme="euler")
    assert IntegratorConfig().step_count(P, 1.0) == math.ceil(400 * 3 * P.V / (2 * math.pi) - 1e-9)


# -- fidelity --------------------------------------------------------------


def test_fidelity_conventions():
    t = 0.37
    r = rotation_operator(t, P)
    psi = ghz_state()
    rho = r @ ket_to_dm(psi) @ r.conj().T
    assert fidelity_original_picture(rho, psi, t, P) == pytest.approx(1.0)
    assert fidelity_original_picture(ket_to_dm(basis_state("000")), psi, 0.0, P) == pytest.approx(0.5)
    rotated = r.conj().T @ rho @ r
    plain = abs(np.vdot(psi, rotated @ psi))
    assert fidelity_original_picture(rho, psi, t, P) == pytest.approx(plain, abs=1e-12)


# -- closed system ---------------------------------------------------------


def test_drive_free_ground_state_is_stationary():
    rec = schrodinger_evolve(basis_state("000"), P, ControlFields.zeros())
    np.testing.assert_allclose(rec.populations[:, 0], 1.0, atol=1e-12)
    np.testing.assert_allclose(rec.fidelity, 1.0, atol=1e-12)


def test_drive_free_ghz_keeps_fidelity():
    rec = schrodinger_evolve(ghz_state(), P, ControlFields.zeros(), ghz_state())
    # the only loss is RK4 damping of the fastest phase: n (h 3V)^6 / 144 per unit amplitude
    n = IntegratorConfig().step_count(P, 1.0)
    predicted = n * (2 * math.pi / 400) ** 6 / 144
    assert 1 - np.min(rec.fidelity) == pytest.approx(predicted, rel=1e-2)
    assert rec.max_norm_drift < 1e-8


def test_rk4_is_fourth_order():
    f = constant_fields()
    params = SystemParams.canonical(6 * math.pi)
    psi0 = ghz_state()
    ref = schrodinger_evolve(psi0, params, f, integ=IntegratorConfig(step_fraction=1 / 3200)).final_state
    errs = [np.linalg.norm(schrodinger_evolve(psi0, params, f, integ=IntegratorConfig(
        step_fraction=s, norm_tol=1.0)).final_state - ref) for s in (1 / 25, 1 / 50)]
    assert 12 < errs[0] / errs[1] < 20


def test_rk4_matches_adaptive():
    f = constant_fields()
    params = SystemParams.canonical(6 * math.pi)
    a = schrodinger_evolve(ghz_state(), params, f, klm_state(), IntegratorConfig())
    b = schrodinger_evolve(ghz_state(), params, f, klm_state(), IntegratorConfig(scheme="adaptive"))
    assert abs(a.final_fidelity - b.final_fidelity) < 1e-8
    assert np.max(np.abs(a.final_state - b.final_state)) < 1e-7


def detuning_frame_oracle(psi0, params, omega_prime, T=1.0):
    """Exact state at T for constant drive amplitudes.

    In the frame exp(-i D t) with D = sum_k delta_k |r><r|_k the Hamiltonian
    is time independent, so the propagator is a single matrix exponential.
    """
    om = np.asarray(omega_prime) * PHASE_MAP
    D = sum(d * single_atom_operator(PROJ_R, k + 1) for k, d in enumerate(params.delta))
    drive = sum(om[k] * RAISING_OPS[k] for k in range(3))
    h_frame = drive + drive.conj().T + interaction_shift(params) - D
    return expm(-1j * D * T) @ expm(-1j * h_frame * T) @ psi0


@pytest.mark.parametrize("V", [6 * math.pi, 100 * math.pi])
def test_schrodinger_matches_exact_frame_oracle(V):
    params = SystemParams.canonical(V)
    w = (3.0, -2.0, 4.0)
    rec = schrodinger_evolve(ghz_state(), params, constant_fields(w))
    # accumulated RK4 phase error at the default step is below 5e-7 even at 3V ~ 940/T
    exact = detuning_frame_oracle(ghz_state(), params, w)
    assert np.max(np.abs(rec.final_state - exact)) < 1e-6


@pytest.mark.parametrize("direction", list(Direction))
def test_closed_system_conversion(direction, forward, reverse):
    res = forward if direction is G2K else reverse
    rec = schrodinger_evolve(direction.initial_state(), P, res.fields, direction.target_state())
    assert rec.final_fidelity > 0.997
    assert rec.max_norm_drift < 1e-8
    assert rec.leakage()[-1] < 0.003
    assert np.all(rec.fidelity <= 1 + 1e-9) and np.all(rec.fidelity >= 0)


def test_full_model_approaches_effective_as_V_grows(forward):
    eff = effective_evolve(G2K.initial_state(4), forward.fields, G2K.target_state(4))
    assert eff.final_fidelity > 0.999
    fids = [schrodinger_evolve(G2K.initial_state(), SystemParams.canonical(v * math.pi), forward.fields,
                               G2K.target_state()).final_fidelity for v in (50, 100, 200)]
    assert fids[0] < fids[1] < fids[2] < eff.final_fidelity + 1e-9


def test_coarse_step_raises_norm_drift(forward):
    with pytest.raises(NormDriftError):
        schrodinger_evolve(G2K.initial_state(), P, forward.fields, G2K.target_state(),
                           IntegratorConfig(step_fraction=1 / 20))


def test_rejects_unnormalized_initial():
    with pytest.raises(ValueError):
        schrodinger_evolve(2 * ghz_state(), P, ControlFields.zeros())


def test_effective_model_confined(forward):
    rec = effective_evolve(G2K.initial_state(8), forward.fields, G2K.target_state(8), embed=True)
    assert np.all(rec.leakage() == 0.0)
    assert rec.final_fidelity > 0.999


def test_trajectory_csv(tmp_path, forward):
    rec = effective_evolve(G2K.initial_state(8), forward.fields, G2K.target_state(8), embed=True, n_record=11)
    path = tmp_path / "traj.csv"
    rec.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "F"] + [f"pop_{s}" for s in POPULATION_ORDER]
    assert len(rows) == 12


# -- open system -----------------------------------------------------------


def test_lindblad_without_decoherence_matches_schrodinger(forward):
    integ = IntegratorConfig(step_fraction=1 / 200)
    a = schrodinger_evolve(G2K.initial_state(), SMALL, forward.fields, G2K.target_state(), integ)
    b = lindblad_evolve(G2K.initial_state(), SMALL, forward.fields, DecoherenceParams(), G2K.target_state(),
                        integ)
    assert np.max(np.abs(a.populations - b.populations)) < 1e-6
    assert abs(a.final_fidelity - b.final_fidelity) < 1e-6


def test_lindblad_invariants(forward):
    dec = DecoherenceParams.uniform(0.05, 0.05, 0.5)
    rec = lindblad_evolve(G2K.initial_state(), SMALL, forward.fields, dec, G2K.target_state(),
                          IntegratorConfig(step_fraction=1 / 100))
    assert rec.max_trace_drift < 1e-6
    assert rec.max_hermiticity_error < 1e-8
    assert rec.min_eigenvalue > -1e-6
    assert np.all(rec.fidelity <= 1 + 1e-9)


def test_lindblad_adaptive_cross_check(forward):
    dec = DecoherenceParams.uniform(0.02, 0.02, 0.1)
    params = SystemParams.canonical(10 * math.pi)
    a = lindblad_evolve(G2K.initial_state(), params, forward.fields, dec, G2K.target_state())
    b = lindblad_evolve(G2K.initial_state(), params, forward.fields, dec, G2K.target_state(),
                        IntegratorConfig(scheme="adaptive"))
    assert abs(a.final_fidelity - b.final_fidelity) < 1e-6


def test_decoherence_lowers_fidelity(forward):
    integ = IntegratorConfig(step_fraction=1 / 100)
    clean = lindblad_evolve(G2K.initial_state(), SMALL, forward.fields, DecoherenceParams(), G2K.target_state(),
                            integ).final_fidelity
    noisy = lindblad_evolve(G2K.initial_state(), SMALL, forward.fields, DecoherenceParams.uniform(0.02, 0.02),
                            G2K.target_state(), integ).final_fidelity
    assert noisy < clean


def test_mixed_initial_state_requires_target():
    rho = ket_to_dm(ghz_state())
    with pytest.raises(ValueError):
        lindblad_evolve(rho, P, ControlFields.zeros(), DecoherenceParams())
    with pytest.raises(ValueError):
        lindblad_evolve(2 * rho, P, ControlFields.zeros(), DecoherenceParams(), ghz_state())


def test_negative_eigenvalue_only_warns():
    rho = ket_to_dm(ghz_state())
    integ = IntegratorConfig(step_fraction=1 / 20, neg_eig_tol=-1.0)  # any eigenvalue below 1 trips it
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rec = lindblad_evolve(rho, SMALL, ControlFields.zeros(), DecoherenceParams.uniform(0.1), ghz_state(), integ)
    assert any("eigenvalue" in str(w.message) for w in caught)
    assert rec.final_fidelity > 0
