"""Final fidelity under spontaneous emission, dephasing and thermal photons."""

from ghzklm import DecoherenceParams, Direction, SystemParams, design_pulse, lindblad_evolve, thermal_occupation
from ghzklm.dynamics import IntegratorConfig

# thermal occupation of a 2 pi x 1 MHz mode at 20 uK, in SI units
nbar = thermal_occupation(2 * 3.141592653589793 * 1e6, 20e-6)
print(f"nbar = {nbar:.5f}")

params = SystemParams.canonical()
integ = IntegratorConfig(step_fraction=1 / 100)
for d in Direction:
    fields = design_pulse(d).fields
    for label, dec in [
        ("emission only", DecoherenceParams.uniform(0.02, 0.0, 0.0)),
        ("dephasing only", DecoherenceParams.uniform(0.0, 0.02, 0.0)),
        ("all channels", DecoherenceParams.uniform(0.02, 0.02, nbar)),
    ]:
        rec = lindblad_evolve(d.initial_state(), params, fields, dec, d.target_state(), integ)
        print(f"{d.short} {label:15s} F = {rec.final_fidelity:.5f}  min eig = {rec.min_eigenvalue:.1e}")
