"""Control-field noise and interaction-strength mismatch."""

import numpy as np

from ghzklm import Direction, SystemParams, design_pulse
from ghzklm.robustness import Scenario, mismatch_scan, noise_trials

d = Direction.GHZ_TO_KLM
base = Scenario(d, design_pulse(d).fields, SystemParams.canonical())
print(f"clean F = {base.run():.6f}")

trials = noise_trials(base, [10.0, 20.0, 30.0], runs=5, master_seed=0)
for snr in (10.0, 20.0, 30.0):
    f = np.array([t.fidelity for t in trials if t.snr_db == snr])
    print(f"SNR {snr:4.0f} dB: mean F = {f.mean():.5f}, min F = {f.min():.5f}")

# a relative shift eta of the next-neighbour detuning leaves a phase error
# that grows like eta * V * T, so the pulse is sensitive at large V
for eta, f in mismatch_scan(base, [1e-4, 3e-4, 1e-3, 3e-3]):
    print(f"eta = {eta:.0e}: F = {f:.5f}")
