"""Design the control fields for both conversion directions and inspect them.

Run with ``python3 demos/design_pulses.py``.
"""

import numpy as np

from ghzklm import Direction, design_pulse
from ghzklm.design import mirror_discrepancy

for direction in Direction:
    res = design_pulse(direction)
    peak = np.abs(res.fields.omega_prime).max()
    print(f"{direction.short}: C = {res.C:.6f}, residual = {res.residual:.1e}, "
          f"peak |Omega'| = {peak:.4f}, endpoint fidelity = {res.endpoint_fidelity:.6f}")
    for w in res.warnings:
        print("  warning:", w)

fwd = design_pulse(Direction.GHZ_TO_KLM).fields
rev = design_pulse(Direction.KLM_TO_GHZ).fields
print("time-reversal comparison:", mirror_discrepancy(fwd, rev))

# sample the forward fields on a coarse grid
for t in np.linspace(0, 1, 6):
    print(f"t = {t:.1f}  Omega' = {np.round(fwd.prime_at(t), 3)}")
