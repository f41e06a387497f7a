"""A coarse fidelity surface over emission and dephasing rates."""

from ghzklm import Direction, SystemParams, design_pulse
from ghzklm.dynamics import IntegratorConfig
from ghzklm.robustness import Axis, Scenario, SweepGrid, sweep

d = Direction.GHZ_TO_KLM
base = Scenario(d, design_pulse(d).fields, SystemParams.canonical(),
                integrator=IntegratorConfig(step_fraction=1 / 100))
# keep both rates nonzero so every cell runs the master equation
grid = SweepGrid((Axis("Gamma", 0.005, 0.02, 3), Axis("gamma", 0.005, 0.02, 3)))
surface = sweep(base, grid)
print(surface.values.round(5))
print(surface.summary())
