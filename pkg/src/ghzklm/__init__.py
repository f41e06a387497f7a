"""Pulse design and simulation for GHZ <-> KLM conversion of three Rydberg atoms.

The main entry points are :func:`design_pulse` for the inverse-engineered
control fields, :func:`schrodinger_evolve` and :func:`lindblad_evolve` for
the full three-atom dynamics, and the sweep/noise helpers in
:mod:`ghzklm.robustness`.
"""

__version__ = "0.1.0"

from .design import (  # noqa: E402
    DesignConfig,
    DesignError,
    DesignResult,
    Direction,
    ShootingError,
    SingularityError,
    design_pulse,
    shoot_for_C,
)
from .dynamics import (  # noqa: E402
    DecoherenceParams,
    IntegratorConfig,
    NormDriftError,
    NumericalError,
    TraceDriftError,
    effective_evolve,
    lindblad_evolve,
    schrodinger_evolve,
    thermal_occupation,
)
from .model import ControlFields, SystemParams  # noqa: E402
from .quantum import ghz_state, klm_state  # noqa: E402

__all__ = [
    "ControlFields", "DecoherenceParams", "DesignConfig", "DesignError", "DesignResult", "Direction",
    "IntegratorConfig", "NormDriftError", "NumericalError", "ShootingError", "SingularityError",
    "SystemParams", "TraceDriftError", "design_pulse", "effective_evolve", "ghz_state", "klm_state",
    "lindblad_evolve", "schrodinger_evolve", "shoot_for_C", "thermal_occupation",
]
