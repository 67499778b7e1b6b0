"""circuflow: simulation and design search for circular material-flow
networks of interconnected thermodynamic compartments."""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    CompartmentId,
    Connection,
    MaterialType,
    Network,
    Port,
    ValidationReport,
    total_mass,
    validate,
)
from .compartments import Compartment, Kind, RankineState, rankine_eval  # noqa: F401
from .simulator import SimConfig, Trajectory, check_conservation, simulate  # noqa: F401
from .netio import load_network, save_network  # noqa: F401
