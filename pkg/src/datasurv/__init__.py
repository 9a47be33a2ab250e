"""Epidemic-style models of data survivability in sensor/IoT networks."""

from datasurv.analytics import (
    Outcome,
    OutcomeReport,
    basic_reproduction_number,
    classify_outcome,
    conserved_quantity,
    effective_reproduction_number,
    endemic_equilibrium,
    max_informed,
    susceptible_floor,
)
from datasurv.errors import (
    ConfigError,
    DataSurvError,
    DivergenceError,
    InvalidParameterError,
    InvalidStateError,
    UndefinedThresholdError,
)
from datasurv.model import CompartmentState, ModelParams, ModelVariant, derivative
from datasurv.ode import Trajectory, final_state, integrate, integrate_batch, peak_informed

__version__ = "0.1.0"

__all__ = [
    "CompartmentState",
    "ConfigError",
    "DataSurvError",
    "DivergenceError",
    "InvalidParameterError",
    "InvalidStateError",
    "ModelParams",
    "ModelVariant",
    "Outcome",
    "OutcomeReport",
    "Trajectory",
    "UndefinedThresholdError",
    "basic_reproduction_number",
    "classify_outcome",
    "conserved_quantity",
    "derivative",
    "effective_reproduction_number",
    "endemic_equilibrium",
    "final_state",
    "integrate",
    "integrate_batch",
    "max_informed",
    "peak_informed",
    "susceptible_floor",
]
