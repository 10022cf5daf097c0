from .dispersion import DispersionResult, directional_dispersion
from .grid import FieldSnapshot, SimConfig, SimulationResult, configure_threads, rhs, run, step, uniform_state
from .initial import Bend, init_from_wave
from .measure import (
    CornerReport,
    MeasurementError,
    SpeedEstimate,
    classify,
    corner_report,
    interface_track,
    measure_speed,
    shape_drift,
)

__all__ = [
    "Bend",
    "CornerReport",
    "DispersionResult",
    "FieldSnapshot",
    "MeasurementError",
    "SimConfig",
    "SimulationResult",
    "SpeedEstimate",
    "classify",
    "configure_threads",
    "corner_report",
    "directional_dispersion",
    "init_from_wave",
    "interface_track",
    "measure_speed",
    "rhs",
    "run",
    "shape_drift",
    "step",
    "uniform_state",
]
