"""Co-simulation of a power-electronics-dominated feeder, telemetry tampering,
a digital-twin state estimator, and RF / LSTM attack detectors."""

from .errors import TwinGridError
from .scenario import Scenario, SimulationTrace, benchmark_scenario, load_scenario, run_scenario
from .twin import DigitalTwin, TwinConfig, dt_dataset, plain_dataset, replay_trace

__version__ = "0.1.0"

__all__ = [
    "TwinGridError", "Scenario", "SimulationTrace", "benchmark_scenario", "load_scenario",
    "run_scenario", "DigitalTwin", "TwinConfig", "replay_trace", "plain_dataset", "dt_dataset",
]
