"""Flow-sampling policies for software-defined IoT monitoring."""
from .model import (CounterState, DeviceParams, PathConfig, geometric_accuracy_profile,
                    immediate_cost, step, transition_probability)
from .policies import PolicySpec

__version__ = "0.1.0"

__all__ = ["CounterState", "DeviceParams", "PathConfig", "PolicySpec",
           "geometric_accuracy_profile", "immediate_cost", "step",
           "transition_probability"]
