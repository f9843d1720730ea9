"""Energy-strategy evaluation for node fail-stops under uncoordinated checkpoints.

A closed-form energy model, a failure-time strategy selector, a deterministic
event simulator with piecewise power integration, trace emission, and a CLI.
"""

from .engine import NodeSaving, RunResult, ScriptError, SimResult, run, simulate_pass
from .model import (
    CommLink,
    FrequencyLevel,
    FrequencyTable,
    FTConfig,
    InterventionEstimate,
    NodePowerProfile,
    SleepThresholds,
    WaitAction,
    WaitMode,
)
from .scenario import (
    ComputeFor,
    FailureSpec,
    RecvFrom,
    Scenario,
    ScenarioError,
    SsendTo,
    bundled_path,
    load_scenario,
)
from .selector import InterventionPlan, evaluate, evaluate_all, estimate_times

__version__ = "0.1.0"
