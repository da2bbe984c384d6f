from .engine import Report, Simulation, run
from .ground_truth import GroundTruthContact, ground_truth_contacts, min_distance, within_intervals
from .oracle import batch_filter_oracle, filter_log
from .scenario import AgentSpec, Path, RandomWalk, Scenario, ScenarioError, SudunSpec, TestSpec, child_seed

__all__ = [
    "AgentSpec", "GroundTruthContact", "Path", "RandomWalk", "Report", "Scenario", "ScenarioError",
    "Simulation", "SudunSpec", "TestSpec", "batch_filter_oracle", "child_seed", "filter_log",
    "ground_truth_contacts", "min_distance", "run", "within_intervals",
]
