"""Balancing a three-line mixed-model disassembly line with shared workstations."""

__version__ = "0.1.0"

from .analytics import ParetoArchive, brute_force_front, hypervolume, igd, pareto_filter, summarize
from .codec import Chromosome, Schedule, VisitLedger, decode, encode, equivalence_cells
from .evaluator import ObjectiveVector, check_constraints, evaluate
from .evolve import EvoConfig, run_insga3
from .model import Instance, generate_instance, read_instance, validate_instance, write_instance

__all__ = [
    "Chromosome",
    "EvoConfig",
    "Instance",
    "ObjectiveVector",
    "ParetoArchive",
    "Schedule",
    "VisitLedger",
    "brute_force_front",
    "check_constraints",
    "decode",
    "encode",
    "equivalence_cells",
    "evaluate",
    "generate_instance",
    "hypervolume",
    "igd",
    "pareto_filter",
    "read_instance",
    "run_insga3",
    "summarize",
    "validate_instance",
    "write_instance",
]
