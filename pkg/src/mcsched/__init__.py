"""Throughput-maximizing multicast scheduling under the SINR interference model."""

from .bnb import MilpOptions, MilpProblem, MilpSolution, MilpStatus, solve_milp
from .formulations import KINDS, SchedParams, Schedule, VarMap, build, extract_schedule
from .lp import LpProblem, LpSolution, LpStatus, solve_lp
from .network import InstanceConfig, NetworkInstance, generate_instance
from .rounding import RoundingError, milp_relax_schedule
from .verify import VerificationReport, brute_force_opt, verify_schedule

__version__ = "0.1.0"
