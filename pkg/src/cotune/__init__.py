"""Coordinated tuning of multi-component systems by alternating black-box agents.

A budget allocator (Thompson Sampling over a memory buffer of recent rewards)
picks which agent runs next; agents exchange tuning decisions as context
features built from the target's internal metrics.
"""
from .allocator import AllocatorState, calibrate_rfactor, make_allocator, record_reward, select_agent
from .coordinator import TuneResult, TuningTrace, get_message, tune, tune_joint, update_message
from .core import (ComponentId, Configuration, ContextFeature, EvaluationRecord, InvalidConfiguration,
                   JointConfiguration, RewardHistory, Subspace, SubspaceKind, TransitionRecord, TuningTask,
                   validate)
from .target_sim import SyntheticSystem, SystemParams, grid_optimum

__version__ = "0.1.0"
