"""ifsec: explicit-state information-flow verification for concurrent systems.

The package checks intransitive noninterference of finite machines three
ways: directly on bounded traces, via unwinding conditions on the full
state space, and by transferring unwinding verdicts across a simulation
from an abstract machine to a concrete one, with rely-guarantee reasoning
to localize the simulation obligations per component.
"""

from __future__ import annotations

from .core import (
    ActionId,
    BudgetError,
    InfoFlowConfig,
    ModelError,
    ParseError,
    SecureSystem,
    State,
    StateMachine,
    UsageError,
    build_machine,
    equidom,
    explore,
    indist,
    reachable,
    run,
)

__all__ = [
    "ActionId",
    "BudgetError",
    "InfoFlowConfig",
    "ModelError",
    "ParseError",
    "SecureSystem",
    "State",
    "StateMachine",
    "UsageError",
    "build_machine",
    "equidom",
    "explore",
    "indist",
    "reachable",
    "run",
]

__version__ = "0.1.0"
