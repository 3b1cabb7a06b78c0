"""Adaptive stochastic maximization of partially monotone, adaptive
submodular functions: random greedy and sampled density-greedy policies,
exact and Monte-Carlo evaluators, and brute-force oracles."""
from .errors import (
    AdasubError,
    ConstraintMismatch,
    ImpossibleObservation,
    Infeasible,
    InvalidArgument,
    ParseError,
    TooLarge,
)
from .model import CARDINALITY, KNAPSACK, NOOP, STOP, IndependentPrior, Instance, Item, JointPrior, StateSpace

__version__ = "0.1.0"
