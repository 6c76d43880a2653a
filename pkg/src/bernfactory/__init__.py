"""Bernoulli factories with certified Bernstein envelopes.

Build a ladder of dyadic lower/upper polynomial envelopes around a target
f on [0, 1], certify it in exact arithmetic, and turn it into an exact
f(p)-coin from a p-coin and a fair coin.
"""

__version__ = "0.1.0"

from .bernstein import BernsteinPoly, DyadicRational, EnvelopePair, delta_n, elevate, evaluate, leq_order, round_dyadic
from .counterexample import build_counterexample, divergence_report, rate_sweep, theta_target
from .envelope import EnvelopeLadder, LadderParams, build_envelopes, certify, ladder_from_json
from .errors import (
    ArgumentError,
    BernFactoryError,
    ConstructionFailure,
    ContractError,
    DomainError,
    EmptyConstructionError,
    InvalidSeriesError,
    LadderConsistencyError,
    PrecisionError,
    RangeViolation,
)
from .lorentz import lorentz_apply, moment_poly, tau_poly
from .simulator import FairCoin, NestedUnitEngine, PCoin, ReplayCoin, monte_carlo_tails, simulate
from .target import TargetFunction, catalog, get_target

__all__ = [
    "ArgumentError",
    "BernFactoryError",
    "BernsteinPoly",
    "ConstructionFailure",
    "ContractError",
    "DomainError",
    "DyadicRational",
    "EmptyConstructionError",
    "EnvelopeLadder",
    "EnvelopePair",
    "FairCoin",
    "InvalidSeriesError",
    "LadderConsistencyError",
    "LadderParams",
    "NestedUnitEngine",
    "PCoin",
    "PrecisionError",
    "RangeViolation",
    "ReplayCoin",
    "TargetFunction",
    "build_counterexample",
    "build_envelopes",
    "catalog",
    "certify",
    "delta_n",
    "divergence_report",
    "elevate",
    "evaluate",
    "get_target",
    "ladder_from_json",
    "leq_order",
    "lorentz_apply",
    "moment_poly",
    "monte_carlo_tails",
    "rate_sweep",
    "round_dyadic",
    "simulate",
    "tau_poly",
    "theta_target",
]
