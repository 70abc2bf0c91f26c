"""Joint energy and spectrum cooperation between two renewable-powered
cellular base stations: per-BS allocation, centralized weighted-sum cost
minimization with Pareto sweeps, a distributed proportional-fair descent,
and a time-slotted trace simulator."""

from ._kernels import BACKEND
from .domain import (
    BaseStationParams,
    CostTuple,
    DualPrices,
    ExchangeVector,
    IntraAllocation,
    MobileTerminal,
    Scenario,
    ZERO_EXCHANGE,
    cost_of,
    utility,
)
from .special import bandwidth_at_waterlevel, lambert_w0
from .intra import (
    InfeasibleBandwidthError,
    IntraResult,
    power_for_bandwidth,
    solve_benchmark,
    solve_intra,
    solve_single_bs,
)

__all__ = [
    "BACKEND",
    "BaseStationParams",
    "CostTuple",
    "DualPrices",
    "ExchangeVector",
    "InfeasibleBandwidthError",
    "IntraAllocation",
    "IntraResult",
    "MobileTerminal",
    "Scenario",
    "ZERO_EXCHANGE",
    "bandwidth_at_waterlevel",
    "cost_of",
    "lambert_w0",
    "power_for_bandwidth",
    "solve_benchmark",
    "solve_intra",
    "solve_single_bs",
    "utility",
]
