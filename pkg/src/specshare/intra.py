"""Single-BS cost minimization under a given inter-system exchange.

The optimum has both the QoS constraints and the bandwidth budget tight,
so it reduces to a waterfilling problem: find the water level whose
per-terminal bandwidths exactly exhaust the effective band, then read
powers, the energy split and the marginal prices off closed forms.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .domain import (
    DualPrices,
    ExchangeVector,
    IntraAllocation,
    Scenario,
    ZERO_EXCHANGE,
)


class InfeasibleBandwidthError(ValueError):
    """The exchange vector leaves a BS without usable spectrum."""

    def __init__(self, bs_index, effective_bandwidth):
        self.bs_index = bs_index
        self.effective_bandwidth = effective_bandwidth
        super().__init__(
            f"BS {bs_index}: effective bandwidth {effective_bandwidth:g} Hz <= 0"
        )


@dataclass(frozen=True)
class IntraResult:
    alloc: IntraAllocation
    cost: float
    duals: DualPrices
    effective_bandwidth: float
    effective_load: float  # negative when inbound energy exceeds consumption


def power_for_bandwidth(b, mt, n0):
    """Power that pins the terminal's rate to its QoS floor on band b."""
    if b <= 0:
        raise ValueError("power_for_bandwidth: bandwidth must be > 0")
    return b * n0 / mt.channel_gain * (2.0 ** (mt.qos_rate / b) - 1.0)


def solve_single_bs(bs, mts, noise_psd, effective_bandwidth, extra_load=0.0):
    """Optimal allocation of one BS over ``effective_bandwidth`` Hz.

    ``extra_load`` is the net power the exchange adds to this BS's bill
    (own transfers minus delivered inbound energy). Returns an
    IntraResult; purchases are clamped at zero if inbound energy alone
    covers everything.
    """
    if effective_bandwidth <= 0:
        raise InfeasibleBandwidthError(-1, effective_bandwidth)
    r = np.array([mt.qos_rate for mt in mts], dtype=np.float64)
    g = np.array([mt.channel_gain for mt in mts], dtype=np.float64)
    nu, b = _kernels.water_level(r, g, noise_psd, effective_bandwidth)
    p = b * noise_psd / g * (np.exp2(r / b) - 1.0)
    tx = float(np.sum(p))
    load = tx / bs.pa_efficiency + bs.nontx_power_w + extra_load
    supply = max(load, 0.0)
    renewable = min(supply, bs.renewable_cap_w)
    grid = supply - renewable
    mu = bs.price_renewable if load <= bs.renewable_cap_w else bs.price_grid
    alloc = IntraAllocation(
        renewable=renewable,
        grid=grid,
        per_mt=tuple((float(bi), float(pi)) for bi, pi in zip(b, p)),
    )
    cost = bs.price_renewable * renewable + bs.price_grid * grid
    return IntraResult(
        alloc=alloc,
        cost=cost,
        duals=DualPrices.from_water_level(mu, nu),
        effective_bandwidth=effective_bandwidth,
        effective_load=load,
    )


def solve_intra(bs_index, scenario, x_ex):
    """Minimum cost of BS ``bs_index`` (0 or 1) given the exchange vector."""
    if bs_index not in (0, 1):
        raise ValueError("bs_index must be 0 or 1")
    other = 1 - bs_index
    e = (x_ex.e1, x_ex.e2)
    w = (x_ex.w1, x_ex.w2)
    bs = scenario.bs[bs_index]
    w_eff = bs.bandwidth_hz + scenario.spectrum_coop_beta * w[other] - w[bs_index]
    if w_eff <= 0:
        raise InfeasibleBandwidthError(bs_index, w_eff)
    extra = e[bs_index] - scenario.energy_coop_beta * e[other]
    return solve_single_bs(bs, scenario.mts[bs_index], scenario.noise_psd, w_eff, extra)


def solve_benchmark(scenario):
    """Both BSs at zero exchange: the non-cooperative reference point."""
    return (
        solve_intra(0, scenario, ZERO_EXCHANGE),
        solve_intra(1, scenario, ZERO_EXCHANGE),
    )


def intra_cost(bs_index, scenario, x_ex):
    return solve_intra(bs_index, scenario, x_ex).cost
