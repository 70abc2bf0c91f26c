"""Canonical data model: problem instances, decisions, results, units.

Everything downstream works in linear SI units (Hz, W, bits/s, linear
power gains). Config files may speak MHz / dBm/Hz / dB; the converters
here are the only place logarithmic units appear.
"""

import math
from dataclasses import dataclass


def mhz_to_hz(x):
    return float(x) * 1e6


def mbps_to_bps(x):
    return float(x) * 1e6


def dbm_per_hz_to_w_per_hz(x):
    return 10.0 ** ((float(x) - 30.0) / 10.0)


def db_to_linear(x):
    return 10.0 ** (float(x) / 10.0)


def channel_gain_from_distance(d_m, c0_db, d0_m, exponent):
    """Power gain at distance d under the simplified pathloss model
    g = c0 * (d/d0)^-exponent, with c0 given in dB."""
    if d_m <= 0 or d0_m <= 0:
        raise ValueError("distances must be > 0")
    return db_to_linear(c0_db) * (d_m / d0_m) ** (-exponent)


@dataclass(frozen=True)
class BaseStationParams:
    """Static parameters of one base station (SI units)."""

    bandwidth_hz: float           # licensed band W
    nontx_power_w: float          # constant non-transmission draw P_c
    renewable_cap_w: float        # max purchasable renewable power
    price_renewable: float        # cost per W of renewable energy
    price_grid: float             # cost per W of grid energy
    pa_efficiency: float = 1.0    # power-amplifier efficiency, in (0, 1]

    def __post_init__(self):
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be > 0")
        if self.nontx_power_w < 0:
            raise ValueError("nontx_power_w must be >= 0")
        if self.renewable_cap_w < 0:
            raise ValueError("renewable_cap_w must be >= 0")
        if not (0 < self.pa_efficiency <= 1):
            raise ValueError("pa_efficiency must be in (0, 1]")
        if not (0 < self.price_renewable < self.price_grid):
            raise ValueError("prices must satisfy 0 < price_renewable < price_grid")


@dataclass(frozen=True)
class MobileTerminal:
    """One served terminal: linear channel power gain and QoS rate floor."""

    channel_gain: float   # linear, not dB
    qos_rate: float       # bits/s

    def __post_init__(self):
        if self.channel_gain <= 0:
            raise ValueError("channel_gain must be > 0 (linear units)")
        if self.qos_rate <= 0:
            raise ValueError("qos_rate must be > 0")


@dataclass(frozen=True)
class Scenario:
    """A full two-BS problem instance for one time slot."""

    bs: tuple                 # (BaseStationParams, BaseStationParams)
    mts: tuple                # pair of MobileTerminal tuples
    noise_psd: float          # W/Hz
    energy_coop_beta: float   # delivered fraction of transferred energy
    spectrum_coop_beta: int   # 1 if spectrum can move between the BSs, else 0

    def __post_init__(self):
        if len(self.bs) != 2:
            raise ValueError("scenario needs exactly two base stations")
        if len(self.mts) != 2 or any(len(side) == 0 for side in self.mts):
            raise ValueError("both terminal lists must be non-empty")
        object.__setattr__(self, "bs", tuple(self.bs))
        object.__setattr__(self, "mts", tuple(tuple(side) for side in self.mts))
        if self.noise_psd <= 0:
            raise ValueError("noise_psd must be > 0")
        if not (0 <= self.energy_coop_beta <= 1):
            raise ValueError("energy_coop_beta must be in [0, 1]")
        if self.spectrum_coop_beta not in (0, 1):
            raise ValueError("spectrum_coop_beta must be 0 or 1")

    def gains(self, i):
        return tuple(mt.channel_gain for mt in self.mts[i])

    def rates(self, i):
        return tuple(mt.qos_rate for mt in self.mts[i])


@dataclass(frozen=True)
class ExchangeVector:
    """Inter-system decision: energy sent by each BS (W) and spectrum
    ceded by each BS (Hz)."""

    e1: float = 0.0
    e2: float = 0.0
    w1: float = 0.0
    w2: float = 0.0

    def __post_init__(self):
        if min(self.e1, self.e2, self.w1, self.w2) < 0:
            raise ValueError("exchange components must be >= 0")

    def canonical(self):
        """Remove the offsetting part of counterflows; the result costs
        each BS no more than the original."""
        de = min(self.e1, self.e2)
        dw = min(self.w1, self.w2)
        return ExchangeVector(self.e1 - de, self.e2 - de, self.w1 - dw, self.w2 - dw)

    def as_tuple(self):
        return (self.e1, self.e2, self.w1, self.w2)


ZERO_EXCHANGE = ExchangeVector()


@dataclass(frozen=True)
class IntraAllocation:
    """One BS's own decisions: energy purchases plus per-terminal
    (bandwidth, power) pairs."""

    renewable: float   # W bought from the renewable firm
    grid: float        # W bought from the grid
    per_mt: tuple      # ((b_hz, p_w), ...)

    def __post_init__(self):
        if self.renewable < 0 or self.grid < 0:
            raise ValueError("energy purchases must be >= 0")
        object.__setattr__(self, "per_mt", tuple(tuple(bp) for bp in self.per_mt))


@dataclass(frozen=True)
class DualPrices:
    """Marginal prices at a BS optimum: mu (cost/W of load), lam
    (cost/Hz of bandwidth) and the water level nu = lam/mu (W/Hz)."""

    mu: float
    lam: float
    nu: float

    @classmethod
    def from_water_level(cls, mu, nu):
        return cls(mu=mu, lam=nu * mu, nu=nu)


@dataclass(frozen=True)
class CostTuple:
    c1: float
    c2: float

    def __post_init__(self):
        if self.c1 < -1e-12 or self.c2 < -1e-12:
            raise ValueError("costs must be >= 0")

    def total(self):
        return self.c1 + self.c2


def utility(b, p, g, n0):
    """Achieved rate b * log2(1 + g*p/(b*n0)) in bits/s; zero power or
    zero bandwidth yields zero."""
    if p == 0.0:
        return 0.0
    if b <= 0.0:
        raise ValueError("utility: bandwidth must be > 0 when power is positive")
    if p < 0.0 or g <= 0.0 or n0 <= 0.0:
        raise ValueError("utility: need p >= 0, g > 0, n0 > 0")
    return b * math.log2(1.0 + g * p / (b * n0))


def cost_of(alloc, bs):
    """Energy bill of an allocation at one BS's prices."""
    return bs.price_renewable * alloc.renewable + bs.price_grid * alloc.grid
