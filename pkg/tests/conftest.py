import os

import numpy as np
import pytest

from specshare.domain import BaseStationParams, MobileTerminal, Scenario

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


def config_path(name):
    return os.path.join(CONFIG_DIR, name)


def golden_scenario():
    """Desk-scale normalized scenario: BS1 bandwidth-starved,
    BS2 energy-starved; partial cooperation feasible."""
    bs1 = BaseStationParams(2.0, 1.0, 6.0, 0.2, 1.0)
    bs2 = BaseStationParams(6.0, 1.0, 1.0, 0.2, 1.0)
    heavy = MobileTerminal(1.0, 2.0)
    light = MobileTerminal(1.0, 1.0)
    return Scenario((bs1, bs2), ((heavy, heavy), (light, light)), 1.0, 0.8, 1)


def mirror_scenario():
    """Golden with the BS roles swapped; drives the other branch."""
    g = golden_scenario()
    return Scenario((g.bs[1], g.bs[0]), (g.mts[1], g.mts[0]),
                    g.noise_psd, g.energy_coop_beta, g.spectrum_coop_beta)


def symmetric_scenario():
    bs = BaseStationParams(2.0, 1.0, 6.0, 0.2, 1.0)
    heavy = MobileTerminal(1.0, 2.0)
    return Scenario((bs, bs), ((heavy, heavy), (heavy, heavy)), 1.0, 0.8, 1)


def rand_scenario(rng, kmax=10, style="normalized", beta_b=None):
    """Random well-scaled instance; ``style`` picks normalized units or
    cellular-like SI magnitudes."""
    k1 = int(rng.integers(1, kmax + 1))
    k2 = int(rng.integers(1, kmax + 1))
    beta_e = float(rng.uniform(0.25, 1.0))
    if beta_b is None:
        beta_b = int(rng.integers(0, 2))
    if style == "normalized":
        n0 = 1.0
        mts = tuple(
            tuple(MobileTerminal(float(np.exp(rng.uniform(-1.5, 1.5))),
                                 float(rng.uniform(0.4, 2.5)))
                  for _ in range(kk))
            for kk in (k1, k2)
        )
        bs = tuple(
            BaseStationParams(
                bandwidth_hz=float(rng.uniform(0.7, 1.6)) * kk,
                nontx_power_w=float(rng.uniform(0.2, 2.0)),
                renewable_cap_w=float(rng.uniform(0.3, 4.0)),
                price_renewable=float(rng.uniform(0.1, 0.45)),
                price_grid=float(rng.uniform(0.55, 1.8)),
            )
            for kk in (k1, k2)
        )
    else:
        n0 = 1e-18
        mts = tuple(
            tuple(MobileTerminal(
                1e-6 * (float(rng.uniform(30.0, 500.0)) / 10.0) ** -3.0,
                float(rng.uniform(0.5, 3.0)) * 1e6)
                for _ in range(kk))
            for kk in (k1, k2)
        )
        bs = tuple(
            BaseStationParams(
                bandwidth_hz=float(rng.uniform(0.4, 2.5)) * 1e6 * kk,
                nontx_power_w=float(rng.uniform(20.0, 200.0)),
                renewable_cap_w=float(rng.uniform(0.0, 250.0)),
                price_renewable=float(rng.uniform(0.1, 0.45)),
                price_grid=float(rng.uniform(0.55, 1.8)),
            )
            for kk in (k1, k2)
        )
    return Scenario(bs, mts, n0, beta_e, beta_b)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
