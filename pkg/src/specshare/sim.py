"""Scenario configs, terminal generation, traces, time-slotted runs.

Configs are JSON with units spelled out in the field names; every
quantity accepts exactly one spelling (e.g. ``bandwidth_mhz`` or
``bandwidth_hz``). Traces are headered CSV, one row per slot. All
randomness flows through explicit seeds, so identical inputs give
bit-identical terminal lists and outputs.
"""

import csv
import dataclasses
import json
import os
from dataclasses import dataclass

import numpy as np

from .domain import (
    BaseStationParams,
    CostTuple,
    MobileTerminal,
    Scenario,
    channel_gain_from_distance,
    dbm_per_hz_to_w_per_hz,
    db_to_linear,
    mbps_to_bps,
    mhz_to_hz,
    utility,
)
from .full_coop import ConvergenceError, solve_weighted_sum
from .intra import solve_benchmark, solve_intra
from .partial_coop import run_algorithm1


class ConfigError(ValueError):
    """Invalid config or trace; the message carries the field path."""


def _take_unit(block, path, variants, required=True):
    """Pop exactly one of the unit-spelled variants from a dict."""
    present = [(key, conv) for key, conv in variants if key in block]
    if len(present) > 1:
        keys = ", ".join(k for k, _ in present)
        raise ConfigError(f"{path}: give exactly one of {keys}")
    if not present:
        if required:
            keys = " or ".join(k for k, _ in variants)
            raise ConfigError(f"{path}: missing {keys}")
        return None
    key, conv = present[0]
    raw = block[key]
    if not isinstance(raw, (int, float)) or isinstance(raw, bool):
        raise ConfigError(f"{path}.{key}: expected a number")
    return conv(raw)


def _take(block, path, key, kind=float, required=True, default=None):
    if key not in block:
        if required:
            raise ConfigError(f"{path}: missing {key}")
        return default
    raw = block[key]
    if kind is float:
        if not isinstance(raw, (int, float)) or isinstance(raw, bool):
            raise ConfigError(f"{path}.{key}: expected a number")
        return float(raw)
    if kind is int:
        if not isinstance(raw, int) or isinstance(raw, bool):
            raise ConfigError(f"{path}.{key}: expected an integer")
        return raw
    return raw


@dataclass(frozen=True)
class GenerationSpec:
    """Random-placement block: disk-uniform terminals around each BS with
    a simplified pathloss channel."""

    cell_radius_m: float
    pathloss_c0_db: float
    pathloss_d0_m: float
    pathloss_exponent: float
    mt_counts: tuple        # (K1, K2)
    qos_rates_bps: tuple    # per-BS rate floor applied to every terminal
    rng_seed: int


@dataclass(frozen=True)
class ScenarioConfig:
    noise_psd_w_per_hz: float
    energy_coop_beta_e: float
    spectrum_coop_beta_b: int
    bs: tuple
    mts: tuple = None            # explicit terminal lists, or None
    generation: GenerationSpec = None

    def __post_init__(self):
        if (self.mts is None) == (self.generation is None):
            raise ConfigError("config: give exactly one of mts or generation")


def _parse_bs(block, path):
    if not isinstance(block, dict):
        raise ConfigError(f"{path}: expected an object")
    bw = _take_unit(block, path, [("bandwidth_hz", float),
                                  ("bandwidth_mhz", mhz_to_hz)])
    try:
        return BaseStationParams(
            bandwidth_hz=bw,
            nontx_power_w=_take(block, path, "nontx_power_w"),
            renewable_cap_w=_take(block, path, "renewable_cap_w"),
            price_renewable=_take(block, path, "price_renewable_per_w"),
            price_grid=_take(block, path, "price_grid_per_w"),
            pa_efficiency=_take(block, path, "pa_efficiency",
                                required=False, default=1.0),
        )
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from err


def _parse_mt(block, path):
    if not isinstance(block, dict):
        raise ConfigError(f"{path}: expected an object")
    gain = _take_unit(block, path, [("channel_gain", float),
                                    ("channel_gain_db", db_to_linear)])
    rate = _take_unit(block, path, [("qos_rate_bps", float),
                                    ("qos_rate_mbps", mbps_to_bps)])
    try:
        return MobileTerminal(channel_gain=gain, qos_rate=rate)
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from err


def _parse_generation(block, path):
    if not isinstance(block, dict):
        raise ConfigError(f"{path}: expected an object")
    counts = _take(block, path, "mt_counts", kind=object)
    if (not isinstance(counts, list) or len(counts) != 2
            or not all(isinstance(k, int) and k >= 1 for k in counts)):
        raise ConfigError(f"{path}.mt_counts: expected two integers >= 1")
    rate = _take_unit(block, path, [("qos_rate_bps", float),
                                    ("qos_rate_mbps", mbps_to_bps)],
                      required=False)
    if rate is not None:
        rates = (rate, rate)
    else:
        raw = _take(block, path, "qos_rates_bps", kind=object, required=False)
        if (not isinstance(raw, list) or len(raw) != 2
                or not all(isinstance(v, (int, float)) for v in raw)):
            raise ConfigError(
                f"{path}: missing qos_rate_bps/qos_rate_mbps or qos_rates_bps pair")
        rates = (float(raw[0]), float(raw[1]))
    if min(rates) <= 0:
        raise ConfigError(f"{path}: QoS rates must be > 0")
    seed = _take(block, path, "rng_seed", kind=int)
    spec = GenerationSpec(
        cell_radius_m=_take(block, path, "cell_radius_m"),
        pathloss_c0_db=_take(block, path, "pathloss_c0_db"),
        pathloss_d0_m=_take(block, path, "pathloss_d0_m"),
        pathloss_exponent=_take(block, path, "pathloss_exponent"),
        mt_counts=(counts[0], counts[1]),
        qos_rates_bps=rates,
        rng_seed=seed,
    )
    if spec.cell_radius_m <= 0 or spec.pathloss_d0_m <= 0:
        raise ConfigError(f"{path}: radius and reference distance must be > 0")
    return spec


def parse_config(source):
    """Build a ScenarioConfig from a dict, JSON string, or file path."""
    if isinstance(source, dict):
        data = source
    else:
        text = source
        if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config: invalid JSON ({err})") from err
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object")

    noise = _take_unit(data, "config",
                       [("noise_psd_w_per_hz", float),
                        ("noise_psd_dbm_per_hz", dbm_per_hz_to_w_per_hz)])
    beta_e = _take(data, "config", "energy_coop_beta_e")
    beta_b = _take(data, "config", "spectrum_coop_beta_b", kind=int)
    bs_raw = _take(data, "config", "bs", kind=object)
    if not isinstance(bs_raw, list) or len(bs_raw) != 2:
        raise ConfigError("config.bs: expected a list of two objects")
    bs = tuple(_parse_bs(bs_raw[i], f"bs[{i}]") for i in (0, 1))

    mts = None
    generation = None
    if "mts" in data and "generation" in data:
        raise ConfigError("config: give exactly one of mts or generation")
    if "mts" in data:
        raw = data["mts"]
        if not isinstance(raw, list) or len(raw) != 2:
            raise ConfigError("config.mts: expected two lists")
        mts = tuple(
            tuple(_parse_mt(m, f"mts[{i}][{j}]") for j, m in enumerate(raw[i]))
            for i in (0, 1)
        )
        if any(len(side) == 0 for side in mts):
            raise ConfigError("config.mts: both lists must be non-empty")
    elif "generation" in data:
        generation = _parse_generation(data["generation"], "generation")
    else:
        raise ConfigError("config: missing mts or generation")

    if not (0 <= beta_e <= 1):
        raise ConfigError("config.energy_coop_beta_e: must be in [0, 1]")
    if beta_b not in (0, 1):
        raise ConfigError("config.spectrum_coop_beta_b: must be 0 or 1")
    if noise <= 0:
        raise ConfigError("config.noise_psd: must be > 0")
    return ScenarioConfig(
        noise_psd_w_per_hz=noise,
        energy_coop_beta_e=beta_e,
        spectrum_coop_beta_b=beta_b,
        bs=bs,
        mts=mts,
        generation=generation,
    )


def config_to_dict(cfg):
    """Serialize in canonical SI spellings; parse(config_to_dict(c)) == c."""
    out = {
        "noise_psd_w_per_hz": cfg.noise_psd_w_per_hz,
        "energy_coop_beta_e": cfg.energy_coop_beta_e,
        "spectrum_coop_beta_b": cfg.spectrum_coop_beta_b,
        "bs": [
            {
                "bandwidth_hz": b.bandwidth_hz,
                "nontx_power_w": b.nontx_power_w,
                "renewable_cap_w": b.renewable_cap_w,
                "price_renewable_per_w": b.price_renewable,
                "price_grid_per_w": b.price_grid,
                "pa_efficiency": b.pa_efficiency,
            }
            for b in cfg.bs
        ],
    }
    if cfg.mts is not None:
        out["mts"] = [
            [{"channel_gain": m.channel_gain, "qos_rate_bps": m.qos_rate}
             for m in side]
            for side in cfg.mts
        ]
    else:
        gen = cfg.generation
        out["generation"] = {
            "cell_radius_m": gen.cell_radius_m,
            "pathloss_c0_db": gen.pathloss_c0_db,
            "pathloss_d0_m": gen.pathloss_d0_m,
            "pathloss_exponent": gen.pathloss_exponent,
            "mt_counts": list(gen.mt_counts),
            "qos_rates_bps": list(gen.qos_rates_bps),
            "rng_seed": gen.rng_seed,
        }
    return out


def generate_mts(cfg, counts=None, seed=None):
    """Deterministic terminal lists from the generation block.

    Terminals fall disk-uniform around their BS (distance law
    R * sqrt(U)), at least 1 m out; gains follow the pathloss model.
    ``counts``/``seed`` override the block for per-slot regeneration.
    """
    gen = cfg.generation
    if gen is None:
        raise ConfigError("config: terminal generation requires a generation block")
    counts = counts or gen.mt_counts
    seed = gen.rng_seed if seed is None else seed
    sides = []
    for i in (0, 1):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), i]))
        u = rng.random(counts[i])
        d = np.maximum(gen.cell_radius_m * np.sqrt(u), 1.0)
        side = tuple(
            MobileTerminal(
                channel_gain=channel_gain_from_distance(
                    float(dk), gen.pathloss_c0_db, gen.pathloss_d0_m,
                    gen.pathloss_exponent),
                qos_rate=gen.qos_rates_bps[i],
            )
            for dk in d
        )
        sides.append(side)
    return tuple(sides)


def build_scenario(cfg, caps=None, counts=None, seed=None):
    """Scenario from a config, optionally overriding the renewable caps
    and (for generated configs) the terminal counts and seed."""
    bs = cfg.bs
    if caps is not None:
        bs = tuple(dataclasses.replace(bs[i], renewable_cap_w=float(caps[i]))
                   for i in (0, 1))
    if cfg.mts is not None:
        mts = cfg.mts
        if counts is not None and tuple(counts) != tuple(len(s) for s in mts):
            raise ConfigError(
                "trace: terminal counts differ from the explicit mts lists")
    else:
        mts = generate_mts(cfg, counts=counts, seed=seed)
    return Scenario(
        bs=bs,
        mts=mts,
        noise_psd=cfg.noise_psd_w_per_hz,
        energy_coop_beta=cfg.energy_coop_beta_e,
        spectrum_coop_beta=cfg.spectrum_coop_beta_b,
    )


@dataclass(frozen=True)
class TraceRow:
    slot: int
    ebar1_w: float
    ebar2_w: float
    k1: int
    k2: int
    seed: int = None


def read_trace(source):
    """Parse a headered CSV trace: slot,ebar1_w,ebar2_w,k1,k2[,seed]."""
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source, newline="", encoding="utf-8") as fh:
            lines = list(csv.reader(fh))
    else:
        lines = list(csv.reader(str(source).splitlines()))
    if not lines:
        raise ConfigError("trace: empty file")
    header = [h.strip() for h in lines[0]]
    want = ["slot", "ebar1_w", "ebar2_w", "k1", "k2"]
    if header[: len(want)] != want or len(header) > len(want) + 1 or (
        len(header) == len(want) + 1 and header[-1] != "seed"
    ):
        raise ConfigError(
            "trace: header must be slot,ebar1_w,ebar2_w,k1,k2[,seed]")
    has_seed = len(header) == len(want) + 1
    rows = []
    last_slot = None
    for ln, parts in enumerate(lines[1:], start=2):
        if not parts:
            continue
        try:
            slot = int(parts[0])
            eb1, eb2 = float(parts[1]), float(parts[2])
            k1, k2 = int(parts[3]), int(parts[4])
            seed = int(parts[5]) if has_seed and parts[5].strip() != "" else None
        except (ValueError, IndexError) as err:
            raise ConfigError(f"trace line {ln}: {err}") from err
        if last_slot is not None and slot <= last_slot:
            raise ConfigError(f"trace line {ln}: slot indices must increase")
        if min(eb1, eb2) < 0 or min(k1, k2) < 1:
            raise ConfigError(f"trace line {ln}: caps must be >= 0, counts >= 1")
        rows.append(TraceRow(slot, eb1, eb2, k1, k2, seed))
        last_slot = slot
    if not rows:
        raise ConfigError("trace: no data rows")
    return rows


def _slot_seed(cfg, row):
    if row.seed is not None:
        return row.seed
    base = cfg.generation.rng_seed if cfg.generation else 0
    # stable per-slot derivation from (base seed, slot)
    return int(np.random.SeedSequence([base, row.slot]).generate_state(1)[0])


@dataclass(frozen=True)
class SlotResult:
    row: TraceRow
    costs: CostTuple       # selected mode
    bench: CostTuple       # non-cooperative reference
    x_ex: tuple            # (e1, e2, w1, w2)
    status: str            # "ok" or the error message


@dataclass(frozen=True)
class SimulationResult:
    mode: str
    slots: tuple
    total_cost: float
    total_bench: float
    failed: int

    @property
    def reduction_pct(self):
        if self.total_bench <= 0:
            return 0.0
        return 100.0 * (1.0 - self.total_cost / self.total_bench)


def _solve_slot(cfg, row, mode, params, verify):
    scenario = build_scenario(
        cfg,
        caps=(row.ebar1_w, row.ebar2_w),
        counts=(row.k1, row.k2),
        seed=_slot_seed(cfg, row) if cfg.generation else None,
    )
    bench = solve_benchmark(scenario)
    bench_costs = CostTuple(bench[0].cost, bench[1].cost)
    if mode == "none":
        costs, x = bench_costs, (0.0, 0.0, 0.0, 0.0)
        if verify:
            verify_benchmark(scenario, bench)
    elif mode == "partial":
        traj = run_algorithm1(
            scenario, params.get("delta", 0.05), params.get("rho", "proportional"),
            max_iters=params.get("max_iters", 1000),
            bandwidth_unit_hz=params.get("bandwidth_unit_hz", 1e6))
        end = traj.final()
        costs, x = end.costs, end.x_ex.as_tuple()
        if verify:
            verify_exchange_point(scenario, end.x_ex, end.costs)
    elif mode == "full":
        res = solve_weighted_sum(
            scenario, params.get("gamma", (1.0, 1.0)),
            tol=params.get("tol", 1e-8),
            max_iters=params.get("max_iters", 10_000))
        costs, x = res.costs, res.x_ex.as_tuple()
        if verify:
            verify_full_result(scenario, res)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return SlotResult(row, costs, bench_costs, x, "ok")


def simulate_trace(cfg, trace, mode, params=None, verify=False, threads=None):
    """Run the selected cooperation mode on every slot of the trace.

    Per-slot solver errors are recorded in the slot's status and the run
    continues. Slots are independent; ``threads`` (or SPECSHARE_THREADS)
    caps concurrent solves, and results always come back in slot order.
    """
    params = params or {}
    if threads is None:
        threads = int(os.environ.get("SPECSHARE_THREADS", "1"))
    threads = max(1, threads)

    def one(row):
        try:
            return _solve_slot(cfg, row, mode, params, verify)
        except (ValueError, ConvergenceError, AssertionError) as err:
            zero = CostTuple(0.0, 0.0)
            return SlotResult(row, zero, zero, (0.0,) * 4,
                              f"error: {err}")

    if threads == 1:
        slots = [one(row) for row in trace]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            slots = list(pool.map(one, trace))
    ok = [s for s in slots if s.status == "ok"]
    return SimulationResult(
        mode=mode,
        slots=tuple(slots),
        total_cost=sum(s.costs.total() for s in ok),
        total_bench=sum(s.bench.total() for s in ok),
        failed=len(slots) - len(ok),
    )


# ---------------------------------------------------------------------------
# residual checks behind the --verify flag (and reused by the test suite)

def verify_benchmark(scenario, results, rtol=1e-7):
    for i, res in enumerate(results):
        _check_bs(scenario, i, res.alloc, res.effective_bandwidth,
                  extra_load=0.0, rtol=rtol)


def verify_exchange_point(scenario, x_ex, costs, rtol=1e-7):
    be = scenario.energy_coop_beta
    e = (x_ex.e1, x_ex.e2)
    for i in (0, 1):
        res = solve_intra(i, scenario, x_ex)
        _check_bs(scenario, i, res.alloc, res.effective_bandwidth,
                  extra_load=e[i] - be * e[1 - i], rtol=rtol)
        want = (costs.c1, costs.c2)[i]
        assert abs(res.cost - want) <= rtol * max(1.0, abs(want)), (
            f"BS {i}: recorded cost {want} differs from re-solve {res.cost}")


def verify_full_result(scenario, res, rtol=1e-7):
    be = scenario.energy_coop_beta
    e = (res.x_ex.e1, res.x_ex.e2)
    w = (res.x_ex.w1, res.x_ex.w2)
    assert e[0] * e[1] <= rtol and w[0] * w[1] <= rtol, "counterflow present"
    for i in (0, 1):
        alloc = res.allocs[i]
        other = 1 - i
        w_eff = (scenario.bs[i].bandwidth_hz
                 + scenario.spectrum_coop_beta * w[other] - w[i])
        _check_bs(scenario, i, alloc, w_eff,
                  extra_load=e[i] - be * e[other], rtol=rtol)


def _check_bs(scenario, i, alloc, w_eff, extra_load, rtol):
    bs = scenario.bs[i]
    mts = scenario.mts[i]
    n0 = scenario.noise_psd
    total_b = sum(bp[0] for bp in alloc.per_mt)
    assert abs(total_b - w_eff) <= rtol * max(1.0, w_eff), (
        f"BS {i}: bandwidth budget residual {total_b - w_eff}")
    for mt, (b, p) in zip(mts, alloc.per_mt):
        u = utility(b, p, mt.channel_gain, n0)
        assert abs(u - mt.qos_rate) <= rtol * mt.qos_rate, (
            f"BS {i}: QoS residual {u - mt.qos_rate}")
    load = (sum(bp[1] for bp in alloc.per_mt) / bs.pa_efficiency
            + bs.nontx_power_w + extra_load)
    supply = alloc.renewable + alloc.grid
    assert abs(supply - max(load, 0.0)) <= rtol * max(1.0, abs(load)), (
        f"BS {i}: energy balance residual {supply - load}")
    assert alloc.renewable <= bs.renewable_cap_w + rtol * max(1.0, bs.renewable_cap_w)
    if alloc.grid > rtol * max(1.0, load):
        assert alloc.renewable >= bs.renewable_cap_w - rtol * max(
            1.0, bs.renewable_cap_w), f"BS {i}: grid before renewable"
