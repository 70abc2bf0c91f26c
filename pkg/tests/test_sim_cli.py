import json
import os

import numpy as np
import pytest

from specshare.cli import cli_main
from specshare.domain import ZERO_EXCHANGE
from specshare.intra import solve_benchmark
from specshare.sim import (
    ConfigError,
    TraceRow,
    build_scenario,
    config_to_dict,
    generate_mts,
    parse_config,
    read_trace,
    simulate_trace,
)

from conftest import config_path


def _golden_dict():
    with open(config_path("golden.json"), encoding="utf-8") as fh:
        return json.load(fh)


def test_parse_golden_config():
    cfg = parse_config(config_path("golden.json"))
    assert cfg.noise_psd_w_per_hz == 1.0
    assert cfg.bs[0].bandwidth_hz == 2.0
    assert cfg.mts[1][0].qos_rate == 1.0
    assert cfg.generation is None


def test_parse_mhz_units():
    cfg = parse_config(config_path("two_cell_mhz.json"))
    assert cfg.bs[0].bandwidth_hz == 15e6
    assert cfg.noise_psd_w_per_hz == pytest.approx(1e-18, rel=1e-12)
    assert cfg.generation.mt_counts == (10, 8)


def test_config_roundtrip_identity():
    for name in ("golden.json", "two_cell_mhz.json", "trace_base.json"):
        cfg = parse_config(config_path(name))
        again = parse_config(config_to_dict(cfg))
        assert again == cfg


def test_config_errors_carry_field_paths():
    base = _golden_dict()
    bad = json.loads(json.dumps(base))
    del bad["bs"][0]["bandwidth_hz"]
    with pytest.raises(ConfigError, match=r"bs\[0\]"):
        parse_config(bad)

    bad = json.loads(json.dumps(base))
    bad["bs"][1]["bandwidth_mhz"] = 20.0  # both spellings now present
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config(bad)

    bad = json.loads(json.dumps(base))
    bad["mts"][0][1]["qos_rate_bps"] = -1.0
    with pytest.raises(ConfigError, match=r"mts\[0\]\[1\]"):
        parse_config(bad)

    bad = json.loads(json.dumps(base))
    bad["energy_coop_beta_e"] = 2.0
    with pytest.raises(ConfigError, match="energy_coop_beta_e"):
        parse_config(bad)

    bad = json.loads(json.dumps(base))
    del bad["mts"]
    with pytest.raises(ConfigError, match="mts or generation"):
        parse_config(bad)


def test_generation_requires_seed():
    cfg = json.load(open(config_path("two_cell_mhz.json"), encoding="utf-8"))
    del cfg["generation"]["rng_seed"]
    with pytest.raises(ConfigError, match="rng_seed"):
        parse_config(cfg)


def test_generate_mts_deterministic():
    cfg = parse_config(config_path("two_cell_mhz.json"))
    a = generate_mts(cfg)
    b = generate_mts(cfg)
    assert a == b
    assert len(a[0]) == 10 and len(a[1]) == 8
    c = generate_mts(cfg, seed=cfg.generation.rng_seed + 1)
    assert c != a
    # override counts for per-slot use
    d = generate_mts(cfg, counts=(3, 5))
    assert len(d[0]) == 3 and len(d[1]) == 5


def test_generated_gains_follow_pathloss_envelope():
    cfg = parse_config(config_path("two_cell_mhz.json"))
    mts = generate_mts(cfg)
    g_min = 1e-6 * (500.0 / 10.0) ** -3.0
    for side in mts:
        for mt in side:
            assert g_min * (1 - 1e-9) <= mt.channel_gain <= 1e-6 * 10.0 ** 3


def test_read_trace_and_validation(tmp_path):
    rows = read_trace(config_path("trace24.csv"))
    assert len(rows) == 24
    assert rows[0].slot == 0 and rows[-1].slot == 23
    assert all(isinstance(r, TraceRow) for r in rows)

    bad = tmp_path / "bad.csv"
    bad.write_text("slot,ebar1_w\n0,1\n")
    with pytest.raises(ConfigError, match="header"):
        read_trace(bad)

    bad.write_text("slot,ebar1_w,ebar2_w,k1,k2\n1,1,1,1,1\n0,1,1,1,1\n")
    with pytest.raises(ConfigError, match="increase"):
        read_trace(bad)

    bad.write_text("slot,ebar1_w,ebar2_w,k1,k2\n0,-1,1,1,1\n")
    with pytest.raises(ConfigError, match="caps"):
        read_trace(bad)


def test_constant_trace_matches_one_shot():
    cfg = parse_config(config_path("golden.json"))
    trace = [TraceRow(0, 6.0, 1.0, 2, 2), TraceRow(1, 6.0, 1.0, 2, 2)]
    res = simulate_trace(cfg, trace, "none")
    bench = solve_benchmark(build_scenario(cfg))
    for slot in res.slots:
        assert slot.status == "ok"
        assert slot.costs.c1 == bench[0].cost
        assert slot.costs.c2 == bench[1].cost


def test_simulate_counts_must_match_explicit_mts():
    cfg = parse_config(config_path("golden.json"))
    trace = [TraceRow(0, 6.0, 1.0, 3, 2)]
    res = simulate_trace(cfg, trace, "none")
    assert res.failed == 1
    assert "error" in res.slots[0].status


def test_simulate_records_per_slot_failures():
    cfg = parse_config(config_path("golden.json"))
    trace = [TraceRow(0, 6.0, 1.0, 2, 2), TraceRow(1, 5.0, 1.0, 2, 2)]
    res = simulate_trace(cfg, trace, "full", params={"tol": 0.0, "max_iters": 5})
    assert res.failed == 2
    assert all("error" in s.status for s in res.slots)


def test_simulate_threaded_matches_serial():
    cfg = parse_config(config_path("trace_base.json"))
    trace = read_trace(config_path("trace24.csv"))[:6]
    a = simulate_trace(cfg, trace, "none", threads=1)
    b = simulate_trace(cfg, trace, "none", threads=4)
    assert a.total_cost == b.total_cost
    assert [s.costs for s in a.slots] == [s.costs for s in b.slots]


def test_simulate_threads_env(monkeypatch):
    cfg = parse_config(config_path("golden.json"))
    trace = [TraceRow(0, 6.0, 1.0, 2, 2)]
    monkeypatch.setenv("SPECSHARE_THREADS", "2")
    res = simulate_trace(cfg, trace, "none")
    assert res.failed == 0


def test_ordering_full_partial_none():
    cfg = parse_config(config_path("trace_base.json"))
    trace = read_trace(config_path("trace24.csv"))[:4]
    totals = {}
    for mode in ("none", "partial", "full"):
        res = simulate_trace(cfg, trace, mode,
                             params={"delta": 0.05, "rho": "proportional",
                                     "gamma": (1.0, 1.0)})
        assert res.failed == 0
        totals[mode] = res.total_cost
    slack = 1e-7
    assert totals["full"] <= totals["partial"] * (1 + slack)
    assert totals["partial"] <= totals["none"] * (1 + slack)


# ---------------------------------------------------------------------------
# CLI surface

def test_cli_check_feasible(capsys):
    assert cli_main(["check", config_path("golden.json")]) == 0
    out = capsys.readouterr().out
    assert "partial cooperation FEASIBLE: lam1/mu1 > lam2/(mu2*betaE)" in out
    assert "mu1=" in out and "lam2=" in out


def test_cli_check_infeasible(capsys):
    assert cli_main(["check", config_path("symmetric.json")]) == 0
    out = capsys.readouterr().out
    assert "INFEASIBLE" in out


def test_cli_pareto_schema(tmp_path, capsys):
    out = tmp_path / "pareto.csv"
    code = cli_main(["pareto", config_path("golden.json"), "--points", "2",
                     "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "gamma1,gamma2,c1,c2,e1,e2,w1,w2"
    assert len(lines) == 3


def test_cli_partial_trajectory_schema(tmp_path):
    out = tmp_path / "traj.csv"
    code = cli_main(["partial", config_path("golden.json"), "--delta", "0.05",
                     "--proportional", "--bandwidth-unit", "1",
                     "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "iter,e1,e2,w1,w2,c1,c2,sigma,termination"
    assert lines[1].startswith("0,0.0,0.0,0.0,0.0,")
    assert lines[-1].endswith(",converged")
    for middle in lines[2:-1]:
        assert middle.endswith(",")


def test_cli_benchmark_and_full(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    assert cli_main(["benchmark", config_path("golden.json"), "--verify",
                     "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "bs,mt,channel_gain,qos_rate_bps,bandwidth_hz,power_w"
    assert len(lines) == 5  # four terminals
    txt = capsys.readouterr().out
    assert "total:" in txt

    assert cli_main(["full", config_path("golden.json"), "--gamma1", "0.5",
                     "--verify", "--out", str(tmp_path / "full.csv")]) == 0
    txt = capsys.readouterr().out
    assert "weighted_sum=" in txt


def test_cli_simulate(tmp_path, capsys):
    out = tmp_path / "sim.csv"
    code = cli_main(["simulate", config_path("golden.json"),
                     "--trace", config_path("golden_trace.csv"),
                     "--mode", "partial", "--delta", "0.05",
                     "--bandwidth-unit", "1", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ("slot,ebar1_w,ebar2_w,k1,k2,c1,c2,e1,e2,w1,w2,"
                        "bench_c1,bench_c2,status")
    txt = capsys.readouterr().out
    assert "partial cooperation:" in txt and "% total cost reduction" in txt


def test_cli_exit_codes(tmp_path, capsys):
    # validation error: malformed config
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert cli_main(["check", str(bad)]) == 1
    # missing file
    assert cli_main(["check", str(tmp_path / "nope.json")]) == 1
    # usage error: unknown flag
    assert cli_main(["pareto", config_path("golden.json"), "--points", "2",
                     "--bogus"]) == 64
    # usage error: unknown subcommand
    assert cli_main(["frobnicate"]) == 64
    # solver failure surfaces as exit 2
    assert cli_main(["full", config_path("golden.json"), "--tol", "0",
                     "--max-iters", "5"]) == 2
    capsys.readouterr()


def test_cli_byte_identical_reruns(tmp_path):
    specs = [
        (["benchmark", config_path("two_cell_mhz.json")], "bench.csv"),
        (["full", config_path("golden.json"), "--gamma1", "0.5"], "full.csv"),
        (["partial", config_path("golden.json"), "--delta", "0.05",
          "--proportional", "--bandwidth-unit", "1"], "traj.csv"),
        (["pareto", config_path("golden.json"), "--points", "3"], "pareto.csv"),
        (["simulate", config_path("golden.json"),
          "--trace", config_path("golden_trace.csv"),
          "--mode", "full", "--gamma1", "0.5"], "sim.csv"),
    ]
    for argv, name in specs:
        a = tmp_path / ("a_" + name)
        b = tmp_path / ("b_" + name)
        assert cli_main(argv + ["--out", str(a)]) == 0
        assert cli_main(argv + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
