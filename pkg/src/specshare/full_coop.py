"""Centralized weighted-sum cost minimization and Pareto sweeps.

The weighted-sum problem is solved through its Lagrange dual: the two
power prices and two bandwidth prices live in the box where the dual
stays bounded (price caps, and transfer/sharing keep each BS's price at
least the discounted foreign one). The dual is maximized by projected
subgradient steps with Polyak sizing, with an ellipsoid polish when the
certified primal-dual gap stalls; primal bandwidths are recovered from
the closed-form per-terminal minimizer, spectrum shares from budget
slack, and the energy split from a small exact LP.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .domain import CostTuple, DualPrices, ExchangeVector, IntraAllocation
from .intra import solve_benchmark


class ConvergenceError(RuntimeError):
    """Dual ascent ran out of iterations; carries the best duals seen."""

    def __init__(self, message, duals, gap):
        super().__init__(message)
        self.duals = duals
        self.gap = gap


@dataclass(frozen=True)
class EnergyLpInstance:
    """Energy decision subproblem: meet fixed loads at minimum weighted
    purchase cost, allowing lossy transfers between the BSs."""

    loads: tuple            # (D1, D2) in W, >= 0
    weights: tuple          # (gamma1, gamma2) >= 0
    prices_renewable: tuple
    prices_grid: tuple
    caps: tuple             # renewable caps
    beta_e: float

    def __post_init__(self):
        if min(self.loads) < 0:
            raise ValueError("loads must be >= 0 (clamp before building the LP)")
        if min(self.weights) < 0:
            raise ValueError("weights must be >= 0")


@dataclass(frozen=True)
class EnergyLpSolution:
    renewable: tuple   # (E1, E2)
    grid: tuple        # (G1, G2)
    transfer: tuple    # (e1, e2), complementary
    objective: float


# Bound equations selectable at a vertex: (variable index, use_cap flag)
# over v = [E1, G1, e1, E2, G2, e2]; caps exist for E1 and E2 only.
_BOUND_EQS = [(0, False), (0, True), (1, False), (2, False),
              (3, False), (3, True), (4, False), (5, False)]
_ACTIVE_SETS = [
    combo for combo in itertools.combinations(range(8), 4)
    if len({_BOUND_EQS[j][0] for j in combo}) == 4
]
_N_SETS = len(_ACTIVE_SETS)
# static parts of the stacked vertex systems: unit rows and cap flags
_SET_TEMPLATE = np.zeros((_N_SETS, 6, 6))
_CAP_FLAGS = np.zeros((_N_SETS, 6, 2))  # rhs contribution of cap1/cap2 per row
for _s, _combo in enumerate(_ACTIVE_SETS):
    for _row, _j in enumerate(_combo, start=2):
        _var, _use_cap = _BOUND_EQS[_j]
        _SET_TEMPLATE[_s, _row, _var] = 1.0
        if _use_cap:
            _CAP_FLAGS[_s, _row, 0 if _var == 0 else 1] = 1.0


def solve_energy_lp(inst):
    """Exact optimum by vertex enumeration over the fixed-size polytope.

    Two equality rows plus four active bounds pin each candidate vertex;
    the stacked linear systems are solved in one batch and feasible
    vertices compared on the objective directly. Among optimal vertices
    the one with the smallest counterflow is returned, so the transfers
    always satisfy e1 * e2 = 0.
    """
    d1, d2 = inst.loads
    be = inst.beta_e
    cost = np.array([
        inst.weights[0] * inst.prices_renewable[0],
        inst.weights[0] * inst.prices_grid[0],
        0.0,
        inst.weights[1] * inst.prices_renewable[1],
        inst.weights[1] * inst.prices_grid[1],
        0.0,
    ])
    scale = max(1.0, d1, d2, inst.caps[0], inst.caps[1])
    tol = 1e-9 * scale

    mats = _SET_TEMPLATE.copy()
    mats[:, 0, :] = (1.0, 1.0, -1.0, 0.0, 0.0, be)
    mats[:, 1, :] = (0.0, 0.0, be, 1.0, 1.0, -1.0)
    rhs = _CAP_FLAGS @ np.array(inst.caps, dtype=np.float64)
    rhs[:, 0] = d1
    rhs[:, 1] = d2

    dets = np.linalg.det(mats)
    ok = np.abs(dets) > 1e-10
    v_all = np.full((_N_SETS, 6), np.nan)
    if np.any(ok):
        v_all[ok] = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
    feas = (
        ok
        & np.all(np.isfinite(v_all), axis=1)
        & (np.min(v_all, axis=1) >= -tol)
        & (v_all[:, 0] <= inst.caps[0] + tol)
        & (v_all[:, 3] <= inst.caps[1] + tol)
    )
    v_all = np.clip(v_all, 0.0, None)
    objs = v_all @ cost
    objs[~feas] = np.inf

    best_obj = np.min(objs)
    near = np.flatnonzero(objs <= best_obj + 1e-12 * max(1.0, abs(best_obj)))
    counter = np.minimum(v_all[near, 2], v_all[near, 5])
    pick = near[int(np.argmin(counter))]
    obj = float(objs[pick])
    v = v_all[pick]
    e1, e2 = v[2], v[5]
    shrink = min(e1, e2)
    if shrink > 0:
        # flat counterflow direction; re-derive purchases after removing it
        e1, e2 = e1 - shrink, e2 - shrink
        l1 = d1 + e1 - be * e2
        l2 = d2 + e2 - be * e1
        if l1 >= 0 and l2 >= 0:
            v = np.array([
                min(l1, inst.caps[0]), max(l1 - inst.caps[0], 0.0), e1,
                min(l2, inst.caps[1]), max(l2 - inst.caps[1], 0.0), e2,
            ])
            obj = float(cost @ v)
    return EnergyLpSolution(
        renewable=(float(v[0]), float(v[3])),
        grid=(float(v[1]), float(v[4])),
        transfer=(float(v[2]), float(v[5])),
        objective=obj,
    )


@dataclass(frozen=True)
class FullCoopResult:
    x_ex: ExchangeVector
    allocs: tuple        # pair of IntraAllocation
    costs: CostTuple
    weighted_sum: float
    duals: tuple         # pair of DualPrices (weighted-problem multipliers)
    iterations: int
    dual_value: float    # best certified lower bound on the optimum


def _scenario_arrays(scenario):
    out = []
    for i in (0, 1):
        r = np.array([mt.qos_rate for mt in scenario.mts[i]], dtype=np.float64)
        g = np.array([mt.channel_gain for mt in scenario.mts[i]], dtype=np.float64)
        out.append((r, g))
    return out


def _dual_value_and_subgrad(theta, scenario, gamma, arrays):
    """Dual function and an ascent subgradient at (mu1, mu2, lam1, lam2)."""
    n0 = scenario.noise_psd
    val = 0.0
    sub = np.zeros(4)
    for i in (0, 1):
        bs = scenario.bs[i]
        mu, lam = theta[i], theta[2 + i]
        r, g = arrays[i]
        if mu <= 1e-250:  # degenerate price: terminals get no bandwidth
            val += -lam * bs.bandwidth_hz
            sub[i] = bs.nontx_power_w
            sub[2 + i] = -bs.bandwidth_hz
            continue
        b = _kernels.dual_bandwidths(lam, mu, r, g, n0)
        p = b * n0 / g * (np.exp2(np.minimum(r / b, 600.0)) - 1.0)
        e_star = bs.renewable_cap_w if gamma[i] * bs.price_renewable < mu else 0.0
        sum_b = float(np.sum(b))
        sum_p = float(np.sum(p))
        val += (
            lam * sum_b
            + mu * sum_p
            + e_star * (gamma[i] * bs.price_renewable - mu)
            + mu * bs.nontx_power_w
            - lam * bs.bandwidth_hz
        )
        sub[i] = sum_p + bs.nontx_power_w - e_star
        sub[2 + i] = sum_b - bs.bandwidth_hz
    return val, sub


def _project_mu(mu1, mu2, c1, c2, beta_e):
    """Exact projection onto {0 <= mu_i <= c_i, mu_i >= beta_e * mu_other}."""
    cands = []
    p1 = min(max(mu1, 0.0), c1)
    p2 = min(max(mu2, 0.0), c2)
    if p1 >= beta_e * p2 and p2 >= beta_e * p1:
        cands.append((p1, p2))
    if beta_e > 0.0:
        # edge mu1 = beta_e * mu2, parametrized by mu2 = s
        s = (beta_e * mu1 + mu2) / (1.0 + beta_e * beta_e)
        s = min(max(s, 0.0), min(c1 / beta_e, c2))
        cands.append((beta_e * s, s))
        # edge mu2 = beta_e * mu1
        t = (mu1 + beta_e * mu2) / (1.0 + beta_e * beta_e)
        t = min(max(t, 0.0), min(c1, c2 / beta_e))
        cands.append((t, beta_e * t))
    best = min(cands, key=lambda q: (q[0] - mu1) ** 2 + (q[1] - mu2) ** 2)
    return best


def _project(theta, caps, beta_e, beta_b):
    mu1, mu2 = _project_mu(theta[0], theta[1], caps[0], caps[1], beta_e)
    if beta_b == 1:
        lam = max(0.0, 0.5 * (theta[2] + theta[3]))
        lam1 = lam2 = lam
    else:
        lam1 = max(theta[2], 0.0)
        lam2 = max(theta[3], 0.0)
    return np.array([mu1, mu2, lam1, lam2])


def _recover_primal(theta, scenario, gamma, arrays):
    """Feasible primal point from dual prices: closed-form bandwidths,
    rescaled to exhaust the spectrum budget, then the energy LP."""
    n0 = scenario.noise_psd
    w_total = scenario.bs[0].bandwidth_hz + scenario.bs[1].bandwidth_hz
    b = []
    for i in (0, 1):
        mu, lam = theta[i], theta[2 + i]
        if mu < 1e-300:
            return None
        r, g = arrays[i]
        b.append(_kernels.dual_bandwidths(lam, mu, r, g, n0))
    if scenario.spectrum_coop_beta == 1:
        phi = w_total / (float(np.sum(b[0])) + float(np.sum(b[1])))
        b = [bi * phi for bi in b]
    else:
        b = [bi * (scenario.bs[i].bandwidth_hz / float(np.sum(bi)))
             for i, bi in enumerate(b)]
    loads = []
    powers = []
    for i in (0, 1):
        r, g = arrays[i]
        p = b[i] * n0 / g * (np.exp2(r / b[i]) - 1.0)
        powers.append(p)
        loads.append(float(np.sum(p)) / scenario.bs[i].pa_efficiency
                     + scenario.bs[i].nontx_power_w)
    lp = solve_energy_lp(EnergyLpInstance(
        loads=tuple(loads),
        weights=tuple(gamma),
        prices_renewable=(scenario.bs[0].price_renewable, scenario.bs[1].price_renewable),
        prices_grid=(scenario.bs[0].price_grid, scenario.bs[1].price_grid),
        caps=(scenario.bs[0].renewable_cap_w, scenario.bs[1].renewable_cap_w),
        beta_e=scenario.energy_coop_beta,
    ))
    if scenario.spectrum_coop_beta == 1:
        w = tuple(max(scenario.bs[i].bandwidth_hz - float(np.sum(b[i])), 0.0)
                  for i in (0, 1))
    else:
        w = (0.0, 0.0)
    costs = CostTuple(
        scenario.bs[0].price_renewable * lp.renewable[0] + scenario.bs[0].price_grid * lp.grid[0],
        scenario.bs[1].price_renewable * lp.renewable[1] + scenario.bs[1].price_grid * lp.grid[1],
    )
    allocs = tuple(
        IntraAllocation(
            renewable=lp.renewable[i],
            grid=lp.grid[i],
            per_mt=tuple((float(bb), float(pp)) for bb, pp in zip(b[i], powers[i])),
        )
        for i in (0, 1)
    )
    x_ex = ExchangeVector(lp.transfer[0], lp.transfer[1], w[0], w[1])
    wsum = gamma[0] * costs.c1 + gamma[1] * costs.c2
    return x_ex, allocs, costs, wsum


def _benchmark_result(scenario, gamma):
    res = solve_benchmark(scenario)
    costs = CostTuple(res[0].cost, res[1].cost)
    duals = tuple(
        DualPrices(mu=gamma[i] * res[i].duals.mu,
                   lam=gamma[i] * res[i].duals.lam,
                   nu=res[i].duals.nu)
        for i in (0, 1)
    )
    wsum = gamma[0] * costs.c1 + gamma[1] * costs.c2
    return FullCoopResult(
        x_ex=ExchangeVector(),
        allocs=(res[0].alloc, res[1].alloc),
        costs=costs,
        weighted_sum=wsum,
        duals=duals,
        iterations=0,
        dual_value=wsum,
    )


def _ellipsoid_phase(theta0, scenario, gamma, arrays, caps, beta_e, beta_b,
                     f_hat, g_best, theta_best, tol, budget):
    """Cutting-plane refinement around the incumbent; returns updated
    (g_best, theta_best, f_hat, best_rec, iterations_used).

    With pooled spectrum the two bandwidth prices coincide, so the
    search runs in the reduced (mu1, mu2, lam) space; otherwise in 4D.
    """
    best_rec = None
    # Reduce out the equalities the domain forces: mu1 = mu2 when the
    # energy transfer is lossless, lam1 = lam2 when spectrum pools.
    mu_cols = ([[1.0, 1.0, 0.0, 0.0]] if beta_e == 1.0
               else [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
    lam_cols = ([[0.0, 0.0, 1.0, 1.0]] if beta_b == 1
                else [[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]])
    m_map = np.array(mu_cols + lam_cols).T  # theta4 = m_map @ theta_r
    n = m_map.shape[1]
    n_mu = len(mu_cols)

    def expand(th):
        return m_map @ th

    def reduce_vec(v4):
        return m_map.T @ v4

    start = (m_map.T @ theta0) / np.sum(m_map * m_map, axis=0)
    lam_scale = max(np.max(theta0[2:]), 1e-9 * max(max(caps), 1e-30))
    radii = np.array([max(min(caps), 1e-9)] * n_mu
                     + [4.0 * lam_scale] * (n - n_mu))
    # feasibility constraints a.th <= b, mapped into reduced coordinates
    cons4 = [
        (np.array([-1.0, 0.0, 0.0, 0.0]), 0.0),
        (np.array([0.0, -1.0, 0.0, 0.0]), 0.0),
        (np.array([1.0, 0.0, 0.0, 0.0]), caps[0]),
        (np.array([0.0, 1.0, 0.0, 0.0]), caps[1]),
        (np.array([-1.0, beta_e, 0.0, 0.0]), 0.0),
        (np.array([beta_e, -1.0, 0.0, 0.0]), 0.0),
        (np.array([0.0, 0.0, -1.0, 0.0]), 0.0),
        (np.array([0.0, 0.0, 0.0, -1.0]), 0.0),
    ]
    cons = []
    for a4, b in cons4:
        row = m_map.T @ a4
        if np.max(np.abs(row)) > 1e-15:
            cons.append((row, b))

    used = 0
    for _attempt in range(4):
        center = start.copy()
        p_mat = np.diag((2.0 * radii) ** 2) * n
        it = 0
        while it < budget - used:
            it += 1
            a = None
            worst = 0.0
            for row, b in cons:
                viol = float(row @ center) - b
                if viol > worst:
                    worst = viol
                    a = row
            if a is None:
                th4 = expand(center)
                val, sub4 = _dual_value_and_subgrad(th4, scenario, gamma, arrays)
                if val > g_best:
                    g_best = val
                    theta_best = th4
                rec = _recover_primal(th4, scenario, gamma, arrays)
                if rec is not None and rec[3] < f_hat:
                    f_hat = rec[3]
                    best_rec = rec
                if f_hat - g_best <= tol * max(1.0, abs(f_hat)):
                    return g_best, theta_best, f_hat, best_rec, used + it
                sub = reduce_vec(sub4)
                spread = math.sqrt(max(sub @ p_mat @ sub, 0.0))
                if spread <= 1e-4 * tol * max(1.0, abs(g_best)):
                    break  # ellipsoid exhausted; retry wider or give up
                a = -sub  # objective cut for maximization
            denom = float(a @ p_mat @ a)
            if denom <= 0 or not np.isfinite(denom):
                break
            pa = p_mat @ a / math.sqrt(denom)
            center = center - pa / (n + 1.0)
            p_mat = (n * n / (n * n - 1.0)) * (
                p_mat - (2.0 / (n + 1.0)) * np.outer(pa, pa)
            )
        used += it
        if f_hat - g_best <= tol * max(1.0, abs(f_hat)) or used >= budget:
            return g_best, theta_best, f_hat, best_rec, used
        radii = radii * 8.0  # optimum may sit outside; restart wider
    return g_best, theta_best, f_hat, best_rec, used


def solve_weighted_sum(scenario, gamma, tol=1e-8, max_iters=10_000):
    """Minimize gamma1*C1 + gamma2*C2 over all joint decisions.

    Returns a FullCoopResult whose weighted sum carries a certified
    relative primal-dual gap of at most ``tol``. Raises ConvergenceError
    (with the best duals attached) if the budget runs out first.
    """
    g1, g2 = float(gamma[0]), float(gamma[1])
    if g1 < 0 or g2 < 0 or (g1 == 0 and g2 == 0):
        raise ValueError("weights must be >= 0 and not both zero")
    s = 2.0 / (g1 + g2)
    gamma = (max(g1 * s, 1e-9), max(g2 * s, 1e-9))

    if scenario.energy_coop_beta == 0 and scenario.spectrum_coop_beta == 0:
        return _benchmark_result(scenario, gamma)

    arrays = _scenario_arrays(scenario)
    caps = (gamma[0] * scenario.bs[0].price_grid, gamma[1] * scenario.bs[1].price_grid)
    beta_e = scenario.energy_coop_beta
    beta_b = scenario.spectrum_coop_beta

    bench = solve_benchmark(scenario)
    theta = _project(np.array([
        gamma[0] * bench[0].duals.mu,
        gamma[1] * bench[1].duals.mu,
        gamma[0] * bench[0].duals.lam,
        gamma[1] * bench[1].duals.lam,
    ]), caps, beta_e, beta_b)

    best_rec = _recover_primal(theta, scenario, gamma, arrays)
    f_hat = best_rec[3]
    g_best = -math.inf
    theta_best = theta.copy()
    iters = 0
    warm_budget = min(300, max_iters)

    while iters < warm_budget:
        iters += 1
        val, sub = _dual_value_and_subgrad(theta, scenario, gamma, arrays)
        if val > g_best:
            g_best = val
            theta_best = theta.copy()
        if f_hat - g_best <= tol * max(1.0, abs(f_hat)):
            break
        norm2 = float(sub @ sub)
        if norm2 <= 0:
            break
        theta = _project(theta + ((f_hat - val) / norm2) * sub, caps, beta_e, beta_b)
        if iters % 10 == 0:
            rec = _recover_primal(theta, scenario, gamma, arrays)
            if rec is not None and rec[3] < f_hat:
                f_hat = rec[3]
                best_rec = rec

    if f_hat - g_best > tol * max(1.0, abs(f_hat)) and iters < max_iters:
        g_best, theta_best, f_hat, rec, used = _ellipsoid_phase(
            theta_best, scenario, gamma, arrays, caps, beta_e, beta_b,
            f_hat, g_best, theta_best, tol, max_iters - iters)
        iters += used
        if rec is not None:
            best_rec = rec

    # final primal from the best duals seen
    rec = _recover_primal(theta_best, scenario, gamma, arrays)
    if rec is not None and rec[3] < best_rec[3]:
        best_rec = rec
    f_hat = min(f_hat, best_rec[3])
    gap = f_hat - g_best
    if gap > tol * max(1.0, abs(f_hat)):
        raise ConvergenceError(
            f"dual ascent did not certify tolerance {tol:g} within "
            f"{max_iters} iterations (relative gap {gap / max(1.0, abs(f_hat)):.3e})",
            duals=tuple(theta_best), gap=gap)

    x_ex, allocs, costs, wsum = best_rec
    duals = tuple(
        DualPrices(mu=float(theta_best[i]), lam=float(theta_best[2 + i]),
                   nu=float(theta_best[2 + i] / theta_best[i]) if theta_best[i] > 0 else 0.0)
        for i in (0, 1)
    )
    return FullCoopResult(
        x_ex=x_ex,
        allocs=allocs,
        costs=costs,
        weighted_sum=wsum,
        duals=duals,
        iterations=iters,
        dual_value=g_best,
    )


def pareto_sweep(scenario, n_points, tol=1e-8, max_iters=10_000):
    """Trace the cost region boundary by sweeping the weight between the
    two BSs over a uniform interior grid; points come back sorted by c1."""
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    out = []
    for j in range(n_points):
        t = (j + 1) / (n_points + 1)
        gamma = (2.0 * t, 2.0 * (1.0 - t))
        res = solve_weighted_sum(scenario, gamma, tol=tol, max_iters=max_iters)
        out.append((gamma, res.costs, res.x_ex))
    out.sort(key=lambda item: item[1].c1)
    return out
