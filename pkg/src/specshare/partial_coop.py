"""Mutually beneficial cooperation: feasibility tests and the
distributed proportional-fair descent.

Each BS publishes exactly two scalars per iteration, its marginal energy
price mu and marginal bandwidth price lam; every decision below consumes
only those four numbers. The descent walks the exchange vector from zero
along a fixed sparsity pattern (one BS sends energy, the other cedes
spectrum), shrinking both costs in the ratio rho until neither can drop
further.

Bandwidth coordinates are internally scaled (default: MHz) so that one
step size delta moves energy in watts and spectrum in megahertz; the
descent path is unchanged, only its parametrization.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .domain import CostTuple, DualPrices, ExchangeVector
from .intra import solve_intra


class CoopBranch(enum.Enum):
    """Active exchange pair: which BS sends energy, which cedes spectrum."""

    SHARE_E1_FOR_W2 = "share_e1_for_w2"
    SHARE_E2_FOR_W1 = "share_e2_for_w1"
    NONE = "none"


@dataclass(frozen=True)
class GradientPair:
    """Cost gradients of both BSs over (e1, e2, w1, w2), assembled from
    the marginal prices; ``at_kink`` marks a BS whose load sits exactly
    at its renewable cap, where only one-sided derivatives exist."""

    grad_c1: tuple
    grad_c2: tuple
    at_kink: tuple


def marginal_gradients(scenario, x_ex, kink_rtol=1e-9):
    res = (solve_intra(0, scenario, x_ex), solve_intra(1, scenario, x_ex))
    be = scenario.energy_coop_beta
    mu1, lam1 = res[0].duals.mu, res[0].duals.lam
    mu2, lam2 = res[1].duals.mu, res[1].duals.lam
    kinks = tuple(
        abs(res[i].effective_load - scenario.bs[i].renewable_cap_w)
        <= kink_rtol * max(1.0, scenario.bs[i].renewable_cap_w)
        for i in (0, 1)
    )
    return GradientPair(
        grad_c1=(mu1, -be * mu1, lam1, -lam1),
        grad_c2=(-be * mu2, mu2, -lam2, lam2),
        at_kink=kinks,
    )


def improvement_conditions(duals, x_ex, beta_e, eps_cond=1e-6):
    """Which exchange pair (if any) can still cut both costs at once.

    At zero transfers the strict marginal-price inequalities decide the
    direction; once energy flows, any imbalance along the active pair
    keeps improvement possible (the step direction handles its sign).
    ``eps_cond`` is the relative strictness margin.
    """
    mu1, lam1 = duals[0].mu, duals[0].lam
    mu2, lam2 = duals[1].mu, duals[1].lam
    if beta_e <= 0.0:
        return CoopBranch.NONE
    a = lam1 * mu2 * beta_e - lam2 * mu1
    b = lam2 * mu1 * beta_e - lam1 * mu2
    tol_a = eps_cond * max(lam1 * mu2 * beta_e, lam2 * mu1, 1e-300)
    tol_b = eps_cond * max(lam2 * mu1 * beta_e, lam1 * mu2, 1e-300)
    if x_ex.e1 > 0.0:
        return CoopBranch.SHARE_E1_FOR_W2 if abs(a) > tol_a else CoopBranch.NONE
    if x_ex.e2 > 0.0:
        return CoopBranch.SHARE_E2_FOR_W1 if abs(b) > tol_b else CoopBranch.NONE
    if a > tol_a:
        return CoopBranch.SHARE_E1_FOR_W2
    if b > tol_b:
        return CoopBranch.SHARE_E2_FOR_W1
    return CoopBranch.NONE


def descent_rate(duals, branch, beta_e):
    """Common per-unit-step cost change sigma (<= 0) along the branch."""
    mu1, lam1 = duals[0].mu, duals[0].lam
    mu2, lam2 = duals[1].mu, duals[1].lam
    if branch is CoopBranch.SHARE_E1_FOR_W2:
        return -abs(lam1 * mu2 * beta_e - lam2 * mu1)
    if branch is CoopBranch.SHARE_E2_FOR_W1:
        return -abs(lam2 * mu1 * beta_e - lam1 * mu2)
    return 0.0


def descent_direction(duals, branch, rho, beta_e):
    """Update direction over (e1, e2, w1, w2) whose first-order effect is
    a simultaneous cost drop of sigma * (rho, 1).

    The sign factor reverses the step when the active pair has
    overshot, so each step descends regardless of which side of the
    stationary ratio the iterate sits on.
    """
    mu1, lam1 = duals[0].mu, duals[0].lam
    mu2, lam2 = duals[1].mu, duals[1].lam
    if branch is CoopBranch.SHARE_E1_FOR_W2:
        a = lam1 * mu2 * beta_e - lam2 * mu1
        s = 1.0 if a >= 0 else -1.0
        return np.array([s * (rho * lam2 + lam1), 0.0, 0.0,
                         s * (mu1 + rho * beta_e * mu2)])
    if branch is CoopBranch.SHARE_E2_FOR_W1:
        b = lam2 * mu1 * beta_e - lam1 * mu2
        s = 1.0 if b >= 0 else -1.0
        return np.array([0.0, s * (rho * lam2 + lam1),
                         s * (beta_e * mu1 + rho * mu2), 0.0])
    raise ValueError("no descent direction without an active branch")


@dataclass(frozen=True)
class TrajectoryPoint:
    x_ex: ExchangeVector
    costs: CostTuple
    duals: tuple          # pair of DualPrices (SI units)
    sigma: float          # descent rate at this iterate, scaled coordinates
    step_clamped: bool    # the step into this point hit the x >= 0 wall


@dataclass(frozen=True)
class Trajectory:
    points: tuple
    rho: float
    delta: float
    termination_reason: str

    @property
    def costs(self):
        return [pt.costs for pt in self.points]

    def final(self):
        return self.points[-1]


def _default_dual_source(scenario):
    def source(i, x_ex):
        res = solve_intra(i, scenario, x_ex)
        return res.duals.mu, res.duals.lam, res.cost

    return source


def run_algorithm1(scenario, delta, rho="proportional", max_iters=1000,
                   bandwidth_unit_hz=1e6, eps_cond=1e-6, eps_sigma_rel=1e-9,
                   dual_source=None):
    """Distributed descent from the non-cooperative point.

    Fixes the exchange pair from the marginal prices at zero, then
    repeatedly steps ``x <- max(x + delta * d, 0)``, re-deriving both
    BSs' prices after every step. Stops when the improvement conditions
    fail (``converged``), when the descent rate decays to
    ``eps_sigma_rel`` of its initial value (``stalled_sigma``), when a
    step would raise either cost at this resolution (``converged``), or
    at ``max_iters``. ``rho="proportional"`` reproduces the benchmark
    cost ratio in the reductions.
    """
    if delta <= 0:
        raise ValueError("delta must be > 0")
    if dual_source is None:
        dual_source = _default_dual_source(scenario)
    be = scenario.energy_coop_beta
    unit = float(bandwidth_unit_hz)

    def probe(x_scaled):
        x = ExchangeVector(x_scaled[0], x_scaled[1],
                           x_scaled[2] * unit, x_scaled[3] * unit)
        mu1, lam1, c1 = dual_source(0, x)
        mu2, lam2, c2 = dual_source(1, x)
        duals_si = (DualPrices(mu1, lam1, lam1 / mu1),
                    DualPrices(mu2, lam2, lam2 / mu2))
        duals_scaled = (DualPrices(mu1, lam1 * unit, lam1 * unit / mu1),
                        DualPrices(mu2, lam2 * unit, lam2 * unit / mu2))
        return x, duals_si, duals_scaled, CostTuple(c1, c2)

    x_scaled = np.zeros(4)
    x0, duals_si, duals_sc, costs = probe(x_scaled)
    rho_val = costs.c1 / costs.c2 if rho == "proportional" else float(rho)
    if rho_val <= 0:
        raise ValueError("rho must be > 0")

    branch = improvement_conditions(duals_sc, x0, be, eps_cond)
    points = [TrajectoryPoint(x0, costs, duals_si,
                              descent_rate(duals_sc, branch, be)
                              if branch is not CoopBranch.NONE else 0.0,
                              False)]
    if branch is CoopBranch.NONE:
        return Trajectory(tuple(points), rho_val, delta, "infeasible_at_start")

    sigma0 = abs(points[0].sigma)
    eps_sigma = eps_sigma_rel * sigma0
    reason = "max_iters"
    for _ in range(max_iters):
        cond = improvement_conditions(duals_sc, points[-1].x_ex, be, eps_cond)
        if cond is not branch:
            reason = "converged"
            break
        sigma = descent_rate(duals_sc, branch, be)
        if sigma >= -eps_sigma:
            reason = "stalled_sigma"
            break
        d = descent_direction(duals_sc, branch, rho_val, be)
        stepped = x_scaled + delta * d
        clamped = bool(np.any(stepped < 0.0))
        stepped = np.maximum(stepped, 0.0)
        x_new, duals_si_new, duals_sc_new, costs_new = probe(stepped)
        tol1 = 1e-12 * max(1.0, costs.c1)
        tol2 = 1e-12 * max(1.0, costs.c2)
        if costs_new.c1 > costs.c1 + tol1 or costs_new.c2 > costs.c2 + tol2:
            # finite-delta resolution reached; a further step hurts one BS
            reason = "converged"
            break
        x_scaled = stepped
        duals_si, duals_sc, costs = duals_si_new, duals_sc_new, costs_new
        points.append(TrajectoryPoint(x_new, costs, duals_si,
                                      descent_rate(duals_sc_new, branch, be),
                                      clamped))
    return Trajectory(tuple(points), rho_val, delta, reason)
