"""Independent oracles and checkers: the reference system optimum, system-level
KKT residuals, the optimality-gap Lyapunov function, and the discontinuity
fixture for the set-valued network map.

The reference optimum deliberately shares no code with the production solvers
so that cross-checks against it are non-circular.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (
    RoutingNetwork,
    Scenario,
    UtilitySpec,
    link_loads,
    utility_derivs,
    welfare,
)


class OracleError(RuntimeError):
    """The reference solve failed to certify an optimum."""


@dataclass
class KKTReport:
    stationarity: float
    complementary_slackness: float
    primal_infeasibility: float
    dual_infeasibility: float

    @property
    def overall(self) -> float:
        return max(
            self.stationarity,
            self.complementary_slackness,
            self.primal_infeasibility,
            self.dual_infeasibility,
        )


@dataclass
class ReferenceOptimum:
    x_star: np.ndarray
    mu_star: np.ndarray
    certified_residual: float


def system_kkt_residual(scenario: Scenario, x, mu) -> KKTReport:
    """KKT residual of (x, mu) for the full system problem.

    The nonnegativity multipliers are derived rather than supplied:
    eta_e = max(0, route cost - w_e'(x(e))).
    """
    net = scenario.network
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    loads = link_loads(net, x)
    caps = net.capacities
    derivs = utility_derivs(scenario.utilities, x)
    route_costs = net.incidence.T @ mu
    eta = np.maximum(0.0, route_costs - derivs)

    stationarity = float(np.max(np.abs(derivs - (route_costs - eta))))
    if math.isnan(stationarity):  # inf derivative at a zero rate
        stationarity = math.inf
    comp = max(
        float(np.max(np.abs(mu * (loads - caps)))),
        float(np.max(np.abs(eta * x))),
    )
    primal = max(
        float(np.max(np.maximum(0.0, loads - caps))),
        float(np.max(np.maximum(0.0, -x))),
    )
    dual = float(np.max(np.maximum(0.0, -mu)))
    return KKTReport(stationarity, comp, primal, dual)


def lyapunov_V(scenario: Scenario, x, x_star) -> float:
    """Optimality gap W(x*) - W(x); +inf when W(x) is the -inf sentinel."""
    wx = welfare(scenario.utilities, x)
    if wx == -math.inf:
        return math.inf
    return welfare(scenario.utilities, x_star) - wx


def descent_inner_product(scenario: Scenario, x, v) -> float:
    """Gradient-displacement inner product sum_e w_e'(x(e)) (v(e) - x(e))."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(x <= 0):
        raise ValueError("x must be strictly positive for the gradient")
    return float(utility_derivs(scenario.utilities, x) @ (v - x))


# ---------------------------------------------------------------------------
# Reference optimum: projected gradient + Dykstra projection + Newton polish
# ---------------------------------------------------------------------------

def _project_feasible(network: RoutingNetwork, y, tol=1e-11, max_sweeps=20000):
    """Dykstra alternating projections onto the orthant and link halfspaces."""
    A = network.incidence
    caps = network.capacities
    norms2 = np.sum(A * A, axis=1)
    x = np.asarray(y, dtype=float).copy()
    n_sets = network.m + 1
    increments = [np.zeros_like(x) for _ in range(n_sets)]
    for _ in range(max_sweeps):
        change = 0.0
        for s in range(n_sets):
            z = x + increments[s]
            if s < network.m:
                viol = A[s] @ z - caps[s]
                x_new = z - A[s] * (viol / norms2[s]) if viol > 0 else z
            else:
                x_new = np.maximum(z, 0.0)
            increments[s] = z - x_new
            change = max(change, float(np.max(np.abs(x_new - x))))
            x = x_new
        loads = A @ x
        viol = max(float(np.max(loads - caps)), float(np.max(-x)), 0.0)
        if viol <= tol and change <= tol:
            break
    return np.maximum(x, 0.0)


def _interior_point(network: RoutingNetwork) -> np.ndarray:
    counts = network.incidence.sum(axis=1)
    x = np.empty(network.n)
    for e, route in enumerate(network.routes):
        x[e] = 0.5 * min(network.capacities[l] / counts[l] for l in route)
    return x


def _estimate_duals(scenario, x, active_links):
    """Least-squares dual recovery over the active links, clipped at zero."""
    net = scenario.network
    mu = np.zeros(net.m)
    if active_links.size == 0:
        return mu
    derivs = utility_derivs(scenario.utilities, np.maximum(x, 1e-300))
    AL = net.incidence[active_links]
    sol, *_ = np.linalg.lstsq(AL.T, derivs, rcond=None)
    mu[active_links] = np.maximum(sol, 0.0)
    return mu


def _newton_polish(scenario, x, active_links, tol):
    """Solve the equality-constrained stationarity system on a trial active set.

    Unknowns are the rates and the multipliers of the active links; the system
    is w'(x) = A_L^T mu, A_L x = c_L. Links with negative multipliers are
    dropped and newly violated links added until the KKT residual certifies.
    """
    net = scenario.network
    n = net.n
    active = list(active_links)
    for _attempt in range(net.m + 2):
        AL = net.incidence[active] if active else np.zeros((0, n))
        cL = net.capacities[active] if active else np.zeros(0)
        mL = len(active)
        xx = x.copy()
        mu_l = _estimate_duals(scenario, xx, np.array(active, dtype=int))[active]
        scale = 1.0 + float(np.max(net.capacities))
        for _it in range(80):
            derivs = utility_derivs(scenario.utilities, xx)
            F = np.concatenate([derivs - AL.T @ mu_l, AL @ xx - cL])
            if np.max(np.abs(F)) <= 1e-13 * scale:
                break
            H = np.diag([u.second_deriv(xe) for u, xe in zip(scenario.utilities, xx)])
            J = np.block([[H, -AL.T], [AL, np.zeros((mL, mL))]])
            try:
                step = np.linalg.solve(J, -F)
            except np.linalg.LinAlgError:
                step, *_ = np.linalg.lstsq(J, -F, rcond=None)
            alpha = 1.0
            while alpha > 1e-14 and np.any(xx + alpha * step[:n] <= 0):
                alpha *= 0.5
            if np.any(xx + alpha * step[:n] <= 0):
                break
            xx = xx + alpha * step[:n]
            mu_l = mu_l + alpha * step[n:]
        mu = np.zeros(net.m)
        mu[active] = mu_l
        if np.any(mu_l < -1e-9):
            drop = active[int(np.argmin(mu_l))]
            active = [l for l in active if l != drop]
            continue
        mu = np.maximum(mu, 0.0)
        loads = link_loads(net, xx)
        overloaded = np.nonzero(loads - net.capacities > tol)[0]
        new = [l for l in overloaded if l not in active]
        if new:
            active = sorted(set(active) | {int(new[0])})
            continue
        report = system_kkt_residual(scenario, xx, mu)
        if report.overall <= tol:
            return xx, mu, report.overall
        break
    return None


def reference_optimum(
    scenario: Scenario, tol: float = 1e-10, max_iters: int = 5000
) -> ReferenceOptimum:
    """Certified system optimum, independent of the production solvers.

    Projected gradient ascent on total welfare over the capacity polytope
    (Dykstra projections), followed by a Newton polish on the identified
    active set, certified by the system KKT residual.
    """
    net = scenario.network
    x = _interior_point(net)
    obj = welfare(scenario.utilities, x)
    step = 1.0
    floor = 1e-12

    for it in range(1, max_iters + 1):
        if it == 1 or it % 5 == 0:
            loads = link_loads(net, x)
            active = np.nonzero(
                loads >= net.capacities - 1e-3 * (1.0 + net.capacities)
            )[0]
            if active.size == 0:
                active = np.array([int(np.argmax(loads / net.capacities))])
            polished = _newton_polish(scenario, np.maximum(x, floor), active, tol)
            if polished is not None:
                x_star, mu_star, residual = polished
                return ReferenceOptimum(x_star, mu_star, residual)

        grad = utility_derivs(scenario.utilities, np.maximum(x, floor))
        step = min(4.0 * step, 1e9)
        while True:
            x_new = _project_feasible(net, x + step * grad, tol=min(1e-9, tol))
            obj_new = welfare(scenario.utilities, x_new)
            if obj_new >= obj + 1e-4 * float(grad @ (x_new - x)) and obj_new > -math.inf:
                break
            step *= 0.5
            if step < 1e-16:
                x_new, obj_new = x, obj
                break
        x, obj = x_new, obj_new

    mu = _estimate_duals(
        scenario, x, np.nonzero(link_loads(net, x) >= net.capacities - 1e-6)[0]
    )
    residual = system_kkt_residual(scenario, x, mu).overall
    if residual > tol:
        raise OracleError(
            f"reference optimum not certified: residual {residual:g} > {tol:g}"
        )
    return ReferenceOptimum(x, mu, residual)


# ---------------------------------------------------------------------------
# Brute-force welfare search (small instances only)
# ---------------------------------------------------------------------------

def _value_vec(u: UtilitySpec, x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        if u.family == "log":
            return np.where(x > 0, np.log(np.maximum(x, 1e-300)), -np.inf)
        if u.family == "wlog":
            return u.param * np.where(x > 0, np.log(np.maximum(x, 1e-300)), -np.inf)
        return x ** u.param


def _max_last_rate(network, fixed):
    """Largest feasible rate for the last user given the other rates, or None
    when the fixed rates already violate some capacity."""
    caps = network.capacities.copy()
    for e, xe in enumerate(fixed):
        for l in network.routes[e]:
            caps[l] -= xe
    last = network.n - 1
    bound = min(caps[l] for l in network.routes[last])
    others = [l for l in range(network.m) if l not in network.routes[last]]
    if any(caps[l] < 0 for l in others) or bound < 0:
        return None
    return bound


def brute_force_best_welfare(scenario: Scenario, step: float = 1e-3) -> float:
    """Best welfare found by exhaustive grid search (n <= 3).

    Grids every user but the last; the last user, utilities being increasing,
    is pushed to its largest feasible rate. Serves as the independent upper
    envelope check on the reference optimum.
    """
    net = scenario.network
    n = net.n
    if n > 3:
        raise ValueError("brute force search is limited to n <= 3")
    utilities = scenario.utilities

    if n == 1:
        x3 = _max_last_rate(net, [])
        return float(utilities[0].value(x3))

    ub1 = min(net.capacities[l] for l in net.routes[0])
    grid1 = np.arange(0.0, ub1 + step, step)
    grid1 = grid1[grid1 <= ub1]

    if n == 2:
        best = -math.inf
        w1 = _value_vec(utilities[0], grid1)
        for x1, w1v in zip(grid1, w1):
            x2 = _max_last_rate(net, [x1])
            if x2 is None:
                continue
            best = max(best, w1v + utilities[1].value(x2))
        return float(best)

    ub2 = min(net.capacities[l] for l in net.routes[1])
    grid2 = np.arange(0.0, ub2 + step, step)
    grid2 = grid2[grid2 <= ub2]
    w2 = _value_vec(utilities[1], grid2)
    A = net.incidence
    caps = net.capacities
    route3 = list(net.routes[2])
    others = [l for l in range(net.m) if l not in net.routes[2]]

    best = -math.inf
    for x1 in grid1:
        rem = caps - A[:, 0] * x1  # residual capacity after user 1
        rem2 = rem[:, None] - np.outer(A[:, 1], grid2)
        x3 = np.min(rem2[route3], axis=0) if route3 else np.full(grid2.size, np.inf)
        ok = x3 >= 0
        if others:
            ok &= np.min(rem2[others], axis=0) >= 0
        if not ok.any():
            continue
        vals = (
            utilities[0].value(x1)
            + w2[ok]
            + _value_vec(utilities[2], x3[ok])
        )
        best = max(best, float(np.max(vals)))
    return best


# ---------------------------------------------------------------------------
# Set-valued network map discontinuity fixture
# ---------------------------------------------------------------------------

def appendix_discontinuity_demo(c: float = 1.0, depth: int = 6):
    """Two sequence limits of the network map at the corner point (c, 0, 0).

    Three users under nested caps (c, 2c, 3c) with power utilities (price
    vanishes at zero rate). Approaching along (c, 0, d) selects (c, 0, 2c);
    approaching along (c, d, d) selects (c, c, c). The mismatch shows the map
    admits no continuous selection.
    """
    from .pf_solver import AscendingInstance, string_solve

    if c <= 0:
        raise ValueError("c must be positive")
    u = UtilitySpec("power", 0.5)
    alphas = np.array([c, c, c])

    limit_y = limit_z = None
    for k in range(1, depth + 1):
        d = 10.0 ** (-k)
        p_y = np.array([u.price(c), u.price(0.0), u.price(d)])
        p_z = np.array([u.price(c), u.price(d), u.price(d)])
        limit_y = string_solve(AscendingInstance(alphas, p_y))
        limit_z = string_solve(AscendingInstance(alphas, p_z))
    return limit_y, limit_z
