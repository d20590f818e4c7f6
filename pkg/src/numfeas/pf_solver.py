"""Proportional-fair network subproblem solvers.

Two routes to the same optimum: a projected dual-ascent solver for general
topologies, and an O(n) string-algorithm specialization for flow-aggregating
networks whose constraints are nested cumulative caps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import RoutingNetwork, Scenario, link_loads


class SolverError(RuntimeError):
    """A numerical solve failed or was handed a degenerate problem."""


@dataclass
class PFSolution:
    x: np.ndarray
    mu: np.ndarray
    kkt_residual: float
    iterations: int
    converged: bool = True


@dataclass(frozen=True)
class AscendingInstance:
    """Nested cumulative-cap problem: sum_{e<=i} x(e) <= sum_{e<=i} alphas(e)."""

    alphas: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        alphas = np.asarray(self.alphas, dtype=float)
        p = np.asarray(self.p, dtype=float)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "p", p)
        if alphas.shape != p.shape or alphas.ndim != 1:
            raise ValueError("alphas and p must be vectors of equal length")
        if np.any(alphas < 0) or np.any(p < 0):
            raise ValueError("alphas and p must be nonnegative")


def dual_bound_P(scenario: Scenario) -> float:
    """Upper bound on max over feasible x of the total willingness to pay.

    Bounds each user's price by its supremum over [0, xbar] where xbar is the
    tightest capacity on the user's route; any upper bound keeps the dual box
    valid.
    """
    net = scenario.network
    total = 0.0
    for u, route in zip(scenario.utilities, net.routes):
        xbar = float(np.min(net.capacities[list(route)]))
        if u.family == "power":
            total += u.price(xbar)  # increasing in x
        else:
            total += u.price(1.0)  # constant price (1 or the weight)
    return total


def pf_kkt_residual(
    network: RoutingNetwork, p: np.ndarray, x: np.ndarray, mu: np.ndarray
) -> float:
    """Max KKT violation of (x, mu) for the network problem at prices p."""
    p = np.asarray(p, dtype=float)
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    loads = link_loads(network, x)
    caps = network.capacities
    route_costs = network.incidence.T @ mu

    residual = 0.0
    mask = (p > 0) & (x > 0)
    if mask.any():
        stat = np.abs(p[mask] / x[mask] - route_costs[mask])
        residual = float(np.max(stat))
    residual = max(residual, float(np.max(np.abs(mu * (loads - caps)))))
    residual = max(residual, float(np.max(np.maximum(0.0, loads - caps))))
    residual = max(residual, float(np.max(np.maximum(0.0, -x))))
    return residual


def _dual_objective(p, sums, mu, caps):
    if np.any(sums <= 0):
        return -np.inf
    return float(p @ np.log(sums) - mu @ caps)


def _polish_dual(network, p, A, pa, mu, upper):
    """Newton refinement of the dual on a trial saturated-link set.

    With the saturated set L fixed, the optimal duals solve
    sum_{e in l} p_e / s_e = c(l) for l in L (s_e the route cost), a small
    smooth system solved to machine precision. Links whose multiplier turns
    negative are dropped; links that end up overloaded are added.
    """
    caps = network.capacities
    m = caps.size
    loads_now = A @ (pa / np.maximum(A.T @ mu, 1e-300))
    active = np.nonzero(
        (loads_now >= caps - 1e-3 * (1.0 + caps)) | (mu > 1e-3 * upper)
    )[0]
    if active.size == 0:
        active = np.array([int(np.argmax(loads_now / caps))])

    for _attempt in range(m + 2):
        AL = A[active]
        cL = caps[active]
        mu_l = np.maximum(mu[active], 1e-8 * upper[active])
        ok = True
        for _it in range(60):
            s = AL.T @ mu_l
            if np.any(s <= 0):
                ok = False
                break
            F = AL @ (pa / s) - cL
            if np.max(np.abs(F)) <= 1e-13 * (1.0 + np.max(cL)):
                break
            W = pa / s ** 2
            J = -(AL * W) @ AL.T
            try:
                step = np.linalg.solve(J, -F)
            except np.linalg.LinAlgError:
                step, *_ = np.linalg.lstsq(J, -F, rcond=None)
            alpha = 1.0
            while np.any(AL.T @ (mu_l + alpha * step) <= 0):
                alpha *= 0.5
                if alpha < 1e-14:
                    ok = False
                    break
            if not ok:
                break
            mu_l = mu_l + alpha * step
        if not ok:
            return None
        if np.any(mu_l < 0):
            if active.size == 1:
                return None
            active = np.delete(active, int(np.argmin(mu_l)))
            continue
        full = np.zeros(m)
        full[active] = mu_l
        s_all = A.T @ full
        if np.any(s_all <= 0):
            return None
        loads = A @ (pa / s_all)
        over = loads > caps + 1e-12 * (1.0 + caps)
        over[active] = False
        if over.any():
            active = np.sort(np.append(active, int(np.argmax(over))))
            continue
        return full
    return None


def solve_pf_dual(
    network: RoutingNetwork,
    p: np.ndarray,
    tol: float = 1e-8,
    max_iters: int = 100000,
    mu0: np.ndarray | None = None,
) -> PFSolution:
    """Projected gradient ascent on the box-constrained dual of Network(A,c;p).

    Maximizes R(mu) = sum_e p_e log(sum_{l in e} mu_l) - sum_l mu_l c(l) over
    0 <= mu_l <= 2*sum(p)/c(l), then recovers x(e) = p_e / sum_{l in e} mu_l.
    Users with p_e = 0 are excluded and allocated x(e) = 0.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (network.n,):
        raise ValueError(f"expected {network.n} prices")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("prices must be finite and nonnegative")
    active = p > 0
    if not active.any():
        raise SolverError("all prices are zero; dual objective is degenerate")

    caps = network.capacities
    A = network.incidence[:, active]
    pa = p[active]
    upper = 2.0 * float(pa.sum()) / caps

    if mu0 is None:
        mu = 0.5 * upper  # box midpoint keeps every route cost positive
    else:
        mu = np.clip(np.asarray(mu0, dtype=float), 1e-12 * upper, upper)

    def recover(mu):
        x = np.zeros(network.n)
        sums = A.T @ mu
        x[active] = pa / sums
        loads = link_loads(network, x)
        over = loads > caps
        if over.any():
            x = x * float(np.min(caps[over] / loads[over]))
        return x

    # a warm dual usually needs only the Newton refinement
    if mu0 is not None:
        polished = _polish_dual(network, p, A, pa, mu, upper)
        if polished is not None:
            xp = recover(polished)
            kkt_p = pf_kkt_residual(network, p, xp, polished)
            if kkt_p <= tol:
                return PFSolution(x=xp, mu=polished, kkt_residual=kkt_p, iterations=0)

    sums = A.T @ mu
    obj = _dual_objective(pa, sums, mu, caps)
    step = 1.0
    best = None
    for it in range(1, max_iters + 1):
        grad = A @ (pa / sums) - caps

        # convergence: projected-gradient fixed point plus primal KKT residual
        pg_res = float(np.max(np.abs(np.clip(mu + grad, 0.0, upper) - mu)))
        x = recover(mu)
        kkt = pf_kkt_residual(network, p, x, mu)
        if best is None or kkt < best.kkt_residual:
            best = PFSolution(x=x, mu=mu.copy(), kkt_residual=kkt, iterations=it)
        if pg_res <= tol and kkt <= tol:
            return PFSolution(x=x, mu=mu.copy(), kkt_residual=kkt, iterations=it)

        # active-set Newton refinement once ascent has localized the optimum
        if it % 5 == 3 or kkt <= 1e-2:
            polished = _polish_dual(network, p, A, pa, mu, upper)
            if polished is not None:
                xp = recover(polished)
                kkt_p = pf_kkt_residual(network, p, xp, polished)
                if kkt_p <= tol:
                    return PFSolution(
                        x=xp, mu=polished, kkt_residual=kkt_p, iterations=it
                    )
                if kkt_p < best.kkt_residual:
                    best = PFSolution(
                        x=xp, mu=polished.copy(), kkt_residual=kkt_p, iterations=it
                    )

        # backtracking line search (Armijo) on the ascent direction
        step = min(2.0 * step, 1e12)
        while True:
            mu_new = np.clip(mu + step * grad, 0.0, upper)
            sums_new = A.T @ mu_new
            obj_new = _dual_objective(pa, sums_new, mu_new, caps)
            if obj_new >= obj + 1e-4 * float(grad @ (mu_new - mu)):
                break
            step *= 0.5
            if step < 1e-18:
                mu_new, sums_new, obj_new = mu, sums, obj
                break
        mu, sums, obj = mu_new, sums_new, obj_new

    best.converged = False
    best.iterations = max_iters
    return best


def concave_cover(points) -> tuple[list[int], list[float]]:
    """Upper concave envelope of planar points with nondecreasing abscissae.

    Single Graham-scan style pass. Returns (breakpoint indices, segment
    slopes); slopes strictly decrease. Equal consecutive abscissae with
    increasing ordinate form a vertical segment and are rejected.
    """
    pts = [(float(b), float(v)) for b, v in points]
    if len(pts) < 2:
        raise ValueError("need at least two points")
    keep = [0]
    for i in range(1, len(pts)):
        if pts[i][0] < pts[keep[-1]][0] - 1e-15:
            raise ValueError("abscissae must be nondecreasing")
        if pts[i][0] == pts[keep[-1]][0]:
            if pts[i][1] > pts[keep[-1]][1]:
                raise ValueError("vertical segment: equal B with increasing P")
            continue  # dominated duplicate abscissa
        keep.append(i)

    stack: list[int] = []
    for i in keep:
        while len(stack) >= 2:
            b1, v1 = pts[stack[-2]]
            b2, v2 = pts[stack[-1]]
            b3, v3 = pts[i]
            # pop while the middle point lies on or below the chord
            if (v2 - v1) * (b3 - b2) <= (v3 - v2) * (b2 - b1):
                stack.pop()
            else:
                break
        stack.append(i)

    slopes = []
    for a, b in zip(stack, stack[1:]):
        slopes.append((pts[b][1] - pts[a][1]) / (pts[b][0] - pts[a][0]))
    return stack, slopes


def string_solve(instance: AscendingInstance) -> np.ndarray:
    """Optimal allocation for sum_e p_e log x(e) under nested cumulative caps.

    Builds the cumulative points (B_i, P_i), takes their concave cover, and
    allocates x(e) = p_e / slope within each cover segment (x = 0 on
    zero-slope segments). O(n) after the cumulative pass.
    """
    alphas, p = instance.alphas, instance.p
    n = alphas.size
    if np.all(alphas == 0):
        return np.zeros(n)
    B = np.concatenate(([0.0], np.cumsum(alphas)))
    P = np.concatenate(([0.0], np.cumsum(p)))
    breakpoints, slopes = concave_cover(list(zip(B, P)))

    x = np.zeros(n)
    for (i, j), s in zip(zip(breakpoints, breakpoints[1:]), slopes):
        if s > 0:
            x[i:j] = p[i:j] / s
    return x
