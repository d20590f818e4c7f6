"""The feasible-at-all-times iterate loop: diminishing convex-combination
steps toward the proportional-fair network solution, starting from the
lexicographically maximal point."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (
    DEFAULT_TOL_FEAS,
    RoutingNetwork,
    Scenario,
    UtilityProfile,
    feasibility_slack,
    prices,
    utility_derivs,
    welfare,
)
from .pf_solver import AscendingInstance, SolverError, solve_pf_dual, string_solve


@dataclass(frozen=True)
class AlgorithmConfig:
    max_iters: int = 100000
    stop_tol: float = 1e-7
    inner_tol: float | None = None  # defaults to min(1e-8, stop_tol / 10)
    record_every: int = 1

    def __post_init__(self):
        if self.max_iters <= 0 or self.stop_tol <= 0 or self.record_every <= 0:
            raise ValueError("config values must be positive")
        if self.inner_tol is not None and self.inner_tol <= 0:
            raise ValueError("inner_tol must be positive")

    def resolved_inner_tol(self) -> float:
        if self.inner_tol is not None:
            return self.inner_tol
        return min(1e-8, self.stop_tol / 10.0)


@dataclass
class IterateRecord:
    k: int
    x: np.ndarray
    v: np.ndarray
    step: float
    welfare: float
    descent: float
    min_slack: float


@dataclass
class AlgorithmTrace:
    records: list[IterateRecord] = field(default_factory=list)
    converged: bool = False
    failed: bool = False
    failure_reason: str = ""

    @property
    def final_x(self) -> np.ndarray:
        return self.records[-1].x

    def iterates(self) -> np.ndarray:
        return np.array([r.x for r in self.records])


@dataclass(frozen=True)
class FlowAggregatingShape:
    """Relabeling that exposes nested routes as linear ascending constraints.

    user_order[i] is the user whose route is links i..n in canonical labels;
    alphas are the per-stage capacity increments.
    """

    user_order: np.ndarray
    link_order: np.ndarray
    alphas: np.ndarray


def step_size(k: int) -> float:
    """Diminishing step a_k = 1/(k+1)."""
    if k < 0:
        raise ValueError("iteration index must be >= 0")
    return 1.0 / (k + 1)


def detect_flow_aggregating(network: RoutingNetwork) -> FlowAggregatingShape | None:
    """Recognize networks whose constraints reduce to nested cumulative caps.

    Requires m = n and routes that form a strict nesting chain under some
    relabeling, with capacities nondecreasing along the chain.
    """
    if network.m != network.n:
        return None
    n = network.n
    route_sets = [frozenset(r) for r in network.routes]
    order = sorted(range(n), key=lambda e: -len(route_sets[e]))
    if [len(route_sets[e]) for e in order] != list(range(n, 0, -1)):
        return None
    for i in range(n - 1):
        if not route_sets[order[i]] > route_sets[order[i + 1]]:
            return None

    link_order = []
    for i in range(n - 1):
        (link,) = route_sets[order[i]] - route_sets[order[i + 1]]
        link_order.append(link)
    (last,) = route_sets[order[-1]]
    link_order.append(last)

    B = network.capacities[link_order]
    alphas = np.diff(B, prepend=0.0)
    if np.any(alphas < 0):
        return None
    return FlowAggregatingShape(
        user_order=np.array(order), link_order=np.array(link_order), alphas=alphas
    )


def lexicographic_max_point(network: RoutingNetwork) -> np.ndarray:
    """Max-min fair allocation by progressive filling.

    All unfrozen users' rates rise at equal speed; when a link saturates,
    every unfrozen user crossing it freezes at the current rate.
    """
    n, m = network.n, network.m
    x = np.zeros(n)
    active = np.ones(n, dtype=bool)
    A = network.incidence
    while active.any():
        counts = A @ active.astype(float)
        loads = A @ x
        slack = network.capacities - loads
        with np.errstate(divide="ignore", invalid="ignore"):
            rise = np.where(counts > 0, slack / counts, np.inf)
        delta = float(np.min(rise))
        x[active] += delta
        loads = A @ x
        saturated = loads >= network.capacities - 1e-12 * (1.0 + network.capacities)
        for e in np.nonzero(active)[0]:
            if any(saturated[l] for l in network.routes[e]):
                active[e] = False
    return x


def network_update(
    scenario: Scenario,
    p: np.ndarray,
    shape: FlowAggregatingShape | None = None,
    inner_tol: float = 1e-8,
    warm_mu: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Evaluate the proportional-fair map: solve Network(A,c;p).

    Uses the O(n) string algorithm on flow-aggregating shapes (when the
    increments are all positive), the dual-ascent solver otherwise. Returns
    (allocation, dual prices or None).
    """
    if shape is not None and np.all(shape.alphas > 0):
        instance = AscendingInstance(shape.alphas, np.asarray(p)[shape.user_order])
        y = string_solve(instance)
        v = np.empty_like(y)
        v[shape.user_order] = y
        return v, None
    sol = solve_pf_dual(scenario.network, p, tol=inner_tol, mu0=warm_mu)
    if not sol.converged:
        raise SolverError(
            f"network update failed to reach tol {inner_tol:g} "
            f"(kkt residual {sol.kkt_residual:g})"
        )
    return sol.x, sol.mu


def algorithm1_step(
    x: np.ndarray,
    scenario: Scenario,
    k: int,
    inner_tol: float = 1e-8,
    shape: FlowAggregatingShape | None = None,
    warm_mu: np.ndarray | None = None,
    profile: UtilityProfile | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """One user update + network update: x_next = x + a_{k+1} (v - x).

    Returns (x_next, v, dual prices from the inner solver when available).
    """
    x = np.asarray(x, dtype=float)
    net = scenario.network
    if np.any(x <= 0):
        raise ValueError("iterate must be strictly positive")
    _, feasible = feasibility_slack(net, x)
    if not feasible:
        raise ValueError("iterate must be feasible")
    if profile is None:
        p = prices(scenario.utilities, x)
    else:
        p = profile.prices(x)
    v, mu = network_update(scenario, p, shape=shape, inner_tol=inner_tol,
                           warm_mu=warm_mu)
    a = step_size(k + 1)
    x_next = x + a * (v - x)
    return x_next, v, mu


def run_algorithm1(
    scenario: Scenario,
    x0: np.ndarray,
    config: AlgorithmConfig = AlgorithmConfig(),
    tol_feas: float = DEFAULT_TOL_FEAS,
) -> AlgorithmTrace:
    """Run the iterate loop from a strictly positive feasible start.

    Stops when the network update returns a point within stop_tol of the
    current iterate (the fixed-point residual), or at max_iters. On an inner
    solver failure the trace collected so far is returned flagged.
    """
    x0 = np.asarray(x0, dtype=float)
    net = scenario.network
    if np.any(x0 <= 0):
        raise ValueError("x0 must be strictly positive")
    min_slack, feasible = feasibility_slack(net, x0, tol_feas)
    if not feasible:
        raise ValueError(f"x0 is infeasible (min slack {min_slack:g})")

    shape = detect_flow_aggregating(net)
    inner_tol = config.resolved_inner_tol()
    profile = UtilityProfile(scenario.utilities)
    trace = AlgorithmTrace()
    x = x0
    mu = None
    for k in range(config.max_iters):
        try:
            x_next, v, mu = algorithm1_step(
                x, scenario, k, inner_tol=inner_tol, shape=shape, warm_mu=mu,
                profile=profile,
            )
        except SolverError as err:
            trace.failed = True
            trace.failure_reason = str(err)
            return trace
        if k % config.record_every == 0 or np.max(np.abs(v - x)) <= config.stop_tol:
            derivs = utility_derivs(scenario.utilities, x)
            trace.records.append(
                IterateRecord(
                    k=k,
                    x=x,
                    v=v,
                    step=step_size(k + 1),
                    welfare=welfare(scenario.utilities, x),
                    descent=float(derivs @ (v - x)),
                    min_slack=feasibility_slack(net, x, tol_feas)[0],
                )
            )
        if np.max(np.abs(v - x)) <= config.stop_tol:
            trace.converged = True
            return trace
        x = x_next
    return trace
