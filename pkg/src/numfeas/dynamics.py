"""Benchmark congestion-control fluid dynamics and the scaled differential
inclusion, integrated numerically to produce error-trajectory traces."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (
    DEFAULT_TOL_FEAS,
    Scenario,
    UtilityProfile,
    feasibility_slack,
    link_loads,
    prices,
    welfare,
)
from .iterate import detect_flow_aggregating, network_update


class DivergenceError(RuntimeError):
    """The integrated state left the trust region."""


DIVERGENCE_BOUND = 1e6


@dataclass(frozen=True)
class KMTConfig:
    kappa: float = 1.0
    epsilon: float = 0.1
    h: float | None = None  # defaults to 0.01 / kappa
    horizon: float = 50.0

    def __post_init__(self):
        if self.kappa <= 0 or self.epsilon <= 0 or self.horizon <= 0:
            raise ValueError("kappa, epsilon, horizon must be positive")
        if self.h is not None and not 0 < self.h <= self.horizon:
            raise ValueError("need 0 < h <= horizon")

    def resolved_h(self) -> float:
        return self.h if self.h is not None else 0.01 / self.kappa


@dataclass
class StateTrace:
    times: np.ndarray
    states: np.ndarray  # one row per sample
    welfare: np.ndarray
    min_slack: np.ndarray
    errors: np.ndarray | None = None  # ||x(t) - x*||_2 when x* was supplied

    def compute_errors(self, x_star: np.ndarray) -> np.ndarray:
        self.errors = np.linalg.norm(self.states - np.asarray(x_star), axis=1)
        return self.errors

    def time_to_threshold(self, threshold: float) -> float | None:
        """First sample time with error <= threshold, or None."""
        if self.errors is None:
            raise ValueError("errors not computed")
        hits = np.nonzero(self.errors <= threshold)[0]
        if hits.size == 0:
            return None
        return float(self.times[hits[0]])


def penalty_psi(load: float, capacity: float, epsilon: float):
    """Congestion cost per unit flow: (load - c + eps)^+ / eps^2."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return np.maximum(0.0, load - capacity + epsilon) / epsilon ** 2


def kmt_vector_field(
    x: np.ndarray, scenario: Scenario, kappa: float, epsilon: float
) -> np.ndarray:
    """Rate of change: kappa * (p_e - x(e) * sum of link costs on the route)."""
    net = scenario.network
    x = np.asarray(x, dtype=float)
    p = prices(scenario.utilities, x)
    mu = penalty_psi(link_loads(net, x), net.capacities, epsilon)
    return kappa * (p - x * (net.incidence.T @ mu))


def _sample(scenario, times, states, x_star):
    net = scenario.network
    states = np.array(states)
    trace = StateTrace(
        times=np.array(times),
        states=states,
        welfare=np.array([welfare(scenario.utilities, s) for s in states]),
        min_slack=np.array([feasibility_slack(net, s)[0] for s in states]),
    )
    if x_star is not None:
        trace.compute_errors(x_star)
    return trace


def integrate_kmt(
    scenario: Scenario,
    x0: np.ndarray,
    config: KMTConfig,
    x_star: np.ndarray | None = None,
) -> StateTrace:
    """Fixed-step RK4 on the fluid dynamics, clipping rates at zero.

    Aborts with DivergenceError if any rate exceeds the trust bound. The
    trajectory is not kept inside the capacity region; negative min-slack
    samples are expected behavior, not errors.
    """
    x = np.maximum(np.asarray(x0, dtype=float), 0.0)
    h = config.resolved_h()
    steps = int(round(config.horizon / h))
    kappa, eps = config.kappa, config.epsilon

    net = scenario.network
    profile = UtilityProfile(scenario.utilities)
    A = net.incidence

    def field(y):
        p = profile.prices(y)
        mu = penalty_psi(A @ y, net.capacities, eps)
        return kappa * (p - y * (A.T @ mu))

    times = [0.0]
    states = [x.copy()]
    for i in range(steps):
        k1 = field(x)
        k2 = field(np.maximum(x + 0.5 * h * k1, 0.0))
        k3 = field(np.maximum(x + 0.5 * h * k2, 0.0))
        k4 = field(np.maximum(x + h * k3, 0.0))
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        x = np.maximum(x, 0.0)
        if np.any(np.abs(x) > DIVERGENCE_BOUND):
            raise DivergenceError(f"state exceeded {DIVERGENCE_BOUND:g} at t={h*(i+1):g}")
        times.append(h * (i + 1))
        states.append(x.copy())
    return _sample(scenario, times, states, x_star)


def integrate_scaled_di(
    scenario: Scenario,
    x0: np.ndarray,
    kappa: float = 1.0,
    h: float | None = None,
    horizon: float = 50.0,
    inner_tol: float = 1e-8,
    x_star: np.ndarray | None = None,
    tol_feas: float = DEFAULT_TOL_FEAS,
) -> StateTrace:
    """Explicit Euler on dx/dt = kappa * (T(x) - x) with h * kappa <= 1.

    Each step is a convex combination of the state and a feasible point, so
    the trajectory stays inside the capacity region at all times.
    """
    if kappa <= 0 or horizon <= 0:
        raise ValueError("kappa and horizon must be positive")
    if h is None:
        h = 0.1 / kappa
    if h * kappa > 1.0 + 1e-12:
        raise ValueError("h * kappa must not exceed 1 (convex-combination step)")

    net = scenario.network
    x = np.asarray(x0, dtype=float)
    if np.any(x <= 0):
        raise ValueError("x0 must be strictly positive")
    if not feasibility_slack(net, x, tol_feas)[1]:
        raise ValueError("x0 must be feasible")

    shape = detect_flow_aggregating(net)
    profile = UtilityProfile(scenario.utilities)
    steps = int(round(horizon / h))
    times = [0.0]
    states = [x.copy()]
    mu = None
    for i in range(steps):
        p = profile.prices(x)
        v, mu = network_update(scenario, p, shape=shape, inner_tol=inner_tol,
                               warm_mu=mu)
        x = x + h * kappa * (v - x)
        times.append(h * (i + 1))
        states.append(x.copy())
    return _sample(scenario, times, states, x_star)
