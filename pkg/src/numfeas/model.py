"""Network model: topology, capacities, utility functions, and the elementary
evaluations (loads, prices, welfare) that every solver consumes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

DEFAULT_TOL_FEAS = 1e-9

UTILITY_FAMILIES = ("log", "wlog", "power")


class ScenarioError(ValueError):
    """A scenario file failed to parse or validate."""


@dataclass(frozen=True)
class UtilitySpec:
    """A strictly concave, strictly increasing utility on (0, inf).

    family "log":   w(x) = ln x
    family "wlog":  w(x) = a * ln x      (param = a > 0)
    family "power": w(x) = x**beta       (param = beta in (0, 1))
    """

    family: str
    param: float = 0.0

    def __post_init__(self):
        if self.family not in UTILITY_FAMILIES:
            raise ScenarioError(f"unknown utility family {self.family!r}")
        if self.family == "wlog" and not self.param > 0:
            raise ScenarioError("wlog weight must be > 0")
        if self.family == "power" and not 0 < self.param < 1:
            raise ScenarioError("power exponent must lie in (0, 1)")

    def value(self, x: float) -> float:
        if x < 0:
            raise ValueError("rate must be nonnegative")
        if self.family == "log":
            return math.log(x) if x > 0 else -math.inf
        if self.family == "wlog":
            return self.param * math.log(x) if x > 0 else -math.inf
        return x ** self.param

    def deriv(self, x: float) -> float:
        if x < 0:
            raise ValueError("rate must be nonnegative")
        if x == 0:
            return math.inf
        if self.family == "log":
            return 1.0 / x
        if self.family == "wlog":
            return self.param / x
        return self.param * x ** (self.param - 1.0)

    def second_deriv(self, x: float) -> float:
        if x <= 0:
            raise ValueError("second derivative needs x > 0")
        if self.family == "log":
            return -1.0 / x ** 2
        if self.family == "wlog":
            return -self.param / x ** 2
        return self.param * (self.param - 1.0) * x ** (self.param - 2.0)

    def price(self, x: float) -> float:
        """Willingness to pay p = x * w'(x), extended by its limit at x = 0."""
        if x < 0:
            raise ValueError("rate must be nonnegative")
        if self.family == "log":
            return 1.0
        if self.family == "wlog":
            return self.param
        return self.param * x ** self.param


@dataclass(frozen=True)
class RoutingNetwork:
    """Fixed single-path routing: 0/1 link-user incidence plus capacities.

    routes[e] lists the (0-based) link indices on user e's path.
    """

    capacities: np.ndarray
    routes: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        caps = np.asarray(self.capacities, dtype=float)
        object.__setattr__(self, "capacities", caps)
        object.__setattr__(self, "routes", tuple(tuple(r) for r in self.routes))
        if caps.ndim != 1 or caps.size == 0:
            raise ScenarioError("capacities must be a nonempty vector")
        if not np.all(np.isfinite(caps)) or not np.all(caps > 0):
            raise ScenarioError("every capacity must be finite and > 0")
        if len(self.routes) == 0:
            raise ScenarioError("network needs at least one user")
        m = caps.size
        for e, route in enumerate(self.routes):
            if len(route) == 0:
                raise ScenarioError(f"route of user {e + 1} is empty")
            for l in route:
                if not 0 <= l < m:
                    raise ScenarioError(
                        f"route of user {e + 1} references unknown link {l + 1}"
                    )
            if len(set(route)) != len(route):
                raise ScenarioError(f"route of user {e + 1} repeats a link")

    @property
    def m(self) -> int:
        return self.capacities.size

    @property
    def n(self) -> int:
        return len(self.routes)

    @cached_property
    def incidence(self) -> np.ndarray:
        """The m x n 0/1 matrix A with A[l, e] = 1 iff link l is on route e."""
        A = np.zeros((self.m, self.n))
        for e, route in enumerate(self.routes):
            A[list(route), e] = 1.0
        return A


@dataclass(frozen=True)
class Scenario:
    network: RoutingNetwork
    utilities: tuple[UtilitySpec, ...]
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "utilities", tuple(self.utilities))
        if len(self.utilities) != self.network.n:
            raise ScenarioError(
                f"{len(self.utilities)} utilities for {self.network.n} users"
            )


def link_loads(network: RoutingNetwork, x: np.ndarray) -> np.ndarray:
    """Aggregate flow per link: load(l) = sum of x(e) over users with l on route."""
    x = np.asarray(x, dtype=float)
    if x.shape != (network.n,):
        raise ValueError(f"expected {network.n} rates, got shape {x.shape}")
    return network.incidence @ x


def feasibility_slack(
    network: RoutingNetwork, x: np.ndarray, tol_feas: float = DEFAULT_TOL_FEAS
) -> tuple[float, bool]:
    """Smallest slack across capacity and nonnegativity constraints.

    Returns (min_slack, feasible) with feasible <=> min_slack >= -tol_feas.
    """
    x = np.asarray(x, dtype=float)
    loads = link_loads(network, x)
    min_slack = min(float(np.min(network.capacities - loads)), float(np.min(x)))
    return min_slack, min_slack >= -tol_feas


class UtilityProfile:
    """Vectorized price/derivative/welfare evaluators for a fixed user set.

    Avoids per-user Python dispatch in integrator and iterate hot loops.
    """

    def __init__(self, utilities):
        utilities = tuple(utilities)
        fams = np.array([u.family for u in utilities])
        self.is_log = fams == "log"
        self.is_wlog = fams == "wlog"
        self.is_power = fams == "power"
        self.param = np.array([u.param for u in utilities])

    def prices(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(x.shape)
        out[self.is_log] = 1.0
        out[self.is_wlog] = self.param[self.is_wlog]
        if self.is_power.any():
            b = self.param[self.is_power]
            out[self.is_power] = b * x[self.is_power] ** b
        return out

    def derivs(self, x: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            out = np.empty(x.shape)
            out[self.is_log] = 1.0 / x[self.is_log]
            out[self.is_wlog] = self.param[self.is_wlog] / x[self.is_wlog]
            if self.is_power.any():
                b = self.param[self.is_power]
                out[self.is_power] = b * x[self.is_power] ** (b - 1.0)
        return out

    def welfare(self, x: np.ndarray) -> float:
        with np.errstate(divide="ignore"):
            total = 0.0
            if self.is_log.any():
                total += float(np.sum(np.log(x[self.is_log])))
            if self.is_wlog.any():
                total += float(
                    self.param[self.is_wlog] @ np.log(x[self.is_wlog])
                )
            if self.is_power.any():
                b = self.param[self.is_power]
                total += float(np.sum(x[self.is_power] ** b))
        return total


def prices(utilities, x: np.ndarray) -> np.ndarray:
    """Per-user willingness to pay p_e = x(e) * w_e'(x(e))."""
    x = np.asarray(x, dtype=float)
    return np.array([u.price(xe) for u, xe in zip(utilities, x)])


def utility_derivs(utilities, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.array([u.deriv(xe) for u, xe in zip(utilities, x)])


def welfare(utilities, x: np.ndarray) -> float:
    """Total utility W(x); -inf when a log-family user has zero rate."""
    x = np.asarray(x, dtype=float)
    return float(sum(u.value(xe) for u, xe in zip(utilities, x)))


# ---------------------------------------------------------------------------
# Scenario file parsing
# ---------------------------------------------------------------------------

def _parse_utility(tokens: list[str]) -> UtilitySpec:
    kind = tokens[0]
    if kind == "log":
        if len(tokens) != 1:
            raise ScenarioError("log takes no parameter")
        return UtilitySpec("log")
    if kind == "wlog":
        if len(tokens) != 2:
            raise ScenarioError("wlog needs a weight")
        return UtilitySpec("wlog", float(tokens[1]))
    if kind == "power":
        if len(tokens) != 2:
            raise ScenarioError("power needs an exponent")
        return UtilitySpec("power", float(tokens[1]))
    raise ScenarioError(f"unknown utility family {kind!r}")


def load_scenario(text: str, label: str = "") -> Scenario:
    """Parse and validate the line-oriented scenario format.

    Sections [network] and [utilities]; '#' starts a comment; unknown keys
    are errors. Raises ScenarioError with a line number on bad input.
    """
    section = None
    n_links = n_users = None
    capacities: dict[int, float] = {}
    routes: dict[int, tuple[int, ...]] = {}
    utilities: dict[int, UtilitySpec] = {}

    def fail(lineno, msg):
        raise ScenarioError(f"line {lineno}: {msg}")

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if line == "[network]":
                section = "network"
            elif line == "[utilities]":
                section = "utilities"
            else:
                fail(lineno, f"unknown section {line}")
            continue
        if section is None:
            fail(lineno, "content before any section header")
        if "=" not in line:
            fail(lineno, "expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        ktok = key.split()
        try:
            if section == "network":
                if key == "links":
                    n_links = int(value)
                elif key == "users":
                    n_users = int(value)
                elif len(ktok) == 2 and ktok[0] == "capacity":
                    l = int(ktok[1])
                    cap = float(value)
                    if cap <= 0:
                        fail(lineno, f"capacity of link {l} must be > 0")
                    capacities[l] = cap
                elif len(ktok) == 2 and ktok[0] == "route":
                    routes[int(ktok[1])] = tuple(int(t) for t in value.split())
                else:
                    fail(lineno, f"unknown key {key!r} in [network]")
            else:
                if len(ktok) == 2 and ktok[0] == "user":
                    utilities[int(ktok[1])] = _parse_utility(value.split())
                else:
                    fail(lineno, f"unknown key {key!r} in [utilities]")
        except ScenarioError as err:
            if str(err).startswith("line "):
                raise
            fail(lineno, str(err))
        except ValueError as err:
            fail(lineno, str(err))

    if n_links is None or n_users is None:
        raise ScenarioError("missing 'links' or 'users' declaration")
    if sorted(capacities) != list(range(1, n_links + 1)):
        raise ScenarioError("need exactly one capacity line per link 1..m")
    if sorted(routes) != list(range(1, n_users + 1)):
        raise ScenarioError("need exactly one route line per user 1..n")
    if sorted(utilities) != list(range(1, n_users + 1)):
        raise ScenarioError("need exactly one utility line per user 1..n")
    for e, route in routes.items():
        for l in route:
            if not 1 <= l <= n_links:
                raise ScenarioError(f"route of user {e} references unknown link {l}")

    network = RoutingNetwork(
        capacities=np.array([capacities[l] for l in range(1, n_links + 1)]),
        routes=tuple(
            tuple(l - 1 for l in routes[e]) for e in range(1, n_users + 1)
        ),
    )
    return Scenario(
        network=network,
        utilities=tuple(utilities[e] for e in range(1, n_users + 1)),
        label=label,
    )
