"""Shared fixtures: hand-built scenarios and the random scenario generator."""

import numpy as np
import pytest

from numfeas import RoutingNetwork, Scenario, UtilitySpec

# Ten-user chain: user e rides links e..10, capacities 10*l, power exponents
# 0.09*e.  This is the flow-aggregating showcase configuration.
CHAIN10_TEXT = """\
[network]
links = 10
users = 10
""" + "".join(
    f"capacity {l} = {10 * l}\n" for l in range(1, 11)
) + "".join(
    f"route {e} = " + " ".join(str(l) for l in range(e, 11)) + "\n"
    for e in range(1, 11)
) + """
[utilities]
""" + "".join(
    f"user {e} = power {0.09 * e:.2f}\n" for e in range(1, 11)
)


def chain10_scenario() -> Scenario:
    caps = np.array([10.0 * l for l in range(1, 11)])
    routes = tuple(tuple(range(e, 10)) for e in range(10))
    utils = tuple(UtilitySpec("power", 0.09 * (e + 1)) for e in range(10))
    return Scenario(RoutingNetwork(caps, routes), utils, label="chain10")


@pytest.fixture
def chain10():
    return chain10_scenario()


@pytest.fixture
def single_link():
    """One link of capacity 3 shared by a log user and a wlog(2) user."""
    net = RoutingNetwork(np.array([3.0]), ((0,), (0,)))
    return Scenario(net, (UtilitySpec("log"), UtilitySpec("wlog", 2.0)))


@pytest.fixture
def two_link():
    """Links c=(1,2); user 1 crosses both, users 2 and 3 one link each."""
    net = RoutingNetwork(np.array([1.0, 2.0]), ((0, 1), (0,), (1,)))
    utils = (UtilitySpec("log"), UtilitySpec("log"), UtilitySpec("log"))
    return Scenario(net, utils)


def random_scenario(rng: np.random.Generator, max_users=10, max_links=10,
                    families=("log", "wlog", "power")) -> Scenario:
    """Random desk-scale scenario: modest size, mixed utility families."""
    m = int(rng.integers(1, max_links + 1))
    n = int(rng.integers(1, max_users + 1))
    caps = rng.uniform(0.5, 3.0, size=m)
    routes = []
    for _ in range(n):
        length = int(rng.integers(1, m + 1))
        routes.append(tuple(sorted(rng.choice(m, size=length, replace=False))))
    utils = []
    for _ in range(n):
        family = families[int(rng.integers(len(families)))]
        if family == "log":
            utils.append(UtilitySpec("log"))
        elif family == "wlog":
            utils.append(UtilitySpec("wlog", float(rng.uniform(0.5, 2.0))))
        else:
            utils.append(UtilitySpec("power", float(rng.uniform(0.1, 0.9))))
    return Scenario(RoutingNetwork(caps, tuple(routes)), tuple(utils))


@pytest.fixture
def make_random_scenario():
    return random_scenario


@pytest.fixture
def write_scenario(tmp_path):
    """Write scenario text to a temp file and return its path."""
    def _write(text, name="scenario.txt"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return _write


SINGLE_LINK_TEXT = """\
# one link, two users
[network]
links = 1
users = 2
capacity 1 = 3.0
route 1 = 1
route 2 = 1

[utilities]
user 1 = log
user 2 = wlog 2.0
"""
