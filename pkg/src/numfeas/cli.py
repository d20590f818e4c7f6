"""Command-line surface: scenario ingestion, experiment execution, CSV
emission, and optional figure rendering."""

from __future__ import annotations

import sys

import click
import numpy as np

from . import diagnostics, dynamics, iterate, model, pf_solver
from .reporting import RunManifest, format_value, render_csv, write_text

EXIT_INPUT_ERROR = 2
EXIT_NUMERICAL_ERROR = 3

_NUMERICAL_ERRORS = (
    pf_solver.SolverError,
    diagnostics.OracleError,
    dynamics.DivergenceError,
)


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load(scenario_path: str) -> model.Scenario:
    try:
        with open(scenario_path) as fh:
            text = fh.read()
    except OSError as err:
        _fail(EXIT_INPUT_ERROR, str(err))
    try:
        return model.load_scenario(text, label=scenario_path)
    except model.ScenarioError as err:
        _fail(EXIT_INPUT_ERROR, f"{scenario_path}: {err}")


def _read_vector(path: str, n: int) -> np.ndarray:
    try:
        with open(path) as fh:
            values = [float(tok) for tok in fh.read().split()]
    except (OSError, ValueError) as err:
        _fail(EXIT_INPUT_ERROR, str(err))
    if len(values) != n:
        _fail(EXIT_INPUT_ERROR, f"expected {n} values in {path}, got {len(values)}")
    return np.array(values)


def _parse_floats(text: str, what: str) -> list[float]:
    try:
        return [float(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        _fail(EXIT_INPUT_ERROR, f"cannot parse {what}: {text!r}")


def _reference(scenario: model.Scenario) -> diagnostics.ReferenceOptimum:
    try:
        return diagnostics.reference_optimum(scenario, tol=1e-10)
    except diagnostics.OracleError as err:
        _fail(EXIT_NUMERICAL_ERROR, str(err))


def common_options(fn):
    fn = click.option("--scenario", "scenario_path", required=True,
                      type=click.Path(), help="Scenario file.")(fn)
    fn = click.option("--output", "output_path", default=None,
                      type=click.Path(), help="CSV output path (default stdout).")(fn)
    fn = click.option("--tol-feas", default=model.DEFAULT_TOL_FEAS,
                      show_default=True, help="Feasibility tolerance.")(fn)
    fn = click.option("--seed", default=None, type=int,
                      help="Seed recorded in the manifest.")(fn)
    return fn


@click.group()
def main():
    """Network utility maximization experiments: feasible iterates, benchmark
    dynamics, and convergence-comparison traces."""


@main.command("pf-solve")
@common_options
@click.option("--prices", "prices_spec", required=True,
              help="Comma-separated prices, 'from-lexmax', or 'from-x:PATH'.")
@click.option("--tol", default=1e-8, show_default=True)
@click.option("--max-iters", default=100000, show_default=True)
def cmd_pf_solve(scenario_path, output_path, tol_feas, seed, prices_spec, tol,
                 max_iters):
    """Solve the proportional-fair network problem for given prices."""
    scenario = _load(scenario_path)
    net = scenario.network
    if prices_spec == "from-lexmax":
        x = iterate.lexicographic_max_point(net)
        p = model.prices(scenario.utilities, x)
    elif prices_spec.startswith("from-x:"):
        x = _read_vector(prices_spec[len("from-x:"):], net.n)
        if np.any(x < 0):
            _fail(EXIT_INPUT_ERROR, "rates must be nonnegative")
        p = model.prices(scenario.utilities, x)
    else:
        values = _parse_floats(prices_spec, "--prices")
        if len(values) != net.n:
            _fail(EXIT_INPUT_ERROR, f"expected {net.n} prices, got {len(values)}")
        p = np.array(values)
        if np.any(p < 0):
            _fail(EXIT_INPUT_ERROR, "prices must be nonnegative")

    try:
        sol = pf_solver.solve_pf_dual(net, p, tol=tol, max_iters=max_iters)
    except _NUMERICAL_ERRORS as err:
        _fail(EXIT_NUMERICAL_ERROR, str(err))
    if not sol.converged:
        _fail(EXIT_NUMERICAL_ERROR,
              f"solver did not converge (kkt residual {sol.kkt_residual:g})")

    manifest = RunManifest("pf-solve", scenario_path,
                           {"prices": prices_spec, "tol": tol, "seed": seed})
    header = ([f"x{e+1}" for e in range(net.n)]
              + [f"mu{l+1}" for l in range(net.m)]
              + ["kkt_residual", "iterations"])
    row = list(sol.x) + list(sol.mu) + [sol.kkt_residual, sol.iterations]
    write_text(output_path, render_csv(manifest, header, [row]))
    if output_path is not None:
        click.echo("x = " + " ".join(format_value(v) for v in sol.x))
        click.echo("mu = " + " ".join(format_value(v) for v in sol.mu))
        click.echo(f"kkt_residual = {format_value(sol.kkt_residual)}")


@main.command("run")
@common_options
@click.option("--max-iters", default=100000, show_default=True)
@click.option("--stop-tol", default=1e-7, show_default=True)
@click.option("--record-every", default=1, show_default=True)
@click.option("--x0", "x0_spec", default="lexmax", show_default=True,
              help="'lexmax' or a path to a whitespace-separated rate file.")
@click.option("--figure", "figure_path", default=None, type=click.Path(),
              help="Render the error trajectory to this image file.")
def cmd_run(scenario_path, output_path, tol_feas, seed, max_iters, stop_tol,
            record_every, x0_spec, figure_path):
    """Run the feasible-iterates algorithm and emit its trace."""
    scenario = _load(scenario_path)
    net = scenario.network
    if x0_spec == "lexmax":
        x0 = iterate.lexicographic_max_point(net)
    else:
        x0 = _read_vector(x0_spec, net.n)
    min_slack, feasible = model.feasibility_slack(net, x0, tol_feas)
    if not feasible or np.any(x0 <= 0):
        _fail(EXIT_INPUT_ERROR,
              f"x0 must be strictly positive and feasible (min slack {min_slack:g})")

    reference = _reference(scenario)
    config = iterate.AlgorithmConfig(max_iters=max_iters, stop_tol=stop_tol,
                                     record_every=record_every)
    trace = iterate.run_algorithm1(scenario, x0, config, tol_feas=tol_feas)
    if trace.failed:
        _fail(EXIT_NUMERICAL_ERROR, trace.failure_reason)

    manifest = RunManifest("run", scenario_path, {
        "x0": x0_spec, "max_iters": max_iters, "stop_tol": stop_tol,
        "record_every": record_every, "seed": seed,
    })
    header = (["k", "a_k"] + [f"x{e+1}" for e in range(net.n)]
              + ["error2", "welfare", "descent", "min_slack"])
    rows = []
    for rec in trace.records:
        error2 = float(np.linalg.norm(rec.x - reference.x_star))
        rows.append([rec.k, rec.step] + list(rec.x)
                    + [error2, rec.welfare, rec.descent, rec.min_slack])
    write_text(output_path, render_csv(manifest, header, rows))

    if figure_path is not None:
        from .plotting import save_error_trajectory

        ks = [rec.k for rec in trace.records]
        errors = [np.linalg.norm(rec.x - reference.x_star) for rec in trace.records]
        save_error_trajectory(figure_path, ks, errors, label="feasible iterates",
                              title=scenario.label, xlabel="iteration")


@main.command("kmt")
@common_options
@click.option("--kappa", default=1.0, show_default=True)
@click.option("--epsilon", default=0.1, show_default=True)
@click.option("--h", default=None, type=float, help="Integrator step.")
@click.option("--horizon", default=50.0, show_default=True)
@click.option("--x0", "x0_spec", default="lexmax", show_default=True)
@click.option("--figure", "figure_path", default=None, type=click.Path())
def cmd_kmt(scenario_path, output_path, tol_feas, seed, kappa, epsilon, h,
            horizon, x0_spec, figure_path):
    """Integrate the benchmark fluid dynamics and emit the state trace."""
    scenario = _load(scenario_path)
    net = scenario.network
    if kappa <= 0 or epsilon <= 0 or horizon <= 0:
        _fail(EXIT_INPUT_ERROR, "kappa, epsilon, horizon must be positive")
    if x0_spec == "lexmax":
        x0 = iterate.lexicographic_max_point(net)
    else:
        x0 = _read_vector(x0_spec, net.n)

    reference = _reference(scenario)
    config = dynamics.KMTConfig(kappa=kappa, epsilon=epsilon, h=h, horizon=horizon)
    try:
        trace = dynamics.integrate_kmt(scenario, x0, config,
                                       x_star=reference.x_star)
    except dynamics.DivergenceError as err:
        _fail(EXIT_NUMERICAL_ERROR, str(err))

    manifest = RunManifest("kmt", scenario_path, {
        "kappa": kappa, "epsilon": epsilon, "h": config.resolved_h(),
        "horizon": horizon, "x0": x0_spec, "seed": seed,
    })
    header = (["t"] + [f"x{e+1}" for e in range(net.n)]
              + ["error2", "welfare", "min_slack"])
    rows = [
        [t] + list(state) + [err, w, slack]
        for t, state, err, w, slack in zip(
            trace.times, trace.states, trace.errors, trace.welfare, trace.min_slack
        )
    ]
    write_text(output_path, render_csv(manifest, header, rows))

    if figure_path is not None:
        from .plotting import save_error_trajectory

        save_error_trajectory(figure_path, trace.times, trace.errors,
                              label=f"benchmark dynamics (kappa={kappa:g})",
                              title=scenario.label)


@main.command("compare")
@common_options
@click.option("--kappa-list", default="1,10", show_default=True)
@click.option("--threshold", default=1e-2, show_default=True)
@click.option("--epsilon", default=0.1, show_default=True)
@click.option("--horizon", default=100.0, show_default=True,
              help="Horizon at kappa=1; scaled by 1/kappa per run.")
@click.option("--figure", "figure_path", default=None, type=click.Path())
def cmd_compare(scenario_path, output_path, tol_feas, seed, kappa_list,
                threshold, epsilon, horizon, figure_path):
    """Time-to-threshold comparison of the two dynamics per kappa."""
    scenario = _load(scenario_path)
    kappas = _parse_floats(kappa_list, "--kappa-list")
    if not kappas or any(k <= 0 for k in kappas):
        _fail(EXIT_INPUT_ERROR, "kappa values must be positive")
    if threshold <= 0:
        _fail(EXIT_INPUT_ERROR, "threshold must be positive")

    x0 = iterate.lexicographic_max_point(scenario.network)
    reference = _reference(scenario)

    rows = []
    curves = []
    for kappa in kappas:
        scaled_horizon = horizon / kappa
        try:
            di = dynamics.integrate_scaled_di(scenario, x0, kappa=kappa,
                                              horizon=scaled_horizon,
                                              x_star=reference.x_star)
            kmt = dynamics.integrate_kmt(
                scenario, x0,
                dynamics.KMTConfig(kappa=kappa, epsilon=epsilon,
                                   horizon=scaled_horizon),
                x_star=reference.x_star,
            )
        except _NUMERICAL_ERRORS as err:
            _fail(EXIT_NUMERICAL_ERROR, str(err))
        for name, trace in (("di", di), ("kmt", kmt)):
            hit = trace.time_to_threshold(threshold)
            rows.append([name, kappa,
                         -1.0 if hit is None else hit,
                         hit is not None])
            curves.append((f"{name} kappa={kappa:g}", trace.times, trace.errors))

    manifest = RunManifest("compare", scenario_path, {
        "kappa_list": kappa_list, "threshold": threshold, "epsilon": epsilon,
        "horizon": horizon, "seed": seed,
    })
    header = ["system", "kappa", "time_to_threshold", "reached"]
    write_text(output_path, render_csv(manifest, header, rows))

    if figure_path is not None:
        from .plotting import save_comparison

        save_comparison(figure_path, curves, title=scenario.label,
                        threshold=threshold)


@main.command("lexmax")
@common_options
def cmd_lexmax(scenario_path, output_path, tol_feas, seed):
    """Emit the lexicographically maximal (max-min fair) starting point."""
    scenario = _load(scenario_path)
    net = scenario.network
    x = iterate.lexicographic_max_point(net)
    min_slack, _ = model.feasibility_slack(net, x, tol_feas)
    manifest = RunManifest("lexmax", scenario_path, {"seed": seed})
    header = [f"x{e+1}" for e in range(net.n)] + ["min_slack"]
    write_text(output_path, render_csv(manifest, header, [list(x) + [min_slack]]))


@main.command("appendix-demo")
@click.option("--c", "c", default=1.0, show_default=True)
def cmd_appendix_demo(c):
    """Show the two mismatched sequence limits of the network map."""
    if c <= 0:
        _fail(EXIT_INPUT_ERROR, "c must be positive")
    limit_y, limit_z = diagnostics.appendix_discontinuity_demo(c)
    distance = float(np.max(np.abs(limit_y - limit_z)))
    click.echo("limit along (c, 0, d): "
               + " ".join(format_value(v) for v in limit_y))
    click.echo("limit along (c, d, d): "
               + " ".join(format_value(v) for v in limit_z))
    click.echo(f"inf-norm distance: {format_value(distance)}")


if __name__ == "__main__":
    main()
