"""Command-line surface.

One binary, subcommands for each workflow: simulate a network file, compare
variants from a manifest, grid-optimize parameters, probe sensitivities,
evaluate a vapor power loop operating point, and evaluate or train reaching
policies.  Numeric settings follow flag > file > default precedence.

Exit codes: 0 success, 1 usage error, 2 network validation error,
3 numeric failure.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .compartments import RankineState, rankine_eval
from .core import InvalidNetworkError
from .design import ParamAxis, VariantSet, optimize_params, select_best, sensitivity, worker_count
from .metrics import circularity_report, unsustainable_rate_series
from .netio import NetworkFormatError, load_network
from .simulator import SimConfig, SimulationNumericsError, check_conservation, simulate, write_trajectory_csv

EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _provenance(path: Path) -> dict:
    return {"tool": "circuflow", "version": __version__, "input": str(path), "input_sha256": _sha256(path)}


def _sim_options(fn):
    fn = click.option("--dt", type=float, default=None, help="step size [s]")(fn)
    fn = click.option("--horizon", type=float, default=None, help="simulated span [s]")(fn)
    fn = click.option(
        "--method", type=click.Choice(["rk4", "euler"]), default=None, help="integrator"
    )(fn)
    fn = click.option("--seed", type=int, default=None, help="run seed")(fn)
    return fn


@click.group()
@click.version_option(version=__version__, prog_name="circuflow")
def cli():
    """Simulate and search circular material-flow networks."""


@cli.command("simulate")
@click.argument("network_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@_sim_options
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="directory for trajectory.csv and summary.json")
@click.option("--format", "fmt", type=click.Choice(["csv", "json-summary"]), default="csv")
def simulate_cmd(network_file, dt, horizon, method, seed, out, fmt):
    """Integrate one network over its horizon."""
    network = load_network(network_file)
    config = SimConfig.from_network(network, dt=dt, horizon=horizon, method=method, seed=seed)
    traj = simulate(network, config)
    report = circularity_report(traj)
    conservation = check_conservation(traj)

    summary = _provenance(network_file)
    summary.update(traj.summary())
    summary["metrics"] = {
        "cumulative_unsustainable_kg": report.cumulative_unsustainable,
        "cumulative_return_kg": report.cumulative_return,
        "cumulative_extraction_kg": report.cumulative_extraction,
        "cumulative_leak_kg": report.cumulative_leak,
        "circularity_index": report.circularity_index,
    }
    summary["conservation"] = {
        "passed": conservation.passed,
        "max_relative_drift": conservation.max_relative_drift,
        "worst_step": conservation.worst_step,
    }

    if fmt == "json-summary":
        click.echo(json.dumps(summary, indent=2))
    else:
        click.echo(
            f"{network.name or network_file.name}: {traj.n_steps} steps, "
            f"m_u = {report.cumulative_unsustainable:.6g} kg, "
            f"circularity index {report.circularity_index:.4f}, {conservation}"
        )
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_trajectory_csv(
            traj, out / "trajectory.csv",
            extra_columns={"m_u_rate": unsustainable_rate_series(traj)},
        )
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
        click.echo(f"wrote {out / 'trajectory.csv'} and {out / 'summary.json'}")


@cli.command()
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@_sim_options
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="write the ranking as JSON")
def compare(manifest, dt, horizon, method, seed, out):
    """Rank the networks listed in a manifest by unsustainable mass."""
    doc = json.loads(manifest.read_text())
    entries = doc.get("variants")
    if not entries:
        raise click.UsageError(f"{manifest}: no 'variants' listed")
    networks = {}
    for entry in entries:
        path = manifest.parent / entry["path"]
        net = load_network(path)
        name = entry.get("name") or net.name or path.stem
        networks[name] = net

    first = next(iter(networks.values()))
    config = SimConfig.from_network(first, dt=dt, horizon=horizon, method=method, seed=seed)
    best, reports = select_best(VariantSet(networks, config), workers=worker_count())

    rows = sorted(reports.values(), key=lambda r: r.objective_key())
    width = max(len(r.name) for r in rows)
    click.echo(f"{'network':<{width}}  {'m_u [kg]':>14}  {'index':>7}  {'extraction':>12}  {'leak':>12}  {'return':>12}")
    for r in rows:
        marker = " *" if r.name == best else ""
        click.echo(
            f"{r.name:<{width}}  {r.cumulative_unsustainable:14.6g}  {r.circularity_index:7.4f}  "
            f"{r.cumulative_extraction:12.6g}  {r.cumulative_leak:12.6g}  {r.cumulative_return:12.6g}{marker}"
        )
    click.echo(f"best: {best}")
    if out is not None:
        ranking = _provenance(manifest)
        ranking["best"] = best
        ranking["ranking"] = [
            {
                "name": r.name,
                "cumulative_unsustainable_kg": r.cumulative_unsustainable,
                "circularity_index": r.circularity_index,
            }
            for r in rows
        ]
        out.write_text(json.dumps(ranking, indent=2) + "\n")


def _parse_axis(spec: str) -> ParamAxis:
    try:
        k, name, values = spec.split(":", 2)
        return ParamAxis(int(k), name, tuple(float(v) for v in values.split(",")))
    except (ValueError, TypeError) as exc:
        raise click.UsageError(f"bad --param {spec!r}; expected k:name:v1,v2,...") from exc


@cli.command()
@click.argument("network_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--param", "params", multiple=True, required=True,
              help="grid axis as k:name:v1,v2,... (repeatable)")
@click.option("--budget", type=int, default=100, show_default=True,
              help="maximum number of simulations")
@_sim_options
def optimize(network_file, params, budget, dt, horizon, method, seed):
    """Search a parameter grid for the lowest unsustainable mass."""
    network = load_network(network_file)
    config = SimConfig.from_network(network, dt=dt, horizon=horizon, method=method, seed=seed)
    axes = [_parse_axis(s) for s in params]
    result = optimize_params(network, axes, budget=budget, config=config)
    mode = "exhaustive grid" if result.exhaustive else "coordinate descent"
    click.echo(f"{mode}, {result.evaluations} evaluations")
    for (k, name), value in sorted(result.best_params.items()):
        click.echo(f"  c{k}.{name} = {value}")
    click.echo(f"objective: {result.best_objective:.6g} kg")


@cli.command("sensitivity")
@click.argument("network_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--compartment", "-k", "k", type=int, required=True)
@click.option("--param", "param", required=True)
@click.option("--rel-delta", type=float, default=1e-3, show_default=True)
@_sim_options
def sensitivity_cmd(network_file, k, param, rel_delta, dt, horizon, method, seed):
    """Finite-difference response of unsustainable mass to one parameter."""
    network = load_network(network_file)
    config = SimConfig.from_network(network, dt=dt, horizon=horizon, method=method, seed=seed)
    result = sensitivity(network, k, param, rel_delta=rel_delta, config=config)
    flag = f" (one-sided: {result.one_sided} bound)" if result.one_sided else ""
    click.echo(f"d m_u / d c{k}.{param} = {result.derivative:.6g} kg per unit{flag}")
    click.echo(
        f"m_u({param}={result.value - result.delta:g}) = {result.objective_minus:.6g} kg; "
        f"m_u({param}={result.value + result.delta:g}) = {result.objective_plus:.6g} kg"
    )
    click.echo(f"noise floor ~ {result.noise_floor:.3g}")


@cli.command()
@click.argument("operating_point", type=click.Path(exists=True, dir_okay=False, path_type=Path),
                required=False)
@click.option("--mass-flow", type=float, default=None)
@click.option("--h1", type=float, default=None)
@click.option("--h2", type=float, default=None)
@click.option("--h3", type=float, default=None)
@click.option("--h4", type=float, default=None)
def rankine(operating_point, mass_flow, h1, h2, h3, h4):
    """Steady-state performance of the closed vapor power loop.

    Reads enthalpies (kJ/kg) and mass flow from a JSON file or flags.
    """
    values = {"mass_flow": mass_flow, "h1": h1, "h2": h2, "h3": h3, "h4": h4}
    if operating_point is not None:
        doc = json.loads(Path(operating_point).read_text())
        for key in values:
            if values[key] is None:
                values[key] = doc.get(key)
    missing = [k for k, v in values.items() if v is None]
    if missing:
        raise click.UsageError(f"missing {', '.join(missing)}; supply a file or flags")
    try:
        perf = rankine_eval(RankineState(**values))
    except ValueError as exc:
        click.echo(f"invalid operating point: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    click.echo(f"turbine work   {perf.work_turbine:10.4f} kJ/kg")
    click.echo(f"pump work      {perf.work_pump:10.4f} kJ/kg")
    click.echo(f"heat in        {perf.heat_in:10.4f} kJ/kg")
    click.echo(f"heat out       {perf.heat_out:10.4f} kJ/kg")
    click.echo(f"net power      {perf.net_work * perf.mass_flow:10.4f} kW")
    click.echo(f"efficiency     {perf.efficiency:10.5f}")
    click.echo(f"closure residual {perf.closure_residual:.3e} kJ/kg over {perf.compartments} compartments")


def _resolve_policy(spec: str):
    from .robot import MLPPolicy, PDReachPolicy, ZeroPolicy, load_policy
    from .robot.dynamics import ManipulatorParams

    if spec == "zero":
        return ZeroPolicy()
    if spec == "pd":
        return PDReachPolicy(ManipulatorParams())
    path = Path(spec)
    if not path.exists():
        raise click.UsageError(f"policy {spec!r} is neither a file nor one of: zero, pd")
    return load_policy(path)


@cli.command("robot-eval")
@click.option("--policy", "policy_spec", required=True,
              help="policy file, or built-in 'zero' / 'pd'")
@click.option("--episodes", type=int, default=10_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--max-steps", type=int, default=50, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="write the success report as JSON")
def robot_eval(policy_spec, episodes, seed, max_steps, out):
    """Measure a reaching policy's success rate over seeded episodes."""
    from .robot import EpisodeCriterion, ReachEnv, evaluate_policy

    policy = _resolve_policy(policy_spec)
    env = ReachEnv(criterion=EpisodeCriterion(max_steps=max_steps))
    report = evaluate_policy(policy, episodes, env, seed=seed, workers=worker_count())
    doc = {
        "tool": "circuflow",
        "version": __version__,
        "policy": policy_spec,
        "episodes": report.n_episodes,
        "seed": report.seed,
        "success_rate": report.success_rate,
        "successes": report.successes,
        "mean_final_distance_m": report.mean_final_distance,
        "mean_step_time_s": report.mean_step_time,
    }
    click.echo(json.dumps(doc, indent=2))
    if out is not None:
        out.write_text(json.dumps(doc, indent=2) + "\n")


@cli.command("robot-train")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--generations", type=int, default=None, help="override trainer generations")
@click.option("--population", type=int, default=None, help="override population size")
@click.option("--eval-episodes", type=int, default=2000, show_default=True)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="directory for policy.json and training_log.csv")
def robot_train(seed, generations, population, eval_episodes, out):
    """Cross-entropy search for a reaching policy at the desk-scale config."""
    from dataclasses import replace as dc_replace

    from .robot import desk_scale_setup, evaluate_policy, save_policy, train_cem

    train_env, eval_env, trainer = desk_scale_setup()
    if generations is not None:
        trainer = dc_replace(trainer, generations=generations)
    if population is not None:
        trainer = dc_replace(trainer, population=population)
    policy, log = train_cem(train_env, trainer, seed=seed)
    report = evaluate_policy(policy, eval_episodes, eval_env, seed=seed + 10_000)
    click.echo(
        f"trained {trainer.generations} generations x {trainer.population}; "
        f"success rate {report.success_rate:.4f} over {eval_episodes} episodes"
    )
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        save_policy(policy, out / "policy.json")
        with open(out / "training_log.csv", "w") as fh:
            fh.write("generation,mean_return,elite_mean,best_return\n")
            for row in log:
                fh.write(f"{row.generation},{row.mean_return!r},{row.elite_mean!r},{row.best_return!r}\n")
        click.echo(f"wrote {out / 'policy.json'} and {out / 'training_log.csv'}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        return EXIT_USAGE
    except (NetworkFormatError, InvalidNetworkError) as exc:
        click.echo(str(exc), err=True)
        return EXIT_VALIDATION
    except SimulationNumericsError as exc:
        click.echo(str(exc), err=True)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
