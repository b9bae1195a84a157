"""
GreenLB - Run and Sweep Commands
"""

import logging

import click

from commands.common import echo_json, reports_errors, write_frame
from config import load_config
from design_space import StudySpace, run_sweep
from metrics import results_frame
from sim_engine import Simulation, TraceRecorder

logger = logging.getLogger(__name__)

config_option = click.option(
    "--config", "-c", "config_path", required=True,
    type=click.Path(exists=True, dir_okay=False), help="YAML config file.")
seed_option = click.option("--seed", type=int, default=None, help="Override scenario.seed.")


@click.command("run")
@config_option
@seed_option
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False),
              help="Write every handled event to this CSV.")
@click.option("--csv", "as_csv", is_flag=True, help="Print one CSV row instead of JSON.")
@reports_errors
def cmd_run(config_path, seed, trace_path, as_csv):
    """Simulate the configured scenario once."""
    loaded = load_config(config_path, seed=seed)
    sim = loaded.sim
    trace = TraceRecorder() if trace_path else None

    result = Simulation(sim, trace=trace).run()
    result.design = {"q": sim.design_params.get("q"), "timeout": sim.power.timeout,
                     "nd": sim.nd.value}
    if trace is not None:
        trace.to_csv(trace_path)
        logger.info("trace with %d events written to %s", len(trace.rows), trace_path)

    if as_csv:
        write_frame(results_frame([result]), None)
    else:
        data = result.to_dict()
        data["policy"] = sim.policy.to_text()
        echo_json(data)


@click.command("sweep")
@config_option
@seed_option
@click.option("--out", "-o", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Results CSV to write.")
@click.option("--jobs", "-j", type=int, default=1, show_default=True,
              help="Worker processes.")
@reports_errors
def cmd_sweep(config_path, seed, out_path, jobs):
    """Run every design of the study section, every replication."""
    loaded = load_config(config_path, seed=seed)
    space = loaded.study or StudySpace(master_seed=loaded.sim.rng_seed)
    results = run_sweep(space, loaded.sim, jobs=jobs)
    write_frame(results_frame(results), out_path)
    failed = sum(r.status != "ok" for r in results)
    click.echo(f"{len(results)} runs written to {out_path}" + (f" ({failed} failed)" if failed else ""),
               err=True)
