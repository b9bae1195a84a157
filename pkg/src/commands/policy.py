"""
GreenLB - Policy Commands

``greenlb parse`` checks and pretty-prints a policy; ``greenlb eval``
scores a policy against a snapshot file and shows the selected server.
"""

import click
import numpy as np

from commands.common import echo_json, reports_errors
from config import load_snapshots
from errors import ConfigError
from policy_dsl import NdResolution, design_parameters, parse_policy, read_policy_file, score_servers, select_server


def _policy_source(policy_file, expr):
    if (policy_file is None) == (expr is None):
        raise ConfigError("give exactly one of a policy file or --expr")
    if expr is not None:
        return expr
    try:
        return read_policy_file(policy_file)
    except OSError as e:
        raise ConfigError(f"cannot read policy file {policy_file}: {e.strerror}") from e


def _one_of(option, positional, name):
    if option is not None and positional is not None:
        raise ConfigError(f"{name} given both as an option and positionally")
    return option if option is not None else positional


@click.command("parse")
@click.argument("policy_file", required=False, type=click.Path(dir_okay=False))
@click.option("--expr", "-e", help="Policy text instead of a file.")
@reports_errors
def cmd_parse(policy_file, expr):
    """Parse a policy and print it in canonical form."""
    tree = parse_policy(_policy_source(policy_file, expr))
    click.echo(tree.to_text())
    params = design_parameters(tree)
    if params:
        click.echo(f"# design parameters: {', '.join(params)}")


@click.command("eval")
@click.argument("snapshot_arg", metavar="[SNAPSHOT]", required=False,
                type=click.Path(exists=True, dir_okay=False))
@click.argument("policy_arg", metavar="[POLICY_FILE]", required=False,
                type=click.Path(dir_okay=False))
@click.option("--state", "-s", "state_path", type=click.Path(exists=True, dir_okay=False),
              help="Snapshot file describing every server.")
@click.option("--policy", "-p", "policy_path", type=click.Path(dir_okay=False),
              help="Policy file.")
@click.option("--expr", "-e", help="Policy text instead of a file.")
@click.option("--nd", type=click.Choice([m.value for m in NdResolution]),
              default=NdResolution.FIXED_ORDER.value, show_default=True,
              help="How equal values are resolved.")
@click.option("--seed", type=int, default=1, show_default=True,
              help="Seed for random leaves and random resolution.")
@click.option("--json", "as_json", is_flag=True, help="Print JSON instead of a table.")
@reports_errors
def cmd_eval(snapshot_arg, policy_arg, state_path, policy_path, expr, nd, seed, as_json):
    """Evaluate a policy on every server of a snapshot file.

    ``--state`` and ``--policy`` may also be given positionally, in that order.
    """
    state_path = _one_of(state_path, snapshot_arg, "--state")
    if state_path is None:
        raise ConfigError("missing snapshot file: give --state FILE")
    policy_file = _one_of(policy_path, policy_arg, "--policy")
    tree = parse_policy(_policy_source(policy_file, expr))
    snaps = load_snapshots(state_path)

    nd = NdResolution.parse(nd)
    scores = score_servers(tree, snaps, nd, np.random.default_rng(seed))
    # a fresh stream with the same seed reproduces the draws above
    chosen = select_server(tree, snaps, nd, np.random.default_rng(seed))

    if as_json:
        echo_json({
            "policy": tree.to_text(),
            "nd": nd.value,
            "servers": [s._asdict() for s in scores],
            "selected": chosen,
        })
        return
    click.echo(f"{'server':>6} {'state':>8} {'queue':>6} {'value':>12} {'resolved':>12}")
    for snap, score in zip(snaps, scores):
        mark = "  <-" if score.server == chosen else ""
        click.echo(f"{score.server:>6} {snap.power_state.value:>8} {snap.queue_size:>6} "
                   f"{score.base:>12g} {score.resolved:>12.6f}{mark}")
    click.echo(f"selected: {chosen}")
