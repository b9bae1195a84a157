"""
GreenLB - Command-Line Interface

Wires the command modules into a single ``greenlb`` click group and sets up
logging once for the whole process.
"""

import logging
import os
import sys

import click

import constants
from commands import (
    cmd_compare, cmd_eval, cmd_frontier, cmd_parse, cmd_plot_data, cmd_run, cmd_sweep,
)

LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"


def configure_logging(verbose=False):
    """Send logs to stderr at the ``GREENLB_LOG`` level (WARNING by default)."""
    name = os.environ.get(constants.LOG_ENV_VAR, "WARNING").upper()
    level = logging.DEBUG if verbose else getattr(logging, name, logging.WARNING)
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Log at DEBUG level.")
def cli(verbose):
    """Energy-aware load-balancing simulator with a policy language."""
    configure_logging(verbose)


for command in (cmd_parse, cmd_eval, cmd_run, cmd_sweep,
                cmd_compare, cmd_plot_data, cmd_frontier):
    cli.add_command(command)


def main():
    cli(prog_name="greenlb")
