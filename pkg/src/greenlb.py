"""
GreenLB - Entry Point

Run this file to use the command-line tool.
Everything else lives in the sub-modules:
    constants.py      – shared defaults
    errors.py         – error codes and exceptions
    policy_dsl.py     – policy language: parser, evaluator, selection
    cluster_model.py  – servers and the power-state machine
    sim_engine.py     – discrete-event simulation
    metrics.py        – latency, power and confidence intervals
    design_space.py   – design enumeration, sweep, Pareto front
    validation.py     – δ comparison and oracles
    config.py         – YAML config and snapshot files
    commands/         – one file per command family
    cli.py            – click group
"""

import os
import sys

# Ensure src/ is on the import path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from cli import main  # noqa: E402

if __name__ == '__main__':
    main()
