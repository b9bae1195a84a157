"""
GreenLB - Results Table Commands

``compare`` two sweeps by δ, reshape a sweep for scatter plotting, and
print the power/latency Pareto front.
"""

import click
import pandas as pd

import constants
from commands.common import echo_json, read_results, reports_errors, write_frame
from design_space import pareto_front, trend_correlations
from metrics import aggregate_results
from validation import compare_results

_METRICS = ["avg_latency_s", "total_power_w"]
_GROUP_COLUMNS = {"q": "q", "TO": "timeout"}
_SCATTER_COLUMNS = ["total_power_w", "avg_latency_s", "group", "q", "timeout", "nd"]


@click.command("compare")
@click.argument("results_a", type=click.Path(dir_okay=False))
@click.argument("results_b", type=click.Path(dir_okay=False))
@click.option("--power-column", default="total_power_w", show_default=True,
              type=click.Choice(["total_power_w", "avg_power_per_server_w"]))
@click.option("--json", "as_json", is_flag=True, help="Print the full report as JSON.")
@reports_errors
def cmd_compare(results_a, results_b, power_column, as_json):
    """δ between two results tables, design by design."""
    required = constants.DESIGN_COLUMNS + ["avg_latency_s", power_column]
    report = compare_results(read_results(results_a, required), read_results(results_b, required),
                             power_column=power_column)
    if as_json:
        echo_json(report.to_dict())
    else:
        click.echo(report.to_table())


@click.command("plot-data")
@click.argument("results", type=click.Path(dir_okay=False))
@click.option("--group-by", type=click.Choice(list(_GROUP_COLUMNS)), default="q", show_default=True,
              help="Colour label: queue threshold or timeout.")
@click.option("--out", "-o", "out_path", type=click.Path(dir_okay=False),
              help="CSV to write; stdout when omitted.")
@click.option("--max-q", type=int, default=None, help="Drop designs with q above this.")
@reports_errors
def cmd_plot_data(results, group_by, out_path, max_q):
    """(AP_total, AL, label) rows, one per design, for a scatter plot."""
    frame = read_results(results, constants.DESIGN_COLUMNS + _METRICS)
    if frame.empty:
        write_frame(pd.DataFrame(columns=_SCATTER_COLUMNS), out_path)
        return
    table = aggregate_results(frame)
    if max_q is not None:
        table = table[table["q"] <= max_q]
    column = _GROUP_COLUMNS[group_by]
    table = table.assign(group=[f"{group_by}={v:g}" for v in table[column]])
    write_frame(table[_SCATTER_COLUMNS], out_path)


@click.command("frontier")
@click.argument("results", type=click.Path(dir_okay=False))
@click.option("--by", "by", type=click.Choice(["TO"]), default=None,
              help="One front per timeout value.")
@click.option("--trends", is_flag=True, help="Also print Spearman ρ of q against AL and AP.")
@reports_errors
def cmd_frontier(results, by, trends):
    """Designs no other design beats on both power and latency."""
    frame = read_results(results, constants.DESIGN_COLUMNS + _METRICS)
    columns = constants.DESIGN_COLUMNS + ["total_power_w", "avg_latency_s"]
    if frame.empty:
        write_frame(pd.DataFrame(columns=columns), None)
        return
    if by is None:
        write_frame(pareto_front(frame)[columns], None)
    else:
        fronts = [pareto_front(group)[columns] for _, group in frame.groupby("timeout", sort=True)]
        write_frame(pd.concat(fronts, ignore_index=True), None)
    if trends:
        click.echo(trend_correlations(frame).to_csv(index=False), nl=False)
