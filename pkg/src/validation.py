"""
GreenLB - Validation

Cross-checks for the simulator:

* ``delta``: the ratio distance used to compare two result sets.
* ``replay_oracle``: an independent, straight-line interpreter of the
  power-state rules that replays a fixed arrival/assignment trace
  server by server, with no event queue.
* ``md1_mean_latency``: the Pollaczek-Khinchine mean for one always-on
  server with deterministic service.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import pandas as pd

import constants
from cluster_model import PowerState
from errors import ResultsFormatError, TraceError, ValidationInputError
from metrics import aggregate_results

logger = logging.getLogger(__name__)


# ====================================================================== #
# region           RATIO DISTANCE                                         #
# ====================================================================== #

def delta(v1, v2):
    """``max(v1/v2, v2/v1) - 1``.

    Symmetric, zero on equal values and invariant under common scaling,
    but not a metric: the triangle inequality can fail.

    Raises
    ------
    ValidationInputError
        Either value is not strictly positive.
    """
    if not (v1 > 0 and v2 > 0) or math.isinf(v1) or math.isinf(v2):
        raise ValidationInputError(f"delta needs positive finite values, got {v1!r} and {v2!r}")
    return max(v1 / v2, v2 / v1) - 1.0


def _delta_column(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValidationInputError("delta needs positive values in both tables")
    return np.maximum(a / b, b / a) - 1.0

# endregion


# ====================================================================== #
# region           RESULT COMPARISON                                      #
# ====================================================================== #

@dataclass
class ComparisonReport:
    """Per-design δ between two result tables and the pass fractions."""
    designs: pd.DataFrame
    latency_within: dict = field(default_factory=dict)
    power_within: dict = field(default_factory=dict)

    @property
    def num_designs(self):
        return len(self.designs)

    def quantiles(self, column):
        """Median and 80th percentile of a δ column."""
        values = self.designs[column]
        if values.empty:
            return {"median": math.nan, "p80": math.nan}
        return {"median": float(values.quantile(0.5)), "p80": float(values.quantile(0.8))}

    def to_dict(self):
        return {
            "num_designs": self.num_designs,
            "latency_within": {str(k): v for k, v in self.latency_within.items()},
            "power_within": {str(k): v for k, v in self.power_within.items()},
            "latency_delta": self.quantiles("delta_latency"),
            "power_delta": self.quantiles("delta_power"),
            "designs": self.designs.to_dict(orient="records"),
        }

    def to_table(self):
        """Human-readable summary, one threshold per line."""
        lines = [f"designs compared: {self.num_designs}",
                 f"{'delta <':>10} {'latency':>9} {'power':>9}"]
        for t in self.latency_within:
            lines.append(f"{t:>10g} {self.latency_within[t]:>9.1%} {self.power_within[t]:>9.1%}")
        lat, pwr = self.quantiles("delta_latency"), self.quantiles("delta_power")
        lines.append(f"{'median':>10} {lat['median']:>9.4f} {pwr['median']:>9.4f}")
        lines.append(f"{'p80':>10} {lat['p80']:>9.4f} {pwr['p80']:>9.4f}")
        return "\n".join(lines)


def compare_results(table_a, table_b, power_column="total_power_w",
                    thresholds=constants.DELTA_THRESHOLDS):
    """δ per design between two results tables, keyed by ``(q, timeout, nd)``.

    Replications are averaged first. Designs present in only one table, or
    without a latency estimate, are left out.

    Raises
    ------
    ResultsFormatError
        A table lacks the design or metric columns.
    """
    needed = constants.DESIGN_COLUMNS + ["avg_latency_s", power_column]
    for name, table in (("first", table_a), ("second", table_b)):
        missing = [c for c in needed if c not in table.columns]
        if missing:
            raise ResultsFormatError(f"{name} table lacks column(s): {', '.join(missing)}")

    keep = constants.DESIGN_COLUMNS + ["avg_latency_s", power_column]
    a = aggregate_results(table_a)[keep]
    b = aggregate_results(table_b)[keep]
    merged = a.merge(b, on=constants.DESIGN_COLUMNS, suffixes=("_a", "_b"))
    usable = merged.dropna(subset=["avg_latency_s_a", "avg_latency_s_b"])
    if len(usable) < len(merged):
        logger.warning("%d design(s) without latency left out", len(merged) - len(usable))
    usable = usable.copy()
    usable["delta_latency"] = _delta_column(usable["avg_latency_s_a"], usable["avg_latency_s_b"])
    usable["delta_power"] = _delta_column(usable[f"{power_column}_a"], usable[f"{power_column}_b"])

    def within(column):
        if usable.empty:
            return {t: math.nan for t in thresholds}
        return {t: float((usable[column] < t).mean()) for t in thresholds}

    return ComparisonReport(
        designs=usable.sort_values(constants.DESIGN_COLUMNS).reset_index(drop=True),
        latency_within=within("delta_latency"),
        power_within=within("delta_power"),
    )

# endregion


# ====================================================================== #
# region           TRACE REPLAY ORACLE                                    #
# ====================================================================== #

class OracleResult(NamedTuple):
    latencies: np.ndarray
    completions: np.ndarray
    energy_joules: float
    horizon: float
    segments: list

    @property
    def avg_power_per_server(self):
        if not self.horizon > 0:
            return math.nan
        return self.energy_joules / (self.horizon * len(self.segments))


def _replay_server(arrivals, service_time, power, initial_state):
    """Walk one server's arrivals in order; return completions and state segments.

    Segments are ``(start, end, state)`` and run to infinity at the tail.
    """
    to, ts, tw = power.timeout, power.t_suspend, power.t_wakeup
    segments = []
    completions = []
    mode, since = ("asleep", 0.0) if initial_state is PowerState.SLEEP else ("idle", 0.0)
    busy_until = None

    for a in arrivals:
        if mode == "busy" and a < busy_until:
            start = busy_until
        else:
            if mode == "busy":
                mode, since = "idle", busy_until
            if mode == "idle":
                to_at = since + to
                if a < to_at:
                    segments.append((since, a, PowerState.ON))
                    start = a
                else:
                    sd_done = to_at + ts
                    segments.append((since, to_at, PowerState.ON))
                    segments.append((to_at, sd_done, PowerState.SUSPEND))
                    if a < sd_done:
                        start = sd_done + tw
                        segments.append((sd_done, start, PowerState.WAKEUP))
                    else:
                        start = a + tw
                        segments.append((sd_done, a, PowerState.SLEEP))
                        segments.append((a, start, PowerState.WAKEUP))
            else:
                start = a + tw
                segments.append((since, a, PowerState.SLEEP))
                segments.append((a, start, PowerState.WAKEUP))
            mode = "busy"
        completion = start + service_time
        segments.append((start, completion, PowerState.ON))
        completions.append(completion)
        busy_until = completion

    # tail after the last request
    if mode == "busy":
        mode, since = "idle", busy_until
    if mode == "idle":
        to_at = since + to
        segments.append((since, to_at, PowerState.ON))
        if not math.isinf(to_at):
            segments.append((to_at, to_at + ts, PowerState.SUSPEND))
            segments.append((to_at + ts, math.inf, PowerState.SLEEP))
    else:
        segments.append((since, math.inf, PowerState.SLEEP))
    return completions, segments


def replay_oracle(arrivals, assignments, config, horizon=None):
    """Replay a fixed trace and recompute latencies and energy independently.

    Parameters
    ----------
    arrivals : sequence of float
        Strictly increasing arrival times.
    assignments : sequence of int
        Server id per arrival.
    config : SimConfig
        Supplies ``num_servers``, ``service_time``, ``power`` and
        ``initial_state``.
    horizon : float, optional
        End of the energy window; defaults to the last completion.

    Returns
    -------
    OracleResult
        Latencies in input order and the energy drawn over ``[0, horizon]``.

    Raises
    ------
    TraceError
        Unsorted arrivals, length mismatch or unknown server.
    """
    arrivals = [float(t) for t in arrivals]
    assignments = [int(s) for s in assignments]
    if len(arrivals) != len(assignments):
        raise TraceError(f"{len(arrivals)} arrivals but {len(assignments)} assignments")
    if any(b <= a for a, b in zip(arrivals, arrivals[1:])) or (arrivals and arrivals[0] < 0):
        raise TraceError("arrival times must be non-negative and strictly increasing")
    if any(not 0 <= s < config.num_servers for s in assignments):
        raise TraceError(f"assignment outside servers 0..{config.num_servers - 1}")

    completions = np.empty(len(arrivals))
    all_segments = []
    for sid in range(config.num_servers):
        picked = [i for i, s in enumerate(assignments) if s == sid]
        done, segments = _replay_server([arrivals[i] for i in picked], config.service_time,
                                        config.power, config.initial_state)
        completions[picked] = done
        all_segments.append(segments)

    if horizon is None:
        horizon = float(completions.max()) if len(arrivals) else 0.0
    energy = 0.0
    for segments in all_segments:
        for start, end, state in segments:
            span = min(end, horizon) - max(start, 0.0)
            if span > 0:
                energy += span * config.power.power_of_state(state)

    return OracleResult(completions - np.asarray(arrivals), completions,
                        energy, horizon, all_segments)

# endregion


# ====================================================================== #
# region           ANALYTIC ORACLE                                        #
# ====================================================================== #

def md1_mean_latency(arrival_rate, service_time):
    """Mean sojourn time of an M/D/1 queue.

    ``s + rho * s / (2 * (1 - rho))`` with ``rho = arrival_rate * s``.

    Raises
    ------
    ValidationInputError
        ``rho >= 1`` or non-positive service time.
    """
    if not service_time > 0 or arrival_rate < 0:
        raise ValidationInputError("M/D/1 needs a positive service time and a non-negative rate")
    rho = arrival_rate * service_time
    if rho >= 1:
        raise ValidationInputError(f"M/D/1 is unstable at utilisation {rho:g}")
    return service_time + rho * service_time / (2.0 * (1.0 - rho))

# endregion
