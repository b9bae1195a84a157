"""
GreenLB - Metrics

Average latency (AL), average power (AP), per-state time shares and
batch-means confidence intervals over the post-warm-up window.

AL and AP are defined as infinite-horizon limits; everything here is the
finite-window estimate, reported with its half-width.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import pandas as pd
from scipy import stats

import constants
from cluster_model import PowerState
from errors import EmptySampleError, InsufficientDataError

logger = logging.getLogger(__name__)

ESTIMATE_NOTE = "finite-window estimate of an infinite-horizon mean; see CI half-widths"


# ====================================================================== #
# region           LATENCY                                                #
# ====================================================================== #

def post_warmup_latencies(requests, warmup):
    """Latencies of completed requests that arrived at or after ``warmup``.

    Returns
    -------
    numpy.ndarray
        Ordered by arrival time.
    """
    picked = sorted((r for r in requests
                     if r.completion is not None and r.arrival_time >= warmup),
                    key=lambda r: r.arrival_time)
    return np.array([r.completion - r.arrival_time for r in picked], dtype=float)


def compute_al(requests, warmup):
    """Mean latency over requests arriving after ``warmup``.

    Raises
    ------
    EmptySampleError
        No request arrived after warm-up and completed.
    """
    latencies = post_warmup_latencies(requests, warmup)
    if latencies.size == 0:
        raise EmptySampleError(f"no completed requests arrived after warm-up {warmup:g} s")
    return float(latencies.mean())

# endregion


# ====================================================================== #
# region           POWER                                                  #
# ====================================================================== #

class PowerSummary(NamedTuple):
    per_server: float
    total: float


def _clipped_segments(timeline, start, end):
    """Durations and states of a state timeline restricted to ``[start, end]``."""
    times = np.array([t for t, _ in timeline] + [math.inf], dtype=float)
    clipped = np.clip(times, start, end)
    durations = np.diff(clipped)
    return durations, [state for _, state in timeline]


def server_energy(timeline, power, start, end):
    """Joules one server draws over ``[start, end]``."""
    durations, states = _clipped_segments(timeline, start, end)
    watts = np.array([power.power_of_state(s) for s in states], dtype=float)
    return float(np.dot(durations, watts))


def cluster_energy(timelines, power, start, end):
    """Joules all servers draw together over ``[start, end]``."""
    return sum(server_energy(tl, power, start, end) for tl in timelines)


def compute_ap(timelines, power, warmup, horizon):
    """Time-averaged power over ``[warmup, horizon]``.

    Parameters
    ----------
    timelines : list[list[tuple[float, PowerState]]]
        Change points per server, starting at t = 0.
    power : PowerModel
    warmup, horizon : float

    Returns
    -------
    PowerSummary
        Mean per server and the cluster total.

    Raises
    ------
    EmptySampleError
        The window has zero length.
    """
    window = horizon - warmup
    if not window > 0:
        raise EmptySampleError(f"empty power window [{warmup:g}, {horizon:g}]")
    total = cluster_energy(timelines, power, warmup, horizon) / window
    return PowerSummary(total / len(timelines), total)


def state_fractions(timeline, warmup, horizon):
    """Share of ``[warmup, horizon]`` spent in each power state.

    Returns
    -------
    dict[PowerState, float]
        Every state present; shares sum to 1.
    """
    window = horizon - warmup
    if not window > 0:
        raise EmptySampleError(f"empty window [{warmup:g}, {horizon:g}]")
    durations, states = _clipped_segments(timeline, warmup, horizon)
    shares = {state: 0.0 for state in PowerState}
    for duration, state in zip(durations, states):
        shares[state] += float(duration) / window
    return shares

# endregion


# ====================================================================== #
# region           BATCH MEANS                                            #
# ====================================================================== #

class BatchEstimate(NamedTuple):
    mean: float
    half_width: float
    num_batches: int


def _t_half_width(batch_values, confidence):
    k = len(batch_values)
    spread = float(np.std(batch_values, ddof=1))
    if spread == 0.0:
        return 0.0
    return float(stats.t.ppf((1 + confidence) / 2, k - 1) * spread / math.sqrt(k))


def batch_means(samples, num_batches=constants.NUM_BATCHES,
                confidence=constants.CONFIDENCE):
    """Grand mean and Student-t half-width from equal-size batches.

    Samples that do not fill a whole batch are dropped from the end.

    Parameters
    ----------
    samples : array-like
        Post-warm-up observations in time order.
    num_batches : int
        At least 2.

    Returns
    -------
    BatchEstimate

    Raises
    ------
    InsufficientDataError
        Fewer than two batches, or fewer samples than batches.
    """
    data = np.asarray(samples, dtype=float)
    if num_batches < 2:
        raise InsufficientDataError(f"batch means needs at least 2 batches, got {num_batches}")
    size = data.size // num_batches
    if size < 1:
        raise InsufficientDataError(
            f"{data.size} samples cannot fill {num_batches} batches")
    batches = data[:size * num_batches].reshape(num_batches, size).mean(axis=1)
    return BatchEstimate(float(batches.mean()), _t_half_width(batches, confidence), num_batches)


def power_batch_means(timelines, power, warmup, horizon,
                      num_batches=constants.NUM_BATCHES,
                      confidence=constants.CONFIDENCE):
    """Batch means of per-server power over equal sub-windows of ``[warmup, horizon]``."""
    if num_batches < 2:
        raise InsufficientDataError(f"batch means needs at least 2 batches, got {num_batches}")
    if not horizon > warmup:
        raise InsufficientDataError(f"empty power window [{warmup:g}, {horizon:g}]")
    edges = np.linspace(warmup, horizon, num_batches + 1)
    batches = np.array([
        cluster_energy(timelines, power, lo, hi) / ((hi - lo) * len(timelines))
        for lo, hi in zip(edges[:-1], edges[1:])
    ])
    return BatchEstimate(float(batches.mean()), _t_half_width(batches, confidence), num_batches)

# endregion


# ====================================================================== #
# region           RUN RESULT                                             #
# ====================================================================== #

@dataclass
class RunResult:
    """Outcome of one simulation run.

    ``avg_latency_s`` is ``None`` when no request arrived after warm-up.
    """
    avg_latency_s: float | None
    latency_ci_halfwidth: float | None
    avg_power_per_server_w: float
    total_power_w: float
    power_ci_halfwidth: float | None
    state_fractions: list = field(default_factory=list)
    assignment_counts: list = field(default_factory=list)
    requests_completed: int = 0
    virtual_time_simulated: float = 0.0
    warmup: float = 0.0
    horizon: float = 0.0
    seed: int | None = None
    design: dict = field(default_factory=dict)
    replication: int | None = None
    status: str = "ok"
    error: str = ""
    note: str = ESTIMATE_NOTE

    @property
    def num_servers(self):
        return len(self.assignment_counts)

    @classmethod
    def failed(cls, design, replication, seed, num_servers, message):
        """A placeholder row for a design whose run raised."""
        return cls(
            avg_latency_s=None, latency_ci_halfwidth=None,
            avg_power_per_server_w=math.nan, total_power_w=math.nan,
            power_ci_halfwidth=None,
            state_fractions=[{s: math.nan for s in PowerState} for _ in range(num_servers)],
            assignment_counts=[0] * num_servers,
            seed=seed, design=dict(design), replication=replication,
            status="error", error=message,
        )

    def to_row(self):
        """Flat dict in ``RESULT_COLUMNS`` order, then per-server columns."""
        row = {
            "q": self.design.get("q"),
            "timeout": self.design.get("timeout"),
            "nd": self.design.get("nd"),
            "replication": self.replication,
            "seed": self.seed,
            "avg_latency_s": self.avg_latency_s,
            "latency_ci_halfwidth": self.latency_ci_halfwidth,
            "avg_power_per_server_w": self.avg_power_per_server_w,
            "total_power_w": self.total_power_w,
            "power_ci_halfwidth": self.power_ci_halfwidth,
            "requests_completed": self.requests_completed,
            "virtual_time_simulated": self.virtual_time_simulated,
            "status": self.status,
            "error": self.error,
        }
        for sid, shares in enumerate(self.state_fractions):
            for state in PowerState:
                row[f"frac_{state.value.lower()}_s{sid}"] = shares[state]
        for sid, count in enumerate(self.assignment_counts):
            row[f"assigned_s{sid}"] = count
        return row

    def to_dict(self):
        """JSON-ready dict, including window metadata."""
        data = self.to_row()
        data["state_fractions"] = [
            {state.value: shares[state] for state in PowerState}
            for shares in self.state_fractions
        ]
        data["assignment_counts"] = list(self.assignment_counts)
        data["warmup"] = self.warmup
        data["horizon"] = self.horizon
        data["note"] = self.note
        return {k: v for k, v in data.items()
                if not (k.startswith("frac_") or k.startswith("assigned_s"))}


def summarize_run(cluster, requests, warmup, horizon,
                  num_batches=constants.NUM_BATCHES, seed=None):
    """Build a ``RunResult`` from a finished cluster and its requests."""
    power = cluster.power
    timelines = cluster.timelines()
    ap = compute_ap(timelines, power, warmup, horizon)

    latencies = post_warmup_latencies(requests, warmup)
    avg_latency = float(latencies.mean()) if latencies.size else None
    if avg_latency is None:
        logger.warning("no requests arrived after warm-up; AL left empty")

    latency_hw = power_hw = None
    try:
        latency_hw = batch_means(latencies, num_batches).half_width
    except InsufficientDataError as e:
        logger.debug("latency CI skipped: %s", e.detail)
    try:
        power_hw = power_batch_means(timelines, power, warmup, horizon, num_batches).half_width
    except InsufficientDataError as e:
        logger.debug("power CI skipped: %s", e.detail)

    return RunResult(
        avg_latency_s=avg_latency,
        latency_ci_halfwidth=latency_hw,
        avg_power_per_server_w=ap.per_server,
        total_power_w=ap.total,
        power_ci_halfwidth=power_hw,
        state_fractions=[state_fractions(tl, warmup, horizon) for tl in timelines],
        assignment_counts=[server.assigned_count for server in cluster],
        requests_completed=sum(len(server.completed) for server in cluster),
        virtual_time_simulated=horizon,
        warmup=warmup,
        horizon=horizon,
        seed=seed,
    )


def results_frame(results):
    """Results as a ``DataFrame`` with the documented column order."""
    rows = [r.to_row() for r in results]
    frame = pd.DataFrame(rows)
    if frame.empty:
        return pd.DataFrame(columns=constants.RESULT_COLUMNS)
    extra = [c for c in frame.columns if c not in constants.RESULT_COLUMNS]
    return frame[constants.RESULT_COLUMNS + extra]


def aggregate_results(frame):
    """Replication means per design over successful rows.

    Order of the input rows does not matter; output is sorted by design.
    """
    ok = frame[frame["status"] == "ok"] if "status" in frame else frame
    numeric = [c for c in ok.columns
               if c not in constants.DESIGN_COLUMNS + ["replication", "seed", "status", "error"]
               and pd.api.types.is_numeric_dtype(ok[c])]
    grouped = ok.groupby(constants.DESIGN_COLUMNS, sort=True)[numeric].mean()
    grouped["replications"] = ok.groupby(constants.DESIGN_COLUMNS, sort=True).size()
    return grouped.reset_index()

# endregion
