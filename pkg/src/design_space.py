"""
GreenLB - Design Space

Enumerates the (q, TO, nd) Cartesian product, derives reproducible seeds
from design coordinates and runs the sweep, optionally across processes.
Also extracts the power/latency Pareto front and the q-trend correlations
of a finished sweep.
"""

import dataclasses
import hashlib
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import stats

import constants
from errors import ConfigError, GreenLBError
from metrics import RunResult, aggregate_results
from policy_dsl import NdResolution
from sim_engine import Simulation

logger = logging.getLogger(__name__)


# ====================================================================== #
# region           DESIGNS                                                #
# ====================================================================== #

def design_seed(master_seed, *coordinates):
    """Stable 63-bit seed from the master seed and any coordinates.

    Independent of enumeration position, process and platform.
    """
    key = "|".join([str(int(master_seed))] + [repr(c) for c in coordinates])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & (2**63 - 1)


def arrival_seed(master_seed, replication):
    """Seed of the arrival stream shared by every design of one replication."""
    return design_seed(master_seed, "arrivals", replication)


@dataclass(frozen=True)
class Design:
    """One point of the design space and its per-replication policy seeds."""
    q: int
    timeout: float
    nd: NdResolution
    replication_seeds: tuple = ()

    def __post_init__(self):
        if not isinstance(self.q, int) or self.q < 0:
            raise ConfigError(f"design q must be a non-negative integer, got {self.q!r}")
        if not self.timeout > 0:
            raise ConfigError(f"design timeout must be positive, got {self.timeout!r}")

    @property
    def key(self):
        return (self.q, self.timeout, self.nd.value)

    def as_dict(self):
        return {"q": self.q, "timeout": self.timeout, "nd": self.nd.value}

    def __str__(self):
        return f"({self.q}, {self.timeout:g}, {self.nd.value})"


@dataclass(frozen=True)
class StudySpace:
    """Ranges swept by a study; the default is the full reference grid."""
    q_values: tuple = constants.Q_VALUES
    timeout_values: tuple = constants.TIMEOUT_VALUES
    nd_values: tuple = field(default_factory=lambda: tuple(NdResolution.parse(v) for v in constants.ND_VALUES))
    replications: int = constants.REPLICATIONS
    master_seed: int = constants.MASTER_SEED

    @property
    def size(self):
        return len(self.q_values) * len(self.timeout_values) * len(self.nd_values)


def enumerate_designs(space):
    """Every design of ``space``, ordered by q, then TO, then nd.

    Raises
    ------
    ConfigError
        A dimension is empty or replications is not positive.
    """
    for name, values in (("q", space.q_values), ("timeout", space.timeout_values),
                         ("nd", space.nd_values)):
        if len(values) == 0:
            raise ConfigError(f"study.{name} is empty")
    if not isinstance(space.replications, int) or space.replications < 1:
        raise ConfigError(f"study.replications must be a positive integer, got {space.replications!r}")

    designs = []
    for q, timeout, nd in itertools.product(space.q_values, space.timeout_values, space.nd_values):
        timeout = float(timeout)
        seeds = tuple(design_seed(space.master_seed, q, timeout, nd.value, rep)
                      for rep in range(space.replications))
        designs.append(Design(q, timeout, nd, seeds))
    return designs

# endregion


# ====================================================================== #
# region           SWEEP                                                  #
# ====================================================================== #

def _run_design(base_config, design, replication, master_seed):
    """Run one (design, replication); a failure becomes an error row."""
    seed = design.replication_seeds[replication]
    try:
        config = base_config.with_design(design.q, design.timeout, design.nd)
        config = dataclasses.replace(config, rng_seed=seed,
                                     arrival_seed=arrival_seed(master_seed, replication))
        result = Simulation(config).run()
    except GreenLBError as e:
        logger.warning("design %s replication %d failed: %s", design, replication, e.detail)
        return RunResult.failed(design.as_dict(), replication, seed,
                                base_config.num_servers, e.one_line())
    except Exception as e:  # noqa: BLE001
        logger.exception("design %s replication %d crashed", design, replication)
        return RunResult.failed(design.as_dict(), replication, seed,
                                base_config.num_servers, f"{type(e).__name__}: {e}")
    result.design = design.as_dict()
    result.replication = replication
    return result


def run_sweep(space, base_config, jobs=1):
    """Run every design of ``space`` for every replication.

    Parameters
    ----------
    space : StudySpace
    base_config : SimConfig
        Everything except q, TO, nd and the seeds.
    jobs : int
        Worker processes; 1 runs in-process.

    Returns
    -------
    list[RunResult]
        Sorted by design then replication, whatever the completion order.
    """
    if jobs < 1:
        raise ConfigError(f"--jobs must be at least 1, got {jobs}")
    designs = enumerate_designs(space)
    tasks = [(d, rep) for d in designs for rep in range(space.replications)]
    logger.info("sweeping %d designs x %d replications on %d worker(s)",
                len(designs), space.replications, jobs)

    results = {}
    if jobs == 1:
        for design, rep in tasks:
            results[(design.key, rep)] = _run_design(base_config, design, rep, space.master_seed)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            futures = {
                executor.submit(_run_design, base_config, design, rep, space.master_seed): (design.key, rep)
                for design, rep in tasks
            }
            for done, future in enumerate(as_completed(futures), start=1):
                results[futures[future]] = future.result()
                if done % 100 == 0:
                    logger.info("%d/%d runs finished", done, len(tasks))

    failed = sum(r.status != "ok" for r in results.values())
    if failed:
        logger.warning("%d of %d runs failed", failed, len(tasks))
    return [results[key] for key in sorted(results)]

# endregion


# ====================================================================== #
# region           ANALYSIS                                               #
# ====================================================================== #

def pareto_front(frame, power_column="total_power_w", latency_column="avg_latency_s"):
    """Designs not dominated in (power, latency), both minimised.

    Replications are averaged first. Returns rows sorted by ascending power.
    """
    table = aggregate_results(frame).dropna(subset=[power_column, latency_column])
    table = table.sort_values([power_column, latency_column], kind="mergesort")
    keep = []
    best_latency = math.inf
    for index, latency in zip(table.index, table[latency_column]):
        if latency < best_latency:
            keep.append(index)
            best_latency = latency
    return table.loc[keep].reset_index(drop=True)


def trend_correlations(frame):
    """Spearman rank correlation of q against mean AL and mean AP.

    One row per (timeout, nd); ``nan`` when fewer than two q values exist
    or a series is constant.
    """
    table = aggregate_results(frame)
    rows = []
    for (timeout, nd), group in table.groupby(["timeout", "nd"], sort=True):
        group = group.sort_values("q")
        rho_latency = rho_power = math.nan
        if len(group) >= 2:
            rho_latency = _spearman(group["q"], group["avg_latency_s"])
            rho_power = _spearman(group["q"], group["total_power_w"])
        rows.append({"timeout": timeout, "nd": nd, "num_q": len(group),
                     "rho_latency": rho_latency, "rho_power": rho_power})
    return pd.DataFrame(rows, columns=["timeout", "nd", "num_q", "rho_latency", "rho_power"])


def _spearman(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return math.nan
    return float(stats.spearmanr(x, y).statistic)

# endregion
