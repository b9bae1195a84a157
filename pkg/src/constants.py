"""
GreenLB - Shared Constants

Centralised defaults imported by the model, engine, sweep and CLI.
Change them here and every consumer picks up the update.
"""

# ====================================================================== #
# region           WORKLOAD & SERVERS                                     #
# ====================================================================== #

NUM_SERVERS = 4
"""int: Servers behind the load balancer."""

ARRIVAL_RATE = 1.0
"""float: Poisson arrival rate in requests per second."""

SERVICE_TIME = 1.0
"""float: Deterministic service time per request in seconds."""

INITIAL_STATE = "Sleep"
"""str: Power state every server starts in at t = 0."""

# endregion


# ====================================================================== #
# region           POWER MODEL                                            #
# ====================================================================== #

POWER_ON = 200.0
"""float: Watts drawn while On (serving or idle)."""

POWER_SUSPEND = 200.0
"""float: Watts drawn while suspending."""

POWER_WAKEUP = 200.0
"""float: Watts drawn while waking up."""

POWER_SLEEP = 14.0
"""float: Watts drawn while asleep."""

TIME_SUSPEND = 10.0
"""float: Seconds spent in Suspend on the way to Sleep."""

TIME_WAKEUP = 10.0
"""float: Seconds spent in Wakeup on the way to On."""

TIMEOUT = 10.0
"""float: Idle seconds in On before a server starts suspending."""

# endregion


# ====================================================================== #
# region           RUN LENGTH & ESTIMATION                                #
# ====================================================================== #

MAX_REQUESTS = 1500
"""int: Default request-count stop criterion."""

WARMUP = 500.0
"""float: Virtual seconds deleted from the start of every run."""

NUM_BATCHES = 20
"""int: Batches used by the batch-means confidence intervals."""

CONFIDENCE = 0.95
"""float: Two-sided confidence level of reported half-widths."""

# endregion


# ====================================================================== #
# region           DESIGN SPACE                                           #
# ====================================================================== #

Q_VALUES = (1, 2, 3, 5, 7, 10, 15, 20, 30, 40, 50, 75, 100)
"""tuple[int, ...]: Queue thresholds swept by default."""

TIMEOUT_VALUES = (1.0, 2.0, 3.0, 4.0, 5.0, 7.5, 10.0, 15.0, 30.0)
"""tuple[float, ...]: Idle timeouts swept by default."""

ND_VALUES = ("random", "fixed_order")
"""tuple[str, ...]: Non-determinism resolutions swept by default."""

REPLICATIONS = 10
"""int: Independent replications per design."""

MASTER_SEED = 1
"""int: Seed every per-design seed is derived from."""

DEFAULT_POLICY = '-queueSize - dspace("q") * (1 - stateOn)'
"""str: Queue-threshold policy; ``q`` comes from the design."""

# endregion


# ====================================================================== #
# region           VALIDATION                                             #
# ====================================================================== #

DELTA_THRESHOLDS = (0.06, 0.11, 0.13, 0.2, 0.3)
"""tuple[float, ...]: δ levels whose pass fractions a comparison reports."""

# endregion


# ====================================================================== #
# region           FILE FORMATS                                           #
# ====================================================================== #

SCHEMA_VERSION = 1
"""int: Config file schema version understood by this release."""

DESIGN_COLUMNS = ["q", "timeout", "nd"]
"""list[str]: Columns that identify a design in results tables."""

RESULT_COLUMNS = [
    # design coordinates
    "q", "timeout", "nd", "replication", "seed",
    # latency
    "avg_latency_s", "latency_ci_halfwidth",
    # power
    "avg_power_per_server_w", "total_power_w", "power_ci_halfwidth",
    # run size
    "requests_completed", "virtual_time_simulated",
    "status", "error",
]
"""list[str]: Leading CSV columns of a RunResult row.

Per-server state fractions (``frac_<state>_s<id>``) and assignment counts
(``assigned_s<id>``) follow, in server order.
"""

TRACE_COLUMNS = ["time", "server", "event", "power_state", "queue_size"]
"""list[str]: Columns of an exported event trace."""

LOG_ENV_VAR = "GREENLB_LOG"
"""str: Environment variable holding the log level name."""

# endregion
