"""
GreenLB - Simulation Engine

Deterministic discrete-event loop. Poisson arrivals are handed to the
policy (which takes no simulated time), the chosen server's state machine
reacts, and the timers it returns go back onto the future event list.

Events sharing a timestamp run in the order ServiceComplete, SuspendDone,
WakeupDone, Timeout, Arrival, then by scheduling sequence, so servers have
settled before a new request looks at them.
"""

import csv
import dataclasses
import heapq
import logging
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import NamedTuple

import numpy as np

import constants
from cluster_model import Cluster, EventKind, PowerModel, PowerState, Request
from errors import ConfigError, PolicyEvaluationError, SimulationError
from metrics import summarize_run
from policy_dsl import (
    NdResolution, ServerSnapshot, design_parameters, parse_policy, select_server,
)

logger = logging.getLogger(__name__)


# ====================================================================== #
# region           EVENTS                                                 #
# ====================================================================== #

class Event(NamedTuple):
    """A timestamped event; tuple order is the dispatch order."""
    time: float
    kind: EventKind
    sequence: int
    server: int = -1
    token: int = 0


class EventQueue:
    """Future event list: a binary heap ordered by ``(time, kind, sequence)``."""

    def __init__(self):
        self._heap = []
        self._sequence = 0
        self.clock = 0.0

    def __len__(self):
        return len(self._heap)

    def schedule(self, time, kind, server=-1, token=0):
        """Insert an event; it may not lie in the past."""
        if time < self.clock:
            raise SimulationError(
                f"{kind.name} at t={time!r} scheduled before clock t={self.clock!r}")
        event = Event(time, kind, self._sequence, server, token)
        self._sequence += 1
        heapq.heappush(self._heap, event)
        return event

    def peek_time(self):
        return self._heap[0].time if self._heap else math.inf

    def pop(self):
        """Remove the next event and advance the clock to it."""
        event = heapq.heappop(self._heap)
        self.clock = event.time
        return event

# endregion


# ====================================================================== #
# region           CONFIGURATION                                          #
# ====================================================================== #

@dataclass(frozen=True)
class StopCriterion:
    """Exactly one of ``max_requests`` or ``max_virtual_time``."""
    max_requests: int | None = None
    max_virtual_time: float | None = None

    def validate(self):
        chosen = [v for v in (self.max_requests, self.max_virtual_time) if v is not None]
        if len(chosen) != 1:
            raise ConfigError("stop needs exactly one of max_requests or max_virtual_time")
        if not chosen[0] > 0:
            raise ConfigError(f"stop criterion must be positive, got {chosen[0]}")
        return self


@dataclass(frozen=True)
class SimConfig:
    """All parameters of one simulation run.

    ``arrival_seed`` seeds the arrival stream on its own; when ``None`` both
    streams derive from ``rng_seed``.
    """
    policy: object = field(default_factory=lambda: parse_policy(constants.DEFAULT_POLICY))
    num_servers: int = constants.NUM_SERVERS
    arrival_rate: float = constants.ARRIVAL_RATE
    service_time: float = constants.SERVICE_TIME
    power: PowerModel = field(default_factory=PowerModel)
    nd: NdResolution = NdResolution.RANDOM_FRACTION
    design_params: dict = field(default_factory=lambda: {"q": 5})
    stop: StopCriterion = field(default_factory=lambda: StopCriterion(max_requests=constants.MAX_REQUESTS))
    warmup: float = constants.WARMUP
    rng_seed: int = constants.MASTER_SEED
    arrival_seed: int | None = None
    initial_state: PowerState = PowerState.SLEEP
    num_batches: int = constants.NUM_BATCHES

    def validate(self):
        """Raise ``ConfigError`` naming the first invalid field."""
        if not isinstance(self.num_servers, int) or self.num_servers < 1:
            raise ConfigError(f"scenario.num_servers must be a positive integer, got {self.num_servers!r}")
        if not self.arrival_rate > 0 or math.isinf(self.arrival_rate):
            raise ConfigError(f"scenario.arrival_rate must be positive, got {self.arrival_rate!r}")
        if not self.service_time > 0 or math.isinf(self.service_time):
            raise ConfigError(f"scenario.service_time must be positive, got {self.service_time!r}")
        if not self.warmup >= 0:
            raise ConfigError(f"scenario.warmup must be non-negative, got {self.warmup!r}")
        if self.initial_state not in (PowerState.SLEEP, PowerState.ON):
            raise ConfigError("scenario.initial_state must be Sleep or On")
        if not isinstance(self.nd, NdResolution):
            raise ConfigError(f"policy.nd must be an NdResolution, got {self.nd!r}")
        self.stop.validate()
        self.power.validate()
        missing = [n for n in design_parameters(self.policy) if n not in self.design_params]
        if missing:
            raise ConfigError(f"policy uses dspace({missing[0]!r}) but policy.params has no value for it")
        return self

    def with_design(self, q, timeout, nd):
        """Copy with ``q`` bound to ``dspace("q")``, the idle timeout and the resolution."""
        params = dict(self.design_params, q=q)
        return dataclasses.replace(
            self, design_params=params,
            power=dataclasses.replace(self.power, timeout=float(timeout)),
            nd=nd)

# endregion


# ====================================================================== #
# region           ARRIVALS                                               #
# ====================================================================== #

def generate_interarrival(rng, rate):
    """Exponential inter-arrival time by inverse transform.

    Parameters
    ----------
    rng : numpy.random.Generator
        The dedicated arrival stream.
    rate : float
        Arrivals per second, positive.

    Returns
    -------
    float
        ``-ln(1 - u) / rate``; a draw of exactly ``u = 0`` is redrawn.
    """
    u = rng.random()
    while u == 0.0:
        u = rng.random()
    return -math.log1p(-u) / rate

# endregion


# ====================================================================== #
# region           TRACE                                                  #
# ====================================================================== #

class TraceRecorder:
    """Collects one row per handled event for debugging and oracle checks."""

    def __init__(self):
        self.rows = []

    def record(self, time, server, event, power_state, queue_size):
        self.rows.append((time, server, event, power_state.value, queue_size))

    def to_csv(self, path):
        try:
            with open(path, "w", newline="", encoding="utf-8") as file:
                writer = csv.writer(file)
                writer.writerow(constants.TRACE_COLUMNS)
                for time, server, event, state, queue_size in self.rows:
                    writer.writerow([repr(time), server, event, state, queue_size])
        except OSError as e:
            raise ConfigError(f"cannot write trace {path}: {e.strerror or e}") from e

# endregion


# ====================================================================== #
# region           SIMULATION                                             #
# ====================================================================== #

class Simulation:
    """One sequential simulation run.

    Responsibilities
    ----------------
    * Own the cluster, the event queue and the two random streams.
    * Ask the policy for a server at every arrival.
    * Stop injecting at the stop criterion, then drain in-flight requests.

    Parameters
    ----------
    config : SimConfig
    trace : TraceRecorder, optional
    arrivals : sequence of float, optional
        Explicit arrival times replacing the Poisson stream. All of them are
        injected, regardless of the stop criterion.
    assignments : sequence of int, optional
        Fixed server per explicit arrival, bypassing the policy.
    """

    def __init__(self, config, trace=None, arrivals=None, assignments=None):
        self.config = config.validate()
        self.trace = trace
        self.cluster = Cluster(config.num_servers, config.power,
                               config.service_time, config.initial_state)
        self.queue = EventQueue()
        self.requests = []
        self.horizon = None

        root = np.random.SeedSequence(config.rng_seed)
        arrival_seq, policy_seq = root.spawn(2)
        if config.arrival_seed is not None:
            arrival_seq = np.random.SeedSequence(config.arrival_seed)
        self.arrival_rng = np.random.default_rng(arrival_seq)
        self.policy_rng = np.random.default_rng(policy_seq)

        self._params = MappingProxyType(dict(config.design_params))
        self._explicit = None
        self._assignments = None
        if arrivals is not None:
            self._explicit = [float(t) for t in arrivals]
            if any(b <= a for a, b in zip(self._explicit, self._explicit[1:])):
                raise ConfigError("explicit arrival times must be strictly increasing")
            if self._explicit and self._explicit[0] < 0:
                raise ConfigError("explicit arrival times must be non-negative")
        if assignments is not None:
            if arrivals is None or len(assignments) != len(arrivals):
                raise ConfigError("assignments need one server per explicit arrival")
            if any(not 0 <= s < config.num_servers for s in assignments):
                raise ConfigError("assignment outside the server range")
            self._assignments = [int(s) for s in assignments]
        self._in_flight = 0
        self._arrivals_stopped = False

    # ------------------------------------------------------------------ #
    #  Arrival stream                                                      #
    # ------------------------------------------------------------------ #
    def _next_arrival(self, now):
        """Time of the next arrival, or ``None`` once injection stops."""
        index = len(self.requests)
        if self._explicit is not None:
            return self._explicit[index] if index < len(self._explicit) else None
        stop = self.config.stop
        if stop.max_requests is not None and index >= stop.max_requests:
            return None
        t = now + generate_interarrival(self.arrival_rng, self.config.arrival_rate)
        if stop.max_virtual_time is not None and t > stop.max_virtual_time:
            return None
        return t

    def _schedule_arrival(self, now):
        t = self._next_arrival(now)
        if t is None:
            self._arrivals_stopped = True
        else:
            self.queue.schedule(t, EventKind.ARRIVAL)

    def _snapshots(self):
        n = len(self.cluster)
        p = self.config.power
        return [
            ServerSnapshot(
                id=s.id, num_servers=n, queue_size=s.queue_size,
                power_state=s.power_state,
                power_on=p.p_on, power_sleep=p.p_sleep,
                power_suspend=p.p_suspend, power_wakeup=p.p_wakeup,
                time_wakeup=p.t_wakeup, time_suspend=p.t_suspend,
                timeout_time=p.timeout, design_params=self._params,
            )
            for s in self.cluster
        ]

    # ------------------------------------------------------------------ #
    #  Dispatch                                                            #
    # ------------------------------------------------------------------ #
    def _on_arrival(self, now):
        index = len(self.requests)
        if self._assignments is not None:
            target = self._assignments[index]
        else:
            try:
                target = select_server(self.config.policy, self._snapshots(),
                                       self.config.nd, self.policy_rng)
            except PolicyEvaluationError as e:
                raise SimulationError(f"request #{index} at t={now:.6f}: {e.detail}") from e
        req = Request(index, now, target)
        self.requests.append(req)
        self._in_flight += 1
        transitions = self.cluster[target].on_request_assigned(req, now)
        self._schedule_arrival(now)
        return target, transitions

    def _dispatch(self, event):
        now = event.time
        if event.kind is EventKind.ARRIVAL:
            return self._on_arrival(now)
        server = self.cluster[event.server]
        if event.kind is EventKind.SERVICE_COMPLETE:
            self._in_flight -= 1
            return event.server, server.on_service_complete(now)
        if event.kind is EventKind.TIMEOUT:
            return event.server, server.on_timeout(now)
        if event.kind is EventKind.SUSPEND_DONE:
            return event.server, server.on_suspend_done(now)
        return event.server, server.on_wakeup_done(now)

    def run(self):
        """Process events until injection has stopped and every request is done.

        Returns
        -------
        RunResult
        """
        cfg = self.config
        time_limit = cfg.stop.max_virtual_time if self._explicit is None else None
        settle_until = time_limit if time_limit is not None else -math.inf

        for tr in self.cluster.start(0.0):
            self.queue.schedule(tr.time, tr.kind, tr.server, tr.token)
        self._schedule_arrival(0.0)

        while len(self.queue):
            drained = self._arrivals_stopped and self._in_flight == 0
            if drained and self.queue.peek_time() > settle_until:
                break
            event = self.queue.pop()
            if event.kind is EventKind.TIMEOUT and not self.cluster[event.server].timeout_is_live(event.token):
                continue
            server_id, transitions = self._dispatch(event)
            for tr in transitions:
                self.queue.schedule(tr.time, tr.kind, tr.server, tr.token)
            if self.trace is not None:
                server = self.cluster[server_id]
                self.trace.record(event.time, server_id, event.kind.name,
                                  server.power_state, server.queue_size)

        for server in self.cluster:
            server.check_invariants()

        if time_limit is not None:
            self.horizon = time_limit
        else:
            completions = [r.completion for r in self.requests]
            self.horizon = max(completions) if completions else 0.0
        logger.debug("run finished: %d requests, horizon %.3f s",
                     len(self.requests), self.horizon)
        return summarize_run(self.cluster, self.requests, cfg.warmup,
                             self.horizon, cfg.num_batches, seed=cfg.rng_seed)


def run(config, trace=None):
    """Run one simulation of ``config`` and return its ``RunResult``."""
    return Simulation(config, trace=trace).run()

# endregion
