"""
GreenLB - Cluster Model

Per-server dynamic state (FIFO queue, power state, pending timers) and the
power-state transition rules. Every handler returns the transitions the
caller must schedule; nothing here knows about the event queue.

    On --(idle for TO)--> Suspend --(t_suspend)--> Sleep
    Sleep --(arrival)--> Wakeup --(t_wakeup)--> On
    Suspend --(arrival)--> finish suspending, then Wakeup
"""

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum, IntEnum

import constants
from errors import ConfigError, ModelLogicError


# ====================================================================== #
# region           STATES & EVENTS                                        #
# ====================================================================== #

class PowerState(Enum):
    ON = "On"
    SUSPEND = "Suspend"
    SLEEP = "Sleep"
    WAKEUP = "Wakeup"

    @classmethod
    def parse(cls, text):
        """Case-insensitive lookup by name (``"sleep"``, ``"On"``...)."""
        for state in cls:
            if state.value.lower() == str(text).strip().lower():
                return state
        names = ", ".join(s.value for s in cls)
        raise ConfigError(f"power state must be one of {names}, got {text!r}")


class EventKind(IntEnum):
    """Event kinds; the integer value orders events that share a timestamp."""
    SERVICE_COMPLETE = 0
    SUSPEND_DONE = 1
    WAKEUP_DONE = 2
    TIMEOUT = 3
    ARRIVAL = 4


@dataclass(frozen=True, slots=True)
class Transition:
    """A timer a handler asks the engine to schedule."""
    time: float
    kind: EventKind
    server: int
    token: int = 0

# endregion


# ====================================================================== #
# region           REQUESTS & POWER                                       #
# ====================================================================== #

@dataclass(slots=True)
class Request:
    """One incoming request and its lifecycle timestamps."""
    index: int
    arrival_time: float
    assigned_server: int = -1
    service_start: float | None = None
    completion: float | None = None

    @property
    def latency(self):
        """float | None: ``completion - arrival_time`` once completed."""
        if self.completion is None:
            return None
        return self.completion - self.arrival_time


@dataclass(frozen=True)
class PowerModel:
    """Per-state power draw (W), transition durations (s) and idle timeout (s)."""
    p_on: float = constants.POWER_ON
    p_sleep: float = constants.POWER_SLEEP
    p_suspend: float = constants.POWER_SUSPEND
    p_wakeup: float = constants.POWER_WAKEUP
    t_suspend: float = constants.TIME_SUSPEND
    t_wakeup: float = constants.TIME_WAKEUP
    timeout: float = constants.TIMEOUT

    def validate(self):
        for name in ("p_on", "p_sleep", "p_suspend", "p_wakeup",
                     "t_suspend", "t_wakeup", "timeout"):
            value = getattr(self, name)
            if math.isnan(value) or value < 0:
                raise ConfigError(f"power.{name} must be non-negative, got {value}")
        if math.isinf(self.t_suspend) or math.isinf(self.t_wakeup):
            raise ConfigError("transition times must be finite")
        return self

    def power_of_state(self, state):
        """Watts drawn in ``state``."""
        if state is PowerState.ON:
            return self.p_on
        if state is PowerState.SLEEP:
            return self.p_sleep
        if state is PowerState.SUSPEND:
            return self.p_suspend
        return self.p_wakeup

    @property
    def max_power(self):
        return max(self.p_on, self.p_suspend, self.p_wakeup, self.p_sleep)

# endregion


# ====================================================================== #
# region           SERVER                                                 #
# ====================================================================== #

class Server:
    """One power-managed server with an unbounded FIFO queue.

    Responsibilities
    ----------------
    * Hold the queue, the request in service and the power state.
    * Enact the transition rules and return the timers they start.
    * Record the state timeline and completed requests for the metrics.

    Parameters
    ----------
    server_id : int
        0-based index.
    power : PowerModel
    service_time : float
        Deterministic service duration in seconds.
    initial_state : PowerState
        ``SLEEP`` (default) or ``ON``.
    """

    def __init__(self, server_id, power, service_time,
                 initial_state=PowerState.SLEEP, start_time=0.0):
        if initial_state not in (PowerState.SLEEP, PowerState.ON):
            raise ConfigError(f"servers may start in Sleep or On, not {initial_state.value}")
        self.id = server_id
        self.power = power
        self.service_time = service_time
        self.power_state = initial_state
        self.state_entered_at = start_time
        self.queue = deque()
        self.in_service = None
        self.pending_arrival_during_suspend = False
        self.idle_since = None
        self.timeout_token = 0
        self.assigned_count = 0
        self.completed = []
        self.timeline = [(start_time, initial_state)]

    def __repr__(self):
        return (f"Server(id={self.id}, state={self.power_state.value}, "
                f"queue_size={self.queue_size})")

    @property
    def queue_size(self):
        """int: Waiting requests plus the one in service."""
        return len(self.queue) + (self.in_service is not None)

    def power_of(self):
        """Watts drawn in the current state."""
        return self.power.power_of_state(self.power_state)

    # ------------------------------------------------------------------ #
    #  Internal helpers                                                    #
    # ------------------------------------------------------------------ #
    def _enter(self, state, now):
        self.power_state = state
        self.state_entered_at = now
        # zero-length states leave no segment behind
        if self.timeline[-1][0] == now:
            self.timeline.pop()
        if not self.timeline or self.timeline[-1][1] is not state:
            self.timeline.append((now, state))

    def _start_service(self, now):
        req = self.queue.popleft()
        req.service_start = now
        self.in_service = req
        self.idle_since = None
        return [Transition(now + self.service_time, EventKind.SERVICE_COMPLETE, self.id)]

    def _go_idle(self, now):
        self.idle_since = now
        if math.isinf(self.power.timeout):
            return []
        self.timeout_token += 1
        return [Transition(now + self.power.timeout, EventKind.TIMEOUT, self.id, self.timeout_token)]

    def _require(self, state, event):
        if self.power_state is not state:
            raise ModelLogicError(
                f"server {self.id}: {event} while {self.power_state.value}, expected {state.value}")

    # ------------------------------------------------------------------ #
    #  Transition handlers                                                 #
    # ------------------------------------------------------------------ #
    def start(self, now):
        """Start timers for the initial state (an idle On server counts down)."""
        if self.power_state is PowerState.ON and self.in_service is None and not self.queue:
            return self._go_idle(now)
        return []

    def timeout_is_live(self, token):
        """True when a timeout carrying ``token`` has not been cancelled since."""
        return token == self.timeout_token and self.idle_since is not None

    def on_request_assigned(self, req, now):
        """Accept ``req``; wake or start serving as the current state dictates."""
        if req.assigned_server != self.id:
            raise ModelLogicError(
                f"request #{req.index} assigned to {req.assigned_server} handed to server {self.id}")
        self.queue.append(req)
        self.assigned_count += 1

        if self.power_state is PowerState.ON:
            if self.in_service is not None:
                return []
            self.timeout_token += 1          # cancels the pending timeout
            return self._start_service(now)
        if self.power_state is PowerState.SLEEP:
            self._enter(PowerState.WAKEUP, now)
            return [Transition(now + self.power.t_wakeup, EventKind.WAKEUP_DONE, self.id)]
        if self.power_state is PowerState.SUSPEND:
            self.pending_arrival_during_suspend = True
        return []

    def on_service_complete(self, now):
        """Finish the request in service and pick the next one, or go idle."""
        if self.in_service is None:
            raise ModelLogicError(f"server {self.id}: service completion while idle")
        req = self.in_service
        req.completion = now
        self.completed.append(req)
        self.in_service = None
        if self.queue:
            return self._start_service(now)
        return self._go_idle(now)

    def on_timeout(self, now):
        """Idle timeout expired: start suspending."""
        self._require(PowerState.ON, "timeout")
        if self.in_service is not None or self.queue:
            raise ModelLogicError(f"server {self.id}: timeout fired while busy")
        self.idle_since = None
        self._enter(PowerState.SUSPEND, now)
        return [Transition(now + self.power.t_suspend, EventKind.SUSPEND_DONE, self.id)]

    def on_suspend_done(self, now):
        """Suspend finished: sleep, or wake straight away if work arrived meanwhile."""
        self._require(PowerState.SUSPEND, "suspend-done")
        if self.pending_arrival_during_suspend:
            self.pending_arrival_during_suspend = False
            self._enter(PowerState.WAKEUP, now)
            return [Transition(now + self.power.t_wakeup, EventKind.WAKEUP_DONE, self.id)]
        self._enter(PowerState.SLEEP, now)
        return []

    def on_wakeup_done(self, now):
        """Wakeup finished: serve the queue head or count down from idle."""
        self._require(PowerState.WAKEUP, "wakeup-done")
        self._enter(PowerState.ON, now)
        if self.queue:
            return self._start_service(now)
        return self._go_idle(now)

    # ------------------------------------------------------------------ #
    #  Invariants                                                          #
    # ------------------------------------------------------------------ #
    def check_invariants(self):
        """Raise ``ModelLogicError`` if the server state is inconsistent."""
        if self.in_service is not None and self.power_state is not PowerState.ON:
            raise ModelLogicError(f"server {self.id}: serving while {self.power_state.value}")
        if self.pending_arrival_during_suspend and self.power_state is not PowerState.SUSPEND:
            raise ModelLogicError(f"server {self.id}: pending-arrival flag outside Suspend")
        held = len(self.completed) + len(self.queue) + (self.in_service is not None)
        if held != self.assigned_count:
            raise ModelLogicError(
                f"server {self.id}: {self.assigned_count} assigned but {held} accounted for")

# endregion


# ====================================================================== #
# region           CLUSTER                                                #
# ====================================================================== #

class Cluster:
    """The servers behind one load balancer, owned by a single run."""

    def __init__(self, num_servers, power, service_time,
                 initial_state=PowerState.SLEEP):
        self.power = power
        self.servers = [Server(i, power, service_time, initial_state)
                        for i in range(num_servers)]

    def __len__(self):
        return len(self.servers)

    def __iter__(self):
        return iter(self.servers)

    def __getitem__(self, server_id):
        return self.servers[server_id]

    def start(self, now=0.0):
        transitions = []
        for server in self.servers:
            transitions.extend(server.start(now))
        return transitions

    def timelines(self):
        """list[list[tuple[float, PowerState]]]: State change points per server."""
        return [server.timeline for server in self.servers]

# endregion
