"""Deterministic discrete-event machinery for simulated agent timing.

Agent compute times are drawn from truncated normals fitted per agent class;
the event queue orders events by ``(sim_time, agent_id)`` so that a run is a
pure function of its configuration.
"""

from __future__ import annotations

import heapq
import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

# mean / std of one prox evaluation in seconds, per agent class
PROFILE_TIMES = {
    "small": (0.070, 0.010),
    "medium": (0.243, 0.005),
    "large": (0.267, 0.001),
    "battery": (0.023, 0.003),
}

COORDINATOR = -1


@dataclass(frozen=True)
class AgentProfile:
    id: int
    mean_compute_s: float
    std_compute_s: float = 0.0
    label: str = "custom"

    def __post_init__(self):
        if not self.mean_compute_s > 0:
            raise ParameterError(f"agent {self.id}: mean compute time must be positive")
        if not 0 <= self.std_compute_s < self.mean_compute_s:
            raise ParameterError(f"agent {self.id}: need 0 <= std < mean")

    @classmethod
    def of_class(cls, id: int, label: str) -> "AgentProfile":
        try:
            mean, std = PROFILE_TIMES[label]
        except KeyError:
            raise ParameterError(f"unknown agent class {label!r}") from None
        return cls(id, mean, std, label)


@dataclass(frozen=True)
class ScheduleConfig:
    """Timing model of one asynchronous run.

    ``starvation_guard`` is ``"enforce"`` (reorder / hold computes so no agent
    goes more than ``tau_epochs`` epochs between writes), ``"raise"`` (fail
    when that happens) or ``"off"`` (measure only).
    """

    profiles: tuple
    coordinator_service_s: float = 0.0
    seed: int = 0
    tau_epochs: int = 1000
    mode: str = "simulated"
    latency_s: float = 0.0
    pull_policy: str = "fifo"
    starvation_guard: str = "enforce"

    def __post_init__(self):
        object.__setattr__(self, "profiles", tuple(self.profiles))
        if not self.profiles:
            raise ParameterError("need at least one agent profile")
        if self.tau_epochs < 1:
            raise ParameterError("tau_epochs must be >= 1")
        if self.mode not in ("simulated", "round_robin_zero_latency"):
            raise ParameterError(f"unknown schedule mode {self.mode!r}")
        if self.pull_policy not in ("fifo", "priority", "random"):
            raise ParameterError(f"unknown pull policy {self.pull_policy!r}")
        if self.starvation_guard not in ("enforce", "raise", "off"):
            raise ParameterError(f"unknown starvation guard {self.starvation_guard!r}")
        if self.coordinator_service_s < 0 or self.latency_s < 0:
            raise ParameterError("service and latency times must be >= 0")
        if self.starvation_guard == "enforce" and self.tau_epochs < self.N:
            raise ParameterError("an enforced delay bound needs tau_epochs >= number of agents")

    @property
    def N(self) -> int:
        return len(self.profiles)

    @classmethod
    def round_robin(cls, n_agents: int, mean_s: float = 1.0) -> "ScheduleConfig":
        return cls(
            profiles=tuple(AgentProfile(i, mean_s) for i in range(n_agents)),
            mode="round_robin_zero_latency",
            tau_epochs=max(n_agents, 1),
            starvation_guard="off",
        )


class DurationStream:
    """Independent per-agent streams of truncated-normal compute times."""

    def __init__(self, config: ScheduleConfig):
        self.profiles = config.profiles
        seeds = np.random.SeedSequence(config.seed).spawn(len(self.profiles))
        self._rngs = [np.random.default_rng(s) for s in seeds]

    def next(self, i: int) -> float:
        p = self.profiles[i]
        if p.std_compute_s == 0:
            return p.mean_compute_s
        lo = max(p.mean_compute_s - 3 * p.std_compute_s, 0.0)
        hi = p.mean_compute_s + 3 * p.std_compute_s
        rng = self._rngs[i]
        while True:
            d = rng.normal(p.mean_compute_s, p.std_compute_s)
            if lo <= d <= hi and d > 0:
                return float(d)

    def take(self, i: int, n: int) -> np.ndarray:
        return np.array([self.next(i) for _ in range(n)])


def sample_durations(config: ScheduleConfig) -> DurationStream:
    return DurationStream(config)


class SimulationComplete(Exception):
    """Raised when the event queue runs dry."""


@dataclass(order=True)
class QueuedEvent:
    sim_time: float
    agent: int
    seq: int
    kind: str = field(compare=False)
    payload: object = field(default=None, compare=False)


class EventQueue:
    """Min-heap on ``(sim_time, agent_id)``; insertion order breaks exact ties."""

    def __init__(self):
        self._heap = []
        self._seq = itertools.count()

    def push(self, sim_time: float, agent: int, kind: str, payload=None):
        heapq.heappush(self._heap, QueuedEvent(float(sim_time), int(agent), next(self._seq), kind, payload))

    def peek_time(self) -> float:
        return self._heap[0].sim_time if self._heap else math.inf

    def __len__(self):
        return len(self._heap)


def next_event(queue: EventQueue) -> QueuedEvent:
    if not queue._heap:
        raise SimulationComplete()
    return heapq.heappop(queue._heap)


@dataclass(frozen=True)
class TauReport:
    per_agent: dict
    tau_obs: float
    counts: dict


def measure_tau(trace) -> TauReport:
    """Longest run of epochs each agent went without one of its writes being consumed.

    Every agent is treated as having written at the virtual epoch ``-1``
    (its kick-off value), so the first gap is ``k_first + 1``.  Synchronous
    steps (``agent_id = -1``) count for every agent.
    """
    N = len(trace.config["dims"])
    last = {i: -1 for i in range(N)}
    gaps = {i: 0 for i in range(N)}
    counts = {i: 0 for i in range(N)}
    for e in trace.events:
        if e.kind != "coordinator_compute":
            continue
        for i in (range(N) if e.agent == COORDINATOR else (e.agent,)):
            gaps[i] = max(gaps[i], e.k - last[i])
            last[i] = e.k
            counts[i] += 1
    for i in range(N):
        if counts[i] < 2:
            warnings.warn(f"agent {i} has {counts[i]} compute(s); its gap is unbounded", stacklevel=2)
            gaps[i] = math.inf
    return TauReport(per_agent=gaps, tau_obs=max(gaps.values()), counts=counts)
