"""Coordinator/agent state machines and the asynchronous inertial iteration.

Agents hold ``y_write``, ``y_write_prev`` and ``y_B`` and return
``z^i = T_Ai(y_B + beta (y_write - y_write_prev))``.  The coordinator runs
three activities over two FIFO buffers: *write* (receive ``z^i`` into ``W``),
*compute* (pull ``i`` from ``W``, stage ``z[i]``, form ``x_{k+1}``, push ``i``
to ``R``) and *read* (pull ``i`` from ``R``, snapshot ``x_k`` and transmit
``x_write^i[i]`` and ``(T_B x_read^i)[i]``).

Two update rules are supported.  ``aggregated`` is the relaxed full-vector
step ``x_{k+1} = (1 - eta) x_k + eta z``.  ``coordinate`` touches block ``i``
only, ``x_{k+1}[i] = x_k[i] - eta (x_read^i[i] - z^i)``.

In simulated mode one logical control flow drives every activity from the
scheduler's event queue, which makes runs bit-for-bit reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engines import History, RunResult, SyncParams, _guard
from .errors import BoundedDelayError, ContractError, ParameterError, PreconditionError, ProtocolError
from .operators import OperatorPair
from .scheduler import COORDINATOR, EventQueue, ScheduleConfig, SimulationComplete, next_event, sample_durations
from .trace import Trace, TraceEvent

UPDATES = ("aggregated", "coordinate")
STARTS = ("kickoff", "primed")


@dataclass
class AsyncParams(SyncParams):
    """:class:`SyncParams` plus the asynchronous knobs.

    ``check_every`` is the number of computes between stopping tests
    (defaults to the agent count).  ``time_budget`` stops the run at that
    simulated time.  ``start="primed"`` holds the first compute until every
    agent's kick-off value is staged in ``z``.
    """

    update: str = "aggregated"
    start: str = "kickoff"
    time_budget: float | None = None
    check_every: int | None = None
    dense: bool = False

    def __post_init__(self):
        super().__post_init__()
        if self.update not in UPDATES:
            raise ParameterError(f"update must be one of {UPDATES}")
        if self.start not in STARTS:
            raise ParameterError(f"start must be one of {STARTS}")
        if self.time_budget is not None and not self.time_budget > 0:
            raise ParameterError("time_budget must be positive")


# --------------------------------------------------------------------------
# state machines
# --------------------------------------------------------------------------


@dataclass
class AgentState:
    id: int
    dim: int
    y_write: np.ndarray | None = None
    y_write_prev: np.ndarray | None = None
    y_B: np.ndarray | None = None
    z_i: np.ndarray | None = None

    def receive(self, y_write, y_B):
        y_write = np.asarray(y_write, dtype=float)
        y_B = np.asarray(y_B, dtype=float)
        if y_write.shape != (self.dim,) or y_B.shape != (self.dim,):
            raise ContractError(f"agent {self.id} expects blocks of size {self.dim}")
        self.y_write = y_write
        self.y_B = y_B
        if self.y_write_prev is None:
            self.y_write_prev = y_write


def agent_step(agent: AgentState, T_A_i, beta: float) -> np.ndarray:
    """Local solve ``z^i = T_Ai(y_B + beta (y_write - y_write_prev))``, then ``y_write_prev <- y_write``."""
    if agent.y_write is None or agent.y_B is None:
        raise ProtocolError(f"agent {agent.id} activated before receiving data")
    if agent.y_write_prev.shape != agent.y_write.shape:
        raise ContractError("y_write_prev and y_write differ in size")
    z = np.asarray(T_A_i(agent.y_B + beta * (agent.y_write - agent.y_write_prev)), dtype=float)
    if z.shape != (agent.dim,):
        raise ContractError(f"T_A{agent.id} returned shape {z.shape}, expected ({agent.dim},)")
    agent.z_i = z
    agent.y_write_prev = agent.y_write
    return z


@dataclass
class CoordinatorState:
    x: np.ndarray
    z: np.ndarray
    slices: list
    eta: float
    update: str = "aggregated"
    x_write: list = field(default_factory=list)
    x_write_k: list = field(default_factory=list)
    x_read: list = field(default_factory=list)
    x_read_k: list = field(default_factory=list)
    W: list = field(default_factory=list)
    R: list = field(default_factory=list)
    inflight: set = field(default_factory=set)
    pending: dict = field(default_factory=dict)
    k: int = 0

    @classmethod
    def initial(cls, x0, partition, eta: float, update: str = "aggregated") -> "CoordinatorState":
        """Every agent waits in ``R``; ``z`` and all snapshots start at ``x_0``."""
        x0 = np.array(x0, dtype=float)
        N = partition.N
        return cls(
            x=x0.copy(),
            z=x0.copy(),
            slices=partition.slices,
            eta=eta,
            update=update,
            x_write=[x0 for _ in range(N)],
            x_write_k=[0] * N,
            x_read=[x0 for _ in range(N)],
            x_read_k=[0] * N,
            R=list(range(N)),
        )

    @property
    def N(self) -> int:
        return len(self.slices)

    def check_invariants(self):
        seen = list(self.W) + list(self.R) + sorted(self.inflight)
        if len(seen) != len(set(seen)):
            raise ProtocolError(f"agent appears twice across W={self.W}, R={self.R}, inflight={self.inflight}")


def coordinator_receive(state: CoordinatorState, i: int, z_i) -> CoordinatorState:
    """Write activity: hold ``z^i`` and append ``i`` to ``W``."""
    if i in state.W or i in state.R or i not in state.inflight:
        raise ProtocolError(f"unexpected write from agent {i}")
    z_i = np.asarray(z_i, dtype=float)
    if z_i.shape != (state.slices[i].stop - state.slices[i].start,):
        raise ContractError(f"write from agent {i} has shape {z_i.shape}")
    state.inflight.discard(i)
    state.pending[i] = z_i
    state.W.append(i)
    return state


def coordinator_stage(state: CoordinatorState, i: int) -> CoordinatorState:
    """Pull ``i`` from ``W`` into ``z[i]`` without advancing the clock (primed start)."""
    if i not in state.W:
        raise ProtocolError(f"agent {i} not in write buffer")
    state.W.remove(i)
    state.z[state.slices[i]] = state.pending.pop(i)
    state.R.append(i)
    return state


def coordinator_compute(state: CoordinatorState, i: int) -> CoordinatorState:
    """Compute activity: consume agent ``i``'s value and advance ``k``."""
    if i not in state.W:
        raise ProtocolError(f"agent {i} not in write buffer")
    state.W.remove(i)
    sl = state.slices[i]
    z_i = state.pending.pop(i)
    state.z[sl] = z_i
    eta = state.eta
    if state.update == "aggregated":
        x_next = (1.0 - eta) * state.x + eta * state.z
    else:
        x_next = state.x.copy()
        x_next[sl] = state.x[sl] - eta * (state.x_read[i][sl] - z_i)
    state.x = x_next
    # snapshot after the update: x_write^i[i] is x[i] once z^i is in
    state.x_write[i] = x_next
    state.x_write_k[i] = state.k + 1
    state.R.append(i)
    state.k += 1
    return state


def coordinator_read(state: CoordinatorState, i: int, pair: OperatorPair):
    """Read activity: snapshot ``x_k`` for agent ``i``; returns ``(y_write, y_B, state)``."""
    if i not in state.R:
        raise ProtocolError(f"agent {i} not in read buffer")
    state.R.remove(i)
    sl = state.slices[i]
    state.x_read[i] = state.x
    state.x_read_k[i] = state.k
    y_write = state.x_write[i][sl].copy()
    y_B = pair.forward_step(state.x)[sl]
    state.inflight.add(i)
    return y_write, y_B, state


# --------------------------------------------------------------------------
# simulation driver
# --------------------------------------------------------------------------


class _Run:
    """One asynchronous run; owns the coordinator, the agents and the event queue."""

    def __init__(self, pair, params, schedule, reference):
        if schedule.N != pair.N:
            raise ContractError(f"schedule has {schedule.N} agents, problem has {pair.N} blocks")
        self.pair, self.p, self.sched = pair, params, schedule
        self.N = pair.N
        x0 = params.initial_point(pair.partition.total)
        self.state = CoordinatorState.initial(x0, pair.partition, params.eta, params.update)
        self.agents = [AgentState(i, d) for i, d in enumerate(pair.partition.dims)]
        self.durations = sample_durations(schedule)
        self.queue = EventQueue()
        self.events: list[TraceEvent] = []
        self.hist = History(reference, dense=params.dense)
        self.last_compute = [-1] * self.N
        self.check_every = params.check_every or self.N
        self.rng = np.random.default_rng(schedule.seed + 7919)
        self.rr = schedule.mode == "round_robin_zero_latency"
        self.ready = params.start == "kickoff" or self.rr
        self.busy = False
        self.holding = None
        self.done = None
        self.t = 0.0
        self.updates = [0] * self.N

    # -- logging ---------------------------------------------------------
    def log(self, kind, agent, checksum=0.0):
        self.events.append(TraceEvent(kind, self.t, agent, self.state.k, float(checksum)))

    # -- agent side ------------------------------------------------------
    def dispatch_read(self, i):
        y_write, y_B, _ = coordinator_read(self.state, i, self.pair)
        self.log("read", i, self.state.x[self.state.slices[i]].sum())
        self.agents[i].receive(y_write, y_B)
        dur = self.sched.profiles[i].mean_compute_s if self.rr else self.durations.next(i)
        self.queue.push(self.t + self.sched.latency_s + dur, i, "agent_done")

    def agent_done(self, i):
        z = agent_step(self.agents[i], self.pair.backward.blocks[i], self.p.beta)
        self.log("agent_compute", i, z.sum())
        if self.sched.latency_s > 0:
            self.queue.push(self.t + self.sched.latency_s, i, "write_arrive", z)
        else:
            self.write_arrive(i, z)

    def write_arrive(self, i, z):
        coordinator_receive(self.state, i, z)
        self.log("write_receive", i, z.sum())

    # -- coordinator side ------------------------------------------------
    def pick_compute(self):
        st = self.state
        if not st.W:
            return None
        if self.sched.starvation_guard == "enforce":
            tau = self.sched.tau_epochs
            order = sorted(range(self.N), key=lambda j: (self.last_compute[j] + tau, j))
            first_deadline = self.last_compute[order[0]] + tau
            if first_deadline < st.k:
                raise BoundedDelayError(f"agent {order[0]} missed its deadline at k={st.k}")
            urgent = any(self.last_compute[j] + tau - st.k <= r for r, j in enumerate(order))
            if urgent:
                j = order[0]
                if j in st.W:
                    if j != self.policy_choice():
                        self.log("guard", j)
                    self.holding = None
                    return j
                if self.holding != j:
                    self.log("guard", j)
                    self.holding = j
                return None
        return self.policy_choice()

    def policy_choice(self):
        W = self.state.W
        if self.sched.pull_policy == "fifo":
            return W[0]
        if self.sched.pull_policy == "priority":
            return min(W)
        return W[int(self.rng.integers(len(W)))]

    def do_compute(self, i):
        st = self.state
        coordinator_compute(st, i)
        k = st.k
        gap = k - 1 - self.last_compute[i]
        self.last_compute[i] = k - 1
        self.updates[i] += 1
        _guard(st.x, k)
        self.log_compute(i)
        if self.sched.starvation_guard == "raise":
            tau = self.sched.tau_epochs
            late = [j for j in range(self.N) if k - self.last_compute[j] > tau]
            if gap > tau or late:
                who = i if gap > tau else late[0]
                raise BoundedDelayError(f"agent {who} went more than tau={tau} epochs without a write (k={k})")
        res = math.nan
        stop = False
        if k % self.check_every == 0 or k >= self.p.max_iters:
            res = self.pair.residual(st.x)
            stop = res <= self.p.stop_tol
        self.hist.record(k, st.x, res, self.t)
        if stop:
            self.done = "tol"
        elif k >= self.p.max_iters:
            self.done = "max_iters"

    def log_compute(self, i):
        st = self.state
        self.events.append(TraceEvent("coordinator_compute", self.t, i, st.k - 1, float(st.x[st.slices[i]].sum())))

    def next_read(self):
        R = self.state.R
        if not R:
            return None
        if self.rr:
            if self.state.inflight or self.state.W:
                return None
            want = self.state.k % self.N
            return want if want in R else None
        return R[0]

    def coordinator_step(self) -> bool:
        """Perform one coordinator transition if any is enabled."""
        st = self.state
        if not self.ready:
            if len(st.W) == self.N:
                for i in list(st.W):
                    coordinator_stage(st, i)
                    self.log("prime", i, st.z[st.slices[i]].sum())
                self.ready = True
                return True
        else:
            i = self.pick_compute()
            if i is not None:
                self.do_compute(i)
                return True
        j = self.next_read()
        if j is not None:
            self.dispatch_read(j)
            return True
        return False

    def coordinator_wake(self):
        while not self.busy and self.done is None:
            if not self.coordinator_step():
                return
            if self.sched.coordinator_service_s > 0:
                self.busy = True
                self.queue.push(self.t + self.sched.coordinator_service_s, COORDINATOR, "coordinator_free")

    # -- main loop -------------------------------------------------------
    def run(self):
        st = self.state
        res0 = self.pair.residual(st.x)
        self.hist.record(0, st.x, res0, 0.0)
        if res0 <= self.p.stop_tol:
            self.done = "tol"
        elif self.p.max_iters == 0:
            self.done = "max_iters"
        self.coordinator_wake()
        budget = self.p.time_budget
        while self.done is None:
            if budget is not None and self.queue.peek_time() > budget:
                self.done = "time_budget"
                break
            try:
                ev = next_event(self.queue)
            except SimulationComplete:
                raise ProtocolError("event queue ran dry before the run finished") from None
            self.t = ev.sim_time
            if ev.kind == "agent_done":
                self.agent_done(ev.agent)
            elif ev.kind == "write_arrive":
                self.write_arrive(ev.agent, ev.payload)
            elif ev.kind == "coordinator_free":
                self.busy = False
            self.coordinator_wake()
        k = st.k
        if not self.hist.ks or self.hist.ks[-1] != k or math.isnan(self.hist.res[-1]):
            res = self.pair.residual(st.x)
            if self.hist.ks and self.hist.ks[-1] == k:
                self.hist.res[-1] = res
            else:
                self.hist.xs.append(st.x.copy())
                self.hist.ks.append(k)
                self.hist.res.append(res)
                self.hist.ts.append(self.t)
            if self.done != "tol" and res <= self.p.stop_tol:
                self.done = "tol"
        result = self.hist.result(k, self.done, with_times=True)
        trace = Trace(events=self.events, iterates=result.iterates, config=self.trace_config(result))
        return result, trace

    def trace_config(self, result):
        p = self.p
        return {
            "algorithm": "async",
            "dims": list(self.pair.partition.dims),
            "eta": p.eta,
            "beta": p.beta,
            "gamma": self.pair.gamma,
            "update": p.update,
            "start": "kickoff" if self.rr else p.start,
            "mode": self.sched.mode,
            "tau_epochs": self.sched.tau_epochs,
            "stride": result.stride,
        }


def run_async(pair: OperatorPair, params: AsyncParams, schedule: ScheduleConfig, reference=None):
    """Run the asynchronous (inertial) forward-backward iteration to completion.

    Returns ``(RunResult, Trace)``.  The run stops on ``||S x_k|| <= stop_tol``
    (tested every ``check_every`` computes), after ``max_iters`` computes, or
    when the next event would fall past ``time_budget``.
    """
    if not isinstance(params, AsyncParams):
        params = AsyncParams(**{f: getattr(params, f) for f in SyncParams.__dataclass_fields__})
    return _Run(pair, params, schedule, reference).run()


def run_sync_timed(pair: OperatorPair, params: SyncParams, schedule: ScheduleConfig, reference=None,
                   time_budget: float | None = None, dense: bool = False):
    """Synchronous forward-backward with simulated time.

    Every epoch all agents read ``x_k``, compute in parallel and the
    coordinator waits for the slowest one, so one epoch costs the maximum
    sampled duration.  The arithmetic is that of :func:`run_sync_fbs`.
    """
    if schedule.N != pair.N:
        raise ContractError(f"schedule has {schedule.N} agents, problem has {pair.N} blocks")
    durations = sample_durations(schedule)
    N = pair.N
    slices = pair.partition.slices
    x = params.initial_point(pair.partition.total)
    x_prev = x.copy()
    hist = History(reference, dense=dense)
    events = []
    t = 0.0
    res = pair.residual(x)
    hist.record(0, x, res, t)
    k = 0
    done = "tol" if res <= params.stop_tol else None
    while done is None:
        if k >= params.max_iters:
            done = "max_iters"
            break
        span = max(durations.next(i) + 2 * schedule.latency_s for i in range(N))
        if time_budget is not None and t + span > time_budget:
            done = "time_budget"
            break
        for i in range(N):
            events.append(TraceEvent("read", t, i, k, float(x[slices[i]].sum())))
        v = pair.forward_step(x) + params.beta * (x - x_prev)
        z = np.empty_like(x)
        t_end = t + span
        for i in range(N):
            z[slices[i]] = pair.backward_block(i, v[slices[i]])
        for i in range(N):
            events.append(TraceEvent("agent_compute", t_end, i, k, float(z[slices[i]].sum())))
            events.append(TraceEvent("write_receive", t_end, i, k, float(z[slices[i]].sum())))
        x, x_prev = (1.0 - params.eta) * x + params.eta * z, x
        events.append(TraceEvent("coordinator_compute", t_end, COORDINATOR, k, float(x.sum())))
        k += 1
        t = t_end
        _guard(x, k)
        res = pair.residual(x)
        hist.record(k, x, res, t)
        if res <= params.stop_tol:
            done = "tol"
    result = hist.result(k, done, with_times=True)
    config = {
        "algorithm": "sync",
        "dims": list(pair.partition.dims),
        "eta": params.eta,
        "beta": params.beta,
        "gamma": pair.gamma,
        "update": "synchronous",
        "start": "kickoff",
        "mode": schedule.mode,
        "tau_epochs": schedule.tau_epochs,
        "stride": result.stride,
    }
    return result, Trace(events=events, iterates=result.iterates, config=config)


# --------------------------------------------------------------------------
# error reconstruction and delay bookkeeping
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ErrorTerms:
    """Additive-error view of one compute step.

    ``x_{k+1} = x_k - eta (S x_k - e)`` for aggregated traces.  ``delays`` maps
    each agent to the staleness ``(read, write, previous write)`` of the value
    it currently has in ``z``, measured as ``k + 1 - snapshot index``;
    ``None`` marks an agent whose slot in ``z`` still holds ``x_0``, whose
    block of ``e`` is then ``x_0[j] - (T x_k)[j]``.
    """

    k: int
    agent: int
    e: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    delays: dict
    predicted: np.ndarray
    bootstrap: tuple = ()


def _replay_snapshots(trace: Trace):
    """Walk the event log and yield, per compute, which snapshots each agent's value used.

    Yields ``(event, triples)`` where ``triples[j] = (k_read, k_write, k_prev)``
    for the value agent ``j`` currently has staged (``None`` if none yet).
    """
    N = len(trace.dims)
    xw = [0] * N
    prev_kw = [None] * N
    pending = [None] * N
    staged = [None] * N
    for e in trace.events:
        if e.kind == "read":
            j = e.agent
            kw = xw[j]
            kp = kw if prev_kw[j] is None else prev_kw[j]
            prev_kw[j] = kw
            pending[j] = (e.k, kw, kp)
        elif e.kind == "prime":
            staged[e.agent] = pending[e.agent]
        elif e.kind == "coordinator_compute":
            if e.agent == COORDINATOR:
                k = e.k
                staged = [(k, k, max(k - 1, 0))] * N
                yield e, list(staged)
                xw = [k + 1] * N
                prev_kw = [k] * N
                continue
            j = e.agent
            staged[j] = pending[j]
            yield e, list(staged)
            xw[j] = e.k + 1


def _terms(trace, pair, beta, eta, e, staged) -> ErrorTerms:
    H = trace.iterates
    k = e.k
    xk = H[k]
    slices = pair.partition.slices
    Bxk = pair.forward(xk)
    TBxk = xk - pair.gamma * Bxk
    n = xk.size
    a, b, c, d, err = (np.zeros(n) for _ in range(5))
    delays, boot = {}, []
    Txk = np.empty(n)
    for j, sl in enumerate(slices):
        Txk[sl] = pair.backward_block(j, TBxk[sl])
    for j, sl in enumerate(slices):
        trip = staged[j]
        if trip is None:
            err[sl] = H[0][sl] - Txk[sl]
            delays[j] = None
            boot.append(j)
            continue
        kr, kw, kp = trip
        a_j = xk - H[kr]
        a[sl] = a_j[sl]
        b[sl] = xk[sl] - H[kw][sl]
        c[sl] = xk[sl] - H[kp][sl]
        d[sl] = pair.gamma * Bxk[sl] - pair.gamma * pair.forward(xk - a_j)[sl] - a_j[sl]
        err[sl] = pair.backward_block(j, TBxk[sl] + d[sl] + beta * (c[sl] - b[sl])) - Txk[sl]
        delays[j] = (k + 1 - kr, k + 1 - kw, k + 1 - kp)
    Sxk = xk - Txk
    update = trace.config.get("update", "aggregated")
    if update == "coordinate":
        i = e.agent
        sl = slices[i]
        pred = xk.copy()
        pred[sl] = xk[sl] - eta * (Sxk[sl] - a[sl] - err[sl])
    else:
        pred = xk - eta * (Sxk - err)
    return ErrorTerms(k, e.agent, err, a, b, c, d, delays, pred, tuple(boot))


def iter_error_terms(trace: Trace, pair: OperatorPair, beta: float | None = None):
    """Error terms for every compute step of a dense trace, in order."""
    trace.require_dense()
    if tuple(pair.partition.dims) != trace.dims:
        raise ContractError("trace and operator pair disagree on block sizes")
    beta = trace.config["beta"] if beta is None else beta
    eta = trace.config["eta"]
    for e, staged in _replay_snapshots(trace):
        yield _terms(trace, pair, beta, eta, e, staged)


def reconstruct_error(trace: Trace, pair: OperatorPair, beta: float, k: int) -> ErrorTerms:
    """Rebuild ``e_k`` and its ingredients for the step producing ``x_{k+1}`` from the event log alone."""
    trace.require_dense()
    if k < 0 or k >= trace.n_computes:
        raise PreconditionError(f"k={k} outside the trace (0..{trace.n_computes - 1})")
    for terms in iter_error_terms(trace, pair, beta):
        if terms.k == k:
            return terms
    raise PreconditionError(f"no compute event for k={k}")


@dataclass(frozen=True)
class DecompositionReport:
    max_violation: float
    worst_k: int
    first_failure: int | None
    n_checked: int
    passed: bool
    bound_violations: int
    bound_checked: int


def check_decomposition(trace: Trace, pair: OperatorPair, tol: float = 1e-10) -> DecompositionReport:
    """Check ``x_{k+1} = x_k - eta (S x_k - e_k)`` at every step, plus ``||e_k|| <= ||d_k|| + beta ||c_k - b_k||``.

    The identity holds within ``tol * (1 + ||x_k||)``.  The norm bound is
    only tested on steps where no agent is still on its ``x_0`` slot.
    """
    H = trace.iterates
    beta = trace.config["beta"]
    worst, worst_k, first = 0.0, -1, None
    n = bviol = bchk = 0
    for t in iter_error_terms(trace, pair):
        k = t.k
        scale = 1.0 + np.linalg.norm(H[k])
        viol = float(np.linalg.norm(H[k + 1] - t.predicted)) / scale
        if viol > worst:
            worst, worst_k = viol, k
        if viol > tol and first is None:
            first = k
        n += 1
        if not t.bootstrap:
            bchk += 1
            lhs = np.linalg.norm(t.e)
            rhs = np.linalg.norm(t.d) + beta * np.linalg.norm(t.c - t.b)
            if lhs > rhs * (1 + 1e-9) + 1e-12 * scale:
                bviol += 1
    return DecompositionReport(worst, worst_k, first, n, first is None and bviol == 0, bviol, bchk)


@dataclass(frozen=True)
class DelayReport:
    tau: float
    max_read: int
    max_write: int
    max_prev: int
    violations: list
    passed: bool


def verify_delay_bounds(trace: Trace, tau: float) -> DelayReport:
    """Staleness of every consumed value against ``2 tau`` (read, write) and ``3 tau`` (previous write)."""
    trace.require_dense()
    mr = mw = mp = 0
    bad = []
    for e, staged in _replay_snapshots(trace):
        agents = range(len(staged)) if e.agent == COORDINATOR else (e.agent,)
        for j in agents:
            kr, kw, kp = staged[j]
            lr, lw, lp = e.k + 1 - kr, e.k + 1 - kw, e.k + 1 - kp
            mr, mw, mp = max(mr, lr), max(mw, lw), max(mp, lp)
            for name, val, bound in (("read", lr, 2 * tau), ("write", lw, 2 * tau), ("prev_write", lp, 3 * tau)):
                if val > bound:
                    bad.append({"agent": j, "k": e.k, "sim_time": e.sim_time, "which": name, "staleness": val,
                                "bound": bound})
    return DelayReport(tau, mr, mw, mp, bad, not bad)


def replay(trace: Trace, pair: OperatorPair) -> np.ndarray:
    """Re-run the coordinator and agents along the logged event order; returns the iterates."""
    cfg = trace.config
    x0 = trace.iterates[0]
    if cfg.get("algorithm") == "sync":
        params = SyncParams(gamma=pair.gamma, eta=cfg["eta"], beta=cfg["beta"])
        x, x_prev = x0.copy(), x0.copy()
        out = [x.copy()]
        for e in trace.events:
            if e.kind == "coordinator_compute":
                z = pair.backward_full(pair.forward_step(x) + params.beta * (x - x_prev))
                x, x_prev = (1.0 - params.eta) * x + params.eta * z, x
                out.append(x.copy())
        return np.array(out)
    st = CoordinatorState.initial(x0, pair.partition, cfg["eta"], cfg["update"])
    agents = [AgentState(i, d) for i, d in enumerate(pair.partition.dims)]
    out = [st.x.copy()]
    for e in trace.events:
        i = e.agent
        if e.kind == "read":
            y_w, y_B, _ = coordinator_read(st, i, pair)
            agents[i].receive(y_w, y_B)
        elif e.kind == "agent_compute":
            agent_step(agents[i], pair.backward.blocks[i], cfg["beta"])
        elif e.kind == "write_receive":
            coordinator_receive(st, i, agents[i].z_i)
        elif e.kind == "prime":
            coordinator_stage(st, i)
        elif e.kind == "coordinator_compute":
            coordinator_compute(st, i)
            out.append(st.x.copy())
    return np.array(out)
