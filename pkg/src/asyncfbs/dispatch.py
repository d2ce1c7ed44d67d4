"""Desk-scale micro-grid load sharing.

A battery and ``N`` controllable buildings jointly track a power signal
``r``.  The decision vector is ``(p_bess, p_1, ..., p_N)``, one block of
length ``T_h`` per agent.  The smooth coupling

    f(p) = alpha2/2 sum_t (p_bess(t) + sum_i (p_i(t) - phat_i(t)) - r(t))^2
           + alpha1/2 (||p_bess||^2 + sum_i ||p_i - phat_i||^2)

is the forward operator; each agent's private QP (zone temperature or SOC
tracking under dynamics and an input box) is its backward block.

Temperatures are in degC relative to the nominal set point, powers in kW,
SOC as a fraction of capacity.  Buildings map thermal inputs to electrical
power through a constant COP.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields

import numpy as np

from .engines import SyncParams, run_sync_fbs
from .errors import ContractError, ConvergenceError, ParameterError
from .operators import (
    BackwardBlocks,
    BlockPartition,
    BoxQP,
    ForwardOperator,
    OperatorPair,
    power_iteration,
    smallest_eigenvalue,
)

# (states, inputs) per class at desk scale
CLASS_SIZES = {"small": (3, 1), "medium": (5, 2), "large": (6, 2)}
# fleet mixes (small, medium, large) for the four reference fleet sizes
FLEETS = {5: (3, 2, 0), 10: (6, 4, 0), 20: (14, 5, 1), 50: (32, 16, 2)}
# one-step degC per kW thermal, per class; bigger buildings are more sluggish
CLASS_GAIN = {"small": 0.30, "medium": 0.12, "large": 0.08}
CLASS_UMAX = {"small": 6.0, "medium": 15.0, "large": 25.0}

SOFT_WEIGHT = 1e3


def _arr(x):
    return np.array(x, dtype=float)


@dataclass(frozen=True)
class BuildingAgent:
    """Linear thermal model of one building over a ``T_h``-step horizon.

    ``x(t+1) = A x(t) + B_u u(t) + B_w w(t)``, ``y(t) = C x(t)``; the agent
    cares about ``y(1..T_h)``.  ``u`` is thermal power per zone, the
    building's electrical draw is ``sum_j u_j(t) / cop``.
    """

    A: np.ndarray
    B_u: np.ndarray
    B_w: np.ndarray
    C: np.ndarray
    x_init: np.ndarray
    T_h: int
    u_min: np.ndarray
    u_max: np.ndarray
    y_ref: np.ndarray
    w_hat: np.ndarray
    p_hat: np.ndarray
    temp_penalty: float = SOFT_WEIGHT
    cop: float = 3.0
    label: str = "custom"

    def __post_init__(self):
        for f in ("A", "B_u", "B_w", "C", "x_init", "u_min", "u_max", "y_ref", "w_hat", "p_hat"):
            object.__setattr__(self, f, _arr(getattr(self, f)))
        n, m = self.B_u.shape
        if self.A.shape != (n, n) or self.C.shape[1] != n or self.B_w.shape[0] != n:
            raise ContractError("inconsistent building matrices")
        if self.x_init.shape != (n,):
            raise ContractError("x_init has the wrong size")
        if self.u_min.shape != (m,) or self.u_max.shape != (m,) or np.any(self.u_min > self.u_max):
            raise ParameterError("need u_min <= u_max, one bound per input")
        if self.y_ref.shape != (self.T_h, self.C.shape[0]):
            raise ContractError("y_ref must be T_h x outputs")
        if self.w_hat.shape != (self.T_h, self.B_w.shape[1]):
            raise ContractError("w_hat must be T_h x disturbances")
        if self.p_hat.shape != (self.T_h,):
            raise ContractError("p_hat must have length T_h")
        if not max(abs(np.linalg.eigvals(self.A))) < 1:
            raise ParameterError("A must be Schur stable")
        if self.temp_penalty < 0 or not self.cop > 0:
            raise ParameterError("temp_penalty >= 0 and cop > 0 required")

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B_u.shape[1]

    def simulate(self, u) -> np.ndarray:
        """Outputs ``y(1..T_h)`` (``T_h x outputs``) for inputs ``u`` (``T_h x inputs``)."""
        u = _arr(u).reshape(self.T_h, self.n_inputs)
        x = self.x_init.copy()
        ys = []
        for t in range(self.T_h):
            x = self.A @ x + self.B_u @ u[t] + self.B_w @ self.w_hat[t]
            ys.append(self.C @ x)
        return np.array(ys)

    def condensed(self):
        """``(G, y_free)`` with ``vec(y) = G vec(u) + y_free`` (time-major)."""
        T, m, l = self.T_h, self.n_inputs, self.C.shape[0]
        G = np.zeros((T * l, T * m))
        powers = [np.eye(self.n_states)]
        for _ in range(T):
            powers.append(self.A @ powers[-1])
        for t in range(T):
            for s in range(t + 1):
                G[t * l:(t + 1) * l, s * m:(s + 1) * m] = self.C @ powers[t - s] @ self.B_u
        zero = self.simulate(np.zeros((T, m)))
        return G, zero.reshape(-1)

    def power_map(self) -> np.ndarray:
        """``M`` with ``p = M vec(u)``."""
        return np.kron(np.eye(self.T_h), np.ones((1, self.n_inputs))) / self.cop

    def power_range(self) -> tuple[float, float]:
        return float(self.u_min.sum() / self.cop), float(self.u_max.sum() / self.cop)


@dataclass(frozen=True)
class BatteryAgent:
    """``SOC(t+1) = a SOC(t) + b p(t)``; positive ``p`` charges."""

    a: float
    b: float
    soc_init: float
    soc_min: float
    soc_max: float
    p_min: float
    p_max: float
    soc_ref: float
    T_h: int
    soc_penalty: float = SOFT_WEIGHT

    def __post_init__(self):
        if not self.soc_min < self.soc_max:
            raise ParameterError("need soc_min < soc_max")
        if not self.p_min < self.p_max:
            raise ParameterError("need p_min < p_max")
        if not 0 < self.a <= 1:
            raise ParameterError("need 0 < a <= 1")
        if self.soc_penalty < 0:
            raise ParameterError("soc_penalty must be >= 0")

    def soc(self, p) -> np.ndarray:
        p = _arr(p)
        s, out = self.soc_init, []
        for t in range(self.T_h):
            s = self.a * s + self.b * p[t]
            out.append(s)
        return np.array(out)

    def condensed(self):
        T = self.T_h
        G = np.zeros((T, T))
        for t in range(T):
            for s in range(t + 1):
                G[t, s] = self.a ** (t - s) * self.b
        return G, self.soc(np.zeros(T))


# --------------------------------------------------------------------------
# local proxes
# --------------------------------------------------------------------------


class BuildingProx:
    """``prox_{gamma g}`` of a building's power-space cost.

    ``g(p) = min {temp_penalty/2 ||y(u) - y_ref||^2 : M u = p, u in box}``;
    its prox is ``M u*`` with ``u*`` the box-QP minimizer of
    ``temp_penalty/2 ||G u + y0 - y_ref||^2 + 1/(2 gamma) ||M u - v||^2``.
    """

    def __init__(self, agent: BuildingAgent, gamma: float, tol: float = 1e-10):
        if not gamma > 0:
            raise ParameterError("gamma must be positive")
        self.agent, self.gamma, self.tol = agent, float(gamma), tol
        self.dim = agent.T_h
        G, y0 = agent.condensed()
        self.M = agent.power_map()
        w = agent.temp_penalty
        self.H = w * G.T @ G + self.M.T @ self.M / gamma
        self.h0 = w * G.T @ (y0 - agent.y_ref.reshape(-1))
        lo = np.tile(agent.u_min, agent.T_h)
        hi = np.tile(agent.u_max, agent.T_h)
        self._qp = BoxQP(self.H, lo, hi)

    def inputs(self, v) -> np.ndarray:
        v = _arr(v)
        if v.shape != (self.dim,):
            raise ContractError(f"building prox expects length {self.dim}")
        # even split of the requested power as the starting guess
        u0 = np.repeat(v * self.agent.cop / self.agent.n_inputs, self.agent.n_inputs)
        return self._qp.solve(self.h0 - self.M.T @ v / self.gamma, tol=self.tol, x0=u0)

    def __call__(self, v):
        return self.M @ self.inputs(v)


class BatteryProx:
    """``prox_{gamma g}`` for ``g(p) = soc_penalty/2 ||SOC(p) - soc_ref||^2`` plus the power box."""

    def __init__(self, agent: BatteryAgent, gamma: float, tol: float = 1e-10):
        if not gamma > 0:
            raise ParameterError("gamma must be positive")
        self.agent, self.gamma, self.tol = agent, float(gamma), tol
        self.dim = agent.T_h
        G, s0 = agent.condensed()
        w = agent.soc_penalty
        self.H = w * G.T @ G + np.eye(self.dim) / gamma
        self.h0 = w * G.T @ (s0 - agent.soc_ref)
        self._qp = BoxQP(self.H, agent.p_min, agent.p_max)

    def __call__(self, v):
        v = _arr(v)
        if v.shape != (self.dim,):
            raise ContractError(f"battery prox expects length {self.dim}")
        return self._qp.solve(self.h0 - v / self.gamma, tol=self.tol, x0=v)


def building_prox(agent: BuildingAgent, gamma: float, v, tol: float = 1e-10) -> np.ndarray:
    return BuildingProx(agent, gamma, tol)(v)


def battery_prox(agent: BatteryAgent, gamma: float, v, tol: float = 1e-10) -> np.ndarray:
    return BatteryProx(agent, gamma, tol)(v)


# --------------------------------------------------------------------------
# the coupled problem
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DispatchProblem:
    buildings: tuple
    battery: BatteryAgent
    r: np.ndarray
    alpha1: float = 1e-2
    alpha2: float = 1e4
    prox_tol: float = 1e-10

    def __post_init__(self):
        object.__setattr__(self, "buildings", tuple(self.buildings))
        object.__setattr__(self, "r", _arr(self.r))
        T = self.T_h
        if self.r.shape != (T,) or any(b.T_h != T for b in self.buildings):
            raise ContractError("all agents and r must share the horizon")
        if self.alpha1 < 0 or self.alpha2 < 0:
            raise ParameterError("weights must be >= 0")

    @property
    def T_h(self) -> int:
        return self.battery.T_h

    @property
    def N(self) -> int:
        return len(self.buildings)

    @property
    def partition(self) -> BlockPartition:
        return BlockPartition((self.T_h,) * (self.N + 1))

    @property
    def labels(self) -> list[str]:
        return ["battery"] + [b.label for b in self.buildings]

    @property
    def p_hat(self) -> np.ndarray:
        """Baselines stacked like the decision vector (zero for the battery)."""
        return np.concatenate([np.zeros(self.T_h)] + [b.p_hat for b in self.buildings])

    def tracking_error(self, p) -> np.ndarray:
        blocks = _arr(p).reshape(self.N + 1, self.T_h) - self.p_hat.reshape(self.N + 1, self.T_h)
        return blocks.sum(axis=0) - self.r

    def objective(self, p) -> float:
        p = self._check(p)
        s = self.tracking_error(p)
        dev = p - self.p_hat
        return 0.5 * self.alpha2 * s @ s + 0.5 * self.alpha1 * dev @ dev

    def hessian(self) -> np.ndarray:
        n = self.N + 1
        return self.alpha2 * np.kron(np.ones((n, n)), np.eye(self.T_h)) + self.alpha1 * np.eye(n * self.T_h)

    def _check(self, p):
        p = _arr(p)
        if p.shape != (self.partition.total,):
            raise ContractError(f"expected a vector of length {self.partition.total}, got {p.shape}")
        return p

    def forward(self) -> ForwardOperator:
        H = self.hessian()
        L = power_iteration(H)
        mu = smallest_eigenvalue(H)
        return ForwardOperator(eval=lambda p: coupling_gradient(self, p), L=L, mu=min(mu, L))

    def default_gamma(self) -> float:
        return 1.0 / self.forward().L

    def backward(self, gamma: float) -> BackwardBlocks:
        blocks = [BatteryProx(self.battery, gamma, self.prox_tol)]
        blocks += [BuildingProx(b, gamma, self.prox_tol) for b in self.buildings]
        return BackwardBlocks(blocks)

    def pair(self, gamma: float | None = None) -> OperatorPair:
        fwd = self.forward()
        gamma = 1.0 / fwd.L if gamma is None else gamma
        return OperatorPair(fwd, self.backward(gamma), gamma)

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        def plain(obj):
            out = {}
            for f in fields(obj):
                v = getattr(obj, f.name)
                out[f.name] = v.tolist() if isinstance(v, np.ndarray) else v
            return out

        return {
            "alpha1": self.alpha1,
            "alpha2": self.alpha2,
            "prox_tol": self.prox_tol,
            "r": self.r.tolist(),
            "battery": plain(self.battery),
            "buildings": [plain(b) for b in self.buildings],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DispatchProblem":
        return cls(
            buildings=tuple(BuildingAgent(**b) for b in d["buildings"]),
            battery=BatteryAgent(**d["battery"]),
            r=d["r"],
            alpha1=d["alpha1"],
            alpha2=d["alpha2"],
            prox_tol=d.get("prox_tol", 1e-10),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def loads(cls, text: str) -> "DispatchProblem":
        return cls.from_dict(json.loads(text))


def coupling_gradient(problem: DispatchProblem, p) -> np.ndarray:
    p = problem._check(p)
    s = problem.tracking_error(p)
    return problem.alpha2 * np.tile(s, problem.N + 1) + problem.alpha1 * (p - problem.p_hat)


# --------------------------------------------------------------------------
# generators
# --------------------------------------------------------------------------


def _smooth_profile(rng, T, n_harmonics=3, level=0.0, amp=1.0):
    t = np.arange(T) / T
    out = np.full(T, level)
    for h in range(1, n_harmonics + 1):
        out += amp / h * rng.normal() * np.sin(2 * math.pi * h * t + rng.uniform(0, 2 * math.pi))
    return out


def generate_building(label: str, T_h: int = 24, seed: int = 0, temp_penalty: float = SOFT_WEIGHT,
                      gain: float | None = None) -> BuildingAgent:
    """Random stable building of class ``label`` (small, medium or large)."""
    if label not in CLASS_SIZES:
        raise ParameterError(f"unknown building class {label!r}")
    n, m = CLASS_SIZES[label]
    rng = np.random.default_rng(np.random.SeedSequence([seed, list(CLASS_SIZES).index(label)]))
    eig = rng.uniform(0.7, 0.98, size=n)
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    A = Q @ np.diag(eig) @ Q.T
    # each zone reads a positive mix of states
    C = np.abs(rng.normal(size=(m, n))) + 0.1
    C /= C.sum(axis=1, keepdims=True)
    B_u = np.abs(rng.normal(size=(n, m))) + 0.2
    g = CLASS_GAIN[label] if gain is None else gain
    # scale so the one-step zone response C B_u has unit-ish diagonal times the class gain
    B_u *= g / np.mean(np.diag(C @ B_u)) if m > 1 else g / float((C @ B_u)[0, 0])
    B_w = np.abs(rng.normal(size=(n, 1))) * 0.05
    u_max = np.full(m, CLASS_UMAX[label])
    u_min = np.zeros(m)
    # the baseline: a smooth schedule inside the box, and the temperatures it produces
    u_base = np.empty((T_h, m))
    for j in range(m):
        u_base[:, j] = np.clip(
            _smooth_profile(rng, T_h, level=0.5 * u_max[j], amp=0.15 * u_max[j]), 0.1 * u_max[j], 0.9 * u_max[j]
        )
    w_hat = _smooth_profile(rng, T_h, level=-2.0, amp=2.0).reshape(T_h, 1)
    # start from the steady state of the mean baseline
    x_init = np.linalg.solve(np.eye(n) - A, B_u @ u_base.mean(axis=0) + B_w @ w_hat.mean(axis=0))
    tmp = BuildingAgent(A, B_u, B_w, C, x_init, T_h, u_min, u_max, np.zeros((T_h, m)), w_hat,
                        u_base.sum(axis=1) / 3.0, temp_penalty, 3.0, label)
    y_ref = tmp.simulate(u_base)
    return BuildingAgent(A, B_u, B_w, C, x_init, T_h, u_min, u_max, y_ref, w_hat, u_base.sum(axis=1) / 3.0,
                         temp_penalty, 3.0, label)


def generate_battery(T_h: int = 24, seed: int = 0, capacity_kwh: float = 20.0, c_rate: float = 0.2,
                     soc_penalty: float = SOFT_WEIGHT) -> BatteryAgent:
    """Battery with a C-rate power limit; the SOC target is 0.8 of the upper limit."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 99]))
    p_max = c_rate * capacity_kwh
    return BatteryAgent(
        a=0.999,
        b=1.0 / capacity_kwh,
        soc_init=float(rng.uniform(0.5, 0.7)),
        soc_min=0.1,
        soc_max=0.9,
        p_min=-p_max,
        p_max=p_max,
        soc_ref=0.8 * 0.9,
        T_h=T_h,
        soc_penalty=soc_penalty,
    )


def fleet(N: int) -> list[str]:
    """Class labels for ``N`` buildings; the reference fleet sizes use fixed mixes, others are 60% small."""
    if N in FLEETS:
        s, m, l = FLEETS[N]
    else:
        s = math.ceil(0.6 * N)
        m, l = N - s, 0
    return ["small"] * s + ["medium"] * m + ["large"] * l


def tracking_signal(T_h: int, rng, n_sines: int = 5, noise: float = 0.1) -> np.ndarray:
    """Band-limited zero-mean signal normalised to peak 1."""
    t = np.arange(T_h)
    sig = np.zeros(T_h)
    for _ in range(n_sines):
        period = rng.uniform(4, 2 * T_h)
        sig += rng.normal() * np.sin(2 * math.pi * t / period + rng.uniform(0, 2 * math.pi))
    sig += noise * rng.normal(size=T_h)
    sig -= sig.mean()
    return sig / np.max(np.abs(sig))


def make_problem(n_buildings: int = 5, T_h: int = 24, alpha1: float = 1e-2, alpha2: float = 1e4, seed: int = 0,
                 temp_penalty: float = SOFT_WEIGHT, soc_penalty: float = SOFT_WEIGHT, track_fraction: float = 0.8,
                 labels=None) -> DispatchProblem:
    """Battery plus ``n_buildings`` buildings; ``r`` peaks at ``track_fraction`` of the fleet's flexibility."""
    if n_buildings < 1:
        raise ParameterError("need at least one building")
    labels = fleet(n_buildings) if labels is None else list(labels)
    if len(labels) != n_buildings:
        raise ParameterError("one label per building")
    ss = np.random.SeedSequence(seed)
    child = ss.spawn(n_buildings + 2)
    bs = tuple(
        generate_building(lab, T_h, int(c.generate_state(1)[0]), temp_penalty=temp_penalty)
        for lab, c in zip(labels, child)
    )
    bat = generate_battery(T_h, int(child[-2].generate_state(1)[0]), soc_penalty=soc_penalty)
    rng = np.random.default_rng(child[-1])
    # headroom up and down around the baselines
    up = bat.p_max + sum(b.power_range()[1] - b.p_hat for b in bs)
    down = -bat.p_min + sum(b.p_hat - b.power_range()[0] for b in bs)
    scale = track_fraction * float(min(np.min(up), np.min(down)))
    r = scale * tracking_signal(T_h, rng)
    return DispatchProblem(bs, bat, r, alpha1, alpha2)


def central_qp(problem: DispatchProblem):
    """The whole dispatch problem as one box QP in ``(p_bess, u_1, ..., u_N)``.

    Returns ``(qp, h, E)``: minimize ``1/2 z'Hz + h'z`` over the box, then
    ``p = E z``.
    """
    T = problem.T_h
    K = problem.hessian()
    k = -K @ problem.p_hat - problem.alpha2 * np.tile(problem.r, problem.N + 1)
    bat = problem.battery
    Gb, s0 = bat.condensed()
    Hs = [bat.soc_penalty * Gb.T @ Gb]
    hs = [bat.soc_penalty * Gb.T @ (s0 - bat.soc_ref)]
    Ms = [np.eye(T)]
    lo = [np.full(T, bat.p_min)]
    hi = [np.full(T, bat.p_max)]
    for b in problem.buildings:
        G, y0 = b.condensed()
        Hs.append(b.temp_penalty * G.T @ G)
        hs.append(b.temp_penalty * G.T @ (y0 - b.y_ref.reshape(-1)))
        Ms.append(b.power_map())
        lo.append(np.tile(b.u_min, T))
        hi.append(np.tile(b.u_max, T))
    nz = sum(M.shape[1] for M in Ms)
    E = np.zeros((K.shape[0], nz))
    Hloc = np.zeros((nz, nz))
    col = 0
    for i, (M, Hi) in enumerate(zip(Ms, Hs)):
        w = M.shape[1]
        E[i * T:(i + 1) * T, col:col + w] = M
        Hloc[col:col + w, col:col + w] = Hi
        col += w
    H = E.T @ K @ E + Hloc
    h = E.T @ k + np.concatenate(hs)
    return BoxQP(H, np.concatenate(lo), np.concatenate(hi)), h, E


def solve_reference(problem: DispatchProblem, tol: float = 1e-10, max_iters: int = 10_000, x0=None,
                    gamma: float | None = None) -> np.ndarray:
    """High-accuracy minimizer with certificate ``||S x*|| <= tol``.

    Plain forward-backward contracts far too slowly on the badly conditioned
    directions of this problem, so the starting point comes from a direct
    active-set solve of the central QP (warm-started from ``x0`` if given);
    synchronous forward-backward (``beta = 0, eta = 1``) then runs from there
    until the residual certificate holds.
    """
    if tol > 1e-9:
        raise ParameterError("reference solves need tol <= 1e-9")
    pair = problem.pair(gamma)
    qp, h, E = central_qp(problem)
    start = problem.p_hat if x0 is None else problem._check(x0)
    # even split of each building's power over its inputs as the QP starting point
    z0 = np.linalg.lstsq(E, start, rcond=None)[0]
    z = qp.active_set(h, z0)
    if z is None:
        z = qp.solve(h, tol=1e-12, x0=z0)
    res = run_sync_fbs(pair, SyncParams(gamma=pair.gamma, eta=1.0, beta=0.0, max_iters=max_iters, stop_tol=tol,
                                        x0=E @ z))
    if res.terminated_by != "tol":
        raise ConvergenceError(
            f"reference solve stopped at residual {res.residuals[-1]:.3g} after {res.iterations} iterations",
            residual=float(res.residuals[-1]),
            iterations=res.iterations,
        )
    return res.x
