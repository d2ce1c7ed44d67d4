"""Synchronous reference engines.

Gradient descent / heavy ball, relaxed Krasnosel'skii-Mann, synchronous
(inertial) forward-backward and the cyclic coordinate KM sweep.  They are the
oracles the asynchronous engine is checked against, so each one is written
as the literal recursion with no shortcuts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DivergenceError, ParameterError
from .operators import BlockVector, OperatorPair

DIVERGENCE_LIMIT = 1e12
HISTORY_LIMIT = 100_000


@dataclass
class SyncParams:
    gamma: float = 1.0
    eta: float = 1.0
    beta: float = 0.0
    max_iters: int = 1000
    stop_tol: float = 1e-10
    x0: object = None

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ParameterError(f"eta must lie in [0, 1], got {self.eta}")
        if self.beta < 0:
            raise ParameterError(f"beta must be >= 0, got {self.beta}")
        if not self.stop_tol > 0:
            raise ParameterError("stop_tol must be positive")
        if self.max_iters < 0:
            raise ParameterError("max_iters must be >= 0")

    def initial_point(self, dim: int | None = None) -> np.ndarray:
        if self.x0 is None:
            if dim is None:
                raise ParameterError("x0 is required")
            return np.zeros(dim)
        return np.array(self.x0, dtype=float).reshape(-1)


@dataclass(frozen=True)
class RunResult:
    """Recorded trajectory of one run.

    ``iterates[j]`` is ``x_{indices[j]}``; indices are dense unless the run
    outgrew the history limit, in which case every ``stride``-th is kept.
    ``residuals`` holds ``||S x_k||`` (NaN where it was not evaluated) and
    ``distances`` holds ``||x_k - x*||`` when a reference was supplied.
    """

    iterates: np.ndarray
    indices: np.ndarray
    residuals: np.ndarray
    distances: np.ndarray | None
    iterations: int
    terminated_by: str
    stride: int = 1
    times: np.ndarray | None = None

    @property
    def x(self) -> np.ndarray:
        return self.iterates[-1]

    @property
    def dense(self) -> bool:
        return self.stride == 1


class History:
    """Iterate recorder that halves its resolution when it outgrows ``limit``."""

    def __init__(self, reference=None, limit: int = HISTORY_LIMIT, dense: bool = False):
        self.reference = None if reference is None else np.asarray(reference, dtype=float)
        self.limit = limit
        self.dense = dense
        self.stride = 1
        self.xs, self.ks, self.res, self.ts = [], [], [], []

    def record(self, k: int, x: np.ndarray, residual: float = math.nan, t: float = math.nan):
        if k % self.stride:
            return
        self.xs.append(x.copy())
        self.ks.append(k)
        self.res.append(residual)
        self.ts.append(t)
        if not self.dense and len(self.xs) > self.limit:
            self.stride *= 2
            keep = [j for j, kk in enumerate(self.ks) if kk % self.stride == 0]
            for name in ("xs", "ks", "res", "ts"):
                seq = getattr(self, name)
                setattr(self, name, [seq[j] for j in keep])

    def result(self, iterations: int, terminated_by: str, with_times: bool = False) -> RunResult:
        its = np.array(self.xs)
        dist = None
        if self.reference is not None:
            dist = np.linalg.norm(its - self.reference, axis=1)
        return RunResult(
            iterates=its,
            indices=np.array(self.ks, dtype=int),
            residuals=np.array(self.res, dtype=float),
            distances=dist,
            iterations=iterations,
            terminated_by=terminated_by,
            stride=self.stride,
            times=np.array(self.ts, dtype=float) if with_times else None,
        )


def _guard(x, k):
    n = np.linalg.norm(x)
    if not n <= DIVERGENCE_LIMIT:
        raise DivergenceError(f"iterate norm {n:.3g} exceeded {DIVERGENCE_LIMIT:.0e} at k={k}")


def run_heavy_ball(grad_f: Callable, params: SyncParams, reference=None) -> RunResult:
    """``x_{k+1} = x_k - gamma grad f(x_k) + beta (x_k - x_{k-1})`` with ``x_{-1} = x_0``.

    The residual is ``||gamma grad f(x_k)||``, i.e. ``||S x_k||`` for
    ``T = I - gamma grad f``.
    """
    x = params.initial_point()
    x_prev = x.copy()
    hist = History(reference)
    res = float(np.linalg.norm(params.gamma * grad_f(x)))
    hist.record(0, x, res)
    k = 0
    while k < params.max_iters:
        if res <= params.stop_tol:
            return hist.result(k, "tol")
        g = grad_f(x)
        x, x_prev = x - params.gamma * g + params.beta * (x - x_prev), x
        k += 1
        _guard(x, k)
        res = float(np.linalg.norm(params.gamma * grad_f(x)))
        hist.record(k, x, res)
    return hist.result(k, "tol" if res <= params.stop_tol else "max_iters")


def run_km(T_map: Callable, eta_schedule, params: SyncParams, reference=None) -> RunResult:
    """``x_{k+1} = x_k + eta_k (T x_k - x_k)``.

    ``eta_schedule`` is a constant or a callable ``k -> eta_k``.
    """
    eta_of = eta_schedule if callable(eta_schedule) else (lambda k, e=float(eta_schedule): e)
    x = params.initial_point()
    hist = History(reference)
    Tx = np.asarray(T_map(x), dtype=float)
    res = float(np.linalg.norm(x - Tx))
    hist.record(0, x, res)
    k = 0
    while k < params.max_iters:
        if res <= params.stop_tol:
            return hist.result(k, "tol")
        eta = eta_of(k)
        if not 0.0 <= eta <= 1.0:
            raise ParameterError(f"eta_{k} = {eta} outside [0, 1]")
        x = x + eta * (Tx - x)
        k += 1
        _guard(x, k)
        Tx = np.asarray(T_map(x), dtype=float)
        res = float(np.linalg.norm(x - Tx))
        hist.record(k, x, res)
    return hist.result(k, "tol" if res <= params.stop_tol else "max_iters")


def run_sync_fbs(pair: OperatorPair, params: SyncParams, reference=None) -> RunResult:
    """All agents update every epoch with fresh data.

    ``x_{k+1} = (1 - eta) x_k + eta T_A(T_B x_k + beta (x_k - x_{k-1}))``; with
    ``beta = 0, eta = 1`` this is plain forward-backward ``x_{k+1} = T x_k``.
    """
    if params.beta >= 1:
        raise ParameterError("inertial forward-backward needs beta < 1")
    x = params.initial_point(pair.partition.total)
    x_prev = x.copy()
    hist = History(reference)
    Tx = pair.T(x)
    res = float(np.linalg.norm(x - Tx))
    hist.record(0, x, res)
    k = 0
    while k < params.max_iters:
        if res <= params.stop_tol:
            return hist.result(k, "tol")
        if params.beta == 0 or k == 0:
            z = Tx  # the inertial term vanishes, reuse the residual's T x
        else:
            z = pair.backward_full(pair.forward_step(x) + params.beta * (x - x_prev))
        x, x_prev = (1.0 - params.eta) * x + params.eta * z, x
        k += 1
        _guard(x, k)
        Tx = pair.T(x)
        res = float(np.linalg.norm(x - Tx))
        hist.record(k, x, res)
    return hist.result(k, "tol" if res <= params.stop_tol else "max_iters")


def coordinate_update(pair: OperatorPair, x: np.ndarray, i: int, eta: float, x_read: np.ndarray | None = None):
    """``x[i] - eta (S x_read)[i]``; shared by the cyclic engine and the async coordinate mode."""
    sl = pair.partition.slice(i)
    xr = x if x_read is None else x_read
    t_i = pair.backward_block(i, pair.forward_step(xr)[sl])
    return x[sl] - eta * (xr[sl] - t_i)


def run_cyclic_coordinate_km(pair: OperatorPair, params: SyncParams, reference=None) -> RunResult:
    """Block ``i = k mod N`` takes ``x_{k+1}[i] = x_k[i] - eta (S x_k)[i]``; other blocks stay."""
    x = params.initial_point(pair.partition.total)
    N = pair.N
    hist = History(reference)
    res = pair.residual(x)
    hist.record(0, x, res)
    k = 0
    while k < params.max_iters:
        if res <= params.stop_tol:
            return hist.result(k, "tol")
        i = k % N
        x = x.copy()
        x[pair.partition.slice(i)] = coordinate_update(pair, x, i, params.eta)
        k += 1
        _guard(x, k)
        res = pair.residual(x)
        hist.record(k, x, res)
    return hist.result(k, "tol" if res <= params.stop_tol else "max_iters")


def as_block_vector(result: RunResult, pair: OperatorPair, j: int = -1) -> BlockVector:
    return BlockVector(pair.partition, result.iterates[j])
