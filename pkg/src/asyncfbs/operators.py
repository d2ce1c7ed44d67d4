"""Block vectors, forward/backward operators and empirical operator probes.

The fixed-point map is ``T = T_A o T_B`` with ``T_B = I - gamma * B`` (the
forward step, owned by the coordinator) and ``T_A = (T_A1, ..., T_AN)`` a
block-separable nonexpansive map (the backward step, one block per agent).
``S = I - T`` vanishes exactly on the fixed points of ``T``.

Internally everything works on flat float64 arrays; :class:`BlockVector` is
the checked public surface.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, ConvergenceError, ParameterError, PreconditionError

PROBE_RADIUS = 10.0


# --------------------------------------------------------------------------
# block structure
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockPartition:
    """Sizes ``n_1..n_N`` of the coordinate blocks of the product space."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) < 1 or any(d < 1 for d in dims):
            raise ContractError(f"block sizes must be positive, got {self.dims!r}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "_offsets", tuple(np.concatenate([[0], np.cumsum(dims)]).tolist()))

    @property
    def N(self) -> int:
        return len(self.dims)

    @property
    def total(self) -> int:
        return self._offsets[-1]

    def slice(self, i: int) -> slice:
        if not 0 <= i < self.N:
            raise ContractError(f"block index {i} out of range for {self.N} blocks")
        return slice(self._offsets[i], self._offsets[i + 1])

    @property
    def slices(self) -> list[slice]:
        return [self.slice(i) for i in range(self.N)]

    @classmethod
    def uniform(cls, n_blocks: int, block_size: int) -> "BlockPartition":
        return cls((block_size,) * n_blocks)


class BlockVector:
    """An element of ``H_1 x ... x H_N`` stored as one contiguous array."""

    __slots__ = ("partition", "data")

    def __init__(self, partition: BlockPartition, data):
        data = np.array(data, dtype=float).reshape(-1)
        if data.shape[0] != partition.total:
            raise ContractError(
                f"data has length {data.shape[0]}, partition expects {partition.total}"
            )
        self.partition = partition
        self.data = data

    @classmethod
    def zeros(cls, partition: BlockPartition) -> "BlockVector":
        return cls(partition, np.zeros(partition.total))

    @classmethod
    def from_blocks(cls, blocks: Sequence) -> "BlockVector":
        arrays = [np.atleast_1d(np.asarray(b, dtype=float)).reshape(-1) for b in blocks]
        return cls(BlockPartition(tuple(a.size for a in arrays)), np.concatenate(arrays))

    def block(self, i: int) -> np.ndarray:
        """Coordinates of block ``i`` (a view)."""
        return self.data[self.partition.slice(i)]

    def blocks(self) -> list[np.ndarray]:
        return [self.block(i) for i in range(self.partition.N)]

    def copy(self) -> "BlockVector":
        return BlockVector(self.partition, self.data.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __len__(self):
        return self.data.shape[0]

    def __repr__(self):
        return f"BlockVector(dims={self.partition.dims}, data={self.data!r})"

    def __eq__(self, other):
        if not isinstance(other, BlockVector):
            return NotImplemented
        return self.partition == other.partition and np.array_equal(self.data, other.data)


# --------------------------------------------------------------------------
# spectral helpers
# --------------------------------------------------------------------------


def power_iteration(Q, rtol: float = 1e-8, max_iter: int = 100_000, seed: int = 0) -> float:
    """Largest eigenvalue of a symmetric positive semidefinite matrix.

    Stops once the eigen-residual ``||Qv - lam v||`` drops below
    ``rtol * lam``, which bounds the distance to the spectrum.
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    if not np.any(Q):
        return 0.0
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = Q @ v
        lam = float(v @ w)
        if np.linalg.norm(w - lam * v) <= rtol * abs(lam):
            return lam
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
    raise ConvergenceError("power iteration did not converge", residual=float(np.linalg.norm(Q @ v - lam * v)))


def smallest_eigenvalue(Q, rtol: float = 1e-8, max_iter: int = 100_000, seed: int = 1) -> float:
    """Smallest eigenvalue of a symmetric PSD matrix.

    Inverse power iteration on a Cholesky factor when ``Q`` is positive
    definite; a singular ``Q`` reports 0.
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    try:
        C = np.linalg.cholesky(Q)
    except np.linalg.LinAlgError:
        return 0.0
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    lam = np.inf
    for _ in range(max_iter):
        w = np.linalg.solve(C.T, np.linalg.solve(C, v))
        v = w / np.linalg.norm(w)
        Qv = Q @ v
        lam = float(v @ Qv)
        if np.linalg.norm(Qv - lam * v) <= rtol * abs(lam):
            return max(lam, 0.0)
    raise ConvergenceError("inverse power iteration did not converge", residual=float(lam))


# --------------------------------------------------------------------------
# operators
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ForwardOperator:
    """The coordinator-side operator ``B``, ``1/L``-cocoercive and ``mu``-strongly monotone.

    ``mu = 0`` stands for "no strong monotonicity known".
    """

    eval: Callable[[np.ndarray], np.ndarray]
    L: float
    mu: float = 0.0

    def __post_init__(self):
        if not self.L > 0:
            raise ParameterError(f"inverse cocoercivity L must be positive, got {self.L}")
        if not 0 <= self.mu <= self.L * (1 + 1e-12):
            raise ParameterError(f"need 0 <= mu <= L, got mu={self.mu}, L={self.L}")

    def __call__(self, x):
        return self.eval(x)


def quadratic_forward(Q, q=None) -> ForwardOperator:
    """``B = grad(1/2 x'Qx + q'x)`` with ``L``, ``mu`` from power iteration."""
    Q = np.array(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ContractError("Q must be square")
    q = np.zeros(Q.shape[0]) if q is None else np.array(q, dtype=float)
    L = power_iteration(Q)
    mu = smallest_eigenvalue(Q)
    return ForwardOperator(eval=lambda x: Q @ x + q, L=L, mu=min(mu, L))


def zero_forward(L: float = 1.0) -> ForwardOperator:
    """``B = 0``; any positive ``L`` is a valid cocoercivity constant."""
    return ForwardOperator(eval=lambda x: np.zeros_like(np.asarray(x, dtype=float)), L=L, mu=0.0)


class IdentityBlock:
    def __init__(self, dim: int):
        self.dim = int(dim)

    def __call__(self, v):
        return np.array(v, dtype=float)


class BoxProjection:
    """Coordinate-wise clamp onto ``[lo, hi]``."""

    def __init__(self, lo, hi, dim: int | None = None):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        self.dim = int(dim if dim is not None else max(lo.size, hi.size))
        self.lo = np.broadcast_to(lo, (self.dim,)).copy()
        self.hi = np.broadcast_to(hi, (self.dim,)).copy()
        if np.any(self.lo > self.hi):
            raise ParameterError("box needs lo <= hi")

    def __call__(self, v):
        return np.clip(np.asarray(v, dtype=float), self.lo, self.hi)


class SeparableQuadraticProx:
    """``prox_{gamma f}`` for ``f(x) = 1/2 sum q_diag_j x_j^2 + q_lin'x``."""

    def __init__(self, q_diag, q_lin, gamma: float):
        self.q_diag = np.atleast_1d(np.asarray(q_diag, dtype=float))
        self.q_lin = np.broadcast_to(np.asarray(q_lin, dtype=float), self.q_diag.shape).copy()
        self.gamma = float(gamma)
        self.dim = self.q_diag.size
        if self.gamma <= 0:
            raise ParameterError("gamma must be positive")

    def __call__(self, v):
        return prox_separable_quadratic(self.q_diag, self.q_lin, self.gamma, v)


class BoxQPProx:
    """``prox_{gamma g}`` for ``g = 1/2 x'Qx + q'x + indicator([lo, hi])``."""

    def __init__(self, Q, q, lo, hi, gamma: float, tol: float = 1e-10, max_iter: int | None = None):
        self.Q = np.atleast_2d(np.asarray(Q, dtype=float))
        self.dim = self.Q.shape[0]
        self.q = np.broadcast_to(np.asarray(q, dtype=float), (self.dim,)).copy()
        self.lo = np.broadcast_to(np.asarray(lo, dtype=float), (self.dim,)).copy()
        self.hi = np.broadcast_to(np.asarray(hi, dtype=float), (self.dim,)).copy()
        if gamma <= 0:
            raise ParameterError("gamma must be positive")
        self.gamma = float(gamma)
        self.tol = tol
        self._qp = BoxQP(self.Q + np.eye(self.dim) / self.gamma, self.lo, self.hi, max_iter=max_iter)

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        return self._qp.solve(self.q - v / self.gamma, tol=self.tol, x0=v)


@dataclass(frozen=True)
class BackwardBlocks:
    """The agents' private maps ``T_A1..T_AN``, each acting on its own block."""

    blocks: tuple
    dims: tuple[int, ...] = field(default=None)

    def __post_init__(self):
        blocks = tuple(self.blocks)
        dims = self.dims
        if dims is None:
            try:
                dims = tuple(int(b.dim) for b in blocks)
            except AttributeError as exc:
                raise ContractError("block dims must be given for plain callables") from exc
        if len(dims) != len(blocks):
            raise ContractError("need exactly one dimension per block")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "dims", tuple(dims))

    @property
    def partition(self) -> BlockPartition:
        return BlockPartition(self.dims)

    def __len__(self):
        return len(self.blocks)


@dataclass(frozen=True)
class OperatorPair:
    """``(B, T_A, gamma)``; defines ``T = T_A o (I - gamma B)`` and ``S = I - T``."""

    forward: ForwardOperator
    backward: BackwardBlocks
    gamma: float
    strict: bool = True

    def __post_init__(self):
        if not self.gamma > 0:
            raise ParameterError(f"gamma must be positive, got {self.gamma}")
        if self.strict and not self.gamma < 2.0 / self.forward.L:
            raise ParameterError(
                f"gamma={self.gamma} not admissible, need gamma < 2/L = {2.0 / self.forward.L}"
            )
        object.__setattr__(self, "_partition", self.backward.partition)
        object.__setattr__(self, "_slices", self.backward.partition.slices)

    @property
    def partition(self) -> BlockPartition:
        return self._partition

    @property
    def N(self) -> int:
        return self._partition.N

    # flat-array kernels -------------------------------------------------
    def forward_step(self, x: np.ndarray) -> np.ndarray:
        return x - self.gamma * self.forward(x)

    def backward_block(self, i: int, v: np.ndarray) -> np.ndarray:
        return np.asarray(self.backward.blocks[i](v), dtype=float)

    def backward_full(self, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        for i, sl in enumerate(self._slices):
            out[sl] = self.backward_block(i, v[sl])
        return out

    def T(self, x: np.ndarray) -> np.ndarray:
        return self.backward_full(self.forward_step(x))

    def S(self, x: np.ndarray) -> np.ndarray:
        return x - self.T(x)

    def residual(self, x: np.ndarray) -> float:
        return float(np.linalg.norm(self.S(x)))


def _conform(pair: OperatorPair, x) -> np.ndarray:
    if isinstance(x, BlockVector):
        if x.partition != pair.partition:
            raise ContractError(f"vector partition {x.partition.dims} != pair partition {pair.partition.dims}")
        return x.data
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.shape[0] != pair.partition.total:
        raise ContractError(f"vector length {arr.shape[0]} != {pair.partition.total}")
    return arr


def apply_forward_step(pair: OperatorPair, x) -> BlockVector:
    """``x - gamma * B(x)``."""
    return BlockVector(pair.partition, pair.forward_step(_conform(pair, x)))


def apply_T(pair: OperatorPair, x) -> BlockVector:
    """``T_A(T_B x)`` with block ``i`` of ``T_A`` applied to block ``i``."""
    return BlockVector(pair.partition, pair.T(_conform(pair, x)))


def apply_S(pair: OperatorPair, x) -> BlockVector:
    """``x - T x``; zero exactly at fixed points of ``T``."""
    return BlockVector(pair.partition, pair.S(_conform(pair, x)))


# --------------------------------------------------------------------------
# proximal maps
# --------------------------------------------------------------------------


def prox_separable_quadratic(q_diag, q_lin, gamma: float, v) -> np.ndarray:
    """Closed-form prox of ``1/2 sum q_diag_j x_j^2 + q_lin'x``."""
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    q_diag = np.asarray(q_diag, dtype=float)
    q_lin = np.asarray(q_lin, dtype=float)
    v = np.asarray(v, dtype=float)
    return (v - gamma * q_lin) / (1.0 + gamma * q_diag)


class BoxQP:
    """Minimizer of ``1/2 u'Hu + h'u`` over a box, for a fixed ``H``.

    A primal active-set method, seeded with the optimal face of the previous
    call, usually finishes in a few linear solves.  If it does not, projected gradient with step
    ``1/lambda_max(H)`` takes over; each of its iterations also tries a Newton
    step on the current free set and keeps it when it beats the gradient
    point.  Either way the final point solves the reduced system on the
    optimal face, so results are accurate to rounding.
    """

    def __init__(self, H, lo, hi, max_iter: int | None = None):
        self.H = np.atleast_2d(np.asarray(H, dtype=float))
        n = self.H.shape[0]
        self.lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,)).copy()
        self.hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,)).copy()
        if np.any(self.lo > self.hi):
            raise ParameterError("box needs lo <= hi")
        eig = np.linalg.eigvalsh(self.H)
        top = float(eig[-1])
        if top <= 0:
            raise ParameterError("H must have a positive eigenvalue")
        self.step = 1.0 / top
        low = max(float(eig[0]), top * 1e-16)
        if max_iter is None:
            max_iter = int(min(max(50 * n * top / low, 100), 1_000_000))
        self.max_iter = max_iter

    def objective(self, u, h):
        return 0.5 * u @ (self.H @ u) + h @ u

    def stationarity(self, u, h) -> float:
        g = self.H @ u + h
        return float(np.linalg.norm(u - np.clip(u - self.step * g, self.lo, self.hi)))

    def active_set(self, h, u, fix_lo=None, fix_hi=None, max_steps: int | None = None):
        """Primal active-set method from the feasible point ``u``.

        ``fix_lo``/``fix_hi`` seed the working set (e.g. the optimal face of a
        previous, nearby problem).  Returns ``None`` if it does not finish in
        ``max_steps`` working-set changes.
        """
        lo, hi, H = self.lo, self.hi, self.H
        n = u.size
        u = np.clip(u, lo, hi)
        W_lo = np.zeros(n, bool) if fix_lo is None else fix_lo.copy()
        W_hi = np.zeros(n, bool) if fix_hi is None else fix_hi.copy()
        W_hi &= ~W_lo
        u[W_lo] = lo[W_lo]
        u[W_hi] = hi[W_hi]
        g_tol = 1e-13 * max(1.0, float(np.max(np.abs(h))))
        for _ in range(max_steps or 10 * n + 10):
            fixed = W_lo | W_hi
            free = ~fixed
            target = u.copy()
            if free.any():
                rhs = -h[free] - H[np.ix_(free, fixed)] @ u[fixed]
                try:
                    target[free] = np.linalg.solve(H[np.ix_(free, free)], rhs)
                except np.linalg.LinAlgError:
                    return None
            below = free & (target < lo)
            above = free & (target > hi)
            if not (below.any() or above.any()):
                u = target
                g = H @ u + h
                score = np.where(W_lo, -g, 0.0) + np.where(W_hi, g, 0.0)
                j = int(np.argmax(score))
                if score[j] <= g_tol:
                    self._face = (W_lo, W_hi)
                    return u
                W_lo[j] = W_hi[j] = False
                continue
            d = target - u
            with np.errstate(divide="ignore", invalid="ignore"):
                a_lo = np.where(below, (lo - u) / d, np.inf)
                a_hi = np.where(above, (hi - u) / d, np.inf)
            alpha = float(np.clip(min(a_lo.min(), a_hi.min()), 0.0, 1.0))
            u = np.clip(u + alpha * d, lo, hi)
            hit_lo = below & (a_lo <= alpha)
            hit_hi = above & (a_hi <= alpha)
            u[hit_lo] = lo[hit_lo]
            u[hit_hi] = hi[hit_hi]
            W_lo |= hit_lo
            W_hi |= hit_hi
        return None

    def solve(self, h, tol: float = 1e-10, x0=None) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        lo, hi, H, s = self.lo, self.hi, self.H, self.step
        u = np.clip(np.zeros_like(h) if x0 is None else np.asarray(x0, dtype=float), lo, hi)
        face = getattr(self, "_face", None)
        fast = self.active_set(h, u, *(face or (None, None)))
        if fast is not None:
            fast = np.clip(fast, lo, hi)
            if self.stationarity(fast, h) <= tol:
                return fast
            if self.objective(fast, h) < self.objective(u, h):
                u = fast
        res = np.inf
        for _ in range(self.max_iter):
            g = H @ u + h
            pg = np.clip(u - s * g, lo, hi)
            res = float(np.linalg.norm(u - pg))
            if res <= tol:
                return u
            best = pg
            free = ~(((u <= lo) & (g > 0)) | ((u >= hi) & (g < 0)))
            if free.any():
                d = np.zeros_like(u)
                Hff = H[np.ix_(free, free)]
                try:
                    d[free] = np.linalg.solve(Hff, -g[free])
                except np.linalg.LinAlgError:
                    d[free] = np.linalg.lstsq(Hff, -g[free], rcond=None)[0]
                g_pg = H @ pg + h
                alpha = 1.0
                for _ in range(30):
                    cand = np.clip(u + alpha * d, lo, hi)
                    # f(cand) - f(pg) in difference form; comparing raw objectives is all rounding near the optimum
                    step = cand - pg
                    if step @ g_pg + 0.5 * step @ (H @ step) < 0:
                        best = cand
                        break
                    alpha *= 0.5
            u = best
        raise ConvergenceError(
            f"box QP not solved to {tol} in {self.max_iter} iterations", residual=res, iterations=self.max_iter
        )


def prox_box_qp(Q, q, lo, hi, gamma: float, v, tol: float = 1e-10, max_iter: int | None = None) -> np.ndarray:
    """``prox_{gamma g}(v)`` for ``g = 1/2 x'Qx + q'x + indicator([lo, hi])``.

    The returned ``u`` satisfies ``||u - P(u - s*(Qu + q + (u - v)/gamma))|| <= tol``
    with ``s = 1/(lambda_max(Q) + 1/gamma)`` and ``P`` the box projection.
    """
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    if not tol > 0:
        raise ParameterError("tol must be positive")
    return BoxQPProx(Q, q, lo, hi, gamma, tol=tol, max_iter=max_iter)(v)


# --------------------------------------------------------------------------
# empirical probes
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ProbeReport:
    value: float
    passed: bool
    n_samples: int
    worst: tuple | None = None


def _sample(rng, dim):
    return PROBE_RADIUS * rng.standard_normal(dim)


def estimate_lipschitz(op, dim: int, n_pairs: int, seed: int = 0) -> tuple[float, tuple | None]:
    """Largest observed ``||op(x) - op(y)|| / ||x - y||`` over random pairs."""
    rng = np.random.default_rng(seed)
    worst, best = None, 0.0
    for _ in range(n_pairs):
        x, y = _sample(rng, dim), _sample(rng, dim)
        den = np.linalg.norm(x - y)
        if den == 0.0:
            continue
        ratio = float(np.linalg.norm(np.asarray(op(x)) - np.asarray(op(y))) / den)
        if ratio > best or worst is None:
            best, worst = ratio, (x, y)
    return best, worst


def probe_nonexpansive(op, dim: int, n_pairs: int = 200, seed: int = 0) -> ProbeReport:
    if n_pairs < 1:
        raise ParameterError("n_pairs must be >= 1")
    ratio, worst = estimate_lipschitz(op, dim, n_pairs, seed)
    return ProbeReport(ratio, ratio <= 1 + 1e-9, n_pairs, worst)


def probe_cocoercive(pair, dim: int, n_pairs: int = 200, seed: int = 0) -> ProbeReport:
    """Minimum of ``<x-y, Sx-Sy> - 1/2 ||Sx-Sy||^2``; nonnegative iff ``S`` looks 1/2-cocoercive.

    ``pair`` is an :class:`OperatorPair` or any callable standing in for ``S``.
    """
    if n_pairs < 1:
        raise ParameterError("n_pairs must be >= 1")
    S = pair.S if isinstance(pair, OperatorPair) else pair
    rng = np.random.default_rng(seed)
    lowest, worst = np.inf, None
    for _ in range(n_pairs):
        x, y = _sample(rng, dim), _sample(rng, dim)
        dS = np.asarray(S(x)) - np.asarray(S(y))
        val = float((x - y) @ dS - 0.5 * dS @ dS)
        if val < lowest:
            lowest, worst = val, (x, y)
    return ProbeReport(lowest, lowest >= -1e-9, n_pairs, worst)


def probe_quasi_strong(pair, x_star, dim: int, n_points: int = 200, seed: int = 0) -> float:
    """Smallest observed ``<x - x*, Sx> / ||x - x*||^2`` around a verified zero ``x*``."""
    S = pair.S if isinstance(pair, OperatorPair) else pair
    x_star = np.asarray(x_star, dtype=float)
    if np.linalg.norm(S(x_star)) > 1e-8:
        raise PreconditionError("x_star is not a zero of S (||S x_star|| > 1e-8)")
    rng = np.random.default_rng(seed)
    est = np.inf
    for _ in range(n_points):
        x = x_star + _sample(rng, dim)
        d = x - x_star
        den = float(d @ d)
        if den == 0.0:
            continue
        est = min(est, float(d @ np.asarray(S(x))) / den)
    return est


def quasi_strong_estimate_at(S, x_star, xs) -> float:
    """Same estimate on caller-chosen points; coincident points are skipped."""
    x_star = np.asarray(x_star, dtype=float)
    est = np.inf
    for x in xs:
        d = np.asarray(x, dtype=float) - x_star
        den = float(d @ d)
        if den == 0.0:
            continue
        est = min(est, float(d @ np.asarray(S(x))) / den)
    return est
