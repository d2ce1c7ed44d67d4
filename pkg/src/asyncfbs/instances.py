"""Synthetic box-constrained quadratics with exactly known ``mu`` and ``L``.

``B x = Q x + q`` with the spectrum of ``Q`` pinned to ``[mu, L]`` and each
block's backward map a clamp onto ``[-box, box]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engines import SyncParams, run_sync_fbs
from .errors import ConvergenceError, ParameterError
from .operators import BackwardBlocks, BlockPartition, BoxProjection, BoxQP, ForwardOperator, OperatorPair


@dataclass(frozen=True)
class QuadraticInstance:
    Q: np.ndarray
    q: np.ndarray
    box: float
    partition: BlockPartition
    mu: float
    L: float

    def forward(self) -> ForwardOperator:
        Q, q = self.Q, self.q
        return ForwardOperator(eval=lambda x: Q @ x + q, L=self.L, mu=self.mu)

    def pair(self, gamma: float | None = None) -> OperatorPair:
        gamma = 1.0 / self.L if gamma is None else gamma
        blocks = BackwardBlocks([BoxProjection(-self.box, self.box, d) for d in self.partition.dims])
        return OperatorPair(self.forward(), blocks, gamma)

    def reference(self, tol: float = 1e-12, max_iters: int = 100_000) -> np.ndarray:
        """Exact box-QP solve, certified by forward-backward with ``||S x|| <= tol``."""
        if self.mu <= 0:
            raise ParameterError("no unique reference without strong monotonicity")
        qp = BoxQP(self.Q, -self.box, self.box)
        n = self.partition.total
        x = qp.active_set(self.q, np.zeros(n))
        if x is None:
            x = qp.solve(self.q, tol=tol)
        pair = self.pair()
        res = run_sync_fbs(pair, SyncParams(gamma=pair.gamma, max_iters=max_iters, stop_tol=tol, x0=x))
        if res.terminated_by != "tol":
            raise ConvergenceError("reference solve did not certify", residual=float(res.residuals[-1]),
                                   iterations=res.iterations)
        return res.x

    def to_dict(self) -> dict:
        return {
            "Q": self.Q.tolist(),
            "q": self.q.tolist(),
            "box": self.box,
            "dims": list(self.partition.dims),
            "mu": self.mu,
            "L": self.L,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuadraticInstance":
        return cls(np.array(d["Q"], dtype=float), np.array(d["q"], dtype=float), float(d["box"]),
                   BlockPartition(tuple(d["dims"])), float(d["mu"]), float(d["L"]))


def make_quadratic(n_blocks: int = 3, block_size: int = 2, mu: float = 0.5, L: float = 1.0, box: float = 1.0,
                   seed: int = 0, spread: float = 2.0) -> QuadraticInstance:
    """Random instance; ``q`` is scaled by ``spread`` so that some box faces are active at the optimum."""
    if n_blocks < 1 or block_size < 1:
        raise ParameterError("need at least one block of size >= 1")
    if not 0 <= mu <= L or not L > 0:
        raise ParameterError("need 0 <= mu <= L, L > 0")
    if not box > 0:
        raise ParameterError("box must be positive")
    n = n_blocks * block_size
    rng = np.random.default_rng(seed)
    U, _ = np.linalg.qr(rng.normal(size=(n, n)))
    if n == 1:
        eig = np.array([L])
    else:
        eig = np.concatenate([[mu, L], rng.uniform(mu, L, size=n - 2)])
    Q = (U * eig) @ U.T
    Q = 0.5 * (Q + Q.T)
    q = spread * L * box * rng.normal(size=n)
    return QuadraticInstance(Q, q, float(box), BlockPartition.uniform(n_blocks, block_size), float(mu), float(L))
