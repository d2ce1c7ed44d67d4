"""Constants of the linear-rate guarantee for the asynchronous inertial iteration.

With ``nu`` the quasi-strong monotonicity constant of ``S`` and ``X`` the
delay/inertia amplification factor, the squared distance obeys

    V_{k+1} <= r(eta) V_k + q(eta) max_{k - 6 tau <= j <= k - 1} V_j

with ``r(eta) = 1 - eta (nu - eps)`` and
``q(eta) = eta^3 X^2 (1/eps + eta (1 + delta) / delta)``; ``r + q < 1``
gives linear convergence at rate ``(r + q)^(1 / (1 + 6 tau))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


def compute_nu(gamma: float, mu: float, L: float) -> float:
    """``1 - sqrt(1 - 2 gamma mu + mu gamma^2 L)``, the quasi-strong monotonicity of ``S``."""
    if not L > 0:
        raise ParameterError("L must be positive")
    if not 0 < gamma < 2.0 / L:
        raise ParameterError(f"gamma={gamma} outside (0, 2/L={2.0 / L})")
    if mu < 0:
        raise ParameterError("mu must be >= 0")
    rad = 1.0 - 2.0 * gamma * mu + mu * gamma * gamma * L
    if rad < 0:
        raise ParameterError(f"negative radicand {rad}: mu={mu}, L={L}, gamma={gamma} inadmissible")
    return 1.0 - math.sqrt(rad)


def compute_Y_X(N: int, tau: int, gamma: float, L: float, beta: float) -> tuple[float, float]:
    Y = 1.0 + gamma * L + 2.0 * beta
    X = N * (Y * N + 1.0) * (4.0 * tau * (1.0 + gamma * L) + 6.0 * beta * tau)
    return Y, X


@dataclass(frozen=True)
class TheoryInputs:
    N: int
    tau: int
    gamma: float
    L: float
    mu: float
    beta: float
    delta: float = 1.0
    epsilon: float | None = None

    def __post_init__(self):
        if self.N < 1 or self.tau < 1:
            raise ParameterError("need N >= 1 and tau >= 1")
        if self.beta < 0:
            raise ParameterError("beta must be >= 0")
        if not self.delta > 0:
            raise ParameterError("delta must be positive")
        nu = compute_nu(self.gamma, self.mu, self.L)
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", nu / 2.0)
        if not 0 < self.epsilon < nu:
            raise ParameterError(f"epsilon={self.epsilon} must lie in (0, nu={nu})")

    @property
    def nu(self) -> float:
        return compute_nu(self.gamma, self.mu, self.L)

    @property
    def X(self) -> float:
        return compute_Y_X(self.N, self.tau, self.gamma, self.L, self.beta)[1]


def _eta_terms(nu, X, delta, eps):
    first = 1.0 / (2.0 * (1.0 + delta))
    second = math.sqrt(2.0 * delta * eps * (nu - eps) / (2.0 * delta + eps)) / X
    return first, second


def eta_bound(nu: float, X: float, delta: float, epsilon: float) -> float:
    """``min{1/(2(1+delta)), sqrt(2 delta eps (nu - eps) / (2 delta + eps)) / X}`` from raw constants."""
    if not 0 < epsilon < nu:
        raise ParameterError(f"epsilon={epsilon} must lie in (0, nu={nu})")
    if not (delta > 0 and X > 0):
        raise ParameterError("delta and X must be positive")
    return min(_eta_terms(nu, X, delta, epsilon))


def eta_max(inputs: TheoryInputs) -> float:
    """Largest relaxation covered by the guarantee (strict upper bound)."""
    return eta_bound(inputs.nu, inputs.X, inputs.delta, inputs.epsilon)


def r_of_eta(eta: float, nu: float, eps: float) -> float:
    return 1.0 - eta * (nu - eps)


def q_of_eta(eta: float, X: float, delta: float, eps: float) -> float:
    return eta ** 3 * X * X * (1.0 / eps + eta * (1.0 + delta) / delta)


def contraction_margin(eta: float, nu: float, X: float, delta: float, eps: float) -> float:
    """``(1 - r - q) / eta``, evaluated without cancellation against 1."""
    return (nu - eps) - eta * eta * X * X * (1.0 / eps + eta * (1.0 + delta) / delta)


def rate(r: float, q: float, tau: int) -> float:
    """``(r + q)^(1 / (1 + 6 tau))``."""
    if r < 0 or q < 0:
        raise ParameterError("r and q must be nonnegative")
    if not r + q < 1:
        raise ParameterError(f"r + q = {r + q} >= 1: no linear guarantee")
    return (r + q) ** (1.0 / (1.0 + 6.0 * tau))


@dataclass(frozen=True)
class TheoryConstants:
    nu: float
    Y: float
    X: float
    eta_max: float
    delta: float
    epsilon: float
    tau: int

    def r(self, eta: float) -> float:
        return r_of_eta(eta, self.nu, self.epsilon)

    def q(self, eta: float) -> float:
        return q_of_eta(eta, self.X, self.delta, self.epsilon)

    def margin(self, eta: float) -> float:
        return contraction_margin(eta, self.nu, self.X, self.delta, self.epsilon)

    def rate(self, eta: float) -> float:
        """``(r + q)^(1 / (1 + 6 tau))`` via ``log1p``, accurate when ``r + q`` is within rounding of 1."""
        m = self.margin(eta)
        if not (eta > 0 and m > 0 and eta * m <= 1):
            raise ParameterError(f"eta={eta}: r + q >= 1, no linear guarantee")
        return math.exp(math.log1p(-eta * m) / (1.0 + 6.0 * self.tau))

    def guaranteed(self, eta: float) -> bool:
        return 0 < eta < self.eta_max

    def as_dict(self, eta: float | None = None) -> dict:
        out = {
            "nu": self.nu,
            "Y": self.Y,
            "X": self.X,
            "eta_max": self.eta_max,
            "delta": self.delta,
            "epsilon": self.epsilon,
            "tau": self.tau,
        }
        if eta is not None:
            out["eta"] = eta
            out["r"] = self.r(eta)
            out["q"] = self.q(eta)
            out["guaranteed"] = self.guaranteed(eta)
            m = self.margin(eta)
            out["rate"] = self.rate(eta) if m > 0 and out["r"] >= 0 else None
        return out


def theory_constants(inputs: TheoryInputs) -> TheoryConstants:
    Y, X = compute_Y_X(inputs.N, inputs.tau, inputs.gamma, inputs.L, inputs.beta)
    consts = TheoryConstants(
        nu=inputs.nu, Y=Y, X=X, eta_max=eta_max(inputs), delta=inputs.delta, epsilon=inputs.epsilon, tau=inputs.tau
    )
    # the defining property of eta_max, checked just inside the bound
    eta = consts.eta_max * (1 - 1e-9)
    if not consts.margin(eta) > 0:
        raise ParameterError("r + q >= 1 just below eta_max; inconsistent inputs")
    return consts


def best_delta_epsilon(nu: float, X: float, n_grid: int = 200) -> tuple[float, float, float]:
    """Grid search over ``(delta, eps) in (0, 10] x (0, nu)`` maximizing ``eta_max``.

    Returns ``(delta, eps, eta_max)``.
    """
    if not nu > 0:
        raise ParameterError("nu must be positive")
    deltas = np.linspace(10.0 / n_grid, 10.0, n_grid)
    epss = nu * np.linspace(1.0 / (n_grid + 1), n_grid / (n_grid + 1), n_grid)
    D, E = np.meshgrid(deltas, epss, indexing="ij")
    second = np.sqrt(2.0 * D * E * (nu - E) / (2.0 * D + E)) / X
    val = np.minimum(1.0 / (2.0 * (1.0 + D)), second)
    i, j = np.unravel_index(np.argmax(val), val.shape)
    return float(D[i, j]), float(E[i, j]), float(val[i, j])


@dataclass(frozen=True)
class IssReport:
    recursion_fraction: float
    envelope_ok: bool
    s: float
    first_violation: int | None
    worst_ratio: float
    checked: int = field(default=0)


def check_iss(V, r: float, q: float, tau: int) -> IssReport:
    """Test a nonnegative sequence against ``V_{k+1} <= r V_k + q max_{k - tau <= l <= k} V_l``.

    Reports the fraction of steps where that recursion holds and whether the
    whole sequence stays under ``V_0 s^k (1 + 1e-9)`` with
    ``s = (r + q)^(1 / (1 + tau))``.  Pass ``tau = 6 * tau_delay`` for the
    window of the asynchronous iteration.
    """
    V = np.asarray(V, dtype=float)
    if np.any(V < 0):
        raise ParameterError("V must be nonnegative")
    if not r + q < 1:
        raise ParameterError(f"r + q = {r + q} >= 1")
    s = (r + q) ** (1.0 / (1.0 + tau))
    n = V.size
    ok = 0
    for k in range(n - 1):
        window = V[max(0, k - tau): k + 1].max()
        if V[k + 1] <= r * V[k] + q * window + 1e-300:
            ok += 1
    ks = np.arange(n)
    env = V[0] * np.exp(ks * math.log(s)) * (1 + 1e-9)
    bad = np.nonzero(V > env)[0]
    ratio = np.max(V / np.where(env > 0, env, np.inf)) if n else 0.0
    return IssReport(
        recursion_fraction=ok / (n - 1) if n > 1 else 1.0,
        envelope_ok=bad.size == 0,
        s=s,
        first_violation=int(bad[0]) if bad.size else None,
        worst_ratio=float(ratio),
        checked=n,
    )
