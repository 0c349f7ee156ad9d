"""Finite-state Markov chains: stationary laws, Poisson equation, mixing.

A chain is a row-stochastic matrix Q over s states.  Ergodicity is
checked at construction by strict positivity of Q^s.  The asymptotic
variance of partial sums of a centered state function f follows the
resolvent route: solve (I - Q) phi = f with pi-mean zero, then

    sigma^2 = <phi, phi>_pi - <Q phi, Q phi>_pi,

which equals the covariance series Var f + 2 sum_{k>=1} Cov(f_0, f_k).
See docs/correspondence.md for how this maps onto the circle-side
transfer operator algebra; all limit-variance code for chains routes
through :func:`green_kubo_variance`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_STOCHASTIC_TOL = 1e-10


class NotErgodicError(ValueError):
    """Raised when a chain fails the positivity test for ergodicity."""


@dataclass(frozen=True, eq=False)
class StateFunction:
    """Real observable on the state space, one value per state."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1:
            raise ValueError("state function must be a 1-d array")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)

    def to_json_dict(self) -> dict:
        return {"values": [float(v) for v in self.values]}

    @classmethod
    def from_json_dict(cls, data: dict) -> "StateFunction":
        if set(data) != {"values"}:
            extra = set(data) - {"values"}
            raise ValueError(f"state function JSON must have exactly the key 'values', got extra {sorted(extra)}")
        return cls(np.asarray(data["values"], dtype=np.float64))


def _validate_stochastic(Q: np.ndarray) -> np.ndarray:
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError("transition matrix must be square")
    if Q.shape[0] < 1:
        raise ValueError("transition matrix must have at least one state")
    if np.any(Q < -_STOCHASTIC_TOL):
        raise ValueError("transition matrix has a negative entry")
    rows = Q.sum(axis=1)
    if np.any(np.abs(rows - 1.0) > _STOCHASTIC_TOL):
        raise ValueError("transition matrix rows must sum to 1")
    return np.clip(Q, 0.0, None)


def _is_primitive(Q: np.ndarray) -> bool:
    # positivity of Q^s, the contract's ergodicity test
    return bool(np.all(np.linalg.matrix_power(Q, Q.shape[0]) > 0.0))


def stationary_dist(Q: np.ndarray) -> np.ndarray:
    """Unique probability row vector with pi Q = pi.

    Raises NotErgodicError when Q^s has a zero entry.
    """
    Q = _validate_stochastic(Q)
    if not _is_primitive(Q):
        raise NotErgodicError("chain is not ergodic: Q^s has a zero entry")
    s = Q.shape[0]
    # replace one balance equation by the normalization sum(pi) = 1
    A = Q.T - np.eye(s)
    A[-1, :] = 1.0
    b = np.zeros(s)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


class MarkovChain:
    """Ergodic finite chain with its stationary distribution precomputed."""

    def __init__(self, Q) -> None:
        self.Q = _validate_stochastic(Q)
        self.ergodic = _is_primitive(self.Q)
        if not self.ergodic:
            raise NotErgodicError("chain is not ergodic: Q^s has a zero entry")
        self.pi = stationary_dist(self.Q)

    @property
    def n_states(self) -> int:
        return self.Q.shape[0]

    def mean(self, f: StateFunction) -> float:
        return float(self.pi @ f.values)

    def inner(self, f: StateFunction, g: StateFunction) -> float:
        """<f, g> with respect to the stationary distribution."""
        return float(np.sum(self.pi * f.values * g.values))

    def lp_norm(self, f: StateFunction, exponent: float) -> float:
        if exponent < 1:
            raise ValueError("exponent must be >= 1")
        return float(np.sum(self.pi * np.abs(f.values) ** exponent) ** (1.0 / exponent))

    def apply(self, f: StateFunction, power: int = 1) -> StateFunction:
        """Q^power f, the conditional expectation `power` steps ahead."""
        if power < 0:
            raise ValueError("power must be nonnegative")
        v = f.values
        for _ in range(power):
            v = self.Q @ v
        return StateFunction(v)

    def to_json_dict(self) -> dict:
        return {"Q": [[float(q) for q in row] for row in self.Q]}

    def __repr__(self) -> str:
        return f"MarkovChain(s={self.n_states})"


def solve_poisson(chain: MarkovChain, f: StateFunction, tol: float = 1e-10) -> StateFunction:
    """Solve (I - Q) phi = f with pi . phi = 0 for pi-centered f.

    Uses the fundamental matrix: (I - Q + 1 pi^T) is nonsingular for an
    ergodic chain and its solution automatically has pi-mean zero.
    """
    if len(f) != chain.n_states:
        raise ValueError("state function length does not match the chain")
    if abs(chain.mean(f)) > tol:
        raise ValueError("Poisson equation needs a pi-centered right-hand side")
    s = chain.n_states
    A = np.eye(s) - chain.Q + np.outer(np.ones(s), chain.pi)
    phi = np.linalg.solve(A, f.values)
    return StateFunction(phi)


def green_kubo_variance(chain: MarkovChain, f: StateFunction) -> float:
    """Asymptotic variance of n^{-1/2} sum f(X_k) for pi-centered f."""
    phi = solve_poisson(chain, f)
    qphi = chain.apply(phi)
    sigma2 = chain.inner(phi, phi) - chain.inner(qphi, qphi)
    # nonnegative up to roundoff because Q is an L2(pi) contraction
    return max(sigma2, 0.0)


def mixing_coefficients(chain: MarkovChain, n_max: int) -> np.ndarray:
    """Table of uniform mixing coefficients for lags 0..n_max.

    Returns an array with rows (n, phi(n), psi(n)) where

        phi(n) = max_i (1/2) sum_j |(Q^n)_{ij} - pi_j|
        psi(n) = max_{i,j} |(Q^n)_{ij} - pi_j| / pi_j
    """
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    out = np.zeros((n_max + 1, 3))
    P = np.eye(chain.n_states)
    for n in range(n_max + 1):
        dev = P - chain.pi[None, :]
        out[n, 0] = n
        out[n, 1] = 0.5 * np.max(np.sum(np.abs(dev), axis=1))
        out[n, 2] = np.max(np.abs(dev) / chain.pi[None, :])
        P = P @ chain.Q
    return out
