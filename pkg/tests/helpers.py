"""Shared generators and numeric oracles for the test suite.

Everything here is deliberately independent of the library internals it is
used to check: norms and means are recomputed by quadrature, the transfer
operator by preimage averaging, and eigenvalues via numpy. Random objects are
always built from an explicit numpy Generator so every test is replayable.
"""

from __future__ import annotations

import math

import numpy as np

from vmstat.fourier import FourierPoly
from vmstat.kernels import CircleBase, KernelTerm, MarkovBase, SeparableKernel
from vmstat.markov import MarkovChain, StateFunction


def rng_for(label: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.uint64(label)))


# -- independent numeric oracles ------------------------------------------

GRID_N = 8192


def grid() -> np.ndarray:
    return (np.arange(GRID_N) + 0.5) / GRID_N


def quad_lp(values: np.ndarray, p: float) -> float:
    """L_p norm of sampled |values| by midpoint quadrature on [0,1)."""
    a = np.abs(np.asarray(values, dtype=complex))
    return float(np.mean(a**p) ** (1.0 / p))


def transfer_by_preimages(p: FourierPoly, m: int, x: np.ndarray) -> np.ndarray:
    """(V* p)(x) = (1/m) sum_u p((x+u)/m), evaluated pointwise."""
    acc = np.zeros_like(x, dtype=complex)
    for u in range(m):
        acc += p.evaluate((x + u) / m)
    return acc / m


def norm_ppf(q: float) -> float:
    """Standard normal quantile by bisection on erf; ~1e-13 accurate."""
    if not 0.0 < q < 1.0:
        raise ValueError("quantile must be inside (0,1)")
    lo, hi = -12.0, 12.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 0.5 * (1.0 + math.erf(mid / math.sqrt(2.0))) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- random object generators ---------------------------------------------


def random_poly(rng: np.random.Generator, max_abs_mode: int = 8,
                n_modes: int = 2, real: bool = False,
                zero_mean: bool = False) -> FourierPoly:
    modes: dict[int, complex] = {}
    ks = rng.choice(np.arange(-max_abs_mode, max_abs_mode + 1),
                    size=n_modes, replace=False)
    for k in ks:
        k = int(k)
        if zero_mean and k == 0:
            continue
        c = complex(rng.normal(), rng.normal())
        modes[k] = modes.get(k, 0) + c
        if real:
            modes[-k] = modes.get(-k, 0) + c.conjugate()
    if not modes:
        modes = {1: 1.0, -1: 1.0}
    return FourierPoly(modes)


def random_state_function(rng: np.random.Generator, s: int,
                          chain: MarkovChain | None = None,
                          zero_mean: bool = False) -> StateFunction:
    v = rng.normal(size=s)
    if zero_mean:
        if chain is None:
            raise ValueError("zero_mean needs the chain for its weights")
        v = v - float(np.dot(chain.pi, v))
    return StateFunction(v)


def random_ergodic_chain(rng: np.random.Generator, s: int) -> MarkovChain:
    # Dirichlet-style rows plus a floor keep every entry positive, hence
    # the chain is primitive and the ergodicity check passes.
    Q = rng.random((s, s)) + 0.05
    Q /= Q.sum(axis=1, keepdims=True)
    return MarkovChain(Q)


def symmetrize_terms(coeff: float, pattern: list, d: int) -> list[KernelTerm]:
    """All distinct slot assignments of a factor multiset, equal weights."""
    import itertools

    seen = set()
    out = []
    for perm in itertools.permutations(range(d)):
        key = tuple(id(pattern[perm[i]]) for i in range(d))
        if key in seen:
            continue
        seen.add(key)
        out.append(KernelTerm(coeff, tuple(pattern[perm[i]] for i in range(d))))
    return out


def random_symmetric_circle_kernel(rng: np.random.Generator, d: int,
                                   max_terms: int = 20,
                                   m: int = 2) -> SeparableKernel:
    base = CircleBase(m)
    terms: list[KernelTerm] = []
    u = random_poly(rng, max_abs_mode=6, n_modes=2, real=True)
    v = random_poly(rng, max_abs_mode=6, n_modes=2, real=True)
    while True:
        coeff = float(rng.normal())
        r = int(rng.integers(0, min(d, 2) + 1))
        pattern = [u] * (d - r) + [v] * r
        cand = symmetrize_terms(coeff, pattern, d)
        if terms and len(terms) + len(cand) > max_terms:
            break
        terms.extend(cand)
        if len(terms) >= max_terms or rng.random() < 0.4:
            break
    return SeparableKernel(d, base, tuple(terms))


def random_symmetric_markov_kernel(rng: np.random.Generator, d: int,
                                   chain: MarkovChain,
                                   max_terms: int = 20) -> SeparableKernel:
    base = MarkovBase(chain)
    terms: list[KernelTerm] = []
    u = random_state_function(rng, chain.n_states)
    v = random_state_function(rng, chain.n_states)
    while True:
        coeff = float(rng.normal())
        r = int(rng.integers(0, min(d, 2) + 1))
        pattern = [u] * (d - r) + [v] * r
        cand = symmetrize_terms(coeff, pattern, d)
        if terms and len(terms) + len(cand) > max_terms:
            break
        terms.extend(cand)
        if len(terms) >= max_terms or rng.random() < 0.4:
            break
    return SeparableKernel(d, base, tuple(terms))


def random_canonical_pair_kernel(rng: np.random.Generator,
                                 n_pairs: int = 3,
                                 max_abs_mode: int = 8,
                                 m: int = 2) -> SeparableKernel:
    """Real symmetric canonical arity-2 kernel built from mode pairs.

    Each pair (k1, k2) of nonzero modes contributes
    c*(e_k1 x e_k2 + e_k2 x e_k1) plus the conjugate pair, so every slot
    integrates to zero and the kernel is real on the diagonal torus.
    """
    base = CircleBase(m)
    terms: list[KernelTerm] = []
    nonzero = [k for k in range(-max_abs_mode, max_abs_mode + 1) if k != 0]
    for _ in range(n_pairs):
        k1, k2 = (int(k) for k in rng.choice(nonzero, size=2, replace=True))
        c = float(rng.normal())
        for a, b in {(k1, k2), (k2, k1), (-k1, -k2), (-k2, -k1)}:
            terms.append(
                KernelTerm(c, (FourierPoly({a: 1.0}), FourierPoly({b: 1.0}))))
    return SeparableKernel(2, base, tuple(terms))
