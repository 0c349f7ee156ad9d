"""Hoeffding decomposition of separable kernels.

Integrating out slot l is the operator E^l that replaces the slot-l
factor of every term by its mean.  For a subset S of slots the component

    Q_S f = prod_{l not in S} E^l  prod_{l in S} (I - E^l) f

depends only on the slots in S and integrates to zero in each of them.
The components sum back to f.  For symmetric kernels the components of
equal cardinality coincide up to slot relabeling, so the decomposition
collapses to one canonical kernel per level m, stored at native arity m.
Slots are 0-based.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .fourier import FourierPoly
from .kernels import (
    COEFF_TOL,
    Base,
    CircleBase,
    KernelTerm,
    SeparableKernel,
    constant_kernel,
    constant_observable,
    kernel_add,
    kernel_eval,
    kernel_sup_coeff,
    mean_factor,
    observable_mean,
    same_base,
    zero_kernel,
)
from .markov import StateFunction


class SymmetryError(ValueError):
    """Raised when a kernel required to be symmetric is not.

    Carries a witness tuple where f(x) != f(swapped x) when one was found.
    """

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


def integrate_out(f: SeparableKernel, slot: int) -> SeparableKernel:
    """Replace slot ``slot`` by its mean in every term."""
    if not 0 <= slot < f.arity:
        raise ValueError(f"slot must be in [0, {f.arity}), got {slot}")
    return _integrate_out_set(f, (slot,))


def _integrate_out_set(f: SeparableKernel, slots) -> SeparableKernel:
    slots = frozenset(slots)
    terms = []
    for t in f.terms:
        factors = tuple(
            mean_factor(f.base, u) if j in slots else u
            for j, u in enumerate(t.factors)
        )
        terms.append(KernelTerm(t.coeff, factors))
    return SeparableKernel(f.arity, f.base, tuple(terms))


def hoeffding_components(f: SeparableKernel) -> dict[frozenset, SeparableKernel]:
    """All 2^d components Q_S f, keyed by the slot subset S."""
    d = f.arity
    slots = tuple(range(d))
    out: dict[frozenset, SeparableKernel] = {}
    for r in range(d + 1):
        for S in itertools.combinations(slots, r):
            Sset = frozenset(S)
            comp = zero_kernel(d, f.base)
            complement = tuple(j for j in slots if j not in Sset)
            for k in range(len(S) + 1):
                for A in itertools.combinations(S, k):
                    piece = _integrate_out_set(f, A + complement)
                    if k % 2 == 1:
                        piece = SeparableKernel(
                            d, f.base,
                            tuple(KernelTerm(-t.coeff, t.factors) for t in piece.terms),
                        )
                    comp = kernel_add(comp, piece)
            out[Sset] = comp
    return out


def is_canonical(f: SeparableKernel, tol: float = COEFF_TOL) -> bool:
    """True when integrating out every single slot gives the zero kernel."""
    return all(
        kernel_sup_coeff(integrate_out(f, slot)) <= tol for slot in range(f.arity)
    )


def _term_signature(t: KernelTerm):
    factors = []
    for u in t.factors:
        if isinstance(u, FourierPoly):
            sig = tuple(
                (k, round(c.real, 12), round(c.imag, 12)) for k, c in sorted(u.items())
            )
        else:
            sig = tuple(round(float(v), 12) for v in u.values)
        factors.append(sig)
    return round(t.coeff, 12), tuple(factors)


def _multiset_symmetric(f: SeparableKernel) -> bool:
    from collections import Counter

    base = Counter(_term_signature(t) for t in f.terms)
    for j in range(f.arity - 1):
        swapped = Counter()
        for t in f.terms:
            factors = list(t.factors)
            factors[j], factors[j + 1] = factors[j + 1], factors[j]
            swapped[_term_signature(KernelTerm(t.coeff, tuple(factors)))] += 1
        if swapped != base:
            return False
    return True


def _sample_points(f: SeparableKernel, count: int, seed: int = 20260817):
    rng = np.random.Generator(np.random.Philox(key=seed))
    if isinstance(f.base, CircleBase):
        return rng.random((count, f.arity))
    s = f.base.chain.n_states
    return rng.integers(0, s, size=(count, f.arity))


def find_asymmetry_witness(f: SeparableKernel, tol: float = 1e-9, count: int = 64):
    """A tuple x with f(x) != f(x with two slots swapped), or None."""
    if f.arity == 1:
        return None
    points = _sample_points(f, count)
    for row in points:
        x = tuple(row.tolist())
        v = kernel_eval(f, x)
        for j in range(f.arity - 1):
            y = list(x)
            y[j], y[j + 1] = y[j + 1], y[j]
            w = kernel_eval(f, tuple(y))
            if abs(v - w) > tol:
                return x, j, v, w
    return None


def is_symmetric(f: SeparableKernel, tol: float = 1e-9) -> bool:
    """Invariance under slot permutations.

    Tries an exact multiset match of the term representation under
    adjacent transpositions, then falls back to pointwise sampling.
    """
    if f.arity == 1:
        return True
    if _multiset_symmetric(f):
        return True
    return find_asymmetry_witness(f, tol=tol) is None


@dataclass(frozen=True, eq=False)
class HoeffdingParts:
    """Symmetric Hoeffding decomposition: scalar level plus one kernel per arity.

    levels[m-1] is the canonical symmetric kernel of arity m; the
    constant is the full mean of the kernel.
    """

    arity: int
    base: Base
    constant: float
    levels: tuple

    def __post_init__(self):
        if len(self.levels) != self.arity:
            raise ValueError("need one level kernel per arity 1..d")
        for m, g in enumerate(self.levels, start=1):
            if g.arity != m or not same_base(g.base, self.base):
                raise ValueError("level kernels must have arity 1..d over the same base")

    def degree(self, tol: float = COEFF_TOL) -> int:
        """Smallest m with a nonvanishing level, d+1 for a constant kernel."""
        for m, g in enumerate(self.levels, start=1):
            if kernel_sup_coeff(g) > tol:
                return m
        return self.arity + 1

    def to_json_dict(self) -> dict:
        return {
            "R0": self.constant,
            "parts": [g.to_json_dict() for g in self.levels],
        }


def _strip_constant_slots(comp: SeparableKernel, keep: int) -> SeparableKernel:
    """Drop slots keep..d-1 whose factors are constants, folding them in."""
    if keep == 0:
        raise ValueError("use the scalar level for arity zero")
    terms = []
    for t in comp.terms:
        scalar = 1.0 + 0.0j
        for u in t.factors[keep:]:
            scalar *= observable_mean(comp.base, u)
        factors = list(t.factors[:keep])
        first = factors[0]
        if isinstance(first, FourierPoly):
            factors[0] = scalar * first
        else:
            if abs(scalar.imag) > 1e-10:
                raise ValueError("complex mass cannot be folded into a state function")
            factors[0] = StateFunction(scalar.real * first.values)
        terms.append(KernelTerm(t.coeff, tuple(factors)))
    return SeparableKernel(keep, comp.base, tuple(terms))


def symmetric_parts(f: SeparableKernel, tol: float = 1e-9) -> HoeffdingParts:
    """Hoeffding decomposition of a symmetric kernel, one part per level.

    Raises SymmetryError (with a witness tuple when one is found) if the
    kernel is not symmetric.
    """
    if not is_symmetric(f, tol=tol):
        witness = find_asymmetry_witness(f, tol=tol)
        msg = "kernel is not symmetric"
        if witness is not None:
            x, j, v, w = witness
            msg += f": f{tuple(x)} = {v:.12g} but swapping slots {j},{j + 1} gives {w:.12g}"
        raise SymmetryError(msg, witness=witness)
    d = f.arity
    mean_all = _integrate_out_set(f, range(d))
    r0 = complex(sum(
        t.coeff * np.prod([observable_mean(f.base, u) for u in t.factors])
        for t in mean_all.terms
    ))
    if abs(r0.imag) > 1e-10:
        raise ValueError("kernel mean is not real")
    levels = []
    for m in range(1, d + 1):
        # the leading-slot component; symmetry makes the others relabelings
        S = tuple(range(m))
        complement = tuple(range(m, d))
        comp = zero_kernel(d, f.base)
        for k in range(m + 1):
            for A in itertools.combinations(S, k):
                piece = _integrate_out_set(f, A + complement)
                if k % 2 == 1:
                    piece = SeparableKernel(
                        d, f.base,
                        tuple(KernelTerm(-t.coeff, t.factors) for t in piece.terms),
                    )
                comp = kernel_add(comp, piece)
        levels.append(_strip_constant_slots(comp, m))
    return HoeffdingParts(arity=d, base=f.base, constant=float(r0.real), levels=tuple(levels))


def reconstruct(parts: HoeffdingParts) -> SeparableKernel:
    """Sum the levels back into an arity-d kernel equal to the original."""
    d = parts.arity
    base = parts.base
    out = zero_kernel(d, base)
    if parts.constant != 0.0:
        out = kernel_add(out, constant_kernel(parts.constant, d, base))
    one = constant_observable(base, 1.0)
    for m, g in enumerate(parts.levels, start=1):
        for S in itertools.combinations(range(d), m):
            terms = []
            for t in g.terms:
                factors: list = [one] * d
                for pos, u in zip(S, t.factors):
                    factors[pos] = u
                terms.append(KernelTerm(t.coeff, tuple(factors)))
            out = kernel_add(out, SeparableKernel(d, base, tuple(terms)))
    return out
