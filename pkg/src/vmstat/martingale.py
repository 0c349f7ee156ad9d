"""Martingale and coboundary structure of canonical kernels, and limit laws.

For a canonical kernel f over the circle base the slotwise adjoint
series g = sum_{k >= 0} V*^k f is a finite trigonometric kernel because
every transfer orbit of a nonzero mode terminates.  Splitting g with the
slotwise projections E_j = V^{e_j} V*^{e_j} isolates a part that is a
martingale increment in both slots plus coboundary corrections:

    f = g0 + (V^{e_1} - I) g1 + (V^{e_2} - I) g2
           + (V^{e_1} - I)(V^{e_2} - I) g12

with E_1 g0 = E_2 g0 = 0, E_2 g1 = 0, E_1 g2 = 0.  The degenerate limit
of arity-2 statistics is the quadratic form of g0, diagonalized here in
an orthonormal real basis; the nondegenerate limit is Gaussian with
variance determined by the arity-1 adjoint series.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._jacobi import jacobi_eigh
from ._seeding import stream
from .fourier import (
    EQ_TOL,
    FourierPoly,
    adjoint_orbit_sum,
    apply_transfer,
    lp_norm,
)
from .kernels import (
    COEFF_TOL,
    CircleBase,
    KernelTerm,
    MarkovBase,
    SeparableKernel,
    coordinate_op,
    diag_restrict,
    expand_modes,
    kernel_add,
    kernel_scale,
    kernel_sup_coeff,
    kernels_allclose,
    projective_bound,
    to_tensor,
)
from .hoeffding import is_symmetric
from .markov import StateFunction, green_kubo_variance, solve_poisson

#: eigenvalues below this modulus are dropped from spectral results
SPECTRUM_TOL = 1e-12

#: combinatorial constant for the growth bound at arity 2: the coboundary
#: expansion of each partial sum multiplies the projective bound by at
#: most 2^m and the slot subsets contribute another 2^m; see
#: docs/constants.md.
GROWTH_CONSTANT_D2 = 16.0


# ---------------------------------------------------------------------------
# limit laws


@dataclass(frozen=True)
class LimitLaw:
    """Limiting distribution of a normalized statistic.

    kind "gaussian" with a variance, or "wcs" (weighted chi square)
    with weights lambdas applied to squares of independent standard
    normals.
    """

    kind: str
    variance: float | None = None
    lambdas: tuple[float, ...] | None = None

    @classmethod
    def gaussian(cls, variance: float) -> "LimitLaw":
        if variance < 0:
            raise ValueError("variance must be nonnegative")
        return cls(kind="gaussian", variance=float(variance), lambdas=None)

    @classmethod
    def weighted_chi_square(cls, lambdas) -> "LimitLaw":
        lams = tuple(
            sorted((float(x) for x in lambdas if abs(x) > SPECTRUM_TOL),
                   key=abs, reverse=True)
        )
        return cls(kind="wcs", variance=None, lambdas=lams)

    def mean(self) -> float:
        if self.kind == "gaussian":
            return 0.0
        return float(sum(self.lambdas))

    def var(self) -> float:
        if self.kind == "gaussian":
            return float(self.variance)
        return float(2.0 * sum(x * x for x in self.lambdas))

    def to_json_dict(self) -> dict:
        if self.kind == "gaussian":
            return {"kind": "gaussian", "variance": self.variance}
        return {"kind": "wcs", "lambdas": list(self.lambdas)}

    @classmethod
    def from_json_dict(cls, data: dict) -> "LimitLaw":
        kind = data.get("kind")
        if kind == "gaussian":
            if set(data) != {"kind", "variance"}:
                raise ValueError("gaussian law JSON takes exactly 'kind' and 'variance'")
            return cls.gaussian(float(data["variance"]))
        if kind == "wcs":
            if set(data) != {"kind", "lambdas"}:
                raise ValueError("wcs law JSON takes exactly 'kind' and 'lambdas'")
            return cls.weighted_chi_square(data["lambdas"])
        raise ValueError(f"unknown law kind {kind!r}")


def sample_limit_law(law: LimitLaw, n_samples: int, seed: int) -> np.ndarray:
    """Exact deterministic sampler for a limit law (Philox keyed by seed)."""
    if n_samples < 0:
        raise ValueError("n_samples must be nonnegative")
    rng = stream(seed)
    if law.kind == "gaussian":
        return np.sqrt(law.variance) * rng.standard_normal(n_samples)
    if not law.lambdas:
        return np.zeros(n_samples)
    normals = rng.standard_normal((n_samples, len(law.lambdas)))
    return (normals ** 2) @ np.asarray(law.lambdas)


# ---------------------------------------------------------------------------
# adjoint series


def _canonical_expansion(f: SeparableKernel) -> dict[tuple[int, ...], complex]:
    modes = expand_modes(f)
    for key in modes:
        if any(k == 0 for k in key):
            raise ValueError(
                "kernel is not canonical: expansion has a constant slot at "
                f"{key}"
            )
    return modes


def adjoint_series_sum(f: SeparableKernel) -> SeparableKernel:
    """Sum of all slotwise adjoint applications sum_{k >= 0} V*^k f.

    Circle base: exact, one term per expanded mode component, each slot
    holding the finite transfer orbit sum of its mode.  Markov base: the
    slotwise resolvent (I - Q)^{-1} applied to centered factors.
    """
    if isinstance(f.base, CircleBase):
        m = f.base.m
        terms = []
        for key, lam in _canonical_expansion(f).items():
            factors = [adjoint_orbit_sum(FourierPoly.mode(k), m) for k in key]
            factors[0] = lam * factors[0]
            terms.append(KernelTerm(1.0, tuple(factors)))
        return SeparableKernel(f.arity, f.base, tuple(terms))
    chain = f.base.chain
    terms = []
    for t in f.terms:
        factors = []
        for u in t.factors:
            if abs(chain.mean(u)) > 1e-10:
                raise ValueError("markov factors must be centered for the adjoint series")
            factors.append(solve_poisson(chain, u))
        terms.append(KernelTerm(t.coeff, tuple(factors)))
    return SeparableKernel(f.arity, f.base, tuple(terms))


def clt_variance(r1: SeparableKernel) -> float:
    """Asymptotic variance of partial sums of an arity-1 canonical kernel.

    Circle base: with g = sum_{k>=0} V*^k r1 the value is
    |g|_2^2 - |V* g|_2^2.  Markov base: the Green-Kubo value through the
    chain's Poisson equation.
    """
    if r1.arity != 1:
        raise ValueError("variance takes the arity-1 canonical part")
    u = diag_restrict(r1)
    if isinstance(f_base := r1.base, MarkovBase):
        return green_kubo_variance(f_base.chain, u)
    m = r1.base.m
    if abs(u.coeff(0)) > 1e-10:
        raise ValueError("arity-1 part must have mean zero")
    g1 = adjoint_orbit_sum(u, m)
    tail = apply_transfer(g1, m)
    sigma2 = lp_norm(g1, 2) ** 2 - lp_norm(tail, 2) ** 2
    return max(sigma2, 0.0)


# ---------------------------------------------------------------------------
# arity-2 martingale-coboundary decomposition


@dataclass(frozen=True, eq=False)
class MartingaleCoboundaryParts:
    """Four-part splitting of the adjoint series of an arity-2 kernel.

    martingale is a martingale increment in both slots; slot1_coboundary
    and slot2_coboundary enter under a discrete derivative in one slot;
    double_coboundary under both.  series is the full adjoint series g.
    """

    martingale: SeparableKernel
    slot1_coboundary: SeparableKernel
    slot2_coboundary: SeparableKernel
    double_coboundary: SeparableKernel
    series: SeparableKernel


def _slot_projection(g: SeparableKernel, slot: int) -> SeparableKernel:
    """E_slot g = V^{e_slot} V*^{e_slot} g, the modes divisible by m in that slot."""
    e = [0] * g.arity
    e[slot] = 1
    return coordinate_op(coordinate_op(g, e, adjoint=True), e, adjoint=False)


def _kernel_sub(a: SeparableKernel, b: SeparableKernel) -> SeparableKernel:
    return kernel_add(a, kernel_scale(b, -1.0))


def martingale_coboundary_d2(f: SeparableKernel, validate: bool = True) -> MartingaleCoboundaryParts:
    """Split an arity-2 canonical circle kernel into martingale and coboundary parts."""
    if f.arity != 2:
        raise ValueError("this decomposition is for arity-2 kernels")
    if not isinstance(f.base, CircleBase):
        raise ValueError("this decomposition is defined on the circle base")
    g = adjoint_series_sum(f)
    vs1 = coordinate_op(g, (1, 0), adjoint=True)
    vs2 = coordinate_op(g, (0, 1), adjoint=True)
    e1g = _slot_projection(g, 0)
    e2g = _slot_projection(g, 1)
    e1e2g = _slot_projection(e1g, 1)
    g0 = kernel_add(_kernel_sub(_kernel_sub(g, e1g), e2g), e1e2g)
    g1 = _kernel_sub(vs1, _slot_projection(vs1, 1))
    g2 = _kernel_sub(vs2, _slot_projection(vs2, 0))
    g12 = coordinate_op(vs1, (0, 1), adjoint=True)
    parts = MartingaleCoboundaryParts(
        martingale=g0,
        slot1_coboundary=g1,
        slot2_coboundary=g2,
        double_coboundary=g12,
        series=g,
    )
    if validate:
        checks = (
            _slot_projection(g0, 0),
            _slot_projection(g0, 1),
            _slot_projection(g1, 1),
            _slot_projection(g2, 0),
        )
        for c in checks:
            if kernel_sup_coeff(c) > COEFF_TOL:
                raise AssertionError("conditional-expectation condition violated")
    return parts


def reconstruct_from_parts(parts: MartingaleCoboundaryParts) -> SeparableKernel:
    """Invert the decomposition: the original kernel from the four parts."""
    g0, g1, g2, g12 = (
        parts.martingale,
        parts.slot1_coboundary,
        parts.slot2_coboundary,
        parts.double_coboundary,
    )
    shift1 = lambda h: coordinate_op(h, (1, 0), adjoint=False)
    shift2 = lambda h: coordinate_op(h, (0, 1), adjoint=False)
    out = g0
    out = kernel_add(out, _kernel_sub(shift1(g1), g1))
    out = kernel_add(out, _kernel_sub(shift2(g2), g2))
    both = _kernel_sub(shift1(shift2(g12)), shift1(g12))
    both = _kernel_sub(both, _kernel_sub(shift2(g12), g12))
    out = kernel_add(out, both)
    return out


# ---------------------------------------------------------------------------
# spectral decomposition of the martingale part


def _real_symmetric_mode_matrix(g0: SeparableKernel) -> tuple[np.ndarray, int]:
    modes = expand_modes(g0)
    kmax = 0
    for (k1, k2), c in modes.items():
        partner = modes.get((-k1, -k2), 0.0)
        if abs(np.conj(c) - partner) > 1e-9:
            raise ValueError("kernel is not real-valued")
        kmax = max(kmax, abs(k1), abs(k2))
    if kmax == 0:
        return np.zeros((0, 0)), 0
    dim = 2 * kmax
    inv_sqrt2 = 1.0 / np.sqrt(2.0)

    def hat(a: int, k: int) -> complex:
        # integral of e_k against basis function a
        if a < kmax:  # cos, frequency a+1
            j = a + 1
            return ((k == j) + (k == -j)) * inv_sqrt2
        j = a - kmax + 1  # sin
        return 1j * ((k == j) - (k == -j)) * inv_sqrt2

    M = np.zeros((dim, dim), dtype=np.complex128)
    for (k1, k2), c in modes.items():
        for a in (abs(k1) - 1, kmax + abs(k1) - 1):
            ha = hat(a, k1)
            if ha == 0:
                continue
            for b in (abs(k2) - 1, kmax + abs(k2) - 1):
                hb = hat(b, k2)
                if hb != 0:
                    M[a, b] += c * ha * hb
    if np.max(np.abs(M.imag), initial=0.0) > 1e-9:
        raise ValueError("mode matrix of a non-real kernel")
    return M.real, kmax


def _basis_poly(a: int, kmax: int) -> FourierPoly:
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    if a < kmax:
        j = a + 1
        return FourierPoly({j: inv_sqrt2, -j: inv_sqrt2})
    j = a - kmax + 1
    return FourierPoly({j: -1j * inv_sqrt2, -j: 1j * inv_sqrt2})


def spectral_decompose(g0: SeparableKernel, tol: float = SPECTRUM_TOL):
    """Eigenpairs (lambda_m, phi_m) of a symmetric real arity-2 kernel.

    The eigenfunctions are orthonormal in L2 of the invariant measure
    and the kernel equals sum_m lambda_m phi_m(x) phi_m(y).  Pairs with
    |lambda| <= tol are dropped; the result is sorted by descending
    |lambda|.
    """
    if g0.arity != 2:
        raise ValueError("spectral decomposition takes an arity-2 kernel")
    if not is_symmetric(g0):
        raise ValueError("spectral decomposition needs a symmetric kernel")
    if isinstance(g0.base, CircleBase):
        M, kmax = _real_symmetric_mode_matrix(g0)
        if kmax == 0:
            return []
        w, V = jacobi_eigh(M)
        pairs = []
        for i in range(len(w)):
            if abs(w[i]) <= tol:
                continue
            phi = FourierPoly.zero()
            for a in range(2 * kmax):
                if abs(V[a, i]) > 1e-15:
                    phi = phi + V[a, i] * _basis_poly(a, kmax)
            pairs.append((float(w[i]), phi))
        pairs.sort(key=lambda p: abs(p[0]), reverse=True)
        return pairs
    chain = g0.base.chain
    K = to_tensor(g0)
    sq = np.sqrt(chain.pi)
    M = sq[:, None] * K * sq[None, :]
    w, V = jacobi_eigh(M)
    pairs = []
    for i in range(len(w)):
        if abs(w[i]) <= tol:
            continue
        pairs.append((float(w[i]), StateFunction(V[:, i] / sq)))
    pairs.sort(key=lambda p: abs(p[0]), reverse=True)
    return pairs


def degenerate_limit_law(f: SeparableKernel) -> LimitLaw:
    """Weighted chi-square limit of the arity-2 degenerate statistic of f."""
    parts = martingale_coboundary_d2(f)
    pairs = spectral_decompose(parts.martingale)
    return LimitLaw.weighted_chi_square([lam for lam, _ in pairs])


# ---------------------------------------------------------------------------
# growth diagnostic


def growth_ratios(
    f: SeparableKernel,
    max_exponent: int = 10,
    norm_exponent: float = 1.0,
) -> list[tuple[int, float]]:
    """Diagonal growth ratios |D_d sum_{0<=k<n} V*^k f|_r / n^{d/2} at dyadic n.

    The partial sums stabilize once n exceeds the longest transfer orbit,
    so the ratios decay like n^{-d/2}; boundedness by the documented
    constant times projective_bound of the full series is the checkable
    form of the growth estimate.
    """
    if not isinstance(f.base, CircleBase):
        raise ValueError("the growth diagnostic is defined on the circle base")
    m = f.base.m
    d = f.arity
    modes = _canonical_expansion(f)
    out = []
    for e in range(1, max_exponent + 1):
        n = 2 ** e
        terms = []
        for key, lam in modes.items():
            factors = []
            for k in key:
                orbit: dict[int, complex] = {}
                kk = k
                steps = 0
                while steps < n:
                    orbit[kk] = orbit.get(kk, 0.0) + 1.0
                    steps += 1
                    if kk % m != 0:
                        break
                    kk //= m
                factors.append(FourierPoly(orbit))
            factors[0] = lam * factors[0]
            terms.append(KernelTerm(1.0, tuple(factors)))
        s_n = SeparableKernel(d, f.base, tuple(terms))
        diag = diag_restrict(s_n)
        ratio = lp_norm(diag, norm_exponent) / float(n) ** (d / 2.0)
        out.append((n, float(ratio)))
    return out


def growth_bound(f: SeparableKernel, exponent: float = 2.0) -> float:
    """Documented bound for the growth ratios of an arity-2 kernel."""
    if f.arity != 2:
        raise ValueError("the recorded constant is for arity-2 kernels")
    g = adjoint_series_sum(f)
    return GROWTH_CONSTANT_D2 * projective_bound(g, exponent)
