"""Sparse trigonometric polynomials on the circle and the m-adic operators.

A point of the circle is a fraction of the full turn, x in [0, 1).  The
basis functions are e_k(x) = exp(2 pi i k x) for integer k, and a
polynomial is a finite complex combination sum_k c_k e_k stored sparsely
as {k: c_k}.  For the map T x = m x mod 1 the composition operator acts
on modes as k -> m k, and its L2 adjoint (the averaging operator over
the m preimages) acts as k -> k / m when m divides k and annihilates the
mode otherwise.  Both actions are exact on this representation.

Norms: the L2 norm is computed exactly from coefficients, every other
L_p norm by uniform-grid quadrature on the circle.
"""

from __future__ import annotations

from typing import Iterable, Mapping

import numpy as np

#: coefficients below this modulus are dropped on normalization
DROP_TOL = 1e-15
#: two polynomials are equal iff coefficients agree within this
EQ_TOL = 1e-12

_TWO_PI_I = 2j * np.pi


class FourierPoly:
    """Immutable sparse trigonometric polynomial sum_k c_k e_k."""

    __slots__ = ("_coeffs",)

    def __init__(self, coeffs: Mapping[int, complex] | Iterable[tuple[int, complex]] = ()):
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        acc: dict[int, complex] = {}
        for k, c in items:
            if not isinstance(k, (int, np.integer)):
                raise TypeError(f"mode index must be an integer, got {k!r}")
            acc[int(k)] = acc.get(int(k), 0.0) + complex(c)
        self._coeffs = {k: c for k, c in acc.items() if abs(c) >= DROP_TOL}

    @classmethod
    def mode(cls, k: int, c: complex = 1.0) -> "FourierPoly":
        return cls({k: c})

    @classmethod
    def constant(cls, c: complex) -> "FourierPoly":
        return cls({0: c})

    @classmethod
    def zero(cls) -> "FourierPoly":
        return cls()

    def coeff(self, k: int) -> complex:
        return self._coeffs.get(k, 0.0)

    def items(self):
        return self._coeffs.items()

    def modes(self) -> list[int]:
        return sorted(self._coeffs)

    def max_mode(self) -> int:
        """Largest |k| with a nonzero coefficient, 0 for the zero polynomial."""
        return max((abs(k) for k in self._coeffs), default=0)

    def is_zero(self, tol: float = EQ_TOL) -> bool:
        return all(abs(c) <= tol for c in self._coeffs.values())

    def is_real(self, tol: float = EQ_TOL) -> bool:
        """True when the polynomial is real-valued, i.e. c_{-k} = conj(c_k)."""
        return all(
            abs(c - np.conj(self._coeffs.get(-k, 0.0))) <= tol
            for k, c in self._coeffs.items()
        )

    def allclose(self, other: "FourierPoly", tol: float = EQ_TOL) -> bool:
        keys = set(self._coeffs) | set(other._coeffs)
        return all(abs(self.coeff(k) - other.coeff(k)) <= tol for k in keys)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FourierPoly):
            return NotImplemented
        return self.allclose(other)

    __hash__ = None  # tolerance-based equality

    def __add__(self, other: "FourierPoly") -> "FourierPoly":
        out = dict(self._coeffs)
        for k, c in other._coeffs.items():
            out[k] = out.get(k, 0.0) + c
        return FourierPoly(out)

    def __sub__(self, other: "FourierPoly") -> "FourierPoly":
        return self + (-1.0) * other

    def __neg__(self) -> "FourierPoly":
        return (-1.0) * self

    def __mul__(self, other):
        if isinstance(other, FourierPoly):
            return poly_product(self, other)
        return FourierPoly({k: c * complex(other) for k, c in self._coeffs.items()})

    __rmul__ = __mul__

    def __len__(self) -> int:
        return len(self._coeffs)

    def __repr__(self) -> str:
        body = ", ".join(f"{k}: {c:.6g}" for k, c in sorted(self._coeffs.items()))
        return f"FourierPoly({{{body}}})"

    def evaluate(self, x):
        """Value sum_k c_k exp(2 pi i k x); x is a scalar or an array in [0, 1)."""
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros(x.shape, dtype=np.complex128)
        for k, c in self._coeffs.items():
            out += c * np.exp(_TWO_PI_I * k * x)
        return out if out.shape else complex(out)

    def conjugate(self) -> "FourierPoly":
        return FourierPoly({-k: np.conj(c) for k, c in self._coeffs.items()})

    def to_json_dict(self) -> dict:
        return {
            "modes": [[k, float(c.real), float(c.imag)]
                      for k, c in sorted(self._coeffs.items())]
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "FourierPoly":
        if set(data) != {"modes"}:
            extra = set(data) - {"modes"}
            raise ValueError(f"polynomial JSON must have exactly the key 'modes', got extra {sorted(extra)}")
        coeffs = {}
        for entry in data["modes"]:
            k, re, im = entry
            coeffs[int(k)] = coeffs.get(int(k), 0.0) + complex(re, im)
        return cls(coeffs)


def poly_product(p: FourierPoly, q: FourierPoly) -> FourierPoly:
    """Pointwise product, a convolution of coefficient maps."""
    out: dict[int, complex] = {}
    for k1, c1 in p.items():
        for k2, c2 in q.items():
            k = k1 + k2
            out[k] = out.get(k, 0.0) + c1 * c2
    return FourierPoly(out)


def integral(p: FourierPoly) -> complex:
    """Mean over the circle; only the constant mode survives."""
    return p.coeff(0)


def lp_norm(p: FourierPoly, exponent: float, quad_points: int = 4096) -> float:
    """L_p norm for p >= 1; exact via coefficients for p = 2, quadrature otherwise."""
    if exponent < 1:
        raise ValueError("exponent must be >= 1")
    if exponent == 2:
        return float(np.sqrt(sum(abs(c) ** 2 for _, c in p.items())))
    return _lp_norm_quadrature(p, exponent, quad_points)


def _lp_norm_quadrature(p: FourierPoly, exponent: float, quad_points: int = 4096) -> float:
    if quad_points < 1:
        raise ValueError("quad_points must be positive")
    x = np.arange(quad_points, dtype=np.float64) / quad_points
    vals = np.abs(p.evaluate(x))
    return float(np.mean(vals ** exponent) ** (1.0 / exponent))


def _check_base(m: int) -> None:
    if not isinstance(m, (int, np.integer)) or m < 2:
        raise ValueError(f"map base must be an integer >= 2, got {m!r}")


def apply_koopman(p: FourierPoly, m: int) -> FourierPoly:
    """Composition with x -> m x mod 1: mode k moves to m k."""
    _check_base(m)
    return FourierPoly({m * k: c for k, c in p.items()})


def apply_transfer(p: FourierPoly, m: int) -> FourierPoly:
    """Preimage average: mode k moves to k/m when m | k, otherwise dies."""
    _check_base(m)
    return FourierPoly({k // m: c for k, c in p.items() if k % m == 0})


def transfer_orbit_length(k: int, m: int) -> int:
    """Number of transfer applications until mode k dies, i.e. v_m(|k|) + 1.

    Defined for k != 0; the constant mode is invariant and never dies.
    """
    _check_base(m)
    if k == 0:
        raise ValueError("mode 0 has no finite transfer orbit")
    k = abs(k)
    count = 1
    while k % m == 0:
        k //= m
        count += 1
    return count


def adjoint_orbit_sum(p: FourierPoly, m: int) -> FourierPoly:
    """Sum of the full transfer orbit p + V*p + V*^2 p + ...

    Requires a mean-zero polynomial; the constant mode is transfer
    invariant so its orbit sum would diverge.
    """
    if abs(p.coeff(0)) > EQ_TOL:
        raise ValueError("orbit sum requires a mean-zero polynomial")
    out: dict[int, complex] = {}
    for k, c in p.items():
        kk = k
        while True:
            out[kk] = out.get(kk, 0.0) + c
            if kk % m != 0:
                break
            kk //= m
    return FourierPoly(out)
