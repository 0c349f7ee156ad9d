"""Trajectory generation and V-statistic evaluation.

Circle trajectories are built from an i.i.d. digit stream, window W
digits per point: x_i = sum_{j=1..W} b_{i+j} m^{-j}.  Iterating the map
in floating point instead would collapse onto the fixed point after
about 53 steps for m = 2, so the digit-window construction is the only
supported generator.  For m = 2 the windows are exact 64-bit dyadic
integers; see exact_windows for the integer view at any base.

The statistic of an arity-d kernel over the first n points is

    S_n = sum over all n^d index tuples of f(x_{i_1}, ..., x_{i_d}).

vstat_naive enumerates every tuple (the oracle; refuses n^d > 1e9),
vstat_fast exchanges summation and product per term for O(n d) work.
"""

from __future__ import annotations

import struct
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._seeding import stream
from .fourier import FourierPoly
from .kernels import (
    CircleBase,
    MarkovBase,
    SeparableKernel,
    kernel_mean,
)
from .hoeffding import is_canonical
from .markov import MarkovChain

_MAGIC = b"VMTRAJ01"
_KIND_CODES = {"circle": 0, "markov": 1}

#: largest naive enumeration budget, in index tuples
NAIVE_BUDGET = 1_000_000_000


class BudgetError(RuntimeError):
    """Raised when a naive evaluation would exceed the enumeration budget."""


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Finite orbit with generation metadata.

    points: circle points in [0, 1) as float64, or integer state indices.
    windows: for base-2 circle trajectories, the exact dyadic integers
    u_i with x_i = u_i / 2^64.
    """

    kind: str
    points: np.ndarray
    meta: dict = field(default_factory=dict)
    windows: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.points)


def _digit_stream(m: int, count: int, seed: int) -> np.ndarray:
    rng = stream(seed)
    return rng.integers(0, m, size=count, dtype=np.uint8)


def gen_madic_trajectory(m: int, n: int, seed: int, window: int = 64) -> Trajectory:
    """Length-n trajectory of x -> m x mod 1 from a seeded digit stream."""
    if m < 2:
        raise ValueError("map base must be >= 2")
    if n < 1:
        raise ValueError("trajectory length must be positive")
    if not 16 <= window <= 64:
        raise ValueError("window must be between 16 and 64 digits")
    digits = _digit_stream(m, n + window - 1, seed)
    win = sliding_window_view(digits, window)[:n]
    meta = {"m": m, "seed": seed, "window": window}
    if m == 2:
        padded = win
        if window < 64:
            padded = np.zeros((n, 64), dtype=np.uint8)
            padded[:, :window] = win
        packed = np.packbits(padded, axis=1)
        u = packed.reshape(n, 8).view(">u8").reshape(n).astype(np.uint64)
        points = u.astype(np.float64) * 2.0 ** -64
        return Trajectory("circle", points, meta, windows=u)
    weights = float(m) ** -np.arange(1, window + 1, dtype=np.float64)
    points = np.empty(n, dtype=np.float64)
    step = 1 << 16
    for a in range(0, n, step):
        b = min(a + step, n)
        points[a:b] = win[a:b].astype(np.float64) @ weights
    return Trajectory("circle", points, meta)


def exact_windows(m: int, n: int, seed: int, window: int = 64) -> list[int]:
    """Exact integer windows v_i = sum_j b_{i+j} m^(window-j), x_i = v_i / m^window.

    Uses the same digit stream as gen_madic_trajectory, so for m = 2 the
    values coincide with the trajectory's ``windows`` field.
    """
    digits = _digit_stream(m, n + window - 1, seed)
    modulus = m ** window
    v = 0
    for j in range(window):
        v = v * m + int(digits[j])
    out = [v]
    for i in range(1, n):
        v = (v * m) % modulus + int(digits[i + window - 1])
        out.append(v)
    return out


def gen_markov_trajectory(chain: MarkovChain, n: int, seed: int) -> Trajectory:
    """Stationary chain sample path: X_0 from pi, then row transitions.

    Draws n uniforms; the first picks X_0 by inverse CDF of pi, each
    subsequent one picks the next state by inverse CDF of the current row.
    """
    if n < 1:
        raise ValueError("trajectory length must be positive")
    rng = stream(seed)
    u = rng.random(n)
    cum_pi = np.cumsum(chain.pi).tolist()
    cum_rows = [np.cumsum(row).tolist() for row in chain.Q]
    s = chain.n_states
    states = np.empty(n, dtype=np.int64)
    x = min(bisect_right(cum_pi, u[0]), s - 1)
    states[0] = x
    for i in range(1, n):
        x = min(bisect_right(cum_rows[x], u[i]), s - 1)
        states[i] = x
    return Trajectory("markov", states, {"seed": seed, "n_states": s})


def dump_trajectory(traj: Trajectory, path) -> None:
    """Binary dump: magic, u32 length, u32 kind, 64-bit little-endian points."""
    code = _KIND_CODES[traj.kind]
    dtype = "<f8" if traj.kind == "circle" else "<i8"
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", len(traj.points), code))
        fh.write(np.ascontiguousarray(traj.points, dtype=dtype).tobytes())


def load_trajectory(path) -> Trajectory:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _MAGIC:
            raise ValueError("not a trajectory dump")
        n, code = struct.unpack("<II", fh.read(8))
        kind = {v: k for k, v in _KIND_CODES.items()}[code]
        dtype = "<f8" if kind == "circle" else "<i8"
        points = np.frombuffer(fh.read(8 * n), dtype=dtype).copy()
    return Trajectory(kind, points, {"loaded": True})


# ---------------------------------------------------------------------------
# statistic evaluation


def _check_traj(f: SeparableKernel, traj: Trajectory, n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be positive")
    if n > len(traj.points):
        raise ValueError(f"trajectory holds {len(traj.points)} points, need {n}")
    if isinstance(f.base, CircleBase) and traj.kind != "circle":
        raise ValueError("circle kernel needs a circle trajectory")
    if isinstance(f.base, MarkovBase) and traj.kind != "markov":
        raise ValueError("markov kernel needs a markov trajectory")
    return traj.points[:n]


def _factor_values(f: SeparableKernel, pts: np.ndarray) -> list[list[np.ndarray]]:
    out = []
    for t in f.terms:
        row = []
        for u in t.factors:
            if isinstance(u, FourierPoly):
                row.append(u.evaluate(pts))
            else:
                row.append(u.values[pts])
        out.append(row)
    return out


def vstat_naive(f: SeparableKernel, traj: Trajectory, n: int) -> float:
    """Direct enumeration of the full d-fold sum; the reference evaluator.

    Every index tuple is visited and the kernel value accumulated, with
    no use of the product structure across the summation.  Raises
    BudgetError when n^d exceeds 1e9 tuples.
    """
    pts = _check_traj(f, traj, n)
    d = f.arity
    if float(n) ** d > NAIVE_BUDGET:
        raise BudgetError(f"n^d = {float(n) ** d:.3g} exceeds the {NAIVE_BUDGET:.0e} tuple budget")
    vals = _factor_values(f, pts)
    total = 0.0 + 0.0j
    if d == 1:
        grid = np.zeros(n, dtype=np.complex128)
        for t, row in zip(f.terms, vals):
            grid += t.coeff * row[0]
        return float(grid.sum().real)
    shape = (n,) * (d - 1)
    for i in range(n):
        grid = np.zeros(shape, dtype=np.complex128)
        for t, row in zip(f.terms, vals):
            piece = np.asarray(t.coeff * row[0][i])
            for j in range(1, d):
                piece = np.multiply.outer(piece, row[j])
            grid += piece
        total += grid.sum()
    return float(total.real)


def vstat_fast(f: SeparableKernel, traj: Trajectory, n: int) -> float:
    """Factorized evaluation: per term the product of slotwise point sums."""
    pts = _check_traj(f, traj, n)
    total = 0.0 + 0.0j
    for t, row in zip(f.terms, _factor_values(f, pts)):
        prod = complex(t.coeff)
        for col in row:
            prod *= col.sum()
        total += prod
    return float(total.real)


def normalized_stat(f: SeparableKernel, traj: Trajectory, n: int, mode: str) -> float:
    """Normalized statistic over the first n points.

    slln: n^{-d} S_n.  clt: n^{-(d-1/2)} (S_n - n^d mean).  degen:
    n^{-1} S_n for canonical arity-2 kernels.
    """
    if mode == "slln":
        return vstat_fast(f, traj, n) / float(n) ** f.arity
    if mode == "clt":
        mean = kernel_mean(f)
        s = vstat_fast(f, traj, n)
        return (s - float(n) ** f.arity * mean) / float(n) ** (f.arity - 0.5)
    if mode == "degen":
        if f.arity != 2:
            raise ValueError("degenerate normalization is for arity-2 kernels")
        if not is_canonical(f):
            raise ValueError("degenerate normalization needs a canonical kernel")
        return vstat_fast(f, traj, n) / float(n)
    raise ValueError(f"unknown mode {mode!r}")
