"""Noise dimension space, step functions and exponential-vector pairings.

The noise space is ``k = C^d``; its extension ``k^ = C + k`` carries the basis
``f_0 = (1, 0, ..., 0)`` and ``f_i = (0, e_i)``.  Test functions are
right-continuous, compactly supported step functions ``R_+ -> k``.  No Fock
vectors are built here: exponential vectors enter only through
``<e(f), e(g)> = exp(<f, g>)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

#: breakpoints closer than this are merged
BREAK_TOL = 1e-12


def hat(c) -> np.ndarray:
    """Return ``(1, c)`` in ``C^{d+1}``."""
    c = np.asarray(c, dtype=complex).reshape(-1)
    return np.concatenate(([1.0 + 0j], c))


def basis_vector(mu: int, d: int) -> np.ndarray:
    """Return ``f_mu`` in ``C^{d+1}``."""
    f = np.zeros(d + 1, dtype=complex)
    f[mu] = 1.0
    return f


@dataclass(frozen=True)
class NoiseDims:
    d: int

    def __post_init__(self):
        if self.d < 0:
            raise ValueError("noise dimension must be nonnegative")

    @property
    def dhat(self) -> int:
        return self.d + 1

    def hat(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=complex).reshape(-1)
        if c.shape != (self.d,):
            raise ValueError(f"expected vector of length {self.d}, got {c.shape[0]}")
        return hat(c)


def _merge_close(points) -> list[float]:
    out: list[float] = []
    for p in sorted(float(x) for x in points):
        if not out or p - out[-1] > BREAK_TOL:
            out.append(p)
    return out


class StepFunction:
    """Piecewise-constant test function with values in ``C^d``.

    ``values[j]`` is taken on ``[breakpoints[j-1], breakpoints[j])`` with an
    implicit leading breakpoint at 0; the function vanishes from the last
    breakpoint on.

    Instances are immutable; the underlying arrays are marked read-only.
    """

    __slots__ = ("_breaks", "_values")

    def __init__(self, breakpoints: Sequence[float], values, d: int | None = None):
        breaks = np.asarray(breakpoints, dtype=float).reshape(-1)
        vals = np.asarray(values, dtype=complex)
        if vals.size == 0:
            if d is None:
                raise ValueError("dimension d is required for an empty step function")
            vals = np.zeros((0, d), dtype=complex)
        vals = vals.reshape(len(breaks), -1) if vals.ndim == 1 and len(breaks) else vals
        if vals.ndim != 2 or vals.shape[0] != breaks.shape[0]:
            raise ValueError("need exactly one value vector per breakpoint")
        if d is not None and vals.shape[1] != d:
            raise ValueError(f"values have dimension {vals.shape[1]}, expected {d}")
        if not np.all(np.isfinite(breaks)) or not np.all(np.isfinite(vals)):
            raise ValueError("breakpoints and values must be finite")
        if len(breaks) and breaks[0] <= 0:
            raise ValueError("breakpoints must be positive")
        if np.any(np.diff(breaks) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        # drop plateaus narrower than the merge tolerance
        keep = np.ones(len(breaks), dtype=bool)
        prev = 0.0
        for j, b in enumerate(breaks):
            if b - prev <= BREAK_TOL:
                keep[j] = False
            else:
                prev = b
        breaks, vals = breaks[keep].copy(), vals[keep].copy()
        breaks.setflags(write=False)
        vals.setflags(write=False)
        self._breaks = breaks
        self._values = vals

    # -- constructors -----------------------------------------------------

    @classmethod
    def zero(cls, d: int) -> StepFunction:
        return cls([], [], d=d)

    @classmethod
    def indicator(cls, c, start: float, stop: float) -> StepFunction:
        """``c * 1_[start, stop)``."""
        c = np.asarray(c, dtype=complex).reshape(-1)
        if stop <= start:
            return cls.zero(c.shape[0])
        if start <= BREAK_TOL:
            return cls([stop], [c])
        return cls([start, stop], [np.zeros_like(c), c])

    # -- accessors --------------------------------------------------------

    @property
    def breakpoints(self) -> np.ndarray:
        return self._breaks

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def d(self) -> int:
        return self._values.shape[1]

    @property
    def support_end(self) -> float:
        return float(self._breaks[-1]) if len(self._breaks) else 0.0

    def __call__(self, s: float) -> np.ndarray:
        if s < 0:
            raise ValueError("step functions live on [0, inf)")
        j = int(np.searchsorted(self._breaks, s, side="right"))
        if j >= len(self._breaks):
            return np.zeros(self.d, dtype=complex)
        return self._values[j].copy()

    def discontinuities(self, t: float | None = None) -> list[float]:
        """Breakpoints where the value actually jumps, optionally only those in ``]0, t[``."""
        out = []
        zero = np.zeros(self.d, dtype=complex)
        for j, b in enumerate(self._breaks):
            right = self._values[j + 1] if j + 1 < len(self._breaks) else zero
            if not np.array_equal(self._values[j], right):
                out.append(float(b))
        if t is not None:
            out = [b for b in out if b < t - BREAK_TOL]
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, StepFunction):
            return NotImplemented
        return (
            self.d == other.d
            and np.array_equal(self._breaks, other._breaks)
            and np.array_equal(self._values, other._values)
        )

    def __hash__(self):
        return hash((self._breaks.tobytes(), self._values.tobytes()))

    def __repr__(self) -> str:
        return f"StepFunction(breakpoints={self._breaks.tolist()}, values={self._values.tolist()})"

    def __sub__(self, other: StepFunction) -> StepFunction:
        grid = _merge_close(list(self._breaks) + list(other._breaks))
        starts = [0.0] + grid[:-1]
        return StepFunction(grid, [self(s) - other(s) for s in starts], d=self.d)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "breakpoints": [float(b) for b in self._breaks],
            "values": [[[float(z.real), float(z.imag)] for z in row] for row in self._values],
        }

    @classmethod
    def from_dict(cls, data: dict, d: int) -> StepFunction:
        vals = [[complex(z[0], z[1]) for z in row] for row in data["values"]]
        return cls(data["breakpoints"], vals, d=d)


def restrict(f: StepFunction, t: float) -> StepFunction:
    """Return ``f_[0,t)``."""
    if t < 0:
        raise ValueError("restriction time must be nonnegative")
    if t >= f.support_end:
        return f
    keep = [b for b in f.breakpoints if b < t - BREAK_TOL]
    vals = [f.values[j] for j in range(len(keep))] + [f.values[len(keep)]]
    return StepFunction(keep + [t], vals, d=f.d) if t > BREAK_TOL else StepFunction.zero(f.d)


def restrict_from(f: StepFunction, t: float) -> StepFunction:
    """Return ``f_[t,inf)``, i.e. ``f - f_[0,t)``."""
    if t <= BREAK_TOL:
        return f
    if t >= f.support_end:
        return StepFunction.zero(f.d)
    later = [b for b in f.breakpoints if b > t + BREAK_TOL]
    vals = [np.zeros(f.d, dtype=complex)] + [f(s) for s in [t] + later[:-1]]
    return StepFunction([t] + later, vals, d=f.d)


def shift_back(f: StepFunction, r: float) -> StepFunction:
    """Return ``s -> f(s + r)`` (adjoint of the right shift by ``r``)."""
    if r < 0:
        raise ValueError("shift must be nonnegative")
    if r <= BREAK_TOL:
        return f
    later = [b for b in f.breakpoints if b > r + BREAK_TOL]
    starts = ([r] + later)[:len(later)]
    return StepFunction([b - r for b in later], [f(s) for s in starts], d=f.d)


@dataclass(frozen=True)
class Interval:
    start: float
    stop: float
    values: tuple  # one plateau vector per input function

    @property
    def length(self) -> float:
        return self.stop - self.start


def merged_grid(fs: Sequence[StepFunction], t: float,
                extra_points: Sequence[float] = ()) -> list[Interval]:
    """Partition ``[0, t)`` so that every ``f`` in ``fs`` is constant on each piece."""
    if t <= 0:
        raise ValueError("grid horizon must be positive")
    pts = [0.0, t]
    for f in fs:
        pts.extend(b for b in f.breakpoints if b < t)
    pts.extend(p for p in extra_points if 0 < p < t)
    grid = _merge_close(pts)
    if grid[-1] < t:
        grid[-1] = t
    return [
        Interval(a, b, tuple(f(a) for f in fs))
        for a, b in zip(grid[:-1], grid[1:])
    ]


def l2_inner(f: StepFunction, g: StepFunction) -> complex:
    """``int <f(s), g(s)> ds``, conjugate-linear in ``f``."""
    if f.d != g.d:
        raise ValueError("dimension mismatch")
    t = max(f.support_end, g.support_end)
    if t <= 0:
        return 0j
    total = 0j
    for iv in merged_grid([f, g], t):
        total += iv.length * np.vdot(iv.values[0], iv.values[1])
    return complex(total)


def exp_inner(f: StepFunction, g: StepFunction) -> complex:
    """``<e(f), e(g)> = exp(<f, g>)``."""
    return complex(np.exp(l2_inner(f, g)))
