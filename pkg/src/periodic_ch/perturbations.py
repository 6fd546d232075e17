"""Lipschitz perturbations of the potential and their compactly supported cut-offs.

The cut-off of ``pi`` relative to the interval ``[lo, hi]`` is

    0                           r <= lo - 1
    pi(lo) * (r - lo + 1)       lo - 1 < r < lo
    pi(r)                       lo <= r <= hi
    -pi(hi) * (r - hi - 1)      hi < r < hi + 1
    0                           r >= hi + 1

which is continuous, globally Lipschitz and bounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid

_SAMPLES = 4001


def _out(x, like):
    return float(x) if np.ndim(like) == 0 else x


@dataclass(frozen=True)
class LipschitzPerturbation:
    """A Lipschitz function ``pi`` with its constant and optional derivative/antiderivative."""

    fn: Callable
    lipschitz_const: float
    derivative_fn: Callable | None = None
    antiderivative_fn: Callable | None = None
    name: str = "custom"

    def __post_init__(self):
        if not self.lipschitz_const >= 0:
            raise ValueError("Lipschitz constant must be nonnegative")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return _out(np.asarray(self.fn(r), dtype=float) * np.ones_like(r), r)

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        if self.derivative_fn is not None:
            return _out(np.asarray(self.derivative_fn(r), dtype=float) * np.ones_like(r), r)
        h = 1e-7 * np.maximum(1.0, np.abs(r))
        return _out((self.fn(r + h) - self.fn(r - h)) / (2 * h), r)

    # the raw perturbation doubles as the prototype-mode "cut-off"
    def eval(self, r):
        return self(r)

    def primitive(self, r):
        if self.antiderivative_fn is None:
            raise NotImplementedError("no antiderivative supplied")
        r = np.asarray(r, dtype=float)
        return _out(np.asarray(self.antiderivative_fn(r), dtype=float), r)

    @property
    def sup_abs(self) -> float:
        return math.inf


def linear(alpha: float) -> LipschitzPerturbation:
    """pi(r) = -alpha * r, the concave part of a double well."""
    alpha = float(alpha)
    return LipschitzPerturbation(
        fn=lambda r: -alpha * r,
        lipschitz_const=abs(alpha),
        derivative_fn=lambda r: np.full(np.shape(r), -alpha),
        antiderivative_fn=lambda r: -0.5 * alpha * np.asarray(r) ** 2,
        name="linear",
    )


def zero() -> LipschitzPerturbation:
    return linear(0.0)


@dataclass(frozen=True)
class CutoffPerturbation:
    """Cut-off of ``base`` outside ``[lo - 1, hi + 1]``."""

    base: LipschitzPerturbation
    lo: float
    hi: float
    _table: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise ValueError("cut-off needs a bounded interval lo < hi")
        # antiderivative of the middle branch, tabulated unless supplied
        if self.base.antiderivative_fn is None:
            x = np.linspace(self.lo, self.hi, _SAMPLES)
            table = (x, cumulative_trapezoid(self.base(x), x, initial=0.0))
        else:
            table = None
        object.__setattr__(self, "_table", table)

    @property
    def pi_lo(self) -> float:
        return float(self.base(self.lo))

    @property
    def pi_hi(self) -> float:
        return float(self.base(self.hi))

    @property
    def lipschitz_const(self) -> float:
        return max(self.base.lipschitz_const, abs(self.pi_lo), abs(self.pi_hi))

    def __call__(self, r):
        ra = np.asarray(r, dtype=float)
        lo, hi = self.lo, self.hi
        out = np.zeros_like(ra)
        left = (ra > lo - 1) & (ra < lo)
        mid = (ra >= lo) & (ra <= hi)
        right = (ra > hi) & (ra < hi + 1)
        out[left] = self.pi_lo * (ra[left] - lo + 1)
        out[mid] = self.base(ra[mid])
        out[right] = -self.pi_hi * (ra[right] - hi - 1)
        return _out(out, r)

    eval = __call__

    def derivative(self, r):
        """Slope of the cut-off; one-sided values at the kinks are not significant."""
        ra = np.asarray(r, dtype=float)
        lo, hi = self.lo, self.hi
        out = np.zeros_like(ra)
        left = (ra > lo - 1) & (ra < lo)
        mid = (ra >= lo) & (ra <= hi)
        right = (ra > hi) & (ra < hi + 1)
        out[left] = self.pi_lo
        out[mid] = self.base.derivative(ra[mid])
        out[right] = -self.pi_hi
        return _out(out, r)

    @property
    def sup_abs(self) -> float:
        """sup |cut-off| over the real line, attained on [lo, hi]."""
        x = np.linspace(self.lo, self.hi, _SAMPLES)
        return float(max(np.abs(self.base(x)).max(), abs(self.pi_lo), abs(self.pi_hi)))

    def _middle_integral(self, r):
        """Integral of base from lo to r, r in [lo, hi]."""
        if self._table is None:
            return self.base.primitive(r) - self.base.primitive(self.lo)
        x, cum = self._table
        return np.interp(r, x, cum)

    def raw_primitive(self, r):
        """Integral of the cut-off from lo - 1 to r."""
        ra = np.asarray(r, dtype=float)
        lo, hi = self.lo, self.hi
        p_lo = 0.5 * self.pi_lo
        p_hi = p_lo + float(self._middle_integral(np.array(hi)))
        out = np.empty_like(ra)
        below = ra <= lo - 1
        left = (ra > lo - 1) & (ra < lo)
        mid = (ra >= lo) & (ra <= hi)
        right = (ra > hi) & (ra < hi + 1)
        above = ra >= hi + 1
        out[below] = 0.0
        out[left] = 0.5 * self.pi_lo * (ra[left] - lo + 1) ** 2
        out[mid] = p_lo + self._middle_integral(ra[mid])
        out[right] = p_hi - 0.5 * self.pi_hi * ((ra[right] - hi - 1) ** 2 - 1.0)
        out[above] = p_hi + 0.5 * self.pi_hi
        return out


@dataclass(frozen=True)
class Primitive:
    """Antiderivative of a cut-off, shifted to be nonnegative."""

    cutoff: CutoffPerturbation
    shift: float = field(init=False)

    def __post_init__(self):
        c = self.cutoff
        x = np.concatenate(
            [np.linspace(c.lo - 1, c.hi + 1, _SAMPLES), [c.lo - 1, c.lo, c.hi, c.hi + 1]]
        )
        object.__setattr__(self, "shift", -float(c.raw_primitive(x).min()))

    def __call__(self, r):
        ra = np.asarray(r, dtype=float)
        return _out(self.cutoff.raw_primitive(ra) + self.shift, r)

    eval = __call__


def primitive_of(p) -> Callable:
    """Energy primitive for a cut-off, or the raw antiderivative in prototype mode."""
    if isinstance(p, CutoffPerturbation):
        return Primitive(p)
    return p.primitive


def make_perturbation(spec: dict) -> LipschitzPerturbation:
    kind = spec.get("kind", "linear").lower()
    if kind == "linear":
        return linear(float(spec.get("alpha", 1.0)))
    if kind == "zero":
        return zero()
    raise ValueError(f"unknown perturbation kind {kind!r}")
