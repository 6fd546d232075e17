"""Maximal monotone graphs, their resolvents and Yosida regularizations.

A graph ``beta`` is the subdifferential of a convex, nonnegative primitive
with ``primitive(0) == 0``. Every graph carries a ``resolvent_scale`` that
multiplies ``eps`` inside the resolvent: 1 for the bulk graph and ``rho`` for
the boundary graph, so that

    J(r)        = (I + eps * scale * beta)^{-1} (r)
    yosida(r)   = (r - J(r)) / (eps * scale)
    envelope(r) = |r - J(r)|^2 / (2 * eps * scale) + primitive(J(r))

All evaluation methods accept scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, ResolventError

RESOLVENT_TOL = 1e-13
RESOLVENT_MAXITER = 200


def _scalar_or_array(x, like):
    if np.ndim(like) == 0:
        return float(x)
    return x


def _solve_increasing(g, dg, r, lo, hi, eps, tol=RESOLVENT_TOL, maxiter=RESOLVENT_MAXITER):
    """Vectorized safeguarded Newton-bisection for ``g(s) = 0``.

    ``g`` must be nondecreasing in ``s``. Where the root falls outside
    ``[lo, hi]`` the nearer endpoint is returned.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    s = np.empty_like(lo)

    # sections may be infinite at closed endpoints
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        g_lo = g(lo)
        g_hi = g(hi)
    clamp_lo = g_lo >= 0.0
    clamp_hi = g_hi <= 0.0
    s[clamp_lo] = lo[clamp_lo]
    s[clamp_hi & ~clamp_lo] = hi[clamp_hi & ~clamp_lo]
    active = ~(clamp_lo | clamp_hi)
    if not active.any():
        return s

    a, b = lo[active], hi[active]
    x = 0.5 * (a + b)
    idx = np.flatnonzero(active)
    for _ in range(maxiter):
        gx = g(x, idx)
        dgx = dg(x, idx)
        pos = gx > 0.0
        b = np.where(pos, x, b)
        a = np.where(pos, a, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_new = x - gx / dgx
        # an infinite or degenerate slope gives no usable Newton step
        bad = ~np.isfinite(x_new) | ~np.isfinite(dgx) | ~(dgx > 0.0) | (x_new < a) | (x_new > b)
        x_new = np.where(bad, 0.5 * (a + b), x_new)
        x_new = np.where(gx == 0.0, x, x_new)
        step = np.abs(x_new - x)
        x = x_new
        done = (step <= tol) | (b - a <= tol) | (gx == 0.0)
        s[idx[done]] = x[done]
        if done.all():
            return s
        # keep iterating only the unfinished entries
        keep = ~done
        idx, x, a, b = idx[keep], x[keep], a[keep], b[keep]
    bad_r = np.asarray(r)[idx] if np.ndim(r) else r
    raise ResolventError(bad_r, eps)


@dataclass(frozen=True, kw_only=True)
class MonotoneGraph:
    """Base class. Subclasses provide the primitive, minimal section and resolvent."""

    resolvent_scale: float = 1.0

    # domain closure endpoints, may be infinite
    domain_lo: float = field(default=-math.inf, init=False)
    domain_hi: float = field(default=math.inf, init=False)
    # whether the endpoints themselves belong to D(beta)
    closed: bool = field(default=True, init=False)

    kind: str = field(default="custom", init=False)

    def with_scale(self, scale: float) -> "MonotoneGraph":
        if scale <= 0:
            raise ValueError("resolvent scale must be positive")
        return replace(self, resolvent_scale=float(scale))

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.domain_lo) and math.isfinite(self.domain_hi)

    def in_domain(self, r):
        r = np.asarray(r, dtype=float)
        if self.closed:
            return (r >= self.domain_lo) & (r <= self.domain_hi)
        return (r > self.domain_lo) & (r < self.domain_hi)

    def in_interior(self, r):
        r = np.asarray(r, dtype=float)
        return (r > self.domain_lo) & (r < self.domain_hi)

    # -- to be provided by subclasses --------------------------------------
    def primitive(self, r):
        raise NotImplementedError

    def _section(self, r):
        """Minimal section on D(beta), no domain checks."""
        raise NotImplementedError

    def _section_derivative(self, r):
        raise NotImplementedError

    def _resolvent(self, c, r):
        raise NotImplementedError

    def _inverse(self, y, s):
        """The point of beta^{-1}(y) nearest to ``s``."""
        raise NotImplementedError

    # -- public API ----------------------------------------------------------
    def minimal_section(self, r):
        ra = np.asarray(r, dtype=float)
        if not np.all(self.in_domain(ra)):
            raise DomainError(f"{self.kind}: argument outside D(beta): {r!r}")
        return _scalar_or_array(self._section(ra), r)

    def _resolvent_and_yosida(self, eps, r):
        if not eps > 0:
            raise ValueError("eps must be positive")
        ra = np.asarray(r, dtype=float).ravel()
        if not np.all(np.isfinite(ra)):
            raise ValueError("resolvent argument must be finite")
        c = eps * self.resolvent_scale
        s, y = self._solve(c, ra)
        if np.ndim(r) == 0:
            return float(s[0]), float(y[0])
        return s.reshape(np.shape(r)), y.reshape(np.shape(r))

    def _solve(self, c, r):
        """Resolvent and Yosida values; subclasses may solve for either one."""
        s = self._resolvent(c, r)
        return s, (r - s) / c

    def resolvent(self, eps, r):
        return self._resolvent_and_yosida(eps, r)[0]

    def yosida(self, eps, r):
        return self._resolvent_and_yosida(eps, r)[1]

    def yosida_derivative(self, eps, r):
        """Exact derivative (1 - J'(r)) / (eps * scale), with J' from implicit differentiation."""
        c = eps * self.resolvent_scale
        s = np.atleast_1d(self.resolvent(eps, r))
        djdr = self._resolvent_derivative(c, s)
        out = (1.0 - djdr) / c
        return float(out[0]) if np.ndim(r) == 0 else out.reshape(np.shape(r))

    def _resolvent_derivative(self, c, s):
        inner = self.in_interior(s)
        d = np.zeros_like(s)
        with np.errstate(over="ignore", invalid="ignore"):
            slope = self._section_derivative(s[inner])
        d[inner] = 1.0 / (1.0 + c * slope)
        d[~np.isfinite(d)] = 0.0
        return d

    def moreau_yosida(self, eps, r):
        c = eps * self.resolvent_scale
        ra = np.asarray(r, dtype=float)
        s = self.resolvent(eps, ra)
        out = (ra - s) ** 2 / (2.0 * c) + self.primitive(s)
        return _scalar_or_array(out, r)

    def graph_distance(self, s, y):
        """Horizontal distance |s - beta^{-1}(y)| of the pair (s, y) to the graph.

        Evaluated through the inverse graph, independently of the resolvent.
        """
        s = np.asarray(s, dtype=float)
        return np.abs(s - self._inverse(np.asarray(y, dtype=float), s))

    def resolvent_residual(self, eps, r):
        """How far ``s = J(r)`` is from solving ``s + eps*scale*beta(s) = r``.

        The smaller of the forward residual and the horizontal graph distance
        of ``(s, (r - s)/(eps*scale))``. Near the endpoints of a logarithmic
        graph only the second is meaningful in floating point; near 0 for the
        cubic only the first is.
        """
        c = eps * self.resolvent_scale
        r = np.asarray(r, dtype=float).ravel()
        s = self.resolvent(eps, r)
        y = (r - s) / c
        horizontal = self.graph_distance(s, y)
        forward = np.full(r.shape, np.inf)
        inner = self.in_interior(s)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            forward[inner] = np.abs(s[inner] + c * self._section(s[inner]) - r[inner])
        forward[~np.isfinite(forward)] = np.inf
        return np.minimum(horizontal, forward)


@dataclass(frozen=True)
class Logarithmic(MonotoneGraph):
    """beta(r) = (alpha/2) ln((1+r)/(1-r)) on the open interval (-1, 1)."""

    alpha: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        object.__setattr__(self, "domain_lo", -1.0)
        object.__setattr__(self, "domain_hi", 1.0)
        object.__setattr__(self, "closed", False)
        object.__setattr__(self, "kind", "logarithmic")

    def primitive(self, r):
        ra = np.asarray(r, dtype=float)
        out = np.full(ra.shape, np.inf)
        ok = np.abs(ra) <= 1.0
        x = ra[ok]
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.where(x > -1.0, (1.0 + x) * np.log1p(x), 0.0) + np.where(
                x < 1.0, (1.0 - x) * np.log1p(-x), 0.0
            )
        out[ok] = 0.5 * self.alpha * p
        return _scalar_or_array(out, r)

    def _section(self, r):
        return self.alpha * np.arctanh(r)

    def _section_derivative(self, r):
        return self.alpha / ((1.0 - r) * (1.0 + r))

    def _solve(self, c, r):
        # Solve c*y + tanh(y/alpha) = r for y = beta_eps(r). Its slope is at
        # least c, unlike the resolvent equation whose slope blows up at +-1.
        alpha = self.alpha
        # y has the sign of r and (|r| - 1)/c <= |y| <= |r|/c
        lo = np.where(r >= 0, np.maximum((r - 1.0) / c, 0.0), r / c)
        hi = np.where(r >= 0, r / c, np.minimum((r + 1.0) / c, 0.0))

        def g(y, idx=slice(None)):
            return c * y + np.tanh(y / alpha) - r[idx]

        def dg(y, idx=slice(None)):
            return c + (1.0 - np.tanh(y / alpha) ** 2) / alpha

        y = _solve_increasing(g, dg, r, lo, hi, c)
        s = np.clip(r - c * y, -1.0, 1.0)
        return s, y

    def _resolvent(self, c, r):
        return self._solve(c, r)[0]

    def _inverse(self, y, s):
        return np.tanh(y / self.alpha)


@dataclass(frozen=True)
class Indicator(MonotoneGraph):
    """Subdifferential of the indicator function of [lo, hi]."""

    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise ValueError("need lo < hi")
        object.__setattr__(self, "domain_lo", float(self.lo))
        object.__setattr__(self, "domain_hi", float(self.hi))
        object.__setattr__(self, "kind", "indicator")

    def primitive(self, r):
        ra = np.asarray(r, dtype=float)
        out = np.where((ra >= self.lo) & (ra <= self.hi), 0.0, np.inf)
        return _scalar_or_array(out, r)

    def _section(self, r):
        return np.zeros_like(r)

    def _section_derivative(self, r):
        return np.zeros_like(r)

    def _resolvent(self, c, r):
        return np.clip(r, self.lo, self.hi)

    def _inverse(self, y, s):
        # beta^{-1}(y) = {hi} for y > 0, {lo} for y < 0, [lo, hi] for y = 0
        return np.where(y > 0, self.hi, np.where(y < 0, self.lo, np.clip(s, self.lo, self.hi)))


@dataclass(frozen=True)
class IndicatorPlusCubic(MonotoneGraph):
    """Indicator of [lo, hi] plus r**3."""

    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise ValueError("need lo < hi")
        object.__setattr__(self, "domain_lo", float(self.lo))
        object.__setattr__(self, "domain_hi", float(self.hi))
        object.__setattr__(self, "kind", "indicator_plus_cubic")

    def primitive(self, r):
        ra = np.asarray(r, dtype=float)
        out = np.where((ra >= self.lo) & (ra <= self.hi), 0.25 * ra**4, np.inf)
        return _scalar_or_array(out, r)

    def _section(self, r):
        return r**3

    def _section_derivative(self, r):
        return 3.0 * r**2

    def _resolvent(self, c, r):
        lo = np.clip(np.minimum(r, 0.0), self.lo, self.hi)
        hi = np.clip(np.maximum(r, 0.0), self.lo, self.hi)
        return _solve_increasing(*_cubic_equation(c, r), r, lo, hi, c)

    def _inverse(self, y, s):
        return np.clip(np.cbrt(y), self.lo, self.hi)


@dataclass(frozen=True)
class Cubic(MonotoneGraph):
    """beta(r) = r**3 on the whole line (prototype mode)."""

    def __post_init__(self):
        object.__setattr__(self, "kind", "cubic")

    def primitive(self, r):
        return _scalar_or_array(0.25 * np.asarray(r, dtype=float) ** 4, r)

    def _section(self, r):
        return r**3

    def _section_derivative(self, r):
        return 3.0 * r**2

    def _resolvent(self, c, r):
        lo = np.minimum(r, 0.0)
        hi = np.maximum(r, 0.0)
        return _solve_increasing(*_cubic_equation(c, r), r, lo, hi, c)

    def _inverse(self, y, s):
        return np.cbrt(y)


def _cubic_equation(c, r):
    def g(s, idx=slice(None)):
        return s + c * s**3 - r[idx]

    def dg(s, idx=slice(None)):
        return 1.0 + 3.0 * c * s**2

    return g, dg


@dataclass(frozen=True)
class Custom(MonotoneGraph):
    """User-supplied graph. Maximal monotonicity is the caller's responsibility.

    ``section`` must be nondecreasing and vectorized; ``derivative`` is
    optional (central differences otherwise).
    """

    section: Callable = None
    primitive_fn: Callable = None
    lo: float = -math.inf
    hi: float = math.inf
    derivative: Callable | None = None
    name: str = "custom"

    def __post_init__(self):
        if self.section is None or self.primitive_fn is None:
            raise ValueError("custom graph needs a section and a primitive")
        object.__setattr__(self, "domain_lo", float(self.lo))
        object.__setattr__(self, "domain_hi", float(self.hi))
        object.__setattr__(self, "kind", self.name)

    def primitive(self, r):
        ra = np.asarray(r, dtype=float)
        out = np.full(ra.shape, np.inf)
        ok = self.in_domain(ra)
        out[ok] = self.primitive_fn(ra[ok])
        return _scalar_or_array(out, r)

    def _section(self, r):
        # user sections may be infinite at closed endpoints
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            return np.asarray(self.section(r), dtype=float)

    def _section_derivative(self, r):
        if self.derivative is not None:
            return np.asarray(self.derivative(r), dtype=float)
        h = 1e-7 * np.maximum(1.0, np.abs(r))
        lo = np.maximum(r - h, self.domain_lo)
        hi = np.minimum(r + h, self.domain_hi)
        return (self._section(hi) - self._section(lo)) / (hi - lo)

    def _bracket(self, r):
        lo = np.maximum(np.minimum(r, 0.0), self.domain_lo)
        hi = np.minimum(np.maximum(r, 0.0), self.domain_hi)
        return lo, hi

    def _resolvent(self, c, r):
        lo, hi = self._bracket(r)

        def g(s, idx=slice(None)):
            return s + c * self._section(s) - r[idx]

        def dg(s, idx=slice(None)):
            return 1.0 + c * self._section_derivative(s)

        return _solve_increasing(g, dg, r, lo, hi, c)

    def _inverse(self, y, s):
        lo = np.full(y.shape, self.domain_lo if math.isfinite(self.domain_lo) else -1e6)
        hi = np.full(y.shape, self.domain_hi if math.isfinite(self.domain_hi) else 1e6)
        a, b = lo.copy(), hi.copy()
        for _ in range(200):
            mid = 0.5 * (a + b)
            up = self._section(mid) > y
            b = np.where(up, mid, b)
            a = np.where(up, a, mid)
        return 0.5 * (a + b)


@dataclass(frozen=True)
class CompatibilityWitness:
    rho: float
    c0: float

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.c0 < 0:
            raise ValueError("c0 must be nonnegative")


@dataclass
class CompatibilityReport:
    holds: bool
    worst_margin: float
    domain_inclusion: bool = True
    failures: list = field(default_factory=list)


def check_compatibility(
    beta: MonotoneGraph,
    beta_gamma: MonotoneGraph,
    witness: CompatibilityWitness,
    samples: Sequence[float],
    eps_values: Sequence[float] = (1.0, 0.1, 0.01),
    slack: float = 1e-10,
) -> CompatibilityReport:
    """Check |beta°| <= rho |beta_G°| + c0 on D(beta_G) and the Yosida form on all samples.

    The boundary graph is rescaled by ``witness.rho`` before the Yosida check,
    matching how it enters the regularized problem.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("need at least one sample")
    rho, c0 = witness.rho, witness.c0
    failures = []
    worst = math.inf

    inclusion = beta_gamma.domain_lo >= beta.domain_lo and beta_gamma.domain_hi <= beta.domain_hi
    if not inclusion:
        failures.append(("domain", "D(beta_G) is not contained in D(beta)"))

    on_dom = samples[beta_gamma.in_domain(samples) & beta.in_domain(samples)]
    if on_dom.size:
        margin = rho * np.abs(beta_gamma.minimal_section(on_dom)) + c0 - np.abs(beta.minimal_section(on_dom))
        worst = min(worst, float(margin.min()))
        for r in on_dom[margin < -slack]:
            failures.append(("graph", float(r)))

    bg = beta_gamma.with_scale(rho)
    b = beta.with_scale(1.0) if beta.resolvent_scale != 1.0 else beta
    for eps in eps_values:
        margin = rho * np.abs(bg.yosida(eps, samples)) + c0 - np.abs(b.yosida(eps, samples))
        worst = min(worst, float(margin.min()))
        for r in samples[margin < -slack]:
            failures.append(("yosida", float(r), float(eps)))

    return CompatibilityReport(
        holds=inclusion and not failures,
        worst_margin=worst,
        domain_inclusion=inclusion,
        failures=failures,
    )


def make_graph(kind: str, **params) -> MonotoneGraph:
    """Build a graph from its config name."""
    kind = kind.lower()
    if kind == "logarithmic":
        return Logarithmic(alpha=float(params.get("alpha", 1.0)))
    if kind == "indicator":
        return Indicator(lo=float(params.get("lo", -1.0)), hi=float(params.get("hi", 1.0)))
    if kind == "indicator_plus_cubic":
        return IndicatorPlusCubic(lo=float(params.get("lo", -1.0)), hi=float(params.get("hi", 1.0)))
    if kind == "cubic":
        return Cubic()
    raise ValueError(f"unknown graph kind {kind!r}")
