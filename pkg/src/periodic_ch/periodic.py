"""Time-periodic solutions: Poincare map, fixed-point iteration and eps-continuation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .domain import CoupledField
from .errors import ConfigError, PreconditionError, StepFailure
from .evolution import NEWTON_TOL, Evolution, Model, SolverState

log = logging.getLogger(__name__)

MAX_HALVINGS = 4


class Forcing:
    """Separable forcing f(t) = a(t) * profile with a T-periodic amplitude a.

    ``kind`` is ``"zero"``, ``"sinusoid"`` (a(t) = amplitude * sin(2 pi t / T + phase))
    or ``"tabulated"`` (periodic piecewise-linear interpolation of equally spaced
    samples over one period).
    """

    def __init__(self, kind: str, period: float, profile: CoupledField | None = None,
                 amplitude: float = 0.0, phase: float = 0.0, samples: Sequence[float] | None = None):
        if kind not in ("zero", "sinusoid", "tabulated"):
            raise ConfigError(f"unknown forcing kind {kind!r}")
        if not period > 0:
            raise ConfigError("period must be positive")
        if kind != "zero" and profile is None:
            raise ConfigError("forcing needs a spatial profile")
        if kind == "tabulated" and (samples is None or len(samples) < 2):
            raise ConfigError("tabulated forcing needs at least two samples")
        self.kind = kind
        self.period = float(period)
        self.profile = profile
        self.amplitude = float(amplitude)
        self.phase = float(phase)
        self.samples = None if samples is None else np.asarray(samples, dtype=float)

    def amplitude_at(self, t: float) -> float:
        if self.kind == "zero":
            return 0.0
        T = self.period
        if self.kind == "sinusoid":
            return self.amplitude * math.sin(2 * math.pi * t / T + self.phase)
        a = self.samples
        K = a.size
        x = (t / T % 1.0) * K
        k = int(math.floor(x)) % K
        w = x - math.floor(x)
        return float((1 - w) * a[k] + w * a[(k + 1) % K])

    def __call__(self, t: float, dom=None) -> CoupledField:
        if self.kind == "zero":
            if self.profile is None:
                return dom.zeros()
            return self.profile * 0.0
        return self.profile * self.amplitude_at(t)


@dataclass
class PeriodicProblem:
    """Everything needed to run the periodic pipeline."""

    model: Model
    forcing: Forcing
    m0: float
    n_steps: int
    eps_schedule: Sequence[float] = (0.1,)
    periodicity_tol: float = 1e-10
    max_picard_iters: int = 100
    relaxation: float = 1.0
    anderson: int = 0
    newton_tol: float = NEWTON_TOL

    def __post_init__(self):
        if self.n_steps < 1:
            raise ConfigError("n_steps must be positive")
        if not 0 < self.relaxation <= 1:
            raise ConfigError("relaxation must lie in (0, 1]")
        f0 = self.forcing(0.0, self.model.dom)
        fT = self.forcing(self.period, self.model.dom)
        if not f0.allclose(fT, atol=1e-12):
            raise ConfigError("(A1) forcing is not periodic within 1e-12")
        self.evolution = Evolution(self.model, newton_tol=self.newton_tol)

    @property
    def period(self) -> float:
        return self.forcing.period

    @property
    def dt(self) -> float:
        return self.period / self.n_steps

    @property
    def dom(self):
        return self.model.dom

    def time(self, n: int) -> float:
        return n * self.period / self.n_steps


@dataclass
class Slice:
    """Stored state at one time level of a period."""

    t: float
    v: CoupledField
    dv: CoupledField | None = None
    mu: CoupledField | None = None
    xi: CoupledField | None = None
    phi_eps: float = math.nan
    newton_iters: int = 0
    residual: float = 0.0
    energy_margin: float = math.nan


@dataclass
class PeriodicSolution:
    v0: CoupledField
    trajectory: list
    residual: float
    eps: float
    picard_iters: int
    converged: bool
    residuals: list = field(default_factory=list)
    phi_history: list = field(default_factory=list)


def _advance(prob: PeriodicProblem, state: SolverState, t_end: float, depth: int = 0):
    """One step to t_end, halving on Newton failure."""
    ev = prob.evolution
    f = prob.forcing(t_end, prob.dom)
    st = replace(state, dt=t_end - state.t)
    try:
        new, rep = ev.step(st, f)
        return new, rep, f, st
    except StepFailure:
        if depth >= MAX_HALVINGS:
            raise
        log.debug("step to t=%.6g failed, halving", t_end)
        t_mid = 0.5 * (state.t + t_end)
        mid, _, _, _ = _advance(prob, state, t_mid, depth + 1)
        return _advance(prob, mid, t_end, depth + 1)


def integrate_period(prob: PeriodicProblem, eps: float, v0: CoupledField, t0: float = 0.0):
    """Integrate one period from v0; return the end state and the stored slices."""
    ev = prob.evolution
    dom = prob.dom
    dom.check_trace(v0)
    state = SolverState(v=v0, t=t0, eps=float(eps), dt=prob.dt, m0=prob.m0)
    slices = [Slice(t=t0, v=v0, phi_eps=ev.energy_phi_eps(state))]
    for n in range(1, prob.n_steps + 1):
        t_end = t0 + prob.time(n)
        try:
            new, rep, f, prev = _advance(prob, state, t_end)
        except StepFailure as exc:
            exc.t = t_end
            raise
        margin = ev.check_energy_inequality(prev, new, f, rep)
        slices.append(Slice(
            t=new.t, v=new.v, dv=new.dv, mu=rep.mu, xi=rep.xi, phi_eps=rep.phi_eps,
            newton_iters=rep.newton_iters, residual=rep.residual_norm, energy_margin=margin,
        ))
        state = replace(new, dt=prob.dt)
    return state, slices


def poincare_map(prob: PeriodicProblem, eps: float, v0: CoupledField) -> CoupledField:
    """v(T) for the evolution started from v0 at t = 0."""
    _check_mean_zero(prob, v0)
    end, _ = integrate_period(prob, eps, v0)
    return end.v


def _check_mean_zero(prob, v):
    ops = prob.model.ops
    prob.dom.check_trace(v)
    if abs(ops.mean(v)) > 1e-10 * max(1.0, float(np.max(np.abs(v.bulk), initial=0.0))):
        raise PreconditionError("initial datum must have zero mean")


class _Anderson:
    """Anderson mixing on bulk vectors with the H-weighted least-squares norm."""

    def __init__(self, depth, theta, weights):
        self.depth = depth
        self.theta = theta
        self.sw = np.sqrt(weights)
        self.X, self.G = [], []

    def update(self, x, g):
        """x: current iterate, g = Phi(x) - x; returns next iterate."""
        self.X.append(x.copy())
        self.G.append(g.copy())
        if len(self.X) > self.depth + 1:
            self.X.pop(0)
            self.G.pop(0)
        if len(self.X) == 1:
            return x + self.theta * g
        dX = np.column_stack([self.X[i + 1] - self.X[i] for i in range(len(self.X) - 1)])
        dG = np.column_stack([self.G[i + 1] - self.G[i] for i in range(len(self.G) - 1)])
        gamma, *_ = np.linalg.lstsq(self.sw[:, None] * dG, self.sw * g, rcond=None)
        return x + self.theta * g - (dX + self.theta * dG) @ gamma


def fixed_point_solve(prob: PeriodicProblem, eps: float, v_init: CoupledField | None = None) -> PeriodicSolution:
    """Relaxed Picard (optionally Anderson) iteration for v(0) = v(T).

    Stops when |v - Phi(v)|_H0 <= prob.periodicity_tol. Running out of
    iterations is not an error: the best iterate is returned with
    ``converged=False``.
    """
    dom, ops = prob.dom, prob.model.ops
    v = dom.zeros() if v_init is None else v_init
    _check_mean_zero(prob, v)
    theta = prob.relaxation
    acc = _Anderson(prob.anderson, theta, ops.M_V) if prob.anderson > 0 else None

    residuals, phis = [], []
    best = None
    for k in range(1, prob.max_picard_iters + 1):
        end, slices = integrate_period(prob, eps, v)
        w = end.v
        r = ops.norm_H(v - w)
        residuals.append(r)
        phis.append(slices[0].phi_eps)
        log.info("eps=%g picard %d residual %.3e", eps, k, r)
        if best is None or r < best[0]:
            best = (r, v, slices, k)
        if r <= prob.periodicity_tol:
            return PeriodicSolution(v, slices, r, float(eps), k, True, residuals, phis)
        if acc is not None:
            nxt = acc.update(v.bulk, w.bulk - v.bulk)
        else:
            nxt = (1 - theta) * v.bulk + theta * w.bulk
        nxt = nxt - (ops.c @ nxt) / dom.vol_total
        v = dom.lift(nxt)
    r, v, slices, _ = best
    return PeriodicSolution(v, slices, r, float(eps), prob.max_picard_iters, False, residuals, phis)


@dataclass
class ContinuationResult:
    solutions: list
    eps: list
    cauchy: list
    failures: dict = field(default_factory=dict)
    cold_first_residuals: list = field(default_factory=list)


def epsilon_continuation(prob: PeriodicProblem, eps_schedule: Sequence[float] | None = None,
                         v_init: CoupledField | None = None, compare_cold: bool = False) -> ContinuationResult:
    """Solve along a decreasing eps schedule, warm-starting each solve.

    ``cauchy[k]`` is |v^{eps_k}(0) - v^{eps_{k+1}}(0)|_H0 between consecutive
    successful solves. With ``compare_cold`` the first Picard residual from a
    zero start is recorded as well.
    """
    sched = list(prob.eps_schedule if eps_schedule is None else eps_schedule)
    if not sched or any(e <= 0 for e in sched):
        raise PreconditionError("eps schedule must be nonempty and positive")
    if any(b >= a for a, b in zip(sched, sched[1:])):
        raise PreconditionError("eps schedule must be strictly decreasing")
    ops = prob.model.ops
    warm = prob.dom.zeros() if v_init is None else v_init
    out = ContinuationResult([], [], [])
    for eps in sched:
        if compare_cold:
            zero = prob.dom.zeros()
            out.cold_first_residuals.append(ops.norm_H(poincare_map(prob, eps, zero) - zero))
        try:
            sol = fixed_point_solve(prob, eps, warm)
        except StepFailure as exc:
            out.failures[eps] = str(exc)
            log.warning("eps=%g failed: %s", eps, exc)
            continue
        if out.solutions:
            out.cauchy.append(ops.norm_H(out.solutions[-1].v0 - sol.v0))
        out.solutions.append(sol)
        out.eps.append(eps)
        warm = sol.v0
    return out


@dataclass
class WeakFormReport:
    weak1: float
    weak2: float
    viscous: float
    graph_excess: float
    graph_distance: float
    mass_deviation: float

    @property
    def graph_ok(self) -> bool:
        return self.graph_excess <= 0.0


def verify_weak_solution(sol: PeriodicSolution, prob: PeriodicProblem) -> WeakFormReport:
    """Residuals of the two weak equations on every stored slice, tested against
    the nodal basis of V, plus the graph inclusion of (u, xi).

    The second equation is checked with the viscous term eps*v' included;
    its size is reported separately as ``viscous``.
    """
    model, ops, dom = prob.model, prob.model.ops, prob.dom
    S, M = ops.S, ops.M_V
    eps = sol.eps
    w1 = w2 = visc = 0.0
    excess, dist, mass = -math.inf, 0.0, 0.0

    def hnorm(r):
        return float(np.sqrt(np.sum(r * r / M)))

    for sl in sol.trajectory:
        u = sl.v + prob.m0
        mass = max(mass, abs(ops.mean(u) - prob.m0))
        if sl.dv is None:
            continue
        f = prob.forcing(sl.t, dom)
        xi = model.xi(eps, u)
        w1 = max(w1, hnorm(M * sl.dv.bulk + S @ sl.mu.bulk))
        g = xi - ops.mean(xi) + model.pi_tilde(u) - f
        r2 = M * sl.mu.bulk - eps * M * sl.dv.bulk - S @ sl.v.bulk - ops.load(g)
        w2 = max(w2, hnorm(r2))
        visc = max(visc, eps * ops.norm_H(sl.dv))
        for graph, uu, yy in ((model.beta, u.bulk, xi.bulk), (model.beta_gamma, u.surf, xi.surf)):
            dd = graph.graph_distance(uu, yy)
            bound = eps * graph.resolvent_scale * np.abs(yy) + 1e-8
            excess = max(excess, float(np.max(dd - bound)))
            dist = max(dist, float(dd.max()))
    return WeakFormReport(w1, w2, visc, excess if math.isfinite(excess) else 0.0, dist, mass)


def replay_deviation(prob: PeriodicProblem, sol: PeriodicSolution) -> float:
    """Max H0 distance between the stored period and a second period started at v(T)."""
    ops = prob.model.ops
    end = sol.trajectory[-1].v
    _, second = integrate_period(prob, sol.eps, end, t0=prob.period)
    return max(ops.norm_H(a.v - b.v) for a, b in zip(sol.trajectory, second))
