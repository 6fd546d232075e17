"""Implicit Euler for the viscous regularized evolution.

One step solves, for the new state v and the chemical potential mu (both
V-fields, stored as bulk vectors),

    (delta, z)_H + a(mu, z) = 0
    (mu, z)_H = eps (delta, z)_H + a(v, z) + (xi - m(xi) + pi~(u) - f, z)_H

for all z in V, where delta = (v - v_old)/dt, u = v + m0 and xi is the Yosida
regularization of the pair of graphs at u. The first equation gives
delta = -M^{-1} S mu in closed form, so Newton runs on mu alone and every
iterate conserves mass exactly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from .domain import CoupledDomain, CoupledField
from .errors import ConfigError, NumericFailure, StepFailure
from .graphs import MonotoneGraph
from .perturbations import CutoffPerturbation, LipschitzPerturbation, primitive_of
from .spaces import SpaceOps

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-11
NEWTON_MAXITER = 50
# multiple of the unit roundoff bounding the evaluation error of the residual
ROUNDOFF_FACTOR = 64.0


class Model:
    """Domain, graphs and perturbations of one problem, with pointwise nonlinearities.

    Parameters
    ----------
    dom : CoupledDomain
    beta, beta_gamma : MonotoneGraph
        Bulk and boundary graphs. ``beta_gamma`` is rescaled by ``rho``.
    pi, pi_gamma : LipschitzPerturbation
        Uncut perturbations.
    rho : float
        Compatibility factor, multiplying eps in the boundary resolvent.
    prototype : bool
        Use the raw perturbations without cut-off (unbounded graph domains).
    """

    def __init__(self, dom: CoupledDomain, beta: MonotoneGraph, beta_gamma: MonotoneGraph,
                 pi: LipschitzPerturbation, pi_gamma: LipschitzPerturbation | None = None,
                 rho: float = 1.0, prototype: bool = False):
        self.dom = dom
        self.ops = SpaceOps(dom)
        self.rho = float(rho)
        self.beta = beta.with_scale(1.0)
        self.beta_gamma = beta_gamma.with_scale(self.rho)
        self.prototype = bool(prototype)
        pi_gamma = pi if pi_gamma is None else pi_gamma
        if self.prototype:
            self.pi, self.pi_gamma = pi, pi_gamma
        else:
            if not (self.beta.bounded and self.beta_gamma.bounded):
                raise ConfigError("cut-off perturbations need bounded graph domains")
            self.pi = CutoffPerturbation(pi, self.beta.domain_lo, self.beta.domain_hi)
            self.pi_gamma = CutoffPerturbation(pi_gamma, self.beta_gamma.domain_lo, self.beta_gamma.domain_hi)
        self.pi_hat = primitive_of(self.pi)
        self.pi_hat_gamma = primitive_of(self.pi_gamma)

    def xi(self, eps: float, u: CoupledField) -> CoupledField:
        """Yosida values (beta_eps(u), beta_{Gamma,eps}(u_Gamma))."""
        return CoupledField(self.beta.yosida(eps, u.bulk), self.beta_gamma.yosida(eps, u.surf))

    def xi_derivative(self, eps: float, u: CoupledField) -> CoupledField:
        return CoupledField(
            self.beta.yosida_derivative(eps, u.bulk), self.beta_gamma.yosida_derivative(eps, u.surf)
        )

    def pi_tilde(self, u: CoupledField) -> CoupledField:
        return CoupledField(self.pi.eval(u.bulk), self.pi_gamma.eval(u.surf))

    def pi_tilde_derivative(self, u: CoupledField) -> CoupledField:
        return CoupledField(self.pi.derivative(u.bulk), self.pi_gamma.derivative(u.surf))

    def envelope(self, eps: float, u: CoupledField) -> tuple[float, float]:
        """Bulk and boundary integrals of the Moreau-Yosida envelopes at u."""
        d = self.dom
        return (
            float(d.bulk_weights @ self.beta.moreau_yosida(eps, u.bulk)),
            float(d.surf_weights @ self.beta_gamma.moreau_yosida(eps, u.surf)),
        )

    def pi_bound(self, u: CoupledField | None = None) -> float:
        """The constant M bounding |pi~(u)|_H^2.

        In prototype mode no global bound exists and the value |P pi(u)|_H^2
        at the supplied state is returned instead.
        """
        d = self.dom
        if not self.prototype:
            return self.pi.sup_abs**2 * d.vol_bulk + self.pi_gamma.sup_abs**2 * d.vol_surf
        if u is None:
            return math.inf
        return self.ops.norm_H(self.ops.project(self.pi_tilde(u))) ** 2


@dataclass(frozen=True)
class SolverState:
    """Current mean-zero v with time, eps, dt and the mean m0 of u = v + m0."""

    v: CoupledField
    t: float
    eps: float
    dt: float
    m0: float
    dv: CoupledField | None = None
    mu: CoupledField | None = None

    def u(self) -> CoupledField:
        return self.v + self.m0


@dataclass
class StepReport:
    newton_iters: int
    residual_norm: float
    mu: CoupledField
    xi: CoupledField
    omega: float
    phi_eps: float
    dv: CoupledField = field(repr=False, default=None)


class Evolution:
    """Time stepper for one model.

    Parameters
    ----------
    model : Model
    newton_tol : float
        Tolerance on the H-norm of the algebraic residual.
    max_iter : int
        Newton iteration cap.
    """

    def __init__(self, model: Model, newton_tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAXITER):
        self.model = model
        self.dom = model.dom
        self.ops = model.ops
        self.newton_tol = float(newton_tol)
        self.max_iter = int(max_iter)
        self._S = self.ops.S.toarray()
        self._absS = np.abs(self._S)
        self._M = self.ops.M_V
        self._c = self.ops.c
        d = self.dom
        # scatter of pair weights onto bulk nodes
        self._Ts = d.T.T.tocsr()

    def initial_state(self, v0: CoupledField, eps: float, dt: float, m0: float, t: float = 0.0) -> SolverState:
        self.dom.check_trace(v0)
        return SolverState(v=v0, t=t, eps=float(eps), dt=float(dt), m0=float(m0))

    def _pair_to_bulk(self, pair: CoupledField) -> np.ndarray:
        """Bulk vector of (pair, E z)_H coefficients, i.e. E^T M pair."""
        return self.ops.load(pair)

    def _residual(self, mu, v_old, state, f):
        S, M = self._S, self._M
        eps, dt = state.eps, state.dt
        delta = -(S @ mu) / M
        v = v_old + dt * delta
        u = self.dom.lift(v) + state.m0
        xi = self.model.xi(eps, u)
        g = xi - self.ops.mean(xi) + self.model.pi_tilde(u) - f
        R = M * mu - eps * M * delta - S @ v - self._pair_to_bulk(g)
        return R, v, delta, u, xi

    def _norm(self, R) -> float:
        return float(np.sqrt(np.sum(R * R / self._M)))

    def _stop_tol(self, mu, v, u, xi, f, eps, dt) -> float:
        """newton_tol, raised to the roundoff floor of the residual on fine grids."""
        A = self._absS
        g = CoupledField(np.abs(xi.bulk) + np.abs(self.model.pi_tilde(u).bulk) + np.abs(f.bulk),
                         np.abs(xi.surf) + np.abs(self.model.pi_tilde(u).surf) + np.abs(f.surf))
        Amu = A @ np.abs(mu)
        # v = v_old - dt S mu / M carries the rounding of S mu into S v
        mag = self._M * np.abs(mu) + eps * Amu + A @ (np.abs(v) + dt * Amu / self._M) + self._pair_to_bulk(g)
        return max(self.newton_tol, ROUNDOFF_FACTOR * np.finfo(float).eps * self._norm(mag))

    def _jacobian(self, u, state):
        S, M, c = self._S, self._M, self._c
        model = self.model
        dxi = model.xi_derivative(state.eps, u)
        dpi = model.pi_tilde_derivative(u)
        dvec = self._pair_to_bulk(dxi + dpi)
        rvec = self._pair_to_bulk(dxi)
        inner = S + np.diag(dvec) - np.outer(c, rvec) / self.dom.vol_total
        return np.diag(M) + state.eps * S + state.dt * inner @ (S / M[:, None])

    def step(self, state: SolverState, f_slice: CoupledField, mu_guess: CoupledField | None = None):
        """Advance by one implicit Euler step with forcing ``f_slice`` at t + dt."""
        if not f_slice.is_finite():
            raise ValueError("forcing slice is not finite")
        v_old = state.v.bulk
        if mu_guess is not None:
            mu = mu_guess.bulk.copy()
        elif state.mu is not None:
            mu = state.mu.bulk.copy()
        else:
            mu = np.zeros(self.dom.n_bulk)

        try:
            R, v, delta, u, xi = self._residual(mu, v_old, state, f_slice)
            res = self._norm(R)
            tol = self._stop_tol(mu, v, u, xi, f_slice, state.eps, state.dt)
            it = 0
            while res > tol:
                if it >= self.max_iter:
                    raise StepFailure(res, state.t + state.dt, it)
                J = self._jacobian(u, state)
                try:
                    d = -sla.solve(J, R)
                except (sla.LinAlgError, ValueError) as exc:
                    raise StepFailure(res, state.t + state.dt, it) from exc
                alpha = 1.0
                for _ in range(30):
                    trial = self._residual(mu + alpha * d, v_old, state, f_slice)
                    res_trial = self._norm(trial[0])
                    if res_trial <= (1.0 - 1e-4 * alpha) * res or res_trial <= tol:
                        break
                    alpha *= 0.5
                else:
                    raise StepFailure(res, state.t + state.dt, it)
                mu = mu + alpha * d
                R, v, delta, u, xi = trial
                res = res_trial
                tol = self._stop_tol(mu, v, u, xi, f_slice, state.eps, state.dt)
                it += 1
        except NumericFailure as exc:
            if isinstance(exc, StepFailure):
                raise
            raise StepFailure(float("nan"), state.t + state.dt, None) from exc

        # remove roundoff drift of the mean
        v = v - (self._c @ v) / self.dom.vol_total
        v_new = self.dom.lift(v)
        dv = self.dom.lift(delta)
        mu_f = self.dom.lift(mu)
        new_state = replace(state, v=v_new, t=state.t + state.dt, dv=dv, mu=mu_f)
        omega = self.ops.mean(self.model.pi_tilde(new_state.u()) - f_slice)
        report = StepReport(
            newton_iters=it,
            residual_norm=res,
            mu=mu_f,
            xi=xi,
            omega=omega,
            phi_eps=self.energy_phi_eps(new_state),
            dv=dv,
        )
        return new_state, report

    def chemical_potential(self, state: SolverState, f_slice: CoupledField):
        """Reconstruct mu from v, its backward difference and the forcing.

        Returns the V-field mu and omega = m(pi~(u) - f); m(mu) equals omega.
        """
        if state.dv is None:
            raise ValueError("state has no backward difference; take a step first")
        model, ops = self.model, self.ops
        u = state.u()
        xi = model.xi(state.eps, u)
        g = xi - ops.mean(xi) + model.pi_tilde(u) - f_slice
        rhs = state.eps * self._M * state.dv.bulk + self._S @ state.v.bulk + self._pair_to_bulk(g)
        mu = self.dom.lift(rhs / self._M)
        omega = ops.mean(model.pi_tilde(u) - f_slice)
        return mu, omega

    def energy_phi_eps(self, state: SolverState) -> float:
        """1/2 a(v, v) plus the envelope integrals at u = v + m0."""
        v = state.v.bulk
        eb, es = self.model.envelope(state.eps, state.u())
        return 0.5 * float(v @ (self._S @ v)) + eb + es

    def check_energy_inequality(self, prev_state: SolverState, new_state: SolverState,
                                f_slice: CoupledField, report: StepReport | None = None) -> float:
        """rhs - lhs of the discrete energy inequality over the last step.

        lhs = eps |dv|_H^2 + |dv|_{V0*}^2 + 2 (phi_eps(v_new) - phi_eps(v_old)) / dt
        rhs = |f|_V^2 + M / eps
        """
        ops = self.ops
        dv = new_state.dv
        eps = new_state.eps
        phi_new = report.phi_eps if report is not None else self.energy_phi_eps(new_state)
        phi_old = self.energy_phi_eps(replace(prev_state, eps=eps))
        lhs = eps * ops.norm_H(dv) ** 2 + ops.norm_V0_star(dv) ** 2 + 2.0 * (phi_new - phi_old) / new_state.dt
        rhs = ops.norm_V(f_slice) ** 2 + self.model.pi_bound(new_state.u()) / eps
        return rhs - lhs

    def monotone_min_eig(self, state: SolverState) -> float:
        """Smallest eigenvalue, relative to (.,.)_H on mean-zero V-fields, of the
        linearization of eps*delta + F^{-1} delta + A v + P xi at ``state``.

        The viscous term bounds it below by eps/dt.
        """
        ops = self.ops
        Q = ops.mean_zero_basis()
        M = self._M
        MQ = M[:, None] * Q
        Finv = np.column_stack([ops.solve_Finv(col) for col in MQ.T])
        dxi = self._pair_to_bulk(self.model.xi_derivative(state.eps, state.u()))
        A = (
            (state.eps / state.dt) * Q.T @ MQ
            + MQ.T @ Finv / state.dt
            + Q.T @ (self._S @ Q)
            + Q.T @ (dxi[:, None] * Q)
        )
        A = 0.5 * (A + A.T)
        return float(sla.eigh(A, Q.T @ MQ, eigvals_only=True)[0])
