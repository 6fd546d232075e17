"""Monitored a-priori quantities along a run and their boundedness across eps.

Each row of an :class:`EstimateLog` holds the integrands of the uniform
estimates at one time level. ``totals`` integrates them over the period
(rectangle rule on the implicit time levels) into the labelled bounds
``es1`` ... ``es9``; ``assert_bounded`` compares those totals across runs at
decreasing eps.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domain import CoupledField

# per-step quantities, in column order
FIELDS = (
    "v_V0_sq",
    "eps_dv_H_sq",
    "dv_V0star_sq",
    "beta_hat_bulk",
    "beta_hat_surf",
    "beta_L1_bulk",
    "beta_L1_surf",
    "beta_H_sq_bulk",
    "beta_H_sq_surf",
    "mu_V_sq",
    "lap_v_H_sq",
    "dnu_v_HG_sq",
    "lapG_v_HG_sq",
)

EXTRA_FIELDS = (
    "beta_bulk_on_surf_sq",
    "pi_hat_bulk",
    "pi_hat_surf",
    "v_V_sq",
    "mean_beta_sq",
    "phi_eps",
    "mass",
    "energy_margin",
    "newton_iters",
    "residual",
)

# totals that must not blow up as eps decreases
UNIFORM = ("es1", "es2", "es5", "es6", "es7", "es8")
MONITORED = ("es3", "es4", "es9")
EPS_DEPENDENT = ("pi_bound_T_over_eps", "sup_phi_eps")


def _quad(weights, values) -> float:
    return float(np.dot(weights, values))


def record(model, t: float, v: CoupledField, dv: CoupledField, mu: CoupledField, eps: float,
           m0: float, phi_eps: float = math.nan, energy_margin: float = math.nan,
           newton_iters: int = 0, residual: float = 0.0) -> dict:
    """All monitored quantities at one time level."""
    dom, ops = model.dom, model.ops
    wb, ws = dom.bulk_weights, dom.surf_weights
    u = v + m0
    xb = model.beta.yosida(eps, u.bulk)
    xs = model.beta_gamma.yosida(eps, u.surf)
    xb_on_s = model.beta.yosida(eps, u.surf)
    hat_b, hat_s = model.envelope(eps, u)
    lap = dom.laplacian(v.bulk)
    dnu = dom.normal_derivative(v.bulk)
    lapg = dom.laplace_beltrami(v.surf)
    mean_beta = ops.mean(CoupledField(xb, xs))
    row = {
        "t": float(t),
        "v_V0_sq": ops.bilinear_a(v, v),
        "eps_dv_H_sq": eps * ops.norm_H(dv) ** 2,
        "dv_V0star_sq": ops.norm_V0_star(dv) ** 2,
        "beta_hat_bulk": hat_b,
        "beta_hat_surf": hat_s,
        "beta_L1_bulk": _quad(wb, np.abs(xb)),
        "beta_L1_surf": _quad(ws, np.abs(xs)),
        "beta_H_sq_bulk": _quad(wb, xb**2),
        "beta_H_sq_surf": _quad(ws, xs**2),
        "mu_V_sq": ops.norm_V(mu) ** 2,
        "lap_v_H_sq": _quad(wb, lap**2),
        "dnu_v_HG_sq": _quad(ws, dnu**2),
        "lapG_v_HG_sq": _quad(ws, lapg**2),
        "beta_bulk_on_surf_sq": _quad(ws, xb_on_s**2),
        "pi_hat_bulk": _quad(wb, model.pi_hat(u.bulk)),
        "pi_hat_surf": _quad(ws, model.pi_hat_gamma(u.surf)),
        "v_V_sq": ops.norm_V(v) ** 2,
        "mean_beta_sq": mean_beta**2,
        "phi_eps": float(phi_eps),
        "mass": ops.mean(u),
        "energy_margin": float(energy_margin),
        "newton_iters": int(newton_iters),
        "residual": float(residual),
    }
    return row


def consistency_slacks(row: dict, vol_bulk: float, vol_surf: float) -> dict:
    """Internal inequalities that must hold at every step (nonnegative slack).

    ``l1_bulk``/``l1_surf``: discrete Cauchy-Schwarz between L1 and L2 norms.
    ``mean_beta``: |m(xi)|^2 <= 2 (|xi|_L1(Omega)^2 + |xi_G|_L1(Gamma)^2) / (|Omega|+|Gamma|)^2.
    """
    tot = vol_bulk + vol_surf
    return {
        "l1_bulk": math.sqrt(vol_bulk * row["beta_H_sq_bulk"]) - row["beta_L1_bulk"],
        "l1_surf": math.sqrt(vol_surf * row["beta_H_sq_surf"]) - row["beta_L1_surf"],
        "mean_beta": 2.0 * (row["beta_L1_bulk"] ** 2 + row["beta_L1_surf"] ** 2) / tot**2 - row["mean_beta_sq"],
    }


@dataclass
class EstimateLog:
    """Rows of monitored quantities for one run at fixed eps."""

    eps: float
    dt: float
    rho: float = 1.0
    kappa1: float = 1.0
    pi_bound: float = math.nan
    period: float = math.nan
    rows: list = field(default_factory=list)

    def append(self, row: dict):
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def totals(self) -> dict:
        """Time-integrated bounds es1..es9 and the eps-dependent quantities."""
        if not self.rows:
            raise ValueError("empty log")
        dt = self.dt

        def integral(*names, weights=None):
            weights = weights or [1.0] * len(names)
            return float(dt * sum(w * self.column(n).sum() for n, w in zip(names, weights)))

        sup_es3 = float(np.max(0.5 * self.column("v_V0_sq") + self.column("pi_hat_bulk") + self.column("pi_hat_surf")))
        out = {
            "es1": integral("v_V0_sq", "beta_hat_bulk", "beta_hat_surf", weights=[0.5, 1.0, 1.0]),
            "es2": integral("eps_dv_H_sq", "dv_V0star_sq", weights=[1.0, 0.5]),
            "es3": sup_es3,
            "es4": float(dt * np.sum(self.column("beta_L1_bulk") ** 2 + self.column("beta_L1_surf") ** 2)),
            "es5": integral("mu_V_sq"),
            "es6": integral("beta_H_sq_bulk", "beta_bulk_on_surf_sq", weights=[0.5, 1.0 / (4 * self.rho)]),
            "es7": integral("lap_v_H_sq", "dnu_v_HG_sq", weights=[self.kappa1, 1.0]),
            "es8": integral("beta_H_sq_surf"),
            "es9": integral("v_V_sq", "lap_v_H_sq", "lapG_v_HG_sq"),
            "pi_bound_T_over_eps": self.pi_bound * self.period / self.eps,
            "sup_phi_eps": float(np.max(self.column("phi_eps"))),
        }
        return out

    def to_csv(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        cols = ("t",) + FIELDS + EXTRA_FIELDS
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for r in self.rows:
                w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in cols])

    def write_summary(self, path, extra: dict | None = None):
        data = {"eps": self.eps, "dt": self.dt, "totals": self.totals()}
        if extra:
            data.update(extra)
        Path(path).write_text(json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n")


def log_from_solution(prob, sol) -> EstimateLog:
    """Estimate log over the stored period of a periodic solution."""
    model = prob.model
    if model.prototype:
        # no global bound without a cut-off: use the largest value along the orbit
        bound = max(model.pi_bound(sl.v + prob.m0) for sl in sol.trajectory)
    else:
        bound = model.pi_bound()
    log = EstimateLog(
        eps=sol.eps, dt=prob.dt, rho=model.rho, kappa1=model.dom.kappa1,
        pi_bound=bound, period=prob.period,
    )
    for sl in sol.trajectory[1:]:
        log.append(record(
            model, sl.t, sl.v, sl.dv, sl.mu, sol.eps, prob.m0, phi_eps=sl.phi_eps,
            energy_margin=sl.energy_margin, newton_iters=sl.newton_iters, residual=sl.residual,
        ))
    return log


@dataclass
class BoundednessReport:
    ok: bool
    growth: dict
    consecutive: dict
    failures: list
    monitored: dict
    eps_dependent: dict


def assert_bounded(logs, factor: float = 2.0, floor: float = 1e-14) -> BoundednessReport:
    """Check that the eps-uniform totals grow by at most ``factor`` as eps decreases.

    ``logs`` may be given in any order; they are sorted by decreasing eps.
    Growth is max over the schedule divided by the value at the largest eps;
    consecutive ratios are reported as well and must also stay below ``factor``.
    Eps-dependent quantities are listed separately and never fail.
    """
    logs = sorted(logs, key=lambda lg: -lg.eps)
    if len(logs) < 2 or len({lg.eps for lg in logs}) < len(logs):
        raise ValueError("need at least two runs at distinct eps")
    totals = [lg.totals() for lg in logs]
    growth, consecutive, failures = {}, {}, []
    for key in UNIFORM:
        vals = np.array([t[key] for t in totals])
        g = float((vals.max() + floor) / (vals[0] + floor))
        c = [float((b + floor) / (a + floor)) for a, b in zip(vals, vals[1:])]
        growth[key] = g
        consecutive[key] = c
        if g > factor or max(c) > factor:
            failures.append(key)
    monitored = {k: [t[k] for t in totals] for k in MONITORED}
    eps_dep = {k: [t[k] for t in totals] for k in EPS_DEPENDENT}
    return BoundednessReport(not failures, growth, consecutive, failures, monitored, eps_dep)
