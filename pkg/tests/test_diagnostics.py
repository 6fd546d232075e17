import csv
import json
import math

import numpy as np
import pytest
import scipy.sparse as sp

import shipped
from periodic_ch import diagnostics
from periodic_ch.diagnostics import (
    EPS_DEPENDENT,
    FIELDS,
    UNIFORM,
    EstimateLog,
    assert_bounded,
    consistency_slacks,
    log_from_solution,
    record,
)
from periodic_ch.domain import CoupledDomain, CoupledField, interval_1d, read_snapshot, write_snapshot
from periodic_ch.evolution import Model
from periodic_ch.graphs import Logarithmic
from periodic_ch.periodic import Forcing, PeriodicProblem, fixed_point_solve
from periodic_ch.perturbations import linear

# the monitored quantities, one per estimate integrand
EXPECTED_FIELDS = {
    "v_V0_sq", "eps_dv_H_sq", "dv_V0star_sq", "beta_hat_bulk", "beta_hat_surf", "beta_L1_bulk",
    "beta_L1_surf", "beta_H_sq_bulk", "beta_H_sq_surf", "mu_V_sq", "lap_v_H_sq", "dnu_v_HG_sq",
    "lapG_v_HG_sq",
}


def _model(dom):
    return Model(dom, Logarithmic(alpha=0.6), Logarithmic(alpha=0.6), linear(0.9))


def _fields(dom, seed):
    rng = np.random.default_rng(seed)
    ops = _model(dom).ops

    def one(amp):
        return ops.project(dom.lift(amp * rng.normal(size=dom.n_bulk)))

    return one(0.4), one(2.0), dom.lift(rng.normal(size=dom.n_bulk))


def _small_run(eps=0.1, n_steps=20):
    dom = interval_1d(8)
    prob = PeriodicProblem(
        model=_model(dom),
        forcing=Forcing("sinusoid", 1.0, dom.from_function(lambda x, y: np.cos(np.pi * x)), amplitude=1.0),
        m0=0.1, n_steps=n_steps,
    )
    return prob, fixed_point_solve(prob, eps)


def test_field_coverage():
    assert set(FIELDS) == EXPECTED_FIELDS
    dom = interval_1d(8)
    v, dv, mu = _fields(dom, 0)
    row = record(_model(dom), 0.1, v, dv, mu, 0.1, 0.2)
    for name in FIELDS:
        assert math.isfinite(row[name]) and row[name] >= 0.0


def test_zero_trajectory_record():
    dom = interval_1d(8)
    model = _model(dom)
    z = dom.zeros()
    row = record(model, 0.0, z, z, z, 0.1, 0.3)
    env_b = dom.vol_bulk * model.beta.moreau_yosida(0.1, 0.3)
    env_s = dom.vol_surf * model.beta_gamma.moreau_yosida(0.1, 0.3)
    for name in FIELDS:
        if name == "beta_hat_bulk":
            assert row[name] == pytest.approx(env_b, rel=1e-14)
        elif name == "beta_hat_surf":
            assert row[name] == pytest.approx(env_s, rel=1e-14)
        elif name.startswith("beta_"):
            assert row[name] > 0.0  # constant nonzero xi at m0 = 0.3
        else:
            assert row[name] == 0.0
    assert env_b > 0.0


def _relabelled(dom, perm):
    """The same interval with bulk node k stored at position perm[k]."""
    n = dom.n_bulk
    P = sp.csr_matrix((np.ones(n), (perm, np.arange(n))), shape=(n, n))
    inv = np.empty(n, dtype=int)
    inv[perm] = np.arange(n)
    w = np.empty(n)
    w[perm] = dom.bulk_weights
    coords = np.empty_like(dom.bulk_coords)
    coords[perm] = dom.bulk_coords
    return CoupledDomain(
        dom.kind, dom.sizes, dom.kappa1, dom.kappa2, w, dom.surf_weights, P @ dom.K_b @ P.T, dom.K_s,
        perm[dom.trace_idx], dom.N @ P.T, coords, dom.surf_coords,
    )


def test_record_invariant_under_node_relabelling():
    dom = interval_1d(8)
    perm = np.random.default_rng(1).permutation(dom.n_bulk)
    other = _relabelled(dom, perm)
    v, dv, mu = _fields(dom, 2)

    def moved(z):
        b = np.empty_like(z.bulk)
        b[perm] = z.bulk
        return CoupledField(b, z.surf.copy())

    a = record(_model(dom), 0.1, v, dv, mu, 0.1, 0.2)
    b = record(_model(other), 0.1, moved(v), moved(dv), moved(mu), 0.1, 0.2)
    for name in FIELDS:
        assert b[name] == pytest.approx(a[name], rel=1e-12, abs=1e-12)


def test_mu_norm_recomputed_from_snapshot(tmp_path):
    prob, sol = _small_run()
    log = log_from_solution(prob, sol)
    last = sol.trajectory[-1]
    write_snapshot(tmp_path / "mu.csv", prob.dom, last.mu)
    mu = read_snapshot(tmp_path / "mu.csv")
    ops = prob.model.ops
    recomputed = float(mu.bulk @ (ops.gram_V @ mu.bulk))
    assert recomputed == pytest.approx(log.rows[-1]["mu_V_sq"], rel=1e-12, abs=1e-12)


def test_consistency_slacks_along_run():
    prob, sol = _small_run()
    log = log_from_solution(prob, sol)
    assert len(log.rows) == prob.n_steps
    for row in log.rows:
        slack = consistency_slacks(row, prob.dom.vol_bulk, prob.dom.vol_surf)
        assert all(v >= -1e-12 for v in slack.values())
        assert row["energy_margin"] >= 0.0
        assert abs(row["mass"] - prob.m0) <= 1e-12


def test_totals_and_files(tmp_path):
    prob, sol = _small_run()
    log = log_from_solution(prob, sol)
    tot = log.totals()
    assert tot["es5"] == pytest.approx(prob.dt * log.column("mu_V_sq").sum(), rel=1e-14)
    assert tot["es2"] == pytest.approx(prob.dt * (log.column("eps_dv_H_sq") + 0.5 * log.column("dv_V0star_sq")).sum())
    assert tot["pi_bound_T_over_eps"] == pytest.approx(prob.model.pi_bound() / 0.1)
    log.to_csv(tmp_path / "run.csv")
    with open(tmp_path / "run.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == prob.n_steps and set(FIELDS) <= set(rows[0])
    assert float(rows[3]["mu_V_sq"]) == log.rows[3]["mu_V_sq"]
    log.write_summary(tmp_path / "summary.json", {"name": "x"})
    data = json.loads((tmp_path / "summary.json").read_text())
    assert data["name"] == "x" and set(UNIFORM) <= set(data["totals"])
    with pytest.raises(ValueError):
        EstimateLog(eps=0.1, dt=0.1).totals()


def _fake_log(eps, scale):
    log = EstimateLog(eps=eps, dt=0.5, pi_bound=1.0, period=1.0)
    base = dict.fromkeys(FIELDS + diagnostics.EXTRA_FIELDS, 1.0)
    for _ in range(2):
        row = dict(base, t=0.0)
        row["mu_V_sq"] = scale
        log.append(row)
    return log


def test_assert_bounded_rules():
    same = assert_bounded([_fake_log(0.3, 1.0), _fake_log(0.1, 1.0)])
    assert same.ok and same.failures == [] and all(g == 1.0 for g in same.growth.values())
    assert set(same.eps_dependent) == set(EPS_DEPENDENT)
    # the M/eps quantity triples but is exempt
    assert same.eps_dependent["pi_bound_T_over_eps"][1] == pytest.approx(3 * same.eps_dependent["pi_bound_T_over_eps"][0])
    grown = assert_bounded([_fake_log(0.1, 5.0), _fake_log(0.3, 1.0)])
    assert not grown.ok and grown.failures == ["es5"]
    assert grown.consecutive["es5"] == [pytest.approx(5.0)]
    with pytest.raises(ValueError):
        assert_bounded([_fake_log(0.1, 1.0)])
    with pytest.raises(ValueError):
        assert_bounded([_fake_log(0.1, 1.0), _fake_log(0.1, 1.0)])


def test_shipped_mu_integral_ratio():
    prob = shipped.problem("interval_log")
    cont = shipped.continuation("interval_log")
    logs = {s.eps: log_from_solution(prob, s) for s in cont.solutions}
    vals = [logs[e].totals()["es5"] for e in (0.3, 0.1, 0.03)]
    assert vals[1] / vals[0] <= 2.0 and vals[2] / vals[1] <= 2.0


def test_prototype_log_has_finite_bound():
    prob = shipped.problem("interval_prototype")
    sol = shipped.continuation("interval_prototype").solutions[-1]
    tot = log_from_solution(prob, sol).totals()
    assert math.isfinite(tot["pi_bound_T_over_eps"]) and tot["pi_bound_T_over_eps"] > 0.0
