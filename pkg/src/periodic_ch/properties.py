"""Randomized property suite for graphs, compatibility pairings and space operators.

Every check returns plain numbers so callers can compare them against their
own tolerances; ``run_all`` applies the default ones.
"""

from __future__ import annotations

import math

import numpy as np

from .domain import CoupledDomain, CoupledField, disc_polar_2d, interval_1d
from .graphs import (
    CompatibilityWitness,
    Cubic,
    Indicator,
    IndicatorPlusCubic,
    Logarithmic,
    MonotoneGraph,
    check_compatibility,
)
from .spaces import SpaceOps

EPS_VALUES = (1.0, 0.1, 0.01)


def shipped_graphs() -> dict:
    """Graphs used by the shipped configs, including a rescaled boundary graph."""
    return {
        "logarithmic(0.6)": Logarithmic(alpha=0.6),
        "logarithmic(0.5)*2": Logarithmic(alpha=0.5).with_scale(2.0),
        "indicator[-1,1]": Indicator(lo=-1.0, hi=1.0),
        "indicator_plus_cubic[-1,1]": IndicatorPlusCubic(lo=-1.0, hi=1.0),
        "cubic": Cubic(),
    }


# (beta, beta_gamma, rho, c0, declared valid)
def shipped_pairings() -> list:
    return [
        ("log/log", Logarithmic(alpha=0.6), Logarithmic(alpha=0.6), 1.0, 0.0, True),
        ("log/log rho=2", Logarithmic(alpha=1.0), Logarithmic(alpha=0.5), 2.0, 0.0, True),
        ("ipc/indicator", IndicatorPlusCubic(), Indicator(), 1.0, 1.0, True),
        ("indicator/indicator", Indicator(), Indicator(), 1.0, 0.0, True),
        ("cubic/cubic", Cubic(), Cubic(), 1.0, 0.0, True),
        ("cubic/indicator", Cubic(), Indicator(), 1.0, 0.0, False),
        ("log/log rho=1", Logarithmic(alpha=1.0), Logarithmic(alpha=0.5), 1.0, 0.1, False),
    ]


def sample_range(g: MonotoneGraph) -> tuple[float, float]:
    lo = g.domain_lo if math.isfinite(g.domain_lo) else -3.0
    hi = g.domain_hi if math.isfinite(g.domain_hi) else 3.0
    return lo - 2.0, hi + 2.0


def sample_pairs(g: MonotoneGraph, rng, n: int):
    """Half widely separated pairs, half pairs at distances 1e-7 .. 1e-1."""
    a, b = sample_range(g)
    r = rng.uniform(a, b, n)
    s = rng.uniform(a, b, n)
    half = n // 2
    s[:half] = r[:half] + rng.choice([-1, 1], half) * 10.0 ** rng.uniform(-7, -1, half)
    return r, s


def yosida_suite(g: MonotoneGraph, eps: float, rng, n: int = 10_000) -> dict:
    """Worst-case violations (positive means violated) of the Yosida properties."""
    r, s = sample_pairs(g, rng, n)
    c = eps * g.resolvent_scale
    yr, ys = g.yosida(eps, r), g.yosida(eps, s)
    order = r <= s
    mono = np.where(order, yr - ys, ys - yr)
    lip = np.abs(yr - ys) - np.abs(r - s) / c
    dom = g.in_domain(r)
    env = g.moreau_yosida(eps, r)
    sandwich_hi = env[dom] - g.primitive(r[dom])
    return {
        "monotonicity": float(mono.max()),
        "lipschitz": float(lip.max()),
        "zero": abs(g.yosida(eps, 0.0)),
        "sandwich_lo": float(-env.min()),
        "sandwich_hi": float(sandwich_hi.max()) if sandwich_hi.size else -math.inf,
        "resolvent_residual": float(g.resolvent_residual(eps, r).max()),
    }


def envelope_monotone_in_eps(g: MonotoneGraph, rng, n: int = 2000) -> float:
    """max of env(eps2, r) - env(eps1, r) over eps1 < eps2; should be <= 0."""
    a, b = sample_range(g)
    r = rng.uniform(a, b, n)
    vals = [g.moreau_yosida(e, r) for e in sorted(EPS_VALUES)]
    return float(max((hi - lo).max() for lo, hi in zip(vals, vals[1:])))


def yosida_convergence(g: MonotoneGraph, points, eps_values=(1e-1, 1e-2, 1e-3)) -> np.ndarray:
    """|yosida(eps, r) - minimal_section(r)| along decreasing eps, one row per point."""
    pts = np.asarray(points, dtype=float)
    sec = g.minimal_section(pts)
    return np.column_stack([np.abs(g.yosida(e, pts) - sec) for e in eps_values])


def compatibility_suite(rng, n: int = 10_000) -> list:
    out = []
    for name, b, bg, rho, c0, valid in shipped_pairings():
        a, c = sample_range(bg)
        samples = np.concatenate([rng.uniform(a, c, n), [0.0]])
        rep = check_compatibility(b, bg, CompatibilityWitness(rho, c0), samples)
        out.append((name, valid, rep))
    return out


def space_suite(dom: CoupledDomain, rng, n_fields: int = 100, n_pw: int = 1000) -> dict:
    ops = SpaceOps(dom)
    nb, ns = dom.n_bulk, dom.n_surf

    worst_mean = worst_idem = 0.0
    for _ in range(n_fields):
        z = CoupledField(rng.normal(size=nb), rng.normal(size=ns))
        pz = ops.project(z)
        worst_mean = max(worst_mean, abs(ops.mean(pz)))
        ppz = ops.project(pz)
        worst_idem = max(worst_idem, float(np.max(np.abs(ppz.bulk - pz.bulk))), float(np.max(np.abs(ppz.surf - pz.surf))))

    worst_inv = 0.0
    for _ in range(n_fields):
        z = ops.project(dom.lift(rng.normal(size=nb)))
        back = ops.duality_Finv(ops.duality_F(z))
        worst_inv = max(worst_inv, float(np.max(np.abs(back.bulk - z.bulk))))
        g = ops.project(CoupledField(rng.normal(size=nb), rng.normal(size=ns)))
        w = ops.duality_Finv(g)
        fw = ops.duality_F(w)
        # F(F^{-1} g) agrees with g as a functional on V
        worst_inv = max(worst_inv, float(np.max(np.abs(ops.load(fw) - ops.load(g)))))

    cP = ops.poincare_constant()
    pw = -math.inf
    for _ in range(n_pw):
        z = ops.project(dom.lift(rng.normal(size=nb)))
        pw = max(pw, ops.norm_V(z) ** 2 - cP * ops.norm_V0(z) ** 2)

    ibp = 0.0
    for _ in range(n_fields):
        u = rng.normal(size=nb)
        z = rng.normal(size=nb)
        lhs = z @ (dom.bulk_weights * -dom.laplacian(u)) + dom.trace(z) @ (dom.surf_weights * dom.normal_derivative(u))
        rhs = z @ (dom.K_b @ u)
        ibp = max(ibp, abs(lhs - rhs) / max(1.0, abs(rhs)))
    return {
        "mean_of_projection": worst_mean,
        "projection_idempotence": worst_idem,
        "F_Finv_identity": worst_inv,
        "poincare_excess": pw,
        "poincare_constant": cP,
        "integration_by_parts": ibp,
    }


def run_all(rng, n: int = 10_000) -> list:
    """(name, ok, detail) for every property with the default tolerances."""
    results = []
    for gname, g in shipped_graphs().items():
        for eps in EPS_VALUES:
            m = yosida_suite(g, eps, rng, n)
            ok = (
                m["monotonicity"] <= 1e-12
                and m["lipschitz"] <= 1e-12
                and m["zero"] == 0.0
                and m["sandwich_lo"] <= 1e-12
                and m["sandwich_hi"] <= 1e-12
                and m["resolvent_residual"] <= 1e-10
            )
            results.append((f"yosida {gname} eps={eps}", ok, m))
        env = envelope_monotone_in_eps(g, rng)
        results.append((f"envelope monotone in eps {gname}", env <= 1e-12, env))
    for name, valid, rep in compatibility_suite(rng, n):
        results.append((f"compatibility {name}", rep.holds == valid, f"holds={rep.holds} declared={valid} margin={rep.worst_margin:.3e}"))
    for dom in (interval_1d(16), disc_polar_2d(8, 16)):
        m = space_suite(dom, rng)
        ok = (
            m["mean_of_projection"] <= 1e-14
            and m["projection_idempotence"] <= 1e-14
            and m["F_Finv_identity"] <= 1e-10
            and m["poincare_excess"] <= 1e-10
            and m["integration_by_parts"] <= 1e-13
        )
        results.append((f"spaces {dom.kind}{dom.sizes}", ok, m))
    return results
