"""Run configuration: YAML parsing, validation and problem assembly.

Validation failures are collected, not raised one at a time, and each one is
prefixed with the label of the standing assumption it violates:

(A1) periodic forcing in V, (A2) Lipschitz perturbations, (A3) convex
potentials vanishing at 0, (A4) compatibility of the two graphs, (A5) bounded
graph domains (waived in prototype mode); ``(m0)`` marks an initial mean that
is not interior to the boundary graph's domain.
"""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import yaml

from .domain import build_domain
from .errors import ConfigError
from .evolution import Model
from .graphs import CompatibilityWitness, check_compatibility, make_graph
from .periodic import Forcing, PeriodicProblem
from .perturbations import make_perturbation

N_COMPAT_SAMPLES = 10_000

PIPELINES = ("periodic", "continuation")


@dataclass
class RunConfig:
    domain: dict
    potential: dict
    perturbation: dict
    forcing: dict
    m0: float = 0.0
    period: float = 1.0
    n_steps_per_period: int = 100
    eps_schedule: list = field(default_factory=lambda: [0.1])
    tolerances: dict = field(default_factory=dict)
    pipeline: str = "periodic"
    output_dir: str = "out"
    seed: int = 0
    name: str = "run"

    def to_dict(self) -> dict:
        return copy.deepcopy(asdict(self))

    @property
    def prototype(self) -> bool:
        return bool(self.potential.get("prototype", False))


_TOL_DEFAULTS = {
    "periodicity_tol": 1e-10,
    "max_picard_iters": 100,
    "relaxation": 1.0,
    "anderson": 0,
    "newton_tol": 1e-11,
}


def _num(x, kind=float):
    # YAML 1.1 reads "1e-10" as a string
    if isinstance(x, bool):
        raise TypeError("expected a number")
    return kind(x) if kind is int else float(x)


def _normalize(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    required = ("domain", "potential", "forcing")
    missing = [k for k in required if k not in raw]
    if missing:
        raise ConfigError([f"missing section {k!r}" for k in missing])
    known = set(RunConfig.__dataclass_fields__)
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError([f"unknown key {k!r}" for k in unknown])
    try:
        dom = dict(raw["domain"])
        dom["sizes"] = [int(s) for s in np.atleast_1d(dom.get("sizes", []))]
        dom["kappa1"] = _num(dom.get("kappa1", 1.0))
        dom["kappa2"] = _num(dom.get("kappa2", 1.0))
        pot = copy.deepcopy(dict(raw["potential"]))
        pot["prototype"] = bool(pot.get("prototype", False))
        for key in ("beta", "beta_gamma"):
            pot[key] = {k: (v if k == "kind" else _num(v)) for k, v in dict(pot[key]).items()}
        wit = dict(pot.get("witness", {}))
        pot["witness"] = {"rho": _num(wit.get("rho", 1.0)), "c0": _num(wit.get("c0", 0.0))}
        pert = copy.deepcopy(dict(raw.get("perturbation", {"pi": {"kind": "zero"}})))
        for key in ("pi", "pi_gamma"):
            if key in pert:
                pert[key] = {k: (v if k == "kind" else _num(v)) for k, v in dict(pert[key]).items()}
        if "pi_gamma" not in pert:
            pert["pi_gamma"] = dict(pert["pi"])
        forc = copy.deepcopy(dict(raw["forcing"]))
        for k in ("amplitude", "phase"):
            if k in forc:
                forc[k] = _num(forc[k])
        if "samples" in forc:
            forc["samples"] = [_num(s) for s in forc["samples"]]
        tol = dict(_TOL_DEFAULTS)
        for k, v in dict(raw.get("tolerances", {})).items():
            if k not in _TOL_DEFAULTS:
                raise ConfigError(f"unknown tolerance {k!r}")
            tol[k] = _num(v, int) if k in ("max_picard_iters", "anderson") else _num(v)
        cfg = RunConfig(
            domain=dom,
            potential=pot,
            perturbation=pert,
            forcing=forc,
            m0=_num(raw.get("m0", 0.0)),
            period=_num(raw.get("period", 1.0)),
            n_steps_per_period=_num(raw.get("n_steps_per_period", 100), int),
            eps_schedule=[_num(e) for e in np.atleast_1d(raw.get("eps_schedule", [0.1]))],
            tolerances=tol,
            pipeline=str(raw.get("pipeline", "periodic")),
            output_dir=str(raw.get("output_dir", "out")),
            seed=_num(raw.get("seed", 0), int),
            name=str(raw.get("name", "run")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed config: {exc}") from exc
    return cfg


def validate(cfg: RunConfig) -> list[str]:
    """All violated assumptions, empty when the config is usable."""
    out = []
    try:
        dom = build_domain(cfg.domain.get("kind"), cfg.domain["sizes"], cfg.domain["kappa1"], cfg.domain["kappa2"])
    except (ConfigError, ValueError) as exc:
        out.append(f"(domain) {exc}")
        dom = None

    pot = cfg.potential
    try:
        beta = make_graph(**pot["beta"])
        beta_g = make_graph(**pot["beta_gamma"])
    except (ValueError, TypeError) as exc:
        return out + [f"(A3) {exc}"]
    for name, g in (("beta", beta), ("beta_gamma", beta_g)):
        if not (g.in_domain(0.0) and g.primitive(0.0) == 0.0):
            out.append(f"(A3) {name}: the primitive must be finite and vanish at 0")
    if not cfg.prototype:
        for name, g in (("beta", beta), ("beta_gamma", beta_g)):
            if not g.bounded:
                out.append(f"(A5) {name} has an unbounded domain; enable prototype mode for the cubic potential")

    wit = pot["witness"]
    if not (wit["rho"] > 0 and wit["c0"] >= 0):
        out.append("(A4) witness needs rho > 0 and c0 >= 0")
    else:
        lo = beta_g.domain_lo if math.isfinite(beta_g.domain_lo) else -3.0
        hi = beta_g.domain_hi if math.isfinite(beta_g.domain_hi) else 3.0
        rng = np.random.default_rng(cfg.seed)
        samples = np.concatenate([
            rng.uniform(lo - 2.0, hi + 2.0, N_COMPAT_SAMPLES // 2),
            np.linspace(lo, hi, N_COMPAT_SAMPLES // 2 + 2)[1:-1],
        ])
        report = check_compatibility(beta, beta_g, CompatibilityWitness(wit["rho"], wit["c0"]), samples)
        if not report.holds:
            out.append(f"(A4) compatibility fails (worst margin {report.worst_margin:.3e}, "
                       f"{len(report.failures)} failing samples)")

    for key in ("pi", "pi_gamma"):
        try:
            p = make_perturbation(cfg.perturbation[key])
            if not math.isfinite(p.lipschitz_const):
                out.append(f"(A2) {key} is not Lipschitz")
        except ValueError as exc:
            out.append(f"(A2) {key}: {exc}")

    if not beta_g.in_interior(cfg.m0):
        out.append(f"(m0) m0 = {cfg.m0} must lie in the interior of D(beta_gamma)")

    f = cfg.forcing
    if f.get("kind") not in ("zero", "sinusoid", "tabulated"):
        out.append(f"(A1) unknown forcing kind {f.get('kind')!r}")
    elif f["kind"] == "tabulated" and (len(f.get("samples", [])) < 2 or not np.all(np.isfinite(f["samples"]))):
        out.append("(A1) tabulated forcing needs at least two finite samples")
    if f.get("kind") != "zero":
        try:
            if dom is not None:
                make_profile(dom, f.get("profile", {}))
        except ConfigError as exc:
            out.append(f"(A1) {exc}")

    if not cfg.period > 0:
        out.append("(A1) period must be positive")
    if cfg.n_steps_per_period < 1:
        out.append("(time) n_steps_per_period must be positive")
    eps = cfg.eps_schedule
    if not eps or any(not (0 < e <= 1) for e in eps):
        out.append("(eps) schedule entries must lie in (0, 1]")
    elif any(b >= a for a, b in zip(eps, eps[1:])):
        out.append("(eps) schedule must be strictly decreasing")
    tol = cfg.tolerances
    if not 0 < tol["relaxation"] <= 1:
        out.append("(tolerances) relaxation must lie in (0, 1]")
    if tol["max_picard_iters"] < 1 or tol["periodicity_tol"] <= 0 or tol["newton_tol"] <= 0:
        out.append("(tolerances) tolerances and iteration caps must be positive")
    if cfg.pipeline not in PIPELINES:
        out.append(f"(pipeline) unknown pipeline {cfg.pipeline!r}")

    if not out:
        # periodicity of the assembled forcing on the grid
        forcing = make_forcing(cfg, dom)
        if not forcing(0.0, dom).allclose(forcing(cfg.period, dom), atol=1e-12):
            out.append("(A1) forcing is not periodic within 1e-12")
    return out


def parse_config(text: str) -> RunConfig:
    """Parse and validate; raises ConfigError carrying every violation."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML: {exc}") from exc
    cfg = _normalize(raw)
    violations = validate(cfg)
    if violations:
        raise ConfigError(violations)
    return cfg


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def emit_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)


def make_profile(dom, spec: dict):
    """Spatial profile of the forcing, always a V-field (trace-consistent)."""
    kind = spec.get("kind", "cosine")
    if kind == "cosine":
        k = float(spec.get("wavenumber", 1.0))
        return dom.from_function(lambda x, y: np.cos(k * np.pi * x))
    if kind == "constant":
        return dom.constant(float(spec.get("value", 1.0)))
    if kind == "radial":
        p = float(spec.get("power", 2.0))
        return dom.from_function(lambda x, y: np.hypot(x, y) ** p)
    raise ConfigError(f"unknown profile kind {kind!r}")


def make_forcing(cfg: RunConfig, dom):
    f = cfg.forcing
    kind = f["kind"]
    if kind == "zero":
        return Forcing("zero", cfg.period, dom.zeros())
    return Forcing(
        kind, cfg.period, make_profile(dom, f.get("profile", {})),
        amplitude=f.get("amplitude", 1.0), phase=f.get("phase", 0.0), samples=f.get("samples"),
    )


def build_problem(cfg: RunConfig):
    """Assemble the PeriodicProblem described by a validated config."""
    d = cfg.domain
    dom = build_domain(d["kind"], d["sizes"], d["kappa1"], d["kappa2"])
    pot = cfg.potential
    model = Model(
        dom,
        make_graph(**pot["beta"]),
        make_graph(**pot["beta_gamma"]),
        make_perturbation(cfg.perturbation["pi"]),
        make_perturbation(cfg.perturbation["pi_gamma"]),
        rho=pot["witness"]["rho"],
        prototype=cfg.prototype,
    )
    tol = cfg.tolerances
    return PeriodicProblem(
        model=model,
        forcing=make_forcing(cfg, dom),
        m0=cfg.m0,
        n_steps=cfg.n_steps_per_period,
        eps_schedule=list(cfg.eps_schedule),
        periodicity_tol=tol["periodicity_tol"],
        max_picard_iters=tol["max_picard_iters"],
        relaxation=tol["relaxation"],
        anderson=tol["anderson"],
        newton_tol=tol["newton_tol"],
    )
