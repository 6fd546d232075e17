"""Shipped configurations and cached pipeline runs shared between test modules."""

from __future__ import annotations

import dataclasses
import functools
import time
from importlib import resources

from periodic_ch.config import build_problem, load_config
from periodic_ch.periodic import epsilon_continuation, fixed_point_solve

CONTINUATION = ("interval_log", "interval_prototype")


def config_path(name: str):
    return resources.files("periodic_ch") / "configs" / f"{name}.yaml"


@functools.lru_cache(maxsize=None)
def config(name: str):
    return load_config(config_path(name))


@functools.lru_cache(maxsize=None)
def problem(name: str, n_steps: int | None = None):
    prob = build_problem(config(name))
    if n_steps is not None:
        prob = dataclasses.replace(prob, n_steps=n_steps)
    return prob


@functools.lru_cache(maxsize=None)
def periodic(name: str, eps: float):
    """Cold-start fixed-point solve and its wall time."""
    prob = problem(name)
    t0 = time.perf_counter()
    sol = fixed_point_solve(prob, eps)
    return sol, time.perf_counter() - t0


@functools.lru_cache(maxsize=None)
def continuation(name: str):
    prob = problem(name)
    return epsilon_continuation(prob, config(name).eps_schedule, compare_cold=True)
