import numpy as np
import pytest

from periodic_ch import properties
from periodic_ch.domain import interval_1d
from periodic_ch.graphs import Indicator, Logarithmic


def test_run_all_passes():
    results = properties.run_all(np.random.default_rng(3), n=2000)
    failed = [(name, detail) for name, ok, detail in results if not ok]
    assert failed == []
    names = [name for name, _, _ in results]
    assert len(names) == len(set(names))


def test_compatibility_classification():
    reps = properties.compatibility_suite(np.random.default_rng(0), n=2000)
    for name, valid, rep in reps:
        assert rep.holds == valid, name
    assert any(not valid for _, valid, _ in reps)


def test_yosida_suite_detects_a_broken_graph():
    class Broken(Logarithmic):
        def yosida(self, eps, r):
            return -super().yosida(eps, r)

    m = properties.yosida_suite(Broken(alpha=0.6), 0.1, np.random.default_rng(0), 1000)
    assert m["monotonicity"] > 0.0


def test_yosida_convergence_to_minimal_section():
    g = Indicator()
    # interior points, where the minimal section is 0 and the Yosida map vanishes too
    assert np.all(properties.yosida_convergence(g, [-0.5, 0.0, 0.7]) == 0.0)
    err = properties.yosida_convergence(Logarithmic(alpha=0.6), [-0.9, 0.3, 0.99])
    assert np.all(np.diff(err, axis=1) <= 1e-15)


def test_space_suite_on_interval():
    m = properties.space_suite(interval_1d(8), np.random.default_rng(1), n_fields=20, n_pw=100)
    assert m["mean_of_projection"] <= 1e-14 and m["poincare_excess"] <= 1e-10
    assert m["poincare_constant"] > 1.0


@pytest.mark.parametrize("name", sorted(properties.shipped_graphs()))
def test_envelope_decreases_with_eps(name):
    g = properties.shipped_graphs()[name]
    assert properties.envelope_monotone_in_eps(g, np.random.default_rng(2)) <= 1e-12
