import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import interval_matrices
from periodic_ch.domain import CoupledField, disc_polar_2d, interval_1d
from periodic_ch.errors import ConsistencyError, PreconditionError
from periodic_ch.spaces import SpaceOps

OPS = {
    "interval16": SpaceOps(interval_1d(16)),
    "interval8_k": SpaceOps(interval_1d(8, 0.5, 3.0)),
    "disc8x16": SpaceOps(disc_polar_2d(8, 16)),
}
seeds = st.integers(0, 2**32 - 1)


def _pair(ops, rng):
    d = ops.dom
    return CoupledField(rng.normal(size=d.n_bulk), rng.normal(size=d.n_surf))


def _v_field(ops, rng, mean_zero=True):
    z = ops.dom.lift(rng.normal(size=ops.dom.n_bulk))
    return ops.project(z) if mean_zero else z


def test_mean_examples():
    ops = SpaceOps(interval_1d(8))
    assert ops.mean(ops.dom.constant(2.5)) == pytest.approx(2.5, abs=1e-15)
    assert ops.mean(ops.dom.zeros()) == 0.0
    z = CoupledField(np.zeros(9), np.array([3.0, 3.0]))
    assert ops.mean(z) == pytest.approx(2.0, abs=1e-15)


def test_bilinear_form_example():
    ops = SpaceOps(interval_1d(8))
    z = ops.dom.from_function(lambda x, y: x - 0.5)
    assert ops.bilinear_a(z, z) == pytest.approx(1.0, abs=1e-13)
    assert ops.bilinear_a(ops.dom.constant(1.0), z) == pytest.approx(0.0, abs=1e-13)


@settings(max_examples=50, deadline=None)
@given(name=st.sampled_from(sorted(OPS)), seed=seeds)
def test_projection(name, seed):
    ops = OPS[name]
    rng = np.random.default_rng(seed)
    z = _pair(ops, rng)
    pz = ops.project(z)
    assert abs(ops.mean(pz)) <= 1e-14
    assert ops.project(pz).allclose(pz, atol=1e-14)
    assert ops.project(ops.dom.constant(4.2)).allclose(ops.dom.zeros(), atol=1e-14)
    # |P z|_H <= |z|_H: P is the H-orthogonal projection onto mean-zero pairs
    assert ops.norm_H(pz) <= ops.norm_H(z) + 1e-13


def test_Finv_against_dense_constrained_solve():
    ops = OPS["interval16"]
    dom = ops.dom
    g = ops.project(dom.from_function(lambda x, y: np.cos(np.pi * x)))
    w = ops.duality_Finv(g)
    _, mass, S = interval_matrices(16)
    n = 17
    K = np.zeros((n + 1, n + 1))
    K[:n, :n] = S
    K[:n, n] = K[n, :n] = mass
    rhs = np.concatenate([mass * g.bulk, [0.0]])
    ref = np.linalg.solve(K, rhs)[:n]
    assert np.allclose(w.bulk, ref, atol=1e-12)
    assert abs(ops.mean(w)) <= 1e-14


@settings(max_examples=30, deadline=None)
@given(name=st.sampled_from(sorted(OPS)), seed=seeds)
def test_F_and_Finv_are_inverse(name, seed):
    ops = OPS[name]
    rng = np.random.default_rng(seed)
    z = _v_field(ops, rng)
    back = ops.duality_Finv(ops.duality_F(z))
    assert np.max(np.abs(back.bulk - z.bulk)) <= 1e-10
    g = ops.project(_pair(ops, rng))
    w = ops.duality_Finv(g)
    # a(w, z) = (g, z)_H for every V-field z
    for _ in range(3):
        t = _v_field(ops, rng, mean_zero=False)
        assert ops.bilinear_a(w, t) == pytest.approx(ops.inner_H(g, t), abs=1e-10)


def test_Finv_zero_and_preconditions():
    ops = OPS["interval16"]
    assert ops.duality_Finv(ops.dom.zeros()).allclose(ops.dom.zeros())
    assert ops.norm_V0(ops.dom.zeros()) == 0.0
    assert ops.norm_V0_star(ops.dom.zeros()) == 0.0
    with pytest.raises(PreconditionError):
        ops.duality_Finv(ops.dom.constant(1.0))
    with pytest.raises(PreconditionError):
        ops.duality_F(ops.dom.constant(1.0))
    with pytest.raises(ConsistencyError):
        ops.bilinear_a(CoupledField(np.zeros(17), np.ones(2)), ops.dom.zeros())


@settings(max_examples=50, deadline=None)
@given(name=st.sampled_from(sorted(OPS)), seed=seeds, a=st.floats(-5, 5))
def test_norms_homogeneous_and_dual(name, seed, a):
    ops = OPS[name]
    rng = np.random.default_rng(seed)
    z = _v_field(ops, rng)
    g = ops.project(_pair(ops, rng))
    assert ops.norm_V0(z * a) == pytest.approx(abs(a) * ops.norm_V0(z), rel=1e-12, abs=1e-12)
    assert ops.norm_V0_star(g * a) == pytest.approx(abs(a) * ops.norm_V0_star(g), rel=1e-12, abs=1e-12)
    assert ops.inner_H(g, z) <= ops.norm_V0_star(g) * ops.norm_V0(z) + 1e-10
    assert ops.inner_V0_star(g, g) > 0.0


@pytest.mark.parametrize("name", sorted(OPS))
def test_poincare_wirtinger(name):
    ops = OPS[name]
    rng = np.random.default_rng(7)
    cP = ops.poincare_constant()
    for _ in range(1000):
        z = _v_field(ops, rng)
        assert ops.norm_V(z) ** 2 <= cP * ops.norm_V0(z) ** 2 * (1 + 1e-12)


def test_poincare_constant_examples():
    c16 = SpaceOps(interval_1d(16)).poincare_constant()
    c32 = SpaceOps(interval_1d(32)).poincare_constant()
    assert c32 <= c16 * 1.05
    assert c16 > 1.0
    # attained by the extremal eigenvector
    ops = OPS["interval16"]
    Q = ops.mean_zero_basis()
    assert np.allclose(ops.c @ Q, 0.0, atol=1e-13)
    assert np.allclose(Q.T @ Q, np.eye(Q.shape[1]), atol=1e-13)
    assert ops.poincare_constant() is not None and ops.spectral_gap() > 0.0
